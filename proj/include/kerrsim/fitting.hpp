#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kerrsim/error.hpp"

namespace kerrsim {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> sigmas;
    Eigen::MatrixXd covariance;
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;

    double value(const std::string& name) const;
    double sigma(const std::string& name) const;
    std::size_t index(const std::string& name) const;
};

/// NotConverged, carrying the best parameters reached.
class NotConvergedError : public Error {
public:
    NotConvergedError(const std::string& message, FitResult best)
        : Error(ErrorCode::NotConverged, message), best_(std::move(best)) {}

    const FitResult& best() const noexcept { return best_; }

private:
    FitResult best_;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LeastSquaresOptions {
    double tolerance = 1e-10;  // relative, on parameters and on the sum of squares
    int max_evaluations = 4000;
};

/// Levenberg-Marquardt on `residual(x)`. Parameters are internally rescaled by
/// `scales` (typical magnitudes). Uncertainties come from (J^T J)^-1 scaled by
/// SSR / (m - p). Throws DegenerateData if J^T J is singular and
/// NotConvergedError when the evaluation budget runs out.
FitResult least_squares(const ResidualFn& residual, std::size_t n_residuals, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& scales, std::vector<std::string> names,
                        const LeastSquaresOptions& options = {});

}  // namespace kerrsim
