#include "kerrsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/NonLinearOptimization>

namespace kerrsim {

namespace {

struct ScaledProblem {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const ResidualFn* residual;
    Eigen::VectorXd scales;
    Eigen::Index m;

    Eigen::Index inputs() const { return scales.size(); }
    Eigen::Index values() const { return m; }

    int operator()(const Eigen::VectorXd& z, Eigen::VectorXd& f) const {
        f = (*residual)(z.cwiseProduct(scales));
        if (f.size() != m) return -1;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!std::isfinite(f[i])) f[i] = 1e150;
        }
        return 0;
    }

    // Central differences in the scaled variables, where every parameter is O(1).
    int df(const Eigen::VectorXd& z, Eigen::MatrixXd& jac) const {
        static const double step = std::cbrt(std::numeric_limits<double>::epsilon());
        jac.resize(m, z.size());
        Eigen::VectorXd zp = z, fp(m), fm(m);
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            const double h = step * std::max(1.0, std::abs(z[j]));
            zp[j] = z[j] + h;
            if ((*this)(zp, fp) != 0) return -1;
            zp[j] = z[j] - h;
            if ((*this)(zp, fm) != 0) return -1;
            zp[j] = z[j];
            jac.col(j) = (fp - fm) / (2.0 * h);
        }
        return 0;
    }
};

}  // namespace

std::size_t FitResult::index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorCode::InvalidParameter, "no fit parameter '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

double FitResult::value(const std::string& name) const { return values[index(name)]; }
double FitResult::sigma(const std::string& name) const { return sigmas[index(name)]; }

FitResult least_squares(const ResidualFn& residual, std::size_t n_residuals, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& scales, std::vector<std::string> names,
                        const LeastSquaresOptions& options) {
    const Eigen::Index p = x0.size();
    const auto m = static_cast<Eigen::Index>(n_residuals);
    if (scales.size() != p || static_cast<Eigen::Index>(names.size()) != p) {
        throw Error(ErrorCode::InvalidParameter, "parameter, scale and name counts differ");
    }
    if (m < p) throw Error(ErrorCode::DegenerateData, "fewer residuals than parameters");
    if ((scales.array() <= 0.0).any()) throw Error(ErrorCode::InvalidParameter, "scales must be positive");

    ScaledProblem problem{&residual, scales, m};
    Eigen::LevenbergMarquardt<ScaledProblem> lm(problem);
    lm.parameters.ftol = options.tolerance * options.tolerance;
    lm.parameters.xtol = options.tolerance;
    lm.parameters.maxfev = options.max_evaluations;

    Eigen::VectorXd z = x0.cwiseQuotient(scales);
    const auto status = lm.minimize(z);

    FitResult r;
    r.names = std::move(names);
    r.iterations = static_cast<int>(lm.iter);
    Eigen::VectorXd x = z.cwiseProduct(scales);
    r.values.assign(x.data(), x.data() + p);
    Eigen::VectorXd f(m);
    problem(z, f);
    const double ssr = f.squaredNorm();
    r.residual_rms = std::sqrt(ssr / static_cast<double>(m));

    Eigen::MatrixXd jz(m, p);
    problem.df(z, jz);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jz);
    qr.setThreshold(1e-12);
    if (qr.rank() < p) {
        throw Error(ErrorCode::DegenerateData, "Jacobian is rank deficient: parameters are not identifiable");
    }
    const Eigen::MatrixXd jtj_inv = (jz.transpose() * jz).inverse();
    const double dof = m > p ? static_cast<double>(m - p) : 1.0;
    const Eigen::MatrixXd s = scales.asDiagonal();
    r.covariance = s * jtj_inv * s * (ssr / dof);
    r.sigmas.resize(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) r.sigmas[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, r.covariance(i, i)));

    using Status = Eigen::LevenbergMarquardtSpace::Status;
    r.converged = status != Status::TooManyFunctionEvaluation && status != Status::ImproperInputParameters &&
                  status != Status::UserAsked && status != Status::NotStarted && status != Status::Running;
    if (!r.converged) {
        throw NotConvergedError("least squares stopped with status " + std::to_string(static_cast<int>(status)),
                                r);
    }
    return r;
}

}  // namespace kerrsim
