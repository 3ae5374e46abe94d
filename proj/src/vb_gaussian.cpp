#include "vbip/vb_gaussian.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "vb_internal.hpp"

namespace vbip {

double GammaFactor::log_mean() const {
    return boost::math::digamma(shape) - std::log(rate);
}

double gamma_kl(const GammaFactor& q, const GammaFactor& p) {
    return (q.shape - p.shape) * boost::math::digamma(q.shape) - std::lgamma(q.shape) +
           std::lgamma(p.shape) + p.shape * (std::log(q.rate) - std::log(p.rate)) +
           q.shape * (p.rate - q.rate) / q.rate;
}

namespace detail {

ProjectedStack project_stack(const ForwardStack& stack, const TruncatedPrior& prior) {
    prior.validate();
    if (stack.matrix.cols() != prior.grid().n_nodes)
        throw std::invalid_argument("forward stack and prior live on different grids");
    ProjectedStack ps;
    ps.G = stack.matrix * prior.eigsys->eigvecs;
    ps.GtG.noalias() = ps.G.transpose() * ps.G;
    ps.Hu0 = stack.matrix * prior.u0;
    return ps;
}

GaussianFactor factor_from_precision(const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& rhs, const TruncatedPrior& prior) {
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(precision, Eigen::EigenvaluesOnly);
        std::ostringstream os;
        os << "u-update: precision matrix not positive definite (smallest eigenvalue "
           << (es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                           : std::numeric_limits<double>::quiet_NaN())
           << ")";
        throw std::runtime_error(os.str());
    }
    const int m = static_cast<int>(precision.rows());
    GaussianFactor factor;
    factor.basis = prior.eigsys;
    factor.coef_mean = llt.solve(rhs);
    factor.coef_cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
    factor.coef_cov = 0.5 * (factor.coef_cov + factor.coef_cov.transpose()).eval();
    factor.mean = prior.u0 + prior.eigsys->eigvecs * factor.coef_mean;
    factor.basis_diag = factor.coef_cov.diagonal().head(prior.K);
    return factor;
}

GaussianFactor weighted_update(const ProjectedStack& ps, const Eigen::VectorXd& d,
                               const TruncatedPrior& prior, double lambda_star,
                               const Eigen::VectorXd& weights) {
    const Eigen::VectorXd prior_prec =
        prior_mode_variances(prior, lambda_star).cwiseInverse();
    Eigen::MatrixXd precision = ps.G.transpose() * weights.asDiagonal() * ps.G;
    precision.diagonal() += prior_prec;
    const Eigen::VectorXd rhs =
        ps.G.transpose() * weights.cwiseProduct(d - ps.Hu0);
    return factor_from_precision(precision, rhs, prior);
}

GaussianFactor scalar_update(const ProjectedStack& ps, const Eigen::VectorXd& d,
                             const TruncatedPrior& prior, double lambda_star,
                             double tau_star) {
    const Eigen::VectorXd prior_prec =
        prior_mode_variances(prior, lambda_star).cwiseInverse();
    Eigen::MatrixXd precision = tau_star * ps.GtG;
    precision.diagonal() += prior_prec;
    const Eigen::VectorXd rhs = tau_star * (ps.G.transpose() * (d - ps.Hu0));
    return factor_from_precision(precision, rhs, prior);
}

double relative_change(const Eigen::VectorXd& now, const Eigen::VectorXd& before) {
    const double scale = now.norm();
    const double diff = (now - before).norm();
    if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / scale;
}

double gaussian_kl_vs_reference(const GaussianFactor& factor) {
    const Eigen::VectorXd& alpha = factor.basis->eigvals;
    const int m = static_cast<int>(alpha.size());
    Eigen::LLT<Eigen::MatrixXd> llt(factor.coef_cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("elbo: factor covariance not positive definite");
    double logdet_cov = 0.0;
    for (int j = 0; j < m; ++j) logdet_cov += 2.0 * std::log(llt.matrixLLT()(j, j));
    double trace_and_mean = 0.0, logdet_prior = 0.0;
    for (int j = 0; j < m; ++j) {
        trace_and_mean +=
            (factor.coef_cov(j, j) + factor.coef_mean[j] * factor.coef_mean[j]) / alpha[j];
        logdet_prior += std::log(alpha[j]);
    }
    return 0.5 * (trace_and_mean - m + logdet_prior - logdet_cov);
}

} // namespace detail

GaussianFactor update_u(const ForwardStack& stack, const Eigen::VectorXd& d,
                        const TruncatedPrior& prior, double lambda_star, double tau_star) {
    if (!(lambda_star > 0.0) || !(tau_star > 0.0))
        throw std::invalid_argument("update_u: lambda and tau must be > 0");
    if (d.size() != stack.n_data())
        throw std::invalid_argument("update_u: data length does not match the stack");
    return detail::scalar_update(detail::project_stack(stack, prior), d, prior, lambda_star,
                                 tau_star);
}

Eigen::VectorXd pointwise_std(const GaussianFactor& factor) {
    const Eigen::MatrixXd& E = factor.basis->eigvecs;
    const Eigen::MatrixXd T = E * factor.coef_cov;
    Eigen::VectorXd var = T.cwiseProduct(E).rowwise().sum();
    return var.cwiseMax(0.0).cwiseSqrt();
}

double expect_prior_quadratic(const GaussianFactor& factor, const TruncatedPrior& prior) {
    double sum = 0.0;
    for (int j = 0; j < prior.K; ++j) {
        const double mj = factor.coef_mean[j];
        sum += (mj * mj + factor.coef_cov(j, j)) / prior.eigsys->eigvals[j];
    }
    return sum;
}

double expect_residual(const GaussianFactor& factor, const ForwardStack& stack,
                       const Eigen::VectorXd& d) {
    const Eigen::VectorXd mean_residual = stack.matrix * factor.mean - d;
    const Eigen::MatrixXd G = stack.matrix * factor.basis->eigvecs;
    const Eigen::MatrixXd T = G * factor.coef_cov;
    return mean_residual.squaredNorm() + T.cwiseProduct(G).sum();
}

GammaFactor update_lambda(const TruncatedPrior& prior, double alpha0, double beta0,
                          double e_quad) {
    if (!(alpha0 > 0.0) || !(beta0 > 0.0))
        throw std::invalid_argument("update_lambda: alpha0 and beta0 must be > 0");
    if (e_quad < 0.0) throw std::invalid_argument("update_lambda: negative expectation");
    return GammaFactor{alpha0 + 0.5 * prior.K, beta0 + 0.5 * e_quad};
}

GammaFactor update_tau(int n_data, double alpha1, double beta1, double e_res) {
    if (!(alpha1 > 0.0) || !(beta1 > 0.0))
        throw std::invalid_argument("update_tau: alpha1 and beta1 must be > 0");
    if (e_res < 0.0) throw std::invalid_argument("update_tau: negative expectation");
    return GammaFactor{alpha1 + 0.5 * n_data, beta1 + 0.5 * e_res};
}

double elbo(const VBState& state, const ForwardStack& stack, const Eigen::VectorXd& d,
            const TruncatedPrior& prior, const GaussianHyper& hyper) {
    const double e_res = expect_residual(state.u_factor, stack, d);
    const double e_quad = expect_prior_quadratic(state.u_factor, prior);
    const GammaFactor& lam = state.lambda_factor;
    const GammaFactor& tau = state.tau_factor;

    const double data_term = 0.5 * stack.n_data() * tau.log_mean() - 0.5 * tau.mean() * e_res;
    const double prior_term = 0.5 * prior.K * lam.log_mean() - 0.5 * (lam.mean() - 1.0) * e_quad;
    const double kl_u = detail::gaussian_kl_vs_reference(state.u_factor);
    const double kl_lambda = gamma_kl(lam, GammaFactor{hyper.alpha0, hyper.beta0});
    const double kl_tau = gamma_kl(tau, GammaFactor{hyper.alpha1, hyper.beta1});
    return data_term + prior_term - kl_u - kl_lambda - kl_tau;
}

CgResult cg_solve(const LinearMap& matvec, const Eigen::VectorXd& rhs, double tol,
                  int max_iter, const LinearMap& precond) {
    if (!(tol > 0.0)) throw std::invalid_argument("cg_solve: tol must be > 0");
    const double target = tol * rhs.norm();

    Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
    Eigen::VectorXd r = rhs;
    if (r.norm() <= target) return {x, 0, r.norm()};
    Eigen::VectorXd z = precond ? precond(r) : r;
    Eigen::VectorXd p = z;
    double rz = r.dot(z);

    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd Ap = matvec(p);
        const double alpha = rz / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        if (r.norm() <= target) return {x, it, r.norm()};
        z = precond ? precond(r) : r;
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    std::ostringstream os;
    os << "cg_solve: no convergence in " << max_iter << " iterations (residual " << r.norm()
       << ", target " << target << ")";
    throw std::runtime_error(os.str());
}

CgResult update_u_mean_cg(const ForwardStack& stack, const Eigen::VectorXd& d,
                          const TruncatedPrior& prior, double lambda_star, double tau_star,
                          double tol, int max_iter, bool precondition) {
    if (!(lambda_star > 0.0) || !(tau_star > 0.0))
        throw std::invalid_argument("update_u_mean_cg: lambda and tau must be > 0");
    const detail::ProjectedStack ps = detail::project_stack(stack, prior);
    const Eigen::VectorXd var = prior_mode_variances(prior, lambda_star);
    const Eigen::VectorXd prior_prec = var.cwiseInverse();
    const Eigen::VectorXd rhs = tau_star * (ps.G.transpose() * (d - ps.Hu0));

    const LinearMap matvec = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
        return tau_star * (ps.G.transpose() * (ps.G * c)) + prior_prec.cwiseProduct(c);
    };
    const LinearMap prior_precond = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
        return var.cwiseProduct(c);
    };
    CgResult result = cg_solve(matvec, rhs, tol, max_iter, precondition ? prior_precond : nullptr);
    result.x = prior.u0 + prior.eigsys->eigvecs * result.x;
    return result;
}

VBState run_vb_gaussian(const ForwardStack& stack, const Eigen::VectorXd& d,
                        const TruncatedPrior& prior, const GaussianHyper& hyper,
                        const VbOptions& options) {
    if (d.size() != stack.n_data())
        throw std::invalid_argument("run_vb_gaussian: data length does not match the stack");
    if (!(hyper.alpha0 > 0) || !(hyper.beta0 > 0) || !(hyper.alpha1 > 0) || !(hyper.beta1 > 0))
        throw std::invalid_argument("run_vb_gaussian: hyperparameters must be > 0");

    const detail::ProjectedStack ps = detail::project_stack(stack, prior);

    VBState state;
    state.lambda_factor = GammaFactor{hyper.alpha0, hyper.beta0};
    state.tau_factor = GammaFactor{hyper.alpha1, hyper.beta1};

    Eigen::VectorXd u_prev = prior.u0;
    double lambda_prev = state.lambda_factor.mean();
    double tau_prev = state.tau_factor.mean();
    bool first_sweep = true;

    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        const double lambda_star = state.lambda_factor.mean();
        const double tau_star = state.tau_factor.mean();

        state.u_factor = detail::scalar_update(ps, d, prior, lambda_star, tau_star);
        if (options.update_hyper) {
            state.lambda_factor = update_lambda(prior, hyper.alpha0, hyper.beta0,
                                                expect_prior_quadratic(state.u_factor, prior));
            state.tau_factor = update_tau(stack.n_data(), hyper.alpha1, hyper.beta1,
                                          expect_residual(state.u_factor, stack, d));
        }

        state.iterations = sweep;
        state.rel_changes.u = detail::relative_change(state.u_factor.mean, u_prev);
        state.rel_changes.lambda =
            first_sweep ? 0.0 : std::abs(lambda_star - lambda_prev) / lambda_star;
        state.rel_changes.tau = first_sweep ? 0.0 : std::abs(tau_star - tau_prev) / tau_star;
        state.elbo_trace.push_back(elbo(state, stack, d, prior, hyper));
        if (options.on_sweep) options.on_sweep(state);

        if (state.rel_changes.max() <= options.tol) {
            state.converged = true;
            return state;
        }
        u_prev = state.u_factor.mean;
        lambda_prev = lambda_star;
        tau_prev = tau_star;
        first_sweep = false;
    }
    state.converged = false;
    return state;
}

} // namespace vbip
