#ifndef VBIP_VB_GAUSSIAN_HPP
#define VBIP_VB_GAUSSIAN_HPP

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "vbip/forward.hpp"
#include "vbip/prior.hpp"

namespace vbip {

/// Gamma(shape, rate) factor with closed-form moments.
struct GammaFactor {
    double shape = 1.0;
    double rate = 1.0;

    double mean() const { return shape / rate; }
    double log_mean() const; // E[log x] = digamma(shape) - log(rate)
};

/// KL(Gamma(a,b) || Gamma(c,d)).
double gamma_kl(const GammaFactor& q, const GammaFactor& p);

/// Gaussian posterior factor for u. The covariance is represented densely in
/// the basis of the prior's stored eigenvectors: coef_cov is the covariance of
/// the mode coefficients, `mean` the nodal field u0 + E * coef_mean.
struct GaussianFactor {
    std::shared_ptr<const EigenSystem> basis;
    Eigen::VectorXd mean;       // nodal, on the basis grid
    Eigen::VectorXd coef_mean;  // n_modes
    Eigen::MatrixXd coef_cov;   // n_modes x n_modes, symmetric positive semi-definite
    Eigen::VectorXd basis_diag; // <e_j, C e_j> for j = 1..K
};

/// Pointwise posterior standard deviation on the grid, sqrt(diag(E Sigma E^T)).
Eigen::VectorXd pointwise_std(const GaussianFactor& factor);

struct RelChanges {
    double u = 0.0;
    double lambda = 0.0;
    double tau = 0.0;
    double max() const { return std::max(u, std::max(lambda, tau)); }
};

struct VBState {
    GaussianFactor u_factor;
    GammaFactor lambda_factor;
    GammaFactor tau_factor;
    int iterations = 0;
    RelChanges rel_changes;
    std::vector<double> elbo_trace;
    bool converged = false;
};

/// Conjugate u-update: precision tau* H*H + C0(lambda*)^{-1}, computed in the
/// prior's mode basis.
GaussianFactor update_u(const ForwardStack& stack, const Eigen::VectorXd& d,
                        const TruncatedPrior& prior, double lambda_star, double tau_star);

/// E[ sum_{j<=K} (u_j - u0_j)^2 / alpha_j ] under the factor.
double expect_prior_quadratic(const GaussianFactor& factor, const TruncatedPrior& prior);

/// E ||Hu - d||^2 = ||H u* - d||^2 + Tr(H C H^T).
double expect_residual(const GaussianFactor& factor, const ForwardStack& stack,
                       const Eigen::VectorXd& d);

GammaFactor update_lambda(const TruncatedPrior& prior, double alpha0, double beta0,
                          double e_quad);

GammaFactor update_tau(int n_data, double alpha1, double beta1, double e_res);

struct GaussianHyper {
    double alpha0 = 1.0;
    double beta0 = 1e-1;
    double alpha1 = 1.0;
    double beta1 = 1e-5;
};

/// Evidence lower bound up to the unknown log-normalization of the posterior;
/// only differences between sweeps are meaningful.
double elbo(const VBState& state, const ForwardStack& stack, const Eigen::VectorXd& d,
            const TruncatedPrior& prior, const GaussianHyper& hyper);

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual = 0.0;
};

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Preconditioned conjugate gradients for SPD maps; stops at
/// ||A x - rhs|| <= tol * ||rhs||, throws on max_iter exceeded.
CgResult cg_solve(const LinearMap& matvec, const Eigen::VectorXd& rhs, double tol,
                  int max_iter, const LinearMap& precond = nullptr);

/// Matrix-free evaluation of the u-update mean via CG on the mode-basis normal
/// equations, optionally preconditioned by the prior covariance. Returns the
/// nodal mean.
CgResult update_u_mean_cg(const ForwardStack& stack, const Eigen::VectorXd& d,
                          const TruncatedPrior& prior, double lambda_star, double tau_star,
                          double tol, int max_iter, bool precondition);

struct VbOptions {
    double tol = 1e-4;
    int max_sweeps = 200;
    bool update_hyper = true; // false: lambda/tau stay at their initial means
    std::function<void(const VBState&)> on_sweep;
};

/// Coordinate ascent over (u, lambda, tau) starting from the prior means
/// lambda = alpha0/beta0, tau = alpha1/beta1, until
/// max(rel change of u, lambda, tau) <= tol or max_sweeps.
VBState run_vb_gaussian(const ForwardStack& stack, const Eigen::VectorXd& d,
                        const TruncatedPrior& prior, const GaussianHyper& hyper,
                        const VbOptions& options = {});

} // namespace vbip

#endif
