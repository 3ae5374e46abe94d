#ifndef VBIP_VB_INTERNAL_HPP
#define VBIP_VB_INTERNAL_HPP

#include <Eigen/Core>

#include "vbip/forward.hpp"
#include "vbip/prior.hpp"
#include "vbip/vb_gaussian.hpp"

namespace vbip::detail {

/// Forward stack projected onto the prior's mode basis: G = H E, cached
/// Gram matrix, and the response to the prior mean.
struct ProjectedStack {
    Eigen::MatrixXd G;   // N_d x n_modes
    Eigen::MatrixXd GtG; // n_modes x n_modes
    Eigen::VectorXd Hu0; // N_d
};

ProjectedStack project_stack(const ForwardStack& stack, const TruncatedPrior& prior);

GaussianFactor factor_from_precision(const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& rhs, const TruncatedPrior& prior);

GaussianFactor scalar_update(const ProjectedStack& ps, const Eigen::VectorXd& d,
                             const TruncatedPrior& prior, double lambda_star, double tau_star);

GaussianFactor weighted_update(const ProjectedStack& ps, const Eigen::VectorXd& d,
                               const TruncatedPrior& prior, double lambda_star,
                               const Eigen::VectorXd& weights);

double relative_change(const Eigen::VectorXd& now, const Eigen::VectorXd& before);

/// KL(factor || N(0, diag(alpha))) in the mode basis.
double gaussian_kl_vs_reference(const GaussianFactor& factor);

} // namespace vbip::detail

#endif
