#ifndef VBIP_PRIOR_HPP
#define VBIP_PRIOR_HPP

#include <cstdint>
#include <memory>
#include <span>

#include <Eigen/Core>

#include "vbip/grid.hpp"

namespace vbip {

/// Leading eigenpairs of the prior covariance (Id - Laplacian_h)^{-p} on a grid.
///
/// Eigenvalues are strictly positive and non-increasing; eigenvector columns are
/// orthonormal under the grid inner product and vanish at the boundary nodes.
struct EigenSystem {
    Grid1D grid;
    int order_p = 1;
    Eigen::VectorXd eigvals;  // descending
    Eigen::MatrixXd eigvecs;  // n_nodes x n_modes

    int n_modes() const { return static_cast<int>(eigvals.size()); }

    /// Checks positivity/ordering/orthonormality; throws std::runtime_error on violation.
    void validate(double ortho_tol = 1e-10) const;
};

/// Eigen-decomposition of (Id - Laplacian_h)^{-p} with zero Dirichlet conditions,
/// Laplacian_h the 3-point finite-difference Laplacian on interior nodes.
EigenSystem build_eigensystem(const Grid1D& grid, int p, int n_modes);

struct IntrinsicDim {
    int K = 0;
    bool saturated = false;  // no stored eigenvalue fell below the threshold
};

/// Smallest k with eigval_k / eigval_1 < epsilon; saturates at n_modes.
IntrinsicDim select_intrinsic_dim(const EigenSystem& eigsys, double epsilon);

/// Prior N(u0, C0^K(lambda)): the first K modes carry variance alpha_j / lambda,
/// the stored tail keeps alpha_j.
struct TruncatedPrior {
    std::shared_ptr<const EigenSystem> eigsys;
    int K = 0;
    Eigen::VectorXd u0;
    bool saturated = false;

    int n_modes() const { return eigsys->n_modes(); }
    const Grid1D& grid() const { return eigsys->grid; }
    void validate() const;
};

/// Builds a TruncatedPrior with K chosen by select_intrinsic_dim.
/// An empty u0 means the zero vector.
TruncatedPrior make_truncated_prior(std::shared_ptr<const EigenSystem> eigsys, double epsilon,
                                    Eigen::VectorXd u0 = Eigen::VectorXd());

/// Coefficients <u, e_j> under the grid inner product, for all stored modes.
Eigen::VectorXd mode_coefficients(const TruncatedPrior& prior, const Eigen::VectorXd& u);

/// Per-mode prior variances alpha_j/lambda (j <= K) resp. alpha_j (j > K).
Eigen::VectorXd prior_mode_variances(const TruncatedPrior& prior, double lambda);

/// <u, C0^K(lambda)^{-1} u>: the squared Cameron-Martin norm of u, evaluated
/// over the stored modes.
double c0_lambda_inverse_quadratic(const Eigen::VectorXd& u, const TruncatedPrior& prior,
                                   double lambda);

/// Draw from N(u0, C0^K(lambda)); deterministic per seed.
Eigen::VectorXd sample_prior(const TruncatedPrior& prior, double lambda, std::uint64_t seed);

/// Same draw with the standard-normal variates supplied by the caller
/// (one per stored mode). Used by tests as a deterministic hook.
Eigen::VectorXd sample_prior_with(const TruncatedPrior& prior, double lambda,
                                  std::span<const double> xi);

} // namespace vbip

#endif
