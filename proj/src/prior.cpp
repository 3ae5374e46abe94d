#include "vbip/prior.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace vbip {

void EigenSystem::validate(double ortho_tol) const {
    const int m = n_modes();
    if (m == 0) throw std::runtime_error("EigenSystem: empty");
    if (eigvecs.rows() != grid.n_nodes || eigvecs.cols() != m)
        throw std::runtime_error("EigenSystem: eigvecs shape mismatch");
    for (int j = 0; j < m; ++j) {
        if (!(eigvals[j] > 0.0)) throw std::runtime_error("EigenSystem: non-positive eigenvalue");
        if (j > 0 && eigvals[j] > eigvals[j - 1])
            throw std::runtime_error("EigenSystem: eigenvalues not non-increasing");
    }
    const double h = grid.spacing();
    Eigen::MatrixXd gram = h * (eigvecs.transpose() * eigvecs);
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > ortho_tol)
        throw std::runtime_error("EigenSystem: eigenvectors not orthonormal under the grid inner product");
}

EigenSystem build_eigensystem(const Grid1D& grid, int p, int n_modes) {
    if (p < 1) throw std::invalid_argument("build_eigensystem: p must be >= 1");
    const int m = grid.n_nodes - 2;
    if (n_modes < 1 || n_modes > m) {
        std::ostringstream os;
        os << "build_eigensystem: n_modes must be in [1, " << m << "], got " << n_modes;
        throw std::invalid_argument(os.str());
    }

    // Id - Laplacian_h on the interior nodes, zero Dirichlet boundary.
    const double h = grid.spacing();
    const double inv_h2 = 1.0 / (h * h);
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        op(i, i) = 1.0 + 2.0 * inv_h2;
        if (i > 0) op(i, i - 1) = -inv_h2;
        if (i + 1 < m) op(i, i + 1) = -inv_h2;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("build_eigensystem: eigensolve did not converge");

    // Ascending eigenvalues of (Id - Lap) give descending alpha = mu^{-p}.
    EigenSystem sys;
    sys.grid = grid;
    sys.order_p = p;
    sys.eigvals.resize(n_modes);
    sys.eigvecs = Eigen::MatrixXd::Zero(grid.n_nodes, n_modes);
    const double scale = 1.0 / std::sqrt(h); // Euclidean-orthonormal -> grid-orthonormal
    for (int j = 0; j < n_modes; ++j) {
        sys.eigvals[j] = std::pow(solver.eigenvalues()[j], -double(p));
        Eigen::VectorXd v = solver.eigenvectors().col(j) * scale;
        if (v[0] < 0.0) v = -v; // deterministic sign
        sys.eigvecs.col(j).segment(1, m) = v;
    }
    return sys;
}

IntrinsicDim select_intrinsic_dim(const EigenSystem& eigsys, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("select_intrinsic_dim: epsilon must be > 0");
    if (eigsys.n_modes() == 0) throw std::invalid_argument("select_intrinsic_dim: empty eigen-system");
    const double alpha1 = eigsys.eigvals[0];
    for (int k = 0; k < eigsys.n_modes(); ++k) {
        if (eigsys.eigvals[k] / alpha1 < epsilon) return {k + 1, false};
    }
    return {eigsys.n_modes(), true};
}

void TruncatedPrior::validate() const {
    if (!eigsys) throw std::invalid_argument("TruncatedPrior: missing eigen-system");
    if (K < 1 || K > eigsys->n_modes())
        throw std::invalid_argument("TruncatedPrior: K out of range");
    if (u0.size() != eigsys->grid.n_nodes)
        throw std::invalid_argument("TruncatedPrior: u0 length does not match grid");
}

TruncatedPrior make_truncated_prior(std::shared_ptr<const EigenSystem> eigsys, double epsilon,
                                    Eigen::VectorXd u0) {
    if (!eigsys) throw std::invalid_argument("make_truncated_prior: null eigen-system");
    TruncatedPrior prior;
    prior.eigsys = std::move(eigsys);
    const IntrinsicDim dim = select_intrinsic_dim(*prior.eigsys, epsilon);
    prior.K = dim.K;
    prior.saturated = dim.saturated;
    prior.u0 = u0.size() ? std::move(u0)
                         : Eigen::VectorXd::Zero(prior.eigsys->grid.n_nodes).eval();
    prior.validate();
    return prior;
}

Eigen::VectorXd mode_coefficients(const TruncatedPrior& prior, const Eigen::VectorXd& u) {
    const EigenSystem& sys = *prior.eigsys;
    if (u.size() != sys.grid.n_nodes)
        throw std::invalid_argument("mode_coefficients: vector length does not match grid");
    return sys.grid.spacing() * (sys.eigvecs.transpose() * u);
}

Eigen::VectorXd prior_mode_variances(const TruncatedPrior& prior, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("prior_mode_variances: lambda must be > 0");
    Eigen::VectorXd var = prior.eigsys->eigvals;
    var.head(prior.K) /= lambda;
    return var;
}

double c0_lambda_inverse_quadratic(const Eigen::VectorXd& u, const TruncatedPrior& prior,
                                   double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("c0_lambda_inverse_quadratic: lambda must be > 0");
    const Eigen::VectorXd c = mode_coefficients(prior, u);
    const Eigen::VectorXd& alpha = prior.eigsys->eigvals;
    double quad = 0.0;
    for (int j = 0; j < c.size(); ++j) {
        const double w = (j < prior.K) ? lambda : 1.0;
        quad += w * c[j] * c[j] / alpha[j];
    }
    return quad;
}

Eigen::VectorXd sample_prior_with(const TruncatedPrior& prior, double lambda,
                                  std::span<const double> xi) {
    if (!(lambda > 0.0)) throw std::invalid_argument("sample_prior: lambda must be > 0");
    const int m = prior.n_modes();
    if (static_cast<int>(xi.size()) != m)
        throw std::invalid_argument("sample_prior_with: needs one variate per stored mode");
    const Eigen::VectorXd var = prior_mode_variances(prior, lambda);
    Eigen::VectorXd coef(m);
    for (int j = 0; j < m; ++j) coef[j] = std::sqrt(var[j]) * xi[j];
    return prior.u0 + prior.eigsys->eigvecs * coef;
}

Eigen::VectorXd sample_prior(const TruncatedPrior& prior, double lambda, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> xi(prior.n_modes());
    for (double& x : xi) x = normal(rng);
    return sample_prior_with(prior, lambda, xi);
}

} // namespace vbip
