#ifndef VBIP_FORWARD_HPP
#define VBIP_FORWARD_HPP

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "vbip/grid.hpp"

namespace vbip {

/// 1D Helmholtz inverse source setup: v'' + kappa^2 (1+q) v = u with absorbing
/// boundary conditions, measured at a fixed set of grid nodes for each wavenumber.
struct HelmholtzProblem {
    Grid1D grid;
    Eigen::VectorXd q;               // medium perturbation, one value per node
    std::vector<double> wavenumbers; // strictly increasing, positive
    std::vector<int> meas_nodes;     // node indices of the measurement points

    void validate() const;
    HelmholtzProblem with_single_wavenumber(double kappa) const;
};

/// Complex nodal field solving v'' + kappa^2(1+q)v = source with
/// v'(a) = -i kappa v(a), v'(b) = i kappa v(b).
Eigen::VectorXcd solve_helmholtz_1d(const HelmholtzProblem& problem,
                                    const Eigen::VectorXd& source, double kappa);

/// Real stacked forward operator: rows ordered (kappa_1 re, kappa_1 im, kappa_2 re, ...),
/// N_d = 2 * n_meas * n_wavenumbers rows in total.
struct ForwardStack {
    Eigen::MatrixXd matrix; // N_d x n_nodes
    Grid1D grid;
    std::vector<double> wavenumbers;
    std::vector<int> meas_nodes;

    int n_data() const { return static_cast<int>(matrix.rows()); }
    int n_complex_obs() const { return n_data() / 2; }

    Eigen::VectorXd apply(const Eigen::VectorXd& u) const { return matrix * u; }
    /// Adjoint with respect to the grid inner product on the source side.
    Eigen::VectorXd adjoint(const Eigen::VectorXd& d) const {
        return matrix.transpose() * d / grid.spacing();
    }
};

ForwardStack assemble_forward_stack(const HelmholtzProblem& problem);

struct NoiseSpec {
    enum class Kind { gaussian, impulsive };
    Kind kind = Kind::gaussian;
    double sigma = 0.0;     // gaussian standard deviation
    double r = 0.0;         // impulsive corruption probability
    double magnitude = 0.0; // impulsive corruption magnitude
    std::uint64_t seed = 0;

    void validate() const;
};

struct NoisyData {
    Eigen::VectorXd d;
    std::vector<std::uint8_t> corrupted; // per-entry mask, all zero for gaussian noise
};

/// d = H truth + noise, deterministic per NoiseSpec::seed.
NoisyData generate_data(const ForwardStack& stack, const Eigen::VectorXd& truth,
                        const NoiseSpec& noise);

/// max_i |d_i|; converts a relative noise level into an absolute sigma or magnitude.
double data_magnitude_scale(const Eigen::VectorXd& d_clean);

} // namespace vbip

#endif
