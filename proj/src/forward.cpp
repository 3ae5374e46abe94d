#include "vbip/forward.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace vbip {

namespace {

using Complex = std::complex<double>;
using SparseC = Eigen::SparseMatrix<Complex>;

// Centered interior stencil, second-order one-sided rows for the absorbing
// conditions v'(a) = -i kappa v(a), v'(b) = i kappa v(b).
SparseC helmholtz_matrix(const HelmholtzProblem& problem, double kappa) {
    const int n = problem.grid.n_nodes;
    const double h = problem.grid.spacing();
    const double inv_h2 = 1.0 / (h * h);
    const Complex ik(0.0, kappa);

    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(3 * n);
    trip.emplace_back(0, 0, Complex(-1.5 / h, 0.0) + ik);
    trip.emplace_back(0, 1, Complex(2.0 / h, 0.0));
    trip.emplace_back(0, 2, Complex(-0.5 / h, 0.0));
    for (int i = 1; i + 1 < n; ++i) {
        trip.emplace_back(i, i - 1, Complex(inv_h2, 0.0));
        trip.emplace_back(i, i, Complex(kappa * kappa * (1.0 + problem.q[i]) - 2.0 * inv_h2, 0.0));
        trip.emplace_back(i, i + 1, Complex(inv_h2, 0.0));
    }
    trip.emplace_back(n - 1, n - 3, Complex(0.5 / h, 0.0));
    trip.emplace_back(n - 1, n - 2, Complex(-2.0 / h, 0.0));
    trip.emplace_back(n - 1, n - 1, Complex(1.5 / h, 0.0) - ik);

    SparseC A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

[[noreturn]] void throw_singular(double kappa) {
    std::ostringstream os;
    os << "solve_helmholtz_1d: singular discrete operator at kappa = " << kappa;
    throw std::runtime_error(os.str());
}

} // namespace

void HelmholtzProblem::validate() const {
    if (grid.n_nodes < 3) throw std::invalid_argument("HelmholtzProblem: grid too small");
    if (q.size() != grid.n_nodes)
        throw std::invalid_argument("HelmholtzProblem: q length does not match grid");
    if (wavenumbers.empty()) throw std::invalid_argument("HelmholtzProblem: no wavenumbers");
    for (std::size_t i = 0; i < wavenumbers.size(); ++i) {
        if (!(wavenumbers[i] > 0.0))
            throw std::invalid_argument("HelmholtzProblem: wavenumbers must be positive");
        if (i > 0 && !(wavenumbers[i] > wavenumbers[i - 1]))
            throw std::invalid_argument("HelmholtzProblem: wavenumbers must be strictly increasing");
    }
    if (meas_nodes.empty()) throw std::invalid_argument("HelmholtzProblem: no measurement points");
    for (int node : meas_nodes)
        if (node < 0 || node >= grid.n_nodes)
            throw std::invalid_argument("HelmholtzProblem: measurement node out of range");
}

HelmholtzProblem HelmholtzProblem::with_single_wavenumber(double kappa) const {
    HelmholtzProblem p = *this;
    p.wavenumbers = {kappa};
    return p;
}

Eigen::VectorXcd solve_helmholtz_1d(const HelmholtzProblem& problem,
                                    const Eigen::VectorXd& source, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("solve_helmholtz_1d: kappa must be > 0");
    if (source.size() != problem.grid.n_nodes)
        throw std::invalid_argument("solve_helmholtz_1d: source length does not match grid");

    const int n = problem.grid.n_nodes;
    SparseC A = helmholtz_matrix(problem, kappa);
    Eigen::SparseLU<SparseC> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw_singular(kappa);

    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs.segment(1, n - 2) = source.segment(1, n - 2).cast<Complex>();
    Eigen::VectorXcd v = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw_singular(kappa);
    return v;
}

ForwardStack assemble_forward_stack(const HelmholtzProblem& problem) {
    problem.validate();
    const int n = problem.grid.n_nodes;
    const int n_meas = static_cast<int>(problem.meas_nodes.size());
    const int n_freq = static_cast<int>(problem.wavenumbers.size());

    ForwardStack stack;
    stack.grid = problem.grid;
    stack.wavenumbers = problem.wavenumbers;
    stack.meas_nodes = problem.meas_nodes;
    stack.matrix.resize(2 * n_meas * n_freq, n);

    // Row of the measured response equals the transposed solve of A^T against
    // the measurement indicator, one factorization per wavenumber.
    for (int f = 0; f < n_freq; ++f) {
        const double kappa = problem.wavenumbers[f];
        SparseC At = SparseC(helmholtz_matrix(problem, kappa).transpose());
        Eigen::SparseLU<SparseC> lu;
        lu.compute(At);
        if (lu.info() != Eigen::Success) throw_singular(kappa);

        for (int m = 0; m < n_meas; ++m) {
            Eigen::VectorXcd indicator = Eigen::VectorXcd::Zero(n);
            indicator[problem.meas_nodes[m]] = Complex(1.0, 0.0);
            Eigen::VectorXcd row = lu.solve(indicator);
            if (lu.info() != Eigen::Success) throw_singular(kappa);
            row[0] = row[n - 1] = Complex(0.0, 0.0); // boundary rows carry no source
            stack.matrix.row(2 * n_meas * f + m) = row.real();
            stack.matrix.row(2 * n_meas * f + n_meas + m) = row.imag();
        }
    }
    if (!stack.matrix.allFinite())
        throw std::runtime_error("assemble_forward_stack: non-finite entries in the stacked operator");
    return stack;
}

void NoiseSpec::validate() const {
    if (kind == Kind::gaussian) {
        if (!(sigma >= 0.0)) throw std::invalid_argument("NoiseSpec: sigma must be >= 0");
    } else {
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("NoiseSpec: r must be in [0,1]");
        if (!(magnitude >= 0.0)) throw std::invalid_argument("NoiseSpec: magnitude must be >= 0");
    }
}

NoisyData generate_data(const ForwardStack& stack, const Eigen::VectorXd& truth,
                        const NoiseSpec& noise) {
    noise.validate();
    if (truth.size() != stack.grid.n_nodes)
        throw std::invalid_argument("generate_data: truth length does not match the stack's grid");

    NoisyData out;
    out.d = stack.apply(truth);
    out.corrupted.assign(out.d.size(), 0);

    std::mt19937_64 rng(noise.seed);
    if (noise.kind == NoiseSpec::Kind::gaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < out.d.size(); ++i) out.d[i] += noise.sigma * normal(rng);
    } else {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (Eigen::Index i = 0; i < out.d.size(); ++i) {
            if (coin(rng) < noise.r) {
                out.d[i] += noise.magnitude * unit(rng);
                out.corrupted[i] = 1;
            }
        }
    }
    return out;
}

double data_magnitude_scale(const Eigen::VectorXd& d_clean) {
    if (d_clean.size() == 0) throw std::invalid_argument("data_magnitude_scale: empty data");
    return d_clean.cwiseAbs().maxCoeff();
}

} // namespace vbip
