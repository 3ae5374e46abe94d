#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "vbip/forward.hpp"
#include "vbip/grid.hpp"

using namespace vbip;

namespace {

HelmholtzProblem free_space_problem(int n_nodes, std::vector<double> kappas) {
    HelmholtzProblem p;
    p.grid = Grid1D::make(n_nodes);
    p.q = Eigen::VectorXd::Zero(n_nodes);
    p.wavenumbers = std::move(kappas);
    p.meas_nodes = {0, n_nodes - 1};
    return p;
}

// outgoing Green's function of v'' + kappa^2 v = delta_{x0}
std::complex<double> green(double kappa, double x, double x0) {
    const std::complex<double> i(0.0, 1.0);
    return std::exp(i * kappa * std::abs(x - x0)) / (2.0 * i * kappa);
}

double green_test_error(int n_nodes, double kappa) {
    HelmholtzProblem p = free_space_problem(n_nodes, {kappa});
    const int j0 = (n_nodes - 1) / 2;
    Eigen::VectorXd source = Eigen::VectorXd::Zero(n_nodes);
    source[j0] = 1.0 / p.grid.spacing(); // discrete delta
    Eigen::VectorXcd v = solve_helmholtz_1d(p, source, kappa);
    double err = 0.0;
    for (int i = 0; i < n_nodes; ++i)
        err = std::max(err, std::abs(v[i] - green(kappa, p.grid.node(i), p.grid.node(j0))));
    return err;
}

} // namespace

TEST_CASE("helmholtz solver basics") {
    HelmholtzProblem p = free_space_problem(201, {2.0, 5.0});

    SUBCASE("zero source gives the zero field") {
        Eigen::VectorXcd v = solve_helmholtz_1d(p, Eigen::VectorXd::Zero(201), 2.0);
        CHECK(v.norm() == doctest::Approx(0.0));
    }
    SUBCASE("linearity") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal;
        Eigen::VectorXd u1(201), u2(201);
        for (int i = 0; i < 201; ++i) {
            u1[i] = normal(rng);
            u2[i] = normal(rng);
        }
        Eigen::VectorXcd sum = solve_helmholtz_1d(p, u1 + u2, 5.0);
        Eigen::VectorXcd parts = solve_helmholtz_1d(p, u1, 5.0) + solve_helmholtz_1d(p, u2, 5.0);
        CHECK((sum - parts).norm() / parts.norm() < 1e-10);
    }
    SUBCASE("argument validation") {
        CHECK_THROWS_AS(solve_helmholtz_1d(p, Eigen::VectorXd::Zero(201), -1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(solve_helmholtz_1d(p, Eigen::VectorXd::Zero(7), 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("free-space Green's function is reproduced at second order") {
    const double kappa = 6.0;
    const double e1 = green_test_error(401, kappa);
    const double e2 = green_test_error(801, kappa);
    const double scale = std::abs(green(kappa, 0.5, 0.5));
    CHECK(e1 / scale < 0.02);
    CHECK(std::log2(e1 / e2) > 1.8);
}

TEST_CASE("problem validation catches bad inputs") {
    HelmholtzProblem p = free_space_problem(51, {1.0, 2.0});
    CHECK_NOTHROW(p.validate());
    HelmholtzProblem bad = p;
    bad.wavenumbers = {2.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.wavenumbers = {-1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.meas_nodes = {51};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.meas_nodes.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("forward stack") {
    HelmholtzProblem p = free_space_problem(101, {0.5, 1.5, 4.0});
    ForwardStack stack = assemble_forward_stack(p);
    REQUIRE(stack.n_data() == 2 * 2 * 3);
    REQUIRE(stack.n_complex_obs() == 6);

    SUBCASE("apply(0) = 0 and entries finite") {
        CHECK(stack.apply(Eigen::VectorXd::Zero(101)).norm() == doctest::Approx(0.0));
        CHECK(stack.matrix.allFinite());
    }
    SUBCASE("matrix-operator consistency against direct solves") {
        Eigen::VectorXd u =
            (-40.0 * (p.grid.nodes().array() - 0.55).square()).exp().matrix();
        Eigen::VectorXd via_matrix = stack.apply(u);
        for (std::size_t f = 0; f < p.wavenumbers.size(); ++f) {
            Eigen::VectorXcd v = solve_helmholtz_1d(p, u, p.wavenumbers[f]);
            for (int m = 0; m < 2; ++m) {
                const std::complex<double> meas = v[p.meas_nodes[m]];
                const double re = via_matrix[4 * f + m];
                const double im = via_matrix[4 * f + 2 + m];
                CHECK(std::abs(re - meas.real()) < 1e-10 * std::max(1.0, std::abs(meas)));
                CHECK(std::abs(im - meas.imag()) < 1e-10 * std::max(1.0, std::abs(meas)));
            }
        }
    }
    SUBCASE("adjoint identity under the grid inner product") {
        std::mt19937_64 rng(8);
        std::normal_distribution<double> normal;
        Eigen::VectorXd u(101), d(stack.n_data());
        for (int i = 0; i < 101; ++i) u[i] = normal(rng);
        for (int i = 0; i < stack.n_data(); ++i) d[i] = normal(rng);
        const double lhs = stack.apply(u).dot(d);
        const double rhs = grid_dot(p.grid, u, stack.adjoint(d));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("synthetic data generation") {
    HelmholtzProblem p = free_space_problem(101, {1.0, 3.0});
    ForwardStack stack = assemble_forward_stack(p);
    Eigen::VectorXd truth =
        (-30.0 * (p.grid.nodes().array() - 0.45).square()).exp().matrix();
    const Eigen::VectorXd clean = stack.apply(truth);

    SUBCASE("sigma = 0 reproduces clean data") {
        NoiseSpec spec;
        spec.kind = NoiseSpec::Kind::gaussian;
        spec.sigma = 0.0;
        NoisyData nd = generate_data(stack, truth, spec);
        CHECK((nd.d - clean).norm() == doctest::Approx(0.0));
    }
    SUBCASE("r = 0 leaves data untouched") {
        NoiseSpec spec;
        spec.kind = NoiseSpec::Kind::impulsive;
        spec.r = 0.0;
        spec.magnitude = 0.3;
        NoisyData nd = generate_data(stack, truth, spec);
        CHECK((nd.d - clean).norm() == doctest::Approx(0.0));
        for (auto c : nd.corrupted) CHECK(c == 0);
    }
    SUBCASE("r = 1 corrupts every entry with bounded perturbation") {
        NoiseSpec spec;
        spec.kind = NoiseSpec::Kind::impulsive;
        spec.r = 1.0;
        spec.magnitude = 0.1;
        spec.seed = 5;
        NoisyData nd = generate_data(stack, truth, spec);
        int n_corrupted = 0;
        for (int i = 0; i < nd.d.size(); ++i) {
            n_corrupted += nd.corrupted[i];
            CHECK(std::abs(nd.d[i] - clean[i]) <= 0.1);
        }
        CHECK(n_corrupted == nd.d.size());
    }
    SUBCASE("deterministic per seed") {
        NoiseSpec spec;
        spec.kind = NoiseSpec::Kind::gaussian;
        spec.sigma = 1e-2;
        spec.seed = 77;
        NoisyData a = generate_data(stack, truth, spec);
        NoisyData b = generate_data(stack, truth, spec);
        CHECK((a.d - b.d).norm() == doctest::Approx(0.0));
    }
    SUBCASE("validation") {
        NoiseSpec spec;
        spec.kind = NoiseSpec::Kind::gaussian;
        spec.sigma = -1.0;
        CHECK_THROWS_AS(generate_data(stack, truth, spec), std::invalid_argument);
        spec.sigma = 1.0;
        CHECK_THROWS_AS(generate_data(stack, Eigen::VectorXd::Zero(7), spec),
                        std::invalid_argument);
    }
}

TEST_CASE("data magnitude scale") {
    Eigen::VectorXd d(3);
    d << 1.0, -3.0, 2.0;
    CHECK(data_magnitude_scale(d) == doctest::Approx(3.0));
    CHECK(data_magnitude_scale(Eigen::VectorXd::Zero(4)) == doctest::Approx(0.0));
    CHECK(data_magnitude_scale(-2.5 * d) == doctest::Approx(2.5 * 3.0));
    CHECK_THROWS_AS(data_magnitude_scale(Eigen::VectorXd()), std::invalid_argument);
}
