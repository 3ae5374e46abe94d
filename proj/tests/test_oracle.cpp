#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "vbip/oracle.hpp"

using namespace vbip::oracle;

TEST_CASE("simpson rule") {
    const double got = simpson_integral([](double x) { return std::sin(x); }, 0.0,
                                        std::numbers::pi, 2000);
    CHECK(got == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("quadrature moments on the positive axis") {
    SUBCASE("gamma(2,3) mean") {
        const auto rho = [](double x) { return std::exp(gamma_log_pdf(2.0, 3.0, x)); };
        CHECK(quadrature_moment(rho, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
    }
    SUBCASE("inverse gaussian mean and reciprocal mean") {
        const auto rho = [](double x) { return std::exp(inverse_gaussian_log_pdf(1.7, 0.9, x)); };
        CHECK(quadrature_moment(rho, 1) == doctest::Approx(1.7).epsilon(1e-8));
        const auto rho2 = [](double x) { return std::exp(inverse_gaussian_log_pdf(2.0, 0.5, x)); };
        CHECK(quadrature_moment(rho2, -1) ==
              doctest::Approx(1.0 / 2.0 + 1.0 / 0.5).epsilon(1e-8));
        const auto rho3 = [](double x) { return std::exp(inverse_gaussian_log_pdf(0.5, 2.0, x)); };
        CHECK(quadrature_moment(rho3, 1) == doctest::Approx(0.5).epsilon(1e-8));
    }
    SUBCASE("unnormalized densities are fine") {
        const auto rho = [](double x) { return 17.0 * std::exp(gamma_log_pdf(4.0, 2.0, x)); };
        CHECK(quadrature_moment(rho, 1) == doctest::Approx(2.0).epsilon(1e-8));
    }
    SUBCASE("vanishing density rejected") {
        CHECK_THROWS(quadrature_moment([](double) { return 0.0; }, 1));
    }
}

TEST_CASE("exact gaussian posterior") {
    SUBCASE("no data returns the prior") {
        Eigen::MatrixXd H(0, 3);
        Eigen::VectorXd mean0 = Eigen::VectorXd::Ones(3);
        Eigen::MatrixXd cov0 = 2.0 * Eigen::MatrixXd::Identity(3, 3);
        ExactPosterior post =
            exact_gaussian_posterior(H, Eigen::VectorXd(), mean0, cov0, Eigen::VectorXd());
        CHECK((post.mean - mean0).norm() == doctest::Approx(0.0));
        CHECK((post.cov - cov0).norm() == doctest::Approx(0.0));
    }
    SUBCASE("scalar case matches the hand formula") {
        Eigen::MatrixXd H(1, 1);
        H << 1.0;
        Eigen::VectorXd d(1);
        d << 2.0;
        ExactPosterior post = exact_gaussian_posterior(H, d, Eigen::VectorXd::Zero(1),
                                                       Eigen::MatrixXd::Identity(1, 1), 1.0);
        CHECK(post.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(post.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("kalman route equals precision assembly") {
        std::mt19937_64 rng(19);
        std::normal_distribution<double> normal;
        const int n = 5, m = 8;
        Eigen::MatrixXd H(m, n), A(n, n);
        Eigen::VectorXd d(m), mean0(n), w(m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) H(i, j) = normal(rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
        for (int i = 0; i < m; ++i) d[i] = normal(rng);
        for (int j = 0; j < n; ++j) mean0[j] = normal(rng);
        for (int i = 0; i < m; ++i) w[i] = 0.2 + std::abs(normal(rng));
        const Eigen::MatrixXd cov0 = A * A.transpose() + Eigen::MatrixXd::Identity(n, n);

        ExactPosterior post = exact_gaussian_posterior(H, d, mean0, cov0, w);
        const Eigen::MatrixXd prec = H.transpose() * w.asDiagonal() * H + cov0.inverse();
        const Eigen::MatrixXd cov_direct = prec.inverse();
        const Eigen::VectorXd mean_direct =
            cov_direct * (H.transpose() * w.cwiseProduct(d) + cov0.inverse() * mean0);
        CHECK((post.mean - mean_direct).norm() / mean_direct.norm() < 1e-10);
        CHECK((post.cov - cov_direct).norm() / cov_direct.norm() < 1e-10);
    }
    SUBCASE("validation") {
        Eigen::MatrixXd H(1, 2);
        H << 1.0, 0.0;
        CHECK_THROWS_AS(exact_gaussian_posterior(H, Eigen::VectorXd::Zero(1),
                                                 Eigen::VectorXd::Zero(2),
                                                 Eigen::MatrixXd::Identity(2, 2), -1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("grid KL scan") {
    SUBCASE("gaussian target, gaussian family brackets mean and std") {
        const double mu = 0.7, s = 0.3;
        const auto target = [&](double x) { return -0.5 * (x - mu) * (x - mu) / (s * s); };
        const auto family = [](const std::vector<double>& p, double x) {
            const double m = p[0], sd = p[1];
            return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) -
                   0.5 * (x - m) * (x - m) / (sd * sd);
        };
        std::vector<double> means, stds;
        for (int i = 0; i <= 20; ++i) means.push_back(0.4 + 0.03 * i);
        for (int i = 0; i <= 20; ++i) stds.push_back(0.1 + 0.02 * i);
        KlScanResult res = grid_kl(target, family, {means, stds}, Domain::real_line);
        CHECK(std::abs(res.params[0] - mu) <= 0.03 + 1e-12);
        CHECK(std::abs(res.params[1] - s) <= 0.02 + 1e-12);
    }
    SUBCASE("symmetric target pins the mean at the symmetry point") {
        const auto target = [](double x) { return -std::pow(x - 1.5, 4.0); };
        const auto family = [](const std::vector<double>& p, double x) {
            return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(0.5) -
                   0.5 * (x - p[0]) * (x - p[0]) / 0.25;
        };
        std::vector<double> means;
        for (int i = 0; i <= 30; ++i) means.push_back(0.5 + 0.0667 * i);
        KlScanResult res = grid_kl(target, family, {means}, Domain::real_line);
        CHECK(std::abs(res.params[0] - 1.5) <= 0.07);
    }
    SUBCASE("gamma-conjugate target brackets the closed-form update") {
        // posterior over lambda given e_quad: Gamma(alpha0 + K/2, beta0 + e_quad/2)
        const double alpha0 = 1.0, beta0 = 0.1, K = 6.0, e_quad = 4.0;
        const double shape = alpha0 + K / 2.0, rate = beta0 + e_quad / 2.0;
        const auto target = [&](double x) {
            return x <= 0.0 ? -1e300 : (shape - 1.0) * std::log(x) - rate * x;
        };
        const auto family = [](const std::vector<double>& p, double x) {
            return gamma_log_pdf(p[0], p[1], x);
        };
        std::vector<double> shapes, rates;
        for (int i = 0; i <= 24; ++i) shapes.push_back(2.0 + 0.25 * i);
        for (int i = 0; i <= 24; ++i) rates.push_back(1.0 + 0.1 * i);
        KlScanResult res = grid_kl(target, family, {shapes, rates}, Domain::positive);
        CHECK(std::abs(res.params[0] - shape) <= 0.25 + 1e-12);
        CHECK(std::abs(res.params[1] - rate) <= 0.1 + 1e-12);
    }
}

TEST_CASE("oracle suite passes") {
    SuiteResult suite = run_oracle_suite();
    INFO(suite.report);
    CHECK(suite.all_passed);
    CHECK(suite.n_checks > 50);
    CHECK(suite.n_failed == 0);
}
