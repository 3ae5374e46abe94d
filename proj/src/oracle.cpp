#include "vbip/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

namespace vbip::oracle {

ExactPosterior exact_gaussian_posterior(const Eigen::MatrixXd& H, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& prior_mean,
                                        const Eigen::MatrixXd& prior_cov,
                                        const Eigen::VectorXd& noise_prec_diag) {
    const Eigen::Index n = prior_mean.size();
    if (prior_cov.rows() != n || prior_cov.cols() != n)
        throw std::invalid_argument("exact_gaussian_posterior: prior covariance shape mismatch");
    if (H.rows() != d.size() || H.rows() != noise_prec_diag.size())
        throw std::invalid_argument("exact_gaussian_posterior: data shape mismatch");
    if (H.rows() > 0 && H.cols() != n)
        throw std::invalid_argument("exact_gaussian_posterior: operator shape mismatch");
    if ((noise_prec_diag.array() <= 0.0).any())
        throw std::invalid_argument("exact_gaussian_posterior: noise precision must be positive");

    if (H.rows() == 0) return {prior_mean, prior_cov};

    Eigen::MatrixXd S = H * prior_cov * H.transpose();
    S.diagonal() += noise_prec_diag.cwiseInverse();
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("exact_gaussian_posterior: singular innovation matrix");

    const Eigen::MatrixXd PHt = prior_cov * H.transpose();
    ExactPosterior post;
    post.mean = prior_mean + PHt * llt.solve(d - H * prior_mean);
    post.cov = prior_cov - PHt * llt.solve(PHt.transpose());
    post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
    return post;
}

ExactPosterior exact_gaussian_posterior(const Eigen::MatrixXd& H, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& prior_mean,
                                        const Eigen::MatrixXd& prior_cov, double noise_prec) {
    return exact_gaussian_posterior(H, d, prior_mean, prior_cov,
                                    Eigen::VectorXd::Constant(H.rows(), noise_prec));
}

double simpson_integral(const std::function<double(double)>& f, double a, double b, int n) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double sum = f(a) + f(b);
    for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

namespace {

// Support of t -> rho(e^t) e^t on the log axis, truncated where the integrand
// falls 300 orders of magnitude below its peak.
struct LogSupport {
    double lo, hi, peak_log;
};

LogSupport find_log_support(const std::function<double(double)>& rho) {
    // Non-finite density values can only occur where the integrand x*rho(x) is
    // negligible (integrable singularities below the representable range), so
    // they are treated as lying outside the support.
    const auto log_integrand = [&](double t) {
        const double v = rho(std::exp(t));
        return (v > 0.0 && std::isfinite(v)) ? std::log(v) + t
                                             : -std::numeric_limits<double>::infinity();
    };
    double best_t = 0.0, best = -std::numeric_limits<double>::infinity();
    for (double t = -690.0; t <= 690.0; t += 0.5) {
        const double v = log_integrand(t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    if (!std::isfinite(best))
        throw std::runtime_error("quadrature: density vanishes on the whole positive axis");
    const double cut = best - 300.0 * std::numbers::ln10;
    double lo = best_t, hi = best_t;
    while (lo > -695.0 && log_integrand(lo) > cut) lo -= 0.5;
    while (hi < 695.0 && log_integrand(hi) > cut) hi += 0.5;
    return {lo, hi, best};
}

} // namespace

double quadrature_expectation(const std::function<double(double)>& unnorm_density,
                              const std::function<double(double)>& g) {
    const LogSupport sup = find_log_support(unnorm_density);
    const double scale = std::exp(sup.peak_log);
    const auto weight = [&](double t) {
        const double x = std::exp(t);
        const double v = unnorm_density(x);
        return (v > 0.0 && std::isfinite(v)) ? v * x / scale : 0.0;
    };

    double prev_num = 0.0, prev_den = 0.0;
    for (int n = 512; n <= (1 << 21); n *= 2) {
        const double den = simpson_integral(weight, sup.lo, sup.hi, n);
        const double num = simpson_integral(
            [&](double t) { return weight(t) * g(std::exp(t)); }, sup.lo, sup.hi, n);
        if (n > 512) {
            const double dnum = std::abs(num - prev_num);
            const double dden = std::abs(den - prev_den);
            if (dnum <= 1e-12 * std::abs(num) + 1e-300 && dden <= 1e-12 * std::abs(den)) {
                if (den == 0.0) throw std::runtime_error("quadrature: zero normalization");
                return num / den;
            }
        }
        prev_num = num;
        prev_den = den;
    }
    throw std::runtime_error("quadrature: refinement did not converge");
}

double quadrature_moment(const std::function<double(double)>& unnorm_density, int power) {
    return quadrature_expectation(unnorm_density,
                                  [power](double x) { return std::pow(x, power); });
}

double gamma_log_pdf(double shape, double rate, double x) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double inverse_gaussian_log_pdf(double mean, double shape, double x) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    const double dx = x - mean;
    return 0.5 * std::log(shape / (2.0 * std::numbers::pi * x * x * x)) -
           shape * dx * dx / (2.0 * mean * mean * x);
}

KlScanResult grid_kl(const std::function<double(double)>& target_log_unnorm,
                     const std::function<double(const std::vector<double>&, double)>& family_log_pdf,
                     const std::vector<std::vector<double>>& param_axes, Domain domain) {
    if (param_axes.empty() || param_axes.size() > 2)
        throw std::invalid_argument("grid_kl: one or two parameter axes expected");

    // KL(q || target) up to the target's normalization, integrated on the axis
    // where q is non-negligible.
    const auto score = [&](const std::vector<double>& params) {
        const auto log_q = [&](double s) {
            const double x = domain == Domain::positive ? std::exp(s) : s;
            double v = family_log_pdf(params, x);
            if (domain == Domain::positive) v += s; // Jacobian of x = e^s
            return v;
        };
        const double scan_lo = domain == Domain::positive ? -60.0 : -1e3;
        const double scan_hi = domain == Domain::positive ? 60.0 : 1e3;
        double best = -std::numeric_limits<double>::infinity(), best_s = 0.0;
        const int n_scan = 4000;
        for (int i = 0; i <= n_scan; ++i) {
            const double s = scan_lo + (scan_hi - scan_lo) * i / n_scan;
            const double v = log_q(s);
            if (v > best) {
                best = v;
                best_s = s;
            }
        }
        const double cut = best - 60.0;
        double lo = best_s, hi = best_s;
        const double step = (scan_hi - scan_lo) / n_scan;
        while (lo > scan_lo && log_q(lo) > cut) lo -= step;
        while (hi < scan_hi && log_q(hi) > cut) hi += step;
        const auto integrand = [&](double s) {
            const double lq = log_q(s);
            if (!std::isfinite(lq)) return 0.0;
            const double x = domain == Domain::positive ? std::exp(s) : s;
            const double lq_x = domain == Domain::positive ? lq - s : lq;
            return std::exp(lq) * (lq_x - target_log_unnorm(x));
        };
        return simpson_integral(integrand, lo, hi, 8192);
    };

    KlScanResult result;
    result.kl = std::numeric_limits<double>::infinity();
    std::vector<double> params(param_axes.size());
    const std::size_t n0 = param_axes[0].size();
    const std::size_t n1 = param_axes.size() == 2 ? param_axes[1].size() : 1;
    for (std::size_t i = 0; i < n0; ++i) {
        params[0] = param_axes[0][i];
        for (std::size_t j = 0; j < n1; ++j) {
            if (param_axes.size() == 2) params[1] = param_axes[1][j];
            const double kl = score(params);
            if (kl < result.kl) {
                result.kl = kl;
                result.params = params;
            }
        }
    }
    return result;
}

namespace {

void check(SuiteResult& suite, const std::string& name, double got, double expected,
           double tol) {
    ++suite.n_checks;
    const double err = std::abs(got - expected) / std::max(1.0, std::abs(expected));
    std::ostringstream os;
    if (err <= tol) {
        os << "ok   " << name << " (err " << err << ")\n";
    } else {
        ++suite.n_failed;
        os << "FAIL " << name << " (got " << got << ", expected " << expected << ", err " << err
           << ")\n";
    }
    suite.report += os.str();
}

} // namespace

SuiteResult run_oracle_suite() {
    SuiteResult suite;
    const double tol = 1e-8;

    const double gamma_shapes[5] = {0.5, 1.0, 2.0, 3.5, 8.0};
    const double gamma_rates[5] = {0.2, 0.5, 1.0, 2.0, 7.5};
    for (double a : gamma_shapes)
        for (double b : gamma_rates) {
            const auto rho = [a, b](double x) { return std::exp(gamma_log_pdf(a, b, x)); };
            std::ostringstream name;
            name << "gamma(" << a << "," << b << ") mean";
            check(suite, name.str(), quadrature_moment(rho, 1), a / b, tol);
        }
    {
        const auto rho = [](double x) { return std::exp(gamma_log_pdf(3.5, 1.7, x)); };
        check(suite, "gamma(3.5,1.7) E[log]",
              quadrature_expectation(rho, [](double x) { return std::log(x); }),
              boost::math::digamma(3.5) - std::log(1.7), tol);
    }

    const double ig_means[5] = {0.2, 0.5, 1.0, 1.7, 5.0};
    const double ig_shapes[5] = {0.1, 0.5, 0.9, 2.0, 8.0};
    for (double m : ig_means)
        for (double z : ig_shapes) {
            const auto rho = [m, z](double x) {
                return std::exp(inverse_gaussian_log_pdf(m, z, x));
            };
            std::ostringstream name;
            name << "inv-gaussian(" << m << "," << z << ")";
            check(suite, name.str() + " mean", quadrature_moment(rho, 1), m, tol);
            check(suite, name.str() + " E[1/w]", quadrature_moment(rho, -1), 1.0 / m + 1.0 / z,
                  tol);
        }

    {
        // 1x1 posterior: prior N(0,1), H=1, noise precision 1, d=2.
        Eigen::MatrixXd H(1, 1);
        H << 1.0;
        Eigen::VectorXd d(1);
        d << 2.0;
        const ExactPosterior post = exact_gaussian_posterior(
            H, d, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 1.0);
        check(suite, "kalman 1x1 mean", post.mean[0], 1.0, tol);
        check(suite, "kalman 1x1 var", post.cov(0, 0), 0.5, tol);
    }
    {
        // Kalman route against direct precision assembly on a random instance.
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal;
        const int n = 6, m = 9;
        Eigen::MatrixXd H(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) H(i, j) = normal(rng);
        Eigen::MatrixXd A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
        const Eigen::MatrixXd prior_cov =
            A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd mean0(n), d(m), w(m);
        for (int j = 0; j < n; ++j) mean0[j] = normal(rng);
        for (int i = 0; i < m; ++i) d[i] = normal(rng);
        for (int i = 0; i < m; ++i) w[i] = 0.3 + std::abs(normal(rng));

        const ExactPosterior post = exact_gaussian_posterior(H, d, mean0, prior_cov, w);
        const Eigen::MatrixXd prec =
            H.transpose() * w.asDiagonal() * H + prior_cov.inverse();
        const Eigen::MatrixXd cov_direct = prec.inverse();
        const Eigen::VectorXd mean_direct =
            cov_direct * (H.transpose() * w.cwiseProduct(d) + prior_cov.inverse() * mean0);
        check(suite, "kalman vs precision-assembly mean",
              (post.mean - mean_direct).norm() / mean_direct.norm(), 0.0, tol);
        check(suite, "kalman vs precision-assembly cov",
              (post.cov - cov_direct).norm() / cov_direct.norm(), 0.0, tol);
    }

    suite.all_passed = suite.n_failed == 0;
    return suite;
}

} // namespace vbip::oracle
