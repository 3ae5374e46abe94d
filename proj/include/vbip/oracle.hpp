#ifndef VBIP_ORACLE_HPP
#define VBIP_ORACLE_HPP

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vbip::oracle {

struct ExactPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Exact Gaussian posterior for d = Hx + noise, x ~ N(prior_mean, prior_cov),
/// noise precision diagonal. Computed through the Kalman-gain form
/// C = P - P H^T (W^{-1} + H P H^T)^{-1} H P, an algebraic route independent of
/// the precision-assembly path used by the solvers. H may have zero rows.
ExactPosterior exact_gaussian_posterior(const Eigen::MatrixXd& H, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& prior_mean,
                                        const Eigen::MatrixXd& prior_cov,
                                        const Eigen::VectorXd& noise_prec_diag);

ExactPosterior exact_gaussian_posterior(const Eigen::MatrixXd& H, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& prior_mean,
                                        const Eigen::MatrixXd& prior_cov, double noise_prec);

/// E[g(x)] for an unnormalized density on (0, inf), via the substitution
/// x = e^t with adaptive truncation and Simpson refinement.
double quadrature_expectation(const std::function<double(double)>& unnorm_density,
                              const std::function<double(double)>& g);

/// E[x^power]; power may be negative.
double quadrature_moment(const std::function<double(double)>& unnorm_density, int power);

/// Composite Simpson rule with n subintervals (n made even internally).
double simpson_integral(const std::function<double(double)>& f, double a, double b, int n);

enum class Domain { real_line, positive };

struct KlScanResult {
    std::vector<double> params;
    double kl = 0.0; // up to the target's log-normalization
};

/// Scans the cartesian parameter grid of a normalized 1D family for the
/// KL(q || target)-minimizing member; the target log-density may be unnormalized.
KlScanResult grid_kl(const std::function<double(double)>& target_log_unnorm,
                     const std::function<double(const std::vector<double>&, double)>& family_log_pdf,
                     const std::vector<std::vector<double>>& param_axes, Domain domain);

/// Normalized log-densities used by the cross-checks and tests.
double gamma_log_pdf(double shape, double rate, double x);
double inverse_gaussian_log_pdf(double mean, double shape, double x);

struct SuiteResult {
    bool all_passed = false;
    int n_checks = 0;
    int n_failed = 0;
    std::string report; // one line per check
};

/// Quadrature and dense-algebra cross-checks of every closed-form moment and
/// posterior formula used by the solvers.
SuiteResult run_oracle_suite();

} // namespace vbip::oracle

#endif
