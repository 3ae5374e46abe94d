#ifndef VBIP_SEQUENTIAL_HPP
#define VBIP_SEQUENTIAL_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "vbip/vb_gaussian.hpp"
#include "vbip/vb_laplace.hpp"

namespace vbip {

enum class InnerModel { gaussian, laplace };

struct FrequencySchedule {
    std::vector<double> wavenumbers; // strictly increasing, positive
    int inner_sweeps = 3;
    InnerModel inner_model = InnerModel::gaussian;

    void validate() const;
};

/// Data for one scheduled wavenumber; the wavenumber tag is validated against
/// the schedule so misordered inputs fail loudly.
struct FrequencyData {
    double wavenumber = 0.0;
    Eigen::VectorXd d;
};

struct FrequencyRecord {
    double wavenumber = 0.0;
    Eigen::VectorXd mean;
    double rel_error_linf = 0.0; // NaN when no truth was supplied
    double lambda_mean = 0.0;
    double tau_mean = 0.0;
};

struct SequentialResult {
    std::vector<FrequencyRecord> per_frequency;
    std::variant<std::monostate, VBState, LaplaceVBState> final_state;
    bool completed = false;
    std::string error; // set when a per-frequency solve failed
};

struct SequentialOptions {
    GaussianHyper gaussian_hyper;
    LaplaceHyper laplace_hyper;
    Eigen::VectorXd initial_guess;        // empty: zero
    Eigen::VectorXd truth_for_diagnostics; // empty: no error tracking
    bool map_refine = false;              // refine each mean by gradient descent
    int map_steps = 50;
    double map_step_size = 0.0;           // <= 0: power-iteration estimate
    // Chained mean update u_bar + relaxation * (mean_i - u_bar). Values below 1
    // damp the frequency-to-frequency walk that full conditional-mean chaining
    // exhibits when each batch carries few data rows.
    double relaxation = 1.0;
    std::function<void(const FrequencyRecord&, const SequentialResult&)> on_frequency;
};

/// Frequency-marching driver: for each scheduled wavenumber run `inner_sweeps`
/// sweeps of the inner solver with the prior mean chained from the previous
/// conditional mean; the last frequency's factors quantify the uncertainty.
SequentialResult run_sequential(const HelmholtzProblem& problem,
                                const FrequencySchedule& schedule,
                                const std::vector<FrequencyData>& data,
                                const TruncatedPrior& prior,
                                const SequentialOptions& options = {});

/// J(u) = tau/2 ||Hu - d||^2 + ||u - u_prev||^2_{C0^K(lambda)}.
double map_objective(const Eigen::VectorXd& u, const ForwardStack& stack,
                     const Eigen::VectorXd& d, const Eigen::VectorXd& u_prev,
                     double lambda, double tau, const TruncatedPrior& prior);

/// Euclidean gradient of map_objective with respect to the nodal values.
Eigen::VectorXd map_gradient(const Eigen::VectorXd& u, const ForwardStack& stack,
                             const Eigen::VectorXd& d, const Eigen::VectorXd& u_prev,
                             double lambda, double tau, const TruncatedPrior& prior);

/// Fixed-step gradient descent on map_objective; returns the iterate with the
/// lowest objective. step_size <= 0 selects 1/L with L the largest curvature
/// of the quadratic, estimated by power iteration.
Eigen::VectorXd map_gradient_descent(const Eigen::VectorXd& u_init, const ForwardStack& stack,
                                     const Eigen::VectorXd& d, const Eigen::VectorXd& u_prev,
                                     double lambda, double tau, const TruncatedPrior& prior,
                                     int steps, double step_size = 0.0);

} // namespace vbip

#endif
