#include "vbip/sequential.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "vbip/experiment.hpp"

namespace vbip {

void FrequencySchedule::validate() const {
    if (wavenumbers.empty()) throw std::invalid_argument("FrequencySchedule: empty schedule");
    for (std::size_t i = 0; i < wavenumbers.size(); ++i) {
        if (!(wavenumbers[i] > 0.0))
            throw std::invalid_argument("FrequencySchedule: wavenumbers must be positive");
        if (i > 0 && !(wavenumbers[i] > wavenumbers[i - 1]))
            throw std::invalid_argument("FrequencySchedule: wavenumbers must be strictly increasing");
    }
    if (inner_sweeps < 1) throw std::invalid_argument("FrequencySchedule: inner_sweeps must be >= 1");
}

double map_objective(const Eigen::VectorXd& u, const ForwardStack& stack,
                     const Eigen::VectorXd& d, const Eigen::VectorXd& u_prev,
                     double lambda, double tau, const TruncatedPrior& prior) {
    if (!(tau >= 0.0)) throw std::invalid_argument("map_objective: tau must be >= 0");
    const Eigen::VectorXd residual = stack.matrix * u - d;
    return 0.5 * tau * residual.squaredNorm() +
           c0_lambda_inverse_quadratic(u - u_prev, prior, lambda);
}

Eigen::VectorXd map_gradient(const Eigen::VectorXd& u, const ForwardStack& stack,
                             const Eigen::VectorXd& d, const Eigen::VectorXd& u_prev,
                             double lambda, double tau, const TruncatedPrior& prior) {
    const double h = prior.grid().spacing();
    const Eigen::MatrixXd& E = prior.eigsys->eigvecs;
    Eigen::VectorXd scaled = mode_coefficients(prior, u - u_prev)
                                 .cwiseQuotient(prior_mode_variances(prior, lambda));
    return tau * (stack.matrix.transpose() * (stack.matrix * u - d)) + 2.0 * h * (E * scaled);
}

namespace {

// Largest curvature of the quadratic objective (Euclidean metric), by power
// iteration on v -> tau H^T H v + 2 h^2 E diag(1/var) E^T v.
double estimate_lipschitz(const ForwardStack& stack, double lambda, double tau,
                          const TruncatedPrior& prior, int iters = 20) {
    const double h = prior.grid().spacing();
    const Eigen::MatrixXd& E = prior.eigsys->eigvecs;
    const Eigen::VectorXd inv_var = prior_mode_variances(prior, lambda).cwiseInverse();
    const auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return tau * (stack.matrix.transpose() * (stack.matrix * v)) +
               2.0 * h * h * (E * inv_var.cwiseProduct(E.transpose() * v));
    };
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(prior.grid().n_nodes);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v.normalize();
    double norm = 1.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd w = apply(v);
        norm = w.norm();
        if (norm == 0.0) return 1.0;
        v = w / norm;
    }
    return norm;
}

} // namespace

Eigen::VectorXd map_gradient_descent(const Eigen::VectorXd& u_init, const ForwardStack& stack,
                                     const Eigen::VectorXd& d, const Eigen::VectorXd& u_prev,
                                     double lambda, double tau, const TruncatedPrior& prior,
                                     int steps, double step_size) {
    if (steps < 1) throw std::invalid_argument("map_gradient_descent: steps must be >= 1");
    double step = step_size;
    if (!(step > 0.0)) step = 1.0 / estimate_lipschitz(stack, lambda, tau, prior);

    Eigen::VectorXd u = u_init;
    Eigen::VectorXd best_u = u;
    double best_j = map_objective(u, stack, d, u_prev, lambda, tau, prior);
    if (!std::isfinite(best_j))
        throw std::runtime_error("map_gradient_descent: non-finite objective at the initial iterate");
    for (int it = 0; it < steps; ++it) {
        u -= step * map_gradient(u, stack, d, u_prev, lambda, tau, prior);
        const double j = map_objective(u, stack, d, u_prev, lambda, tau, prior);
        if (!std::isfinite(j))
            throw std::runtime_error("map_gradient_descent: objective became non-finite");
        if (j < best_j) {
            best_j = j;
            best_u = u;
        }
    }
    return best_u;
}

SequentialResult run_sequential(const HelmholtzProblem& problem,
                                const FrequencySchedule& schedule,
                                const std::vector<FrequencyData>& data,
                                const TruncatedPrior& prior,
                                const SequentialOptions& options) {
    schedule.validate();
    prior.validate();
    if (!(options.relaxation > 0.0) || options.relaxation > 1.0)
        throw std::invalid_argument("run_sequential: relaxation must be in (0, 1]");
    if (data.size() != schedule.wavenumbers.size())
        throw std::invalid_argument("run_sequential: one data vector per scheduled wavenumber required");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double kappa = schedule.wavenumbers[i];
        if (std::abs(data[i].wavenumber - kappa) > 1e-12 * std::max(1.0, kappa)) {
            std::ostringstream os;
            os << "run_sequential: data entry " << i << " is tagged with wavenumber "
               << data[i].wavenumber << " but the schedule expects " << kappa;
            throw std::invalid_argument(os.str());
        }
    }

    const int n_meas_data = 2 * static_cast<int>(problem.meas_nodes.size());
    SequentialResult result;
    Eigen::VectorXd u_bar = options.initial_guess.size()
                                ? options.initial_guess
                                : Eigen::VectorXd::Zero(prior.grid().n_nodes).eval();
    if (u_bar.size() != prior.grid().n_nodes)
        throw std::invalid_argument("run_sequential: initial guess length does not match the grid");

    for (std::size_t i = 0; i < schedule.wavenumbers.size(); ++i) {
        const double kappa = schedule.wavenumbers[i];
        if (data[i].d.size() != n_meas_data) {
            result.error = "data length mismatch at wavenumber " + std::to_string(kappa);
            return result;
        }
        try {
            const ForwardStack stack =
                assemble_forward_stack(problem.with_single_wavenumber(kappa));
            TruncatedPrior chained = prior;
            chained.u0 = u_bar;

            FrequencyRecord record;
            record.wavenumber = kappa;
            // The inner sweeps adapt the hyperparameters and the covariance;
            // with map_refine the chained mean comes from a few damped descent
            // steps on the MAP objective away from the previous mean, rather
            // than the full conditional-mean solve.
            if (schedule.inner_model == InnerModel::gaussian) {
                VbOptions inner;
                inner.tol = 0.0;
                inner.max_sweeps = schedule.inner_sweeps;
                VBState state =
                    run_vb_gaussian(stack, data[i].d, chained, options.gaussian_hyper, inner);
                record.mean = state.u_factor.mean;
                record.lambda_mean = state.lambda_factor.mean();
                record.tau_mean = state.tau_factor.mean();
                if (options.map_refine) {
                    record.mean = map_gradient_descent(u_bar, stack, data[i].d, u_bar,
                                                       record.lambda_mean, record.tau_mean,
                                                       chained, options.map_steps,
                                                       options.map_step_size);
                    state.u_factor.mean = record.mean;
                }
                result.final_state = std::move(state);
            } else {
                LaplaceOptions inner;
                inner.tol = 0.0;
                inner.max_sweeps = schedule.inner_sweeps;
                LaplaceVBState state =
                    run_vb_laplace(stack, data[i].d, chained, options.laplace_hyper, inner);
                record.mean = state.u_factor.mean;
                record.lambda_mean = state.lambda_factor.mean();
                record.tau_mean = state.tau;
                if (options.map_refine) {
                    record.mean = map_gradient_descent(u_bar, stack, data[i].d, u_bar,
                                                       record.lambda_mean, record.tau_mean,
                                                       chained, options.map_steps,
                                                       options.map_step_size);
                    state.u_factor.mean = record.mean;
                }
                result.final_state = std::move(state);
            }
            if (options.relaxation < 1.0 && !options.map_refine) {
                record.mean = u_bar + options.relaxation * (record.mean - u_bar);
                if (VBState* s = std::get_if<VBState>(&result.final_state))
                    s->u_factor.mean = record.mean;
                else if (LaplaceVBState* s = std::get_if<LaplaceVBState>(&result.final_state))
                    s->u_factor.mean = record.mean;
            }
            record.rel_error_linf =
                options.truth_for_diagnostics.size()
                    ? relative_error_linf(record.mean, options.truth_for_diagnostics)
                    : std::nan("");
            result.per_frequency.push_back(record);
            if (options.on_frequency) options.on_frequency(record, result);
            u_bar = record.mean;
        } catch (const std::exception& e) {
            result.error = e.what();
            return result;
        }
    }
    result.completed = true;
    return result;
}

} // namespace vbip
