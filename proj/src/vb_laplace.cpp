#include "vbip/vb_laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "vb_internal.hpp"

namespace vbip {

namespace {
constexpr double kResidualFloor = 1e-30;
}

GaussianFactor update_u_weighted(const ForwardStack& stack, const Eigen::VectorXd& d,
                                 const TruncatedPrior& prior, double lambda_star,
                                 const Eigen::VectorXd& weights) {
    if (!(lambda_star > 0.0))
        throw std::invalid_argument("update_u_weighted: lambda must be > 0");
    if (d.size() != stack.n_data() || weights.size() != stack.n_data())
        throw std::invalid_argument("update_u_weighted: data/weight length mismatch");
    if ((weights.array() <= 0.0).any())
        throw std::invalid_argument("update_u_weighted: weights must be entrywise positive");
    return detail::weighted_update(detail::project_stack(stack, prior), d, prior, lambda_star,
                                   weights);
}

Eigen::VectorXd expect_residual_componentwise(const GaussianFactor& factor,
                                              const ForwardStack& stack,
                                              const Eigen::VectorXd& d) {
    const Eigen::VectorXd mean_residual = stack.matrix * factor.mean - d;
    const Eigen::MatrixXd G = stack.matrix * factor.basis->eigvecs;
    const Eigen::MatrixXd T = G * factor.coef_cov;
    const Eigen::VectorXd cov_diag = T.cwiseProduct(G).rowwise().sum();
    return mean_residual.cwiseAbs2() + cov_diag;
}

InvGaussFactor update_weights(const Eigen::VectorXd& e_res_vec, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("update_weights: tau must be > 0");
    InvGaussFactor factor;
    factor.shape = 2.0 / tau;
    factor.means = (2.0 / (tau * e_res_vec.cwiseMax(kResidualFloor).array())).sqrt();
    return factor;
}

double update_tau_empirical(const InvGaussFactor& w_factor) {
    if (w_factor.means.size() == 0 || !(w_factor.shape > 0.0))
        throw std::invalid_argument("update_tau_empirical: invalid weight factor");
    return w_factor.means.cwiseInverse().mean() + 1.0 / w_factor.shape;
}

double laplace_free_energy(const LaplaceVBState& state, const ForwardStack& stack,
                           const Eigen::VectorXd& d, const TruncatedPrior& prior,
                           double alpha0, double beta0) {
    const Eigen::VectorXd e_vec = expect_residual_componentwise(state.u_factor, stack, d);
    const double e_quad = expect_prior_quadratic(state.u_factor, prior);
    const GammaFactor& lam = state.lambda_factor;
    const InvGaussFactor& w = state.w_factor;
    const double tau = state.tau;
    const int n_data = stack.n_data();

    // E[log w] cancels between the likelihood term and the w-factor divergence.
    const double data_term = -0.5 * w.means.dot(e_vec);
    const double prior_term = 0.5 * prior.K * lam.log_mean() - 0.5 * (lam.mean() - 1.0) * e_quad;
    const double kl_u = detail::gaussian_kl_vs_reference(state.u_factor);
    const double kl_lambda = gamma_kl(lam, GammaFactor{alpha0, beta0});
    const double w_term =
        n_data * (0.5 * std::log(w.shape / (2.0 * std::numbers::pi)) + std::log(tau) - 0.5) +
        (w.means.cwiseInverse().sum() + n_data / w.shape) / tau;
    return data_term + prior_term - kl_u - kl_lambda - w_term;
}

namespace {

struct ValidationSplit {
    bool active = false;
    std::vector<int> held_out;
    std::vector<char> held_mask;
    Eigen::VectorXd train_d;
    ForwardStack train_stack;
};

ValidationSplit make_split(const ForwardStack& stack, const Eigen::VectorXd& d,
                           const LaplaceOptions& options) {
    ValidationSplit split;
    const int n = stack.n_data();
    const int n_val = static_cast<int>(options.validation_fraction * n);
    if (options.validation_fraction <= 0.0 || n_val < options.min_validation_rows) return split;

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(options.validation_seed);
    std::shuffle(order.begin(), order.end(), rng);
    split.held_out.assign(order.begin(), order.begin() + n_val);

    split.held_mask.assign(n, 0);
    for (int i : split.held_out) split.held_mask[i] = 1;
    split.train_stack = stack;
    split.train_stack.matrix.resize(n - n_val, stack.matrix.cols());
    split.train_d.resize(n - n_val);
    int row = 0;
    for (int i = 0; i < n; ++i) {
        if (split.held_mask[i]) continue;
        split.train_stack.matrix.row(row) = stack.matrix.row(i);
        split.train_d[row] = d[i];
        ++row;
    }
    split.active = true;
    return split;
}

// Mean |residual| over the held-out entries whose weight sits at or above the
// held-out median weight: the model's own trusted half.
double holdout_misfit(const ValidationSplit& split, const Eigen::VectorXd& residual,
                      const Eigen::VectorXd& weight_means) {
    std::vector<double> w;
    w.reserve(split.held_out.size());
    for (int i : split.held_out) w.push_back(weight_means[i]);
    std::vector<double> sorted_w = w;
    const auto mid = sorted_w.begin() + sorted_w.size() / 2;
    std::nth_element(sorted_w.begin(), mid, sorted_w.end());
    const double med = *mid;
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < split.held_out.size(); ++k) {
        if (w[k] >= med) {
            sum += std::abs(residual[split.held_out[k]]);
            ++count;
        }
    }
    return sum / count;
}

} // namespace

LaplaceVBState run_vb_laplace(const ForwardStack& stack, const Eigen::VectorXd& d,
                              const TruncatedPrior& prior, const LaplaceHyper& hyper,
                              const LaplaceOptions& options) {
    if (d.size() != stack.n_data())
        throw std::invalid_argument("run_vb_laplace: data length does not match the stack");
    if (!(hyper.alpha0 > 0) || !(hyper.beta0 > 0) || !(hyper.tau_init > 0))
        throw std::invalid_argument("run_vb_laplace: hyperparameters must be > 0");
    const ValidationSplit split = make_split(stack, d, options);
    const ForwardStack& fit_stack = split.active ? split.train_stack : stack;
    const Eigen::VectorXd& fit_d = split.active ? split.train_d : d;
    const detail::ProjectedStack ps = detail::project_stack(fit_stack, prior);
    const int n_data = stack.n_data();

    // tau plays the role of a noise variance, so the startup weights are the
    // matching precisions 1/tau, mirroring the Gaussian model's first sweep.
    LaplaceVBState state;
    state.lambda_factor = GammaFactor{hyper.alpha0, hyper.beta0};
    state.w_factor.means = Eigen::VectorXd::Constant(n_data, 1.0 / hyper.tau_init);
    state.w_factor.shape = 2.0 / hyper.tau_init;
    state.tau = hyper.tau_init;

    Eigen::VectorXd u_prev = prior.u0;
    double lambda_prev = state.lambda_factor.mean();
    double tau_prev = state.tau;
    bool first_sweep = true;

    LaplaceVBState best_state;
    double best_misfit = std::numeric_limits<double>::infinity();
    int best_sweep = 0;
    bool selection_done = false;

    const auto gather_train = [&](const Eigen::VectorXd& full) {
        if (!split.active) return full;
        Eigen::VectorXd out(fit_stack.n_data());
        int row = 0;
        for (int i = 0; i < n_data; ++i)
            if (!split.held_mask[i]) out[row++] = full[i];
        return out;
    };

    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        const double lambda_star = state.lambda_factor.mean();
        const Eigen::VectorXd weights = gather_train(state.w_factor.means);
        if (options.update_tau) state.tau = update_tau_empirical(state.w_factor);

        state.u_factor = detail::weighted_update(ps, fit_d, prior, lambda_star, weights);
        state.lambda_factor = update_lambda(prior, hyper.alpha0, hyper.beta0,
                                            expect_prior_quadratic(state.u_factor, prior));
        // The weight factor covers every datum; held-out rows simply do not
        // enter the u-update likelihood.
        const Eigen::VectorXd e_vec =
            options.weight_expectation == WeightExpectation::full
                ? expect_residual_componentwise(state.u_factor, stack, d)
                : (stack.matrix * state.u_factor.mean - d).cwiseAbs2().eval();
        state.w_factor = update_weights(e_vec, state.tau);

        state.iterations = sweep;
        state.rel_changes.u = detail::relative_change(state.u_factor.mean, u_prev);
        state.rel_changes.lambda =
            first_sweep ? 0.0 : std::abs(lambda_star - lambda_prev) / lambda_star;
        state.rel_changes.tau = first_sweep ? 0.0 : std::abs(state.tau - tau_prev) / state.tau;
        state.elbo_trace.push_back(
            laplace_free_energy(state, stack, d, prior, hyper.alpha0, hyper.beta0));
        state.weight_history.push_back(state.w_factor.means);
        if (options.on_sweep) options.on_sweep(state);

        if (split.active) {
            const Eigen::VectorXd residual = stack.matrix * state.u_factor.mean - d;
            const double misfit = holdout_misfit(split, residual, state.w_factor.means);
            if (misfit < best_misfit) {
                best_misfit = misfit;
                best_state = state;
                best_sweep = sweep;
            }
            if (sweep - best_sweep >= options.patience) {
                selection_done = true;
                break;
            }
        }

        if (state.rel_changes.max() <= options.tol) {
            state.converged = true;
            break;
        }
        u_prev = state.u_factor.mean;
        lambda_prev = lambda_star;
        tau_prev = state.tau;
        first_sweep = false;
    }

    if (split.active && best_sweep > 0) {
        const bool converged = state.converged || selection_done;
        auto elbo_trace = std::move(state.elbo_trace);
        auto weight_history = std::move(state.weight_history);
        state = std::move(best_state);
        state.elbo_trace = std::move(elbo_trace);
        state.weight_history = std::move(weight_history);
        state.converged = converged;
    }
    return state;
}

} // namespace vbip
