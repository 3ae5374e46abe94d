#include "vbip/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vbip/csv.hpp"
#include "vbip/oracle.hpp"

namespace vbip {

using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int nearest_node(const Grid1D& grid, double x) {
    const int i = static_cast<int>(std::lround((x - grid.a) / grid.spacing()));
    return std::clamp(i, 0, grid.n_nodes - 1);
}

Eigen::VectorXd interpolate_csv_profile(const std::string& path, const Grid1D& grid) {
    auto points = csv::read_xy(path);
    std::sort(points.begin(), points.end());
    Eigen::VectorXd out(grid.n_nodes);
    for (int i = 0; i < grid.n_nodes; ++i) {
        const double x = grid.node(i);
        if (x <= points.front().first) {
            out[i] = points.front().second;
        } else if (x >= points.back().first) {
            out[i] = points.back().second;
        } else {
            auto hi = std::upper_bound(points.begin(), points.end(), std::make_pair(x, 0.0));
            auto lo = hi - 1;
            const double t = (x - lo->first) / (hi->first - lo->first);
            out[i] = (1.0 - t) * lo->second + t * hi->second;
        }
    }
    return out;
}

Eigen::VectorXd resolve_profile(const std::string& kind, const std::string& csv_path,
                                const Grid1D& grid, const char* what) {
    if (kind == "csv") {
        if (csv_path.empty())
            throw std::invalid_argument(std::string(what) + ": csv profile without a path");
        return interpolate_csv_profile(csv_path, grid);
    }
    if (std::string(what) == "q" && kind == "zero") return Eigen::VectorXd::Zero(grid.n_nodes);
    return truth_profile(kind, grid);
}

struct DataLayout {
    std::vector<double> wavenumber;
    std::vector<int> point_index;
    std::vector<double> point_x;
    std::vector<std::string> component;
};

DataLayout build_layout(const std::vector<double>& wavenumbers, const Grid1D& grid,
                        const std::vector<int>& meas_nodes) {
    DataLayout layout;
    const int n_meas = static_cast<int>(meas_nodes.size());
    for (double kappa : wavenumbers)
        for (const char* comp : {"re", "im"})
            for (int m = 0; m < n_meas; ++m) {
                layout.wavenumber.push_back(kappa);
                layout.point_index.push_back(m);
                layout.point_x.push_back(grid.node(meas_nodes[m]));
                layout.component.emplace_back(comp);
            }
    return layout;
}

struct LoadedData {
    Eigen::VectorXd d;
    Eigen::VectorXd d_clean; // may be empty
    std::vector<std::uint8_t> corrupted;
};

LoadedData read_data_csv(const std::string& path, const DataLayout& expected) {
    const csv::Table table = csv::Table::read(path);
    const int c_kappa = table.column_index("wavenumber");
    const int c_point = table.column_index("point_index");
    const int c_comp = table.column_index("component");
    const int c_value = table.column_index("value");
    if (c_kappa < 0 || c_point < 0 || c_comp < 0 || c_value < 0)
        throw std::runtime_error("data csv misses a required column in " + path);
    const int c_clean = table.column_index("value_clean");
    const int c_corr = table.column_index("corrupted");

    const std::size_t n = expected.wavenumber.size();
    if (table.rows.size() != n) {
        std::ostringstream os;
        os << "data csv has " << table.rows.size() << " rows but the problem expects " << n;
        throw std::runtime_error(os.str());
    }
    LoadedData out;
    out.d.resize(n);
    if (c_clean >= 0) out.d_clean.resize(n);
    out.corrupted.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        const double kappa = std::stod(row[c_kappa]);
        if (std::abs(kappa - expected.wavenumber[i]) > 1e-9 * std::max(1.0, expected.wavenumber[i]))
            throw std::runtime_error("data csv wavenumber layout mismatch at row " +
                                     std::to_string(i + 1));
        if (std::stoi(row[c_point]) != expected.point_index[i] ||
            row[c_comp] != expected.component[i])
            throw std::runtime_error("data csv point/component layout mismatch at row " +
                                     std::to_string(i + 1));
        out.d[i] = std::stod(row[c_value]);
        if (c_clean >= 0) out.d_clean[i] = std::stod(row[c_clean]);
        if (c_corr >= 0) out.corrupted[i] = static_cast<std::uint8_t>(std::stoi(row[c_corr]));
    }
    return out;
}

} // namespace

Eigen::VectorXd truth_profile(const std::string& name, const Grid1D& grid) {
    const Eigen::VectorXd x = grid.nodes();
    if (name == "two-bumps")
        return 0.5 * (-300.0 * (x.array() - 0.4).square()).exp() +
               0.5 * (-300.0 * (x.array() - 0.6).square()).exp();
    if (name == "two-bumps-wide")
        return 0.6 * (-45.0 * (x.array() - 0.35).square()).exp() +
               0.9 * (-45.0 * (x.array() - 0.65).square()).exp();
    if (name == "one-bump") return (-300.0 * (x.array() - 0.5).square()).exp();
    if (name == "zero") return Eigen::VectorXd::Zero(grid.n_nodes);
    throw std::invalid_argument("unknown profile: " + name);
}

double relative_error_linf(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
    if (estimate.size() != truth.size())
        throw std::invalid_argument("relative_error_linf: length mismatch (project first)");
    const double scale = truth.cwiseAbs().maxCoeff();
    if (scale == 0.0) throw std::invalid_argument("relative_error_linf: truth is identically zero");
    return (estimate - truth).cwiseAbs().maxCoeff() / scale;
}

Band credible_band(const GaussianFactor& factor, double n_std) {
    const Eigen::VectorXd sd = pointwise_std(factor);
    return Band{factor.mean - n_std * sd, factor.mean + n_std * sd};
}

// ---- configuration ----

void ExperimentConfig::validate() const {
    Grid1D::make(problem.generation_nodes, problem.domain_a, problem.domain_b);
    Grid1D::make(problem.inversion_nodes, problem.domain_a, problem.domain_b);
    if (problem.wavenumbers.empty())
        throw std::invalid_argument("config: wavenumber schedule is empty");
    if (problem.measurement_points.empty())
        throw std::invalid_argument("config: no measurement points");
    if (problem.truth == "csv" && !std::filesystem::exists(problem.truth_csv))
        throw std::invalid_argument("config: truth csv does not exist: " + problem.truth_csv);
    if (problem.q == "csv" && !std::filesystem::exists(problem.q_csv))
        throw std::invalid_argument("config: q csv does not exist: " + problem.q_csv);
    if (!problem.data_csv.empty() && !std::filesystem::exists(problem.data_csv))
        throw std::invalid_argument("config: data csv does not exist: " + problem.data_csv);
    if (prior.p < 1) throw std::invalid_argument("config: prior.p must be >= 1");
    if (!(prior.epsilon > 0.0 && prior.epsilon <= 1.0))
        throw std::invalid_argument("config: prior.epsilon must be in (0,1]");
    if (noise.kind != "gaussian" && noise.kind != "impulsive")
        throw std::invalid_argument("config: noise.kind must be gaussian or impulsive");
    if (noise.kind == "gaussian" && !noise.sigma && !noise.relative_level)
        throw std::invalid_argument("config: gaussian noise needs sigma or relative_level");
    if (noise.kind == "impulsive") {
        if (!noise.r) throw std::invalid_argument("config: impulsive noise needs r");
        if (!noise.magnitude && !noise.relative_level)
            throw std::invalid_argument("config: impulsive noise needs magnitude or relative_level");
    }
    if (solver.model != "gaussian" && solver.model != "laplace" && solver.model != "sequential")
        throw std::invalid_argument("config: unknown solver.model " + solver.model);
    if (!(solver.tol > 0.0)) throw std::invalid_argument("config: tol must be > 0");
    if (solver.max_sweeps < 1) throw std::invalid_argument("config: max_sweeps must be >= 1");
    if (solver.sequential.inner_model != "gaussian" && solver.sequential.inner_model != "laplace")
        throw std::invalid_argument("config: sequential.inner_model must be gaussian or laplace");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("problem")) {
        const json& p = j.at("problem");
        if (p.contains("domain")) {
            cfg.problem.domain_a = p.at("domain").at(0).get<double>();
            cfg.problem.domain_b = p.at("domain").at(1).get<double>();
        }
        cfg.problem.generation_nodes = p.value("generation_nodes", cfg.problem.generation_nodes);
        cfg.problem.inversion_nodes = p.value("inversion_nodes", cfg.problem.inversion_nodes);
        cfg.problem.truth = p.value("truth", cfg.problem.truth);
        cfg.problem.truth_csv = p.value("truth_csv", cfg.problem.truth_csv);
        cfg.problem.q = p.value("q", cfg.problem.q);
        cfg.problem.q_csv = p.value("q_csv", cfg.problem.q_csv);
        cfg.problem.data_csv = p.value("data_csv", cfg.problem.data_csv);
        if (p.contains("wavenumbers")) {
            const json& w = p.at("wavenumbers");
            if (w.is_array()) {
                cfg.problem.wavenumbers = w.get<std::vector<double>>();
            } else {
                const double start = w.at("start").get<double>();
                const double step = w.at("step").get<double>();
                const int count = w.at("count").get<int>();
                cfg.problem.wavenumbers.clear();
                for (int i = 0; i < count; ++i)
                    cfg.problem.wavenumbers.push_back(start + i * step);
            }
        }
        if (p.contains("measurement_points"))
            cfg.problem.measurement_points = p.at("measurement_points").get<std::vector<double>>();
    }
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        cfg.prior.p = p.value("p", cfg.prior.p);
        cfg.prior.epsilon = p.value("epsilon", cfg.prior.epsilon);
    }
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        cfg.noise.kind = n.value("kind", cfg.noise.kind);
        if (n.contains("sigma") && !n.at("sigma").is_null())
            cfg.noise.sigma = n.at("sigma").get<double>();
        if (n.contains("relative_level") && !n.at("relative_level").is_null())
            cfg.noise.relative_level = n.at("relative_level").get<double>();
        if (n.contains("r") && !n.at("r").is_null()) cfg.noise.r = n.at("r").get<double>();
        if (n.contains("magnitude") && !n.at("magnitude").is_null())
            cfg.noise.magnitude = n.at("magnitude").get<double>();
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        cfg.solver.model = s.value("model", cfg.solver.model);
        cfg.solver.alpha0 = s.value("alpha0", cfg.solver.alpha0);
        cfg.solver.beta0 = s.value("beta0", cfg.solver.beta0);
        cfg.solver.alpha1 = s.value("alpha1", cfg.solver.alpha1);
        cfg.solver.beta1 = s.value("beta1", cfg.solver.beta1);
        cfg.solver.tau_init = s.value("tau_init", cfg.solver.tau_init);
        cfg.solver.tol = s.value("tol", cfg.solver.tol);
        cfg.solver.max_sweeps = s.value("max_sweeps", cfg.solver.max_sweeps);
        if (s.contains("sequential")) {
            const json& q = s.at("sequential");
            cfg.solver.sequential.inner_sweeps =
                q.value("inner_sweeps", cfg.solver.sequential.inner_sweeps);
            cfg.solver.sequential.inner_model =
                q.value("inner_model", cfg.solver.sequential.inner_model);
            cfg.solver.sequential.map_refine =
                q.value("map_refine", cfg.solver.sequential.map_refine);
            cfg.solver.sequential.map_steps = q.value("map_steps", cfg.solver.sequential.map_steps);
            cfg.solver.sequential.map_step_size =
                q.value("map_step_size", cfg.solver.sequential.map_step_size);
            cfg.solver.sequential.relaxation =
                q.value("relaxation", cfg.solver.sequential.relaxation);
        }
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        cfg.output.directory = o.value("directory", cfg.output.directory);
        cfg.output.seed = o.value("seed", cfg.output.seed);
        cfg.output.write_eigensystem =
            o.value("write_eigensystem", cfg.output.write_eigensystem);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    in >> j;
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    j["problem"] = {{"domain", {problem.domain_a, problem.domain_b}},
                    {"generation_nodes", problem.generation_nodes},
                    {"inversion_nodes", problem.inversion_nodes},
                    {"truth", problem.truth},
                    {"truth_csv", problem.truth_csv},
                    {"q", problem.q},
                    {"q_csv", problem.q_csv},
                    {"data_csv", problem.data_csv},
                    {"wavenumbers", problem.wavenumbers},
                    {"measurement_points", problem.measurement_points}};
    json n = {{"kind", noise.kind}};
    if (noise.sigma) n["sigma"] = *noise.sigma;
    if (noise.relative_level) n["relative_level"] = *noise.relative_level;
    if (noise.r) n["r"] = *noise.r;
    if (noise.magnitude) n["magnitude"] = *noise.magnitude;
    j["noise"] = n;
    j["prior"] = {{"p", prior.p}, {"epsilon", prior.epsilon}};
    j["solver"] = {{"model", solver.model},
                   {"alpha0", solver.alpha0},
                   {"beta0", solver.beta0},
                   {"alpha1", solver.alpha1},
                   {"beta1", solver.beta1},
                   {"tau_init", solver.tau_init},
                   {"tol", solver.tol},
                   {"max_sweeps", solver.max_sweeps},
                   {"sequential",
                    {{"inner_sweeps", solver.sequential.inner_sweeps},
                     {"inner_model", solver.sequential.inner_model},
                     {"map_refine", solver.sequential.map_refine},
                     {"map_steps", solver.sequential.map_steps},
                     {"map_step_size", solver.sequential.map_step_size},
                     {"relaxation", solver.sequential.relaxation}}}};
    j["output"] = {{"directory", output.directory},
                   {"seed", output.seed},
                   {"write_eigensystem", output.write_eigensystem}};
    return j;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.problem.wavenumbers.clear();
    for (int i = 1; i <= 100; ++i) cfg.problem.wavenumbers.push_back(0.5 * i);
    cfg.problem.measurement_points = {0.0, 1.0};
    cfg.output.directory = "out/" + name;

    if (name == "gaussian-1d") {
        cfg.noise.sigma = 1e-3;
        return cfg;
    }
    if (name == "laplace-1d") {
        cfg.noise.kind = "impulsive";
        cfg.noise.r = 0.5;
        cfg.noise.magnitude = 0.1;
        cfg.solver.model = "laplace";
        return cfg;
    }
    if (name == "gaussian-1d-small") {
        cfg.problem.generation_nodes = 500;
        cfg.problem.inversion_nodes = 200;
        cfg.problem.wavenumbers.clear();
        for (int i = 1; i <= 40; ++i) cfg.problem.wavenumbers.push_back(0.5 * i);
        cfg.noise.sigma = 1e-3;
        return cfg;
    }
    if (name == "sequential-1d") {
        cfg.problem.inversion_nodes = 300;
        cfg.problem.truth = "two-bumps-wide"; // resolvable from the kappa <= 20 band
        cfg.problem.wavenumbers.clear();
        for (int i = 1; i <= 20; ++i) cfg.problem.wavenumbers.push_back(double(i));
        // Several receivers per side, all outside the source support, so each
        // single-frequency batch carries enough rows for a stable tau update.
        cfg.problem.measurement_points.clear();
        for (int i = 0; i < 10; ++i) {
            cfg.problem.measurement_points.push_back(0.012 * i);
            cfg.problem.measurement_points.push_back(1.0 - 0.012 * i);
        }
        std::sort(cfg.problem.measurement_points.begin(), cfg.problem.measurement_points.end());
        cfg.noise.relative_level = 0.05;
        cfg.solver.model = "sequential";
        cfg.solver.sequential.relaxation = 0.25;
        return cfg;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::preset_list() {
    return {
        {"gaussian-1d", "1D inverse source, 100 wavenumbers, Gaussian noise sigma=1e-3"},
        {"laplace-1d", "1D inverse source, impulsive noise (r=0.5, magnitude=0.1), Laplace solver"},
        {"gaussian-1d-small", "reduced gaussian-1d (200-node inversion grid, 40 wavenumbers)"},
        {"sequential-1d", "frequency marching on kappa=1..20 with 5% relative Gaussian noise"},
    };
}

// ---- experiment driver ----

namespace {

struct Assembled {
    Grid1D gen_grid, inv_grid;
    HelmholtzProblem fine, coarse;
    Eigen::VectorXd truth_gen, truth_inv;
    DataLayout layout;
};

Assembled assemble_problem(const ExperimentConfig& cfg) {
    Assembled a;
    a.gen_grid = Grid1D::make(cfg.problem.generation_nodes, cfg.problem.domain_a,
                              cfg.problem.domain_b);
    a.inv_grid = Grid1D::make(cfg.problem.inversion_nodes, cfg.problem.domain_a,
                              cfg.problem.domain_b);
    a.truth_gen = resolve_profile(cfg.problem.truth, cfg.problem.truth_csv, a.gen_grid, "truth");
    a.truth_inv = project_between_grids(a.truth_gen, a.gen_grid, a.inv_grid);

    a.fine.grid = a.gen_grid;
    a.fine.q = resolve_profile(cfg.problem.q, cfg.problem.q_csv, a.gen_grid, "q");
    a.fine.wavenumbers = cfg.problem.wavenumbers;
    a.coarse.grid = a.inv_grid;
    a.coarse.q = resolve_profile(cfg.problem.q, cfg.problem.q_csv, a.inv_grid, "q");
    a.coarse.wavenumbers = cfg.problem.wavenumbers;
    for (double x : cfg.problem.measurement_points) {
        a.fine.meas_nodes.push_back(nearest_node(a.gen_grid, x));
        a.coarse.meas_nodes.push_back(nearest_node(a.inv_grid, x));
    }
    a.fine.validate();
    a.coarse.validate();
    a.layout = build_layout(cfg.problem.wavenumbers, a.gen_grid, a.fine.meas_nodes);
    return a;
}

NoiseSpec resolve_noise(const NoiseConfig& cfg, double scale, std::uint64_t seed) {
    NoiseSpec spec;
    spec.seed = seed;
    if (cfg.kind == "gaussian") {
        spec.kind = NoiseSpec::Kind::gaussian;
        spec.sigma = cfg.sigma ? *cfg.sigma : *cfg.relative_level * scale;
    } else {
        spec.kind = NoiseSpec::Kind::impulsive;
        spec.r = *cfg.r;
        spec.magnitude = cfg.magnitude ? *cfg.magnitude : *cfg.relative_level * scale;
    }
    spec.validate();
    return spec;
}

LoadedData make_data(const ExperimentConfig& cfg, const Assembled& a) {
    if (!cfg.problem.data_csv.empty()) return read_data_csv(cfg.problem.data_csv, a.layout);

    LoadedData out;
    const int n_meas_rows = 2 * static_cast<int>(a.fine.meas_nodes.size());
    if (cfg.solver.model == "sequential") {
        // Per-frequency noise scale, matching the frequency-by-frequency setup.
        const int n_freq = static_cast<int>(cfg.problem.wavenumbers.size());
        out.d.resize(n_meas_rows * n_freq);
        out.d_clean.resize(n_meas_rows * n_freq);
        out.corrupted.assign(out.d.size(), 0);
        for (int f = 0; f < n_freq; ++f) {
            const ForwardStack stack = assemble_forward_stack(
                a.fine.with_single_wavenumber(cfg.problem.wavenumbers[f]));
            const Eigen::VectorXd clean = stack.apply(a.truth_gen);
            const NoiseSpec spec = resolve_noise(cfg.noise, data_magnitude_scale(clean),
                                                 mix_seed(cfg.output.seed, f));
            const NoisyData noisy = generate_data(stack, a.truth_gen, spec);
            out.d.segment(f * n_meas_rows, n_meas_rows) = noisy.d;
            out.d_clean.segment(f * n_meas_rows, n_meas_rows) = clean;
            std::copy(noisy.corrupted.begin(), noisy.corrupted.end(),
                      out.corrupted.begin() + f * n_meas_rows);
        }
        return out;
    }
    const ForwardStack stack = assemble_forward_stack(a.fine);
    out.d_clean = stack.apply(a.truth_gen);
    const NoiseSpec spec =
        resolve_noise(cfg.noise, data_magnitude_scale(out.d_clean), cfg.output.seed);
    const NoisyData noisy = generate_data(stack, a.truth_gen, spec);
    out.d = noisy.d;
    out.corrupted = noisy.corrupted;
    return out;
}

void fill_layout(RunReport& report, const DataLayout& layout) {
    report.data_wavenumbers = layout.wavenumber;
    report.data_point_index = layout.point_index;
    report.data_point_x = layout.point_x;
    report.data_component = layout.component;
}

void fill_factor(RunReport& report, const GaussianFactor& factor,
                 const Eigen::VectorXd& truth_inv) {
    report.mean = factor.mean;
    report.std_dev = pointwise_std(factor);
    const Band band = credible_band(factor);
    report.lower = band.lower;
    report.upper = band.upper;
    report.rel_error = relative_error_linf(factor.mean, truth_inv);
}

} // namespace

RunReport generate_data_only(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Assembled a = assemble_problem(cfg);
    const LoadedData data = make_data(cfg, a);

    RunReport report;
    report.model = "generate-data";
    report.seed = cfg.output.seed;
    report.data = data.d;
    report.data_clean = data.d_clean;
    report.corrupted = data.corrupted;
    fill_layout(report, a.layout);
    report.n_data = static_cast<int>(data.d.size());
    report.config_echo = cfg.to_json().dump(2);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Assembled a = assemble_problem(cfg);
    const LoadedData data = make_data(cfg, a);

    RunReport report;
    report.model = cfg.solver.model;
    report.seed = cfg.output.seed;
    report.grid_x = a.inv_grid.nodes();
    report.truth = a.truth_inv;
    report.data = data.d;
    report.data_clean = data.d_clean;
    report.corrupted = data.corrupted;
    fill_layout(report, a.layout);
    report.n_data = static_cast<int>(data.d.size());
    report.config_echo = cfg.to_json().dump(2);

    auto eigsys = std::make_shared<const EigenSystem>(
        build_eigensystem(a.inv_grid, cfg.prior.p, a.inv_grid.n_nodes - 2));
    const TruncatedPrior prior = make_truncated_prior(eigsys, cfg.prior.epsilon);
    report.intrinsic_dim = prior.K;
    report.prior_eigvals = eigsys->eigvals;
    if (cfg.output.write_eigensystem) report.prior_eigvecs = eigsys->eigvecs;

    if (cfg.solver.model == "gaussian") {
        const ForwardStack stack = assemble_forward_stack(a.coarse);
        GaussianHyper hyper{cfg.solver.alpha0, cfg.solver.beta0, cfg.solver.alpha1,
                            cfg.solver.beta1};
        VbOptions options;
        options.tol = cfg.solver.tol;
        options.max_sweeps = cfg.solver.max_sweeps;
        options.on_sweep = [&](const VBState& s) {
            report.rel_u_trace.push_back(s.rel_changes.u);
            report.rel_lambda_trace.push_back(s.rel_changes.lambda);
            report.rel_tau_trace.push_back(s.rel_changes.tau);
            report.lambda_trace.push_back(s.lambda_factor.mean());
            report.tau_trace.push_back(s.tau_factor.mean());
            report.rel_error_trace.push_back(relative_error_linf(s.u_factor.mean, a.truth_inv));
        };
        const VBState state = run_vb_gaussian(stack, data.d, prior, hyper, options);
        report.status = state.converged ? 0 : 2;
        report.iterations = state.iterations;
        report.elbo_trace = state.elbo_trace;
        report.lambda_final = state.lambda_factor.mean();
        report.tau_final = state.tau_factor.mean();
        report.sigma_hat = std::sqrt(1.0 / report.tau_final);
        fill_factor(report, state.u_factor, a.truth_inv);
    } else if (cfg.solver.model == "laplace") {
        const ForwardStack stack = assemble_forward_stack(a.coarse);
        LaplaceHyper hyper{cfg.solver.alpha0, cfg.solver.beta0, cfg.solver.tau_init};
        LaplaceOptions options;
        options.tol = cfg.solver.tol;
        options.max_sweeps = cfg.solver.max_sweeps;
        options.validation_seed = mix_seed(cfg.output.seed, 0xA11D);
        options.on_sweep = [&](const LaplaceVBState& s) {
            report.rel_u_trace.push_back(s.rel_changes.u);
            report.rel_lambda_trace.push_back(s.rel_changes.lambda);
            report.rel_tau_trace.push_back(s.rel_changes.tau);
            report.lambda_trace.push_back(s.lambda_factor.mean());
            report.tau_trace.push_back(s.tau);
            report.rel_error_trace.push_back(relative_error_linf(s.u_factor.mean, a.truth_inv));
        };
        const LaplaceVBState state = run_vb_laplace(stack, data.d, prior, hyper, options);
        report.status = state.converged ? 0 : 2;
        report.iterations = state.iterations;
        report.elbo_trace = state.elbo_trace;
        report.weight_history = state.weight_history;
        // iterate selection may return an earlier sweep; keep traces aligned
        const std::size_t kept = static_cast<std::size_t>(state.iterations);
        for (auto* trace : {&report.rel_u_trace, &report.rel_lambda_trace,
                            &report.rel_tau_trace, &report.lambda_trace, &report.tau_trace,
                            &report.rel_error_trace, &report.elbo_trace})
            if (trace->size() > kept) trace->resize(kept);
        if (report.weight_history.size() > kept) report.weight_history.resize(kept);
        report.lambda_final = state.lambda_factor.mean();
        report.tau_final = state.tau;
        report.sigma_hat = std::sqrt(state.tau); // tau is the Laplace noise variance
        fill_factor(report, state.u_factor, a.truth_inv);
    } else {
        FrequencySchedule schedule;
        schedule.wavenumbers = cfg.problem.wavenumbers;
        schedule.inner_sweeps = cfg.solver.sequential.inner_sweeps;
        schedule.inner_model = cfg.solver.sequential.inner_model == "laplace"
                                   ? InnerModel::laplace
                                   : InnerModel::gaussian;
        std::vector<FrequencyData> per_freq;
        const int rows = 2 * static_cast<int>(a.coarse.meas_nodes.size());
        for (std::size_t f = 0; f < schedule.wavenumbers.size(); ++f)
            per_freq.push_back({schedule.wavenumbers[f],
                                data.d.segment(static_cast<Eigen::Index>(f) * rows, rows)});

        SequentialOptions options;
        options.gaussian_hyper = GaussianHyper{cfg.solver.alpha0, cfg.solver.beta0,
                                               cfg.solver.alpha1, cfg.solver.beta1};
        options.laplace_hyper =
            LaplaceHyper{cfg.solver.alpha0, cfg.solver.beta0, cfg.solver.tau_init};
        options.truth_for_diagnostics = a.truth_inv;
        options.map_refine = cfg.solver.sequential.map_refine;
        options.map_steps = cfg.solver.sequential.map_steps;
        options.map_step_size = cfg.solver.sequential.map_step_size;
        options.relaxation = cfg.solver.sequential.relaxation;

        const SequentialResult result =
            run_sequential(a.coarse, schedule, per_freq, prior, options);
        if (!result.completed)
            throw std::runtime_error("sequential run failed: " + result.error);
        report.status = 0;
        report.iterations = static_cast<int>(result.per_frequency.size());
        report.frequencies = result.per_frequency;
        for (const FrequencyRecord& rec : result.per_frequency) {
            report.rel_error_trace.push_back(rec.rel_error_linf);
            report.lambda_trace.push_back(rec.lambda_mean);
            report.tau_trace.push_back(rec.tau_mean);
        }
        report.lambda_final = report.lambda_trace.back();
        report.tau_final = report.tau_trace.back();
        if (const VBState* s = std::get_if<VBState>(&result.final_state)) {
            report.sigma_hat = std::sqrt(1.0 / report.tau_final);
            fill_factor(report, s->u_factor, a.truth_inv);
        } else if (const LaplaceVBState* s = std::get_if<LaplaceVBState>(&result.final_state)) {
            report.sigma_hat = std::sqrt(report.tau_final);
            fill_factor(report, s->u_factor, a.truth_inv);
        }
        // The band quantifies the last single-frequency posterior; the mean is
        // the full chained estimate.
        report.rel_error = result.per_frequency.back().rel_error_linf;
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---- report output ----

namespace {

void write_data_csv(const RunReport& report, const std::string& path) {
    csv::Table table;
    const bool with_clean = report.data_clean.size() == report.data.size();
    table.columns = {"wavenumber", "point_index", "point_x", "component", "value"};
    if (with_clean) table.columns.push_back("value_clean");
    table.columns.push_back("corrupted");
    for (Eigen::Index i = 0; i < report.data.size(); ++i) {
        std::vector<std::string> row = {
            csv::format_double(report.data_wavenumbers[i]),
            std::to_string(report.data_point_index[i]),
            csv::format_double(report.data_point_x[i]),
            report.data_component[i],
            csv::format_double(report.data[i]),
        };
        if (with_clean) row.push_back(csv::format_double(report.data_clean[i]));
        row.push_back(std::to_string(int(report.corrupted.empty() ? 0 : report.corrupted[i])));
        table.rows.push_back(std::move(row));
    }
    table.write(path);
}

std::string freq_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "freq_%03zu_mean.csv", index);
    return buf;
}

} // namespace

void write_report(const RunReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

    {
        std::ofstream out(path("config_resolved.json"), std::ios::binary);
        out << report.config_echo << "\n";
    }
    {
        std::ofstream out(path("summary.txt"), std::ios::binary);
        out << "model = " << report.model << "\n"
            << "status = " << report.status << "\n"
            << "seed = " << report.seed << "\n"
            << "n_data = " << report.n_data << "\n"
            << "intrinsic_dim = " << report.intrinsic_dim << "\n"
            << "iterations = " << report.iterations << "\n"
            << "lambda = " << csv::format_double(report.lambda_final) << "\n"
            << "tau = " << csv::format_double(report.tau_final) << "\n"
            << "sigma_hat = " << csv::format_double(report.sigma_hat) << "\n"
            << "rel_error_linf = " << csv::format_double(report.rel_error) << "\n"
            << "wall_seconds = " << csv::format_double(report.wall_seconds) << "\n";
    }
    if (report.data.size()) write_data_csv(report, path("data.csv"));
    if (report.mean.size()) {
        csv::Table table;
        table.columns = {"x", "truth", "mean", "std", "lower", "upper"};
        for (Eigen::Index i = 0; i < report.mean.size(); ++i)
            table.rows.push_back({csv::format_double(report.grid_x[i]),
                                  csv::format_double(report.truth[i]),
                                  csv::format_double(report.mean[i]),
                                  csv::format_double(report.std_dev[i]),
                                  csv::format_double(report.lower[i]),
                                  csv::format_double(report.upper[i])});
        table.write(path("mean.csv"));
    }
    if (!report.lambda_trace.empty() && report.model != "sequential") {
        csv::Table table;
        table.columns = {"sweep",       "rel_u", "rel_lambda", "rel_tau",
                         "lambda_mean", "tau",   "elbo",       "rel_error_linf"};
        for (std::size_t k = 0; k < report.lambda_trace.size(); ++k)
            table.rows.push_back({std::to_string(k + 1),
                                  csv::format_double(report.rel_u_trace[k]),
                                  csv::format_double(report.rel_lambda_trace[k]),
                                  csv::format_double(report.rel_tau_trace[k]),
                                  csv::format_double(report.lambda_trace[k]),
                                  csv::format_double(report.tau_trace[k]),
                                  csv::format_double(report.elbo_trace[k]),
                                  csv::format_double(report.rel_error_trace[k])});
        table.write(path("trace.csv"));
    }
    if (!report.weight_history.empty()) {
        csv::Table table;
        table.columns = {"sweep", "data_index", "weight_mean"};
        for (std::size_t k = 0; k < report.weight_history.size(); ++k)
            for (Eigen::Index i = 0; i < report.weight_history[k].size(); ++i)
                table.rows.push_back({std::to_string(k + 1), std::to_string(i),
                                      csv::format_double(report.weight_history[k][i])});
        table.write(path("weights.csv"));
    }
    if (!report.frequencies.empty()) {
        csv::Table table;
        table.columns = {"index", "wavenumber", "rel_error_linf", "lambda_mean", "tau"};
        for (std::size_t f = 0; f < report.frequencies.size(); ++f) {
            const FrequencyRecord& rec = report.frequencies[f];
            table.rows.push_back({std::to_string(f), csv::format_double(rec.wavenumber),
                                  csv::format_double(rec.rel_error_linf),
                                  csv::format_double(rec.lambda_mean),
                                  csv::format_double(rec.tau_mean)});
            csv::Table mean_table;
            mean_table.columns = {"x", "mean"};
            for (Eigen::Index i = 0; i < rec.mean.size(); ++i)
                mean_table.rows.push_back({csv::format_double(report.grid_x[i]),
                                           csv::format_double(rec.mean[i])});
            mean_table.write(path(freq_file_name(f).c_str()));
        }
        table.write(path("frequencies.csv"));
    }
    if (report.prior_eigvals.size()) {
        csv::Table table;
        table.columns = {"mode", "alpha"};
        for (Eigen::Index j = 0; j < report.prior_eigvals.size(); ++j)
            table.rows.push_back({std::to_string(j + 1),
                                  csv::format_double(report.prior_eigvals[j])});
        table.write(path("eigenvalues.csv"));
    }
    if (report.prior_eigvecs.size()) {
        csv::Table table;
        table.columns = {"x"};
        for (Eigen::Index j = 0; j < report.prior_eigvecs.cols(); ++j)
            table.columns.push_back("mode_" + std::to_string(j + 1));
        for (Eigen::Index i = 0; i < report.prior_eigvecs.rows(); ++i) {
            std::vector<std::string> row = {csv::format_double(report.grid_x[i])};
            for (Eigen::Index j = 0; j < report.prior_eigvecs.cols(); ++j)
                row.push_back(csv::format_double(report.prior_eigvecs(i, j)));
            table.rows.push_back(std::move(row));
        }
        table.write(path("eigensystem.csv"));
    }
}

} // namespace vbip
