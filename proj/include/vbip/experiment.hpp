#ifndef VBIP_EXPERIMENT_HPP
#define VBIP_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "vbip/sequential.hpp"

namespace vbip {

struct ProblemConfig {
    double domain_a = 0.0;
    double domain_b = 1.0;
    int generation_nodes = 1000;
    int inversion_nodes = 600;
    std::string truth = "two-bumps"; // built-in profile name or "csv"
    std::string truth_csv;
    std::string q = "zero"; // "zero" or "csv"
    std::string q_csv;
    std::vector<double> wavenumbers;
    std::vector<double> measurement_points; // coordinates, snapped to nearest node
    std::string data_csv; // optional: invert this data instead of generating
};

struct PriorConfig {
    int p = 1;
    double epsilon = 1e-3;
};

struct NoiseConfig {
    std::string kind = "gaussian"; // "gaussian" | "impulsive"
    std::optional<double> sigma;
    std::optional<double> relative_level; // sigma or magnitude = level * max|d_clean|
    std::optional<double> r;
    std::optional<double> magnitude;
};

struct SequentialConfig {
    int inner_sweeps = 3;
    std::string inner_model = "gaussian";
    bool map_refine = false;
    int map_steps = 50;
    double map_step_size = 0.0;
    double relaxation = 1.0;
};

struct SolverConfig {
    std::string model = "gaussian"; // "gaussian" | "laplace" | "sequential"
    double alpha0 = 1.0;
    double beta0 = 1e-1;
    double alpha1 = 1.0;
    double beta1 = 1e-5;
    double tau_init = 1e-7;
    double tol = 1e-4;
    int max_sweeps = 200;
    SequentialConfig sequential;
};

struct OutputConfig {
    std::string directory = "out";
    std::uint64_t seed = 1;
    bool write_eigensystem = false;
};

struct ExperimentConfig {
    ProblemConfig problem;
    PriorConfig prior;
    NoiseConfig noise;
    SolverConfig solver;
    OutputConfig output;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig preset(const std::string& name);
    static std::vector<std::pair<std::string, std::string>> preset_list(); // name, description

    nlohmann::json to_json() const;
    void validate() const;
};

/// ||estimate - truth||_inf / ||truth||_inf.
double relative_error_linf(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

struct Band {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

/// Pointwise mean -/+ n_std * std band.
Band credible_band(const GaussianFactor& factor, double n_std = 2.0);

struct RunReport {
    int status = 0; // 0 converged, 2 flagged non-convergence
    std::string model;
    std::uint64_t seed = 0;

    Eigen::VectorXd grid_x;
    Eigen::VectorXd truth;   // on the inversion grid
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    std::vector<double> rel_u_trace, rel_lambda_trace, rel_tau_trace;
    std::vector<double> lambda_trace, tau_trace, elbo_trace, rel_error_trace;
    std::vector<Eigen::VectorXd> weight_history;
    std::vector<FrequencyRecord> frequencies;

    Eigen::VectorXd data;       // as inverted / generated
    Eigen::VectorXd data_clean; // empty when data came from a file
    std::vector<std::uint8_t> corrupted;
    std::vector<double> data_wavenumbers;
    std::vector<int> data_point_index;
    std::vector<double> data_point_x;
    std::vector<std::string> data_component;

    double sigma_hat = 0.0;
    double tau_final = 0.0;
    double lambda_final = 0.0;
    double rel_error = 0.0;
    int intrinsic_dim = 0;
    int n_data = 0;
    int iterations = 0;
    double wall_seconds = 0.0;
    std::string config_echo; // resolved config as JSON text

    Eigen::VectorXd prior_eigvals;
    Eigen::MatrixXd prior_eigvecs; // filled only when output.write_eigensystem
};

/// Generate data on the fine grid, invert on the coarse grid; deterministic per seed.
RunReport run_experiment(const ExperimentConfig& config);

/// Data-generation half of run_experiment only.
RunReport generate_data_only(const ExperimentConfig& config);

/// Writes the report's CSV files, summary.txt and config_resolved.json into dir.
void write_report(const RunReport& report, const std::string& dir);

/// Built-in source profile ("two-bumps", ...) evaluated on a grid.
Eigen::VectorXd truth_profile(const std::string& name, const Grid1D& grid);

} // namespace vbip

#endif
