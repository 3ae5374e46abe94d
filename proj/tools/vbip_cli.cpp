// Command-line front end; talks to the library through the C API only.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vbip.h"

namespace {

struct ConfigDeleter {
    void operator()(vbip_config* c) const { vbip_config_free(c); }
};
struct ReportDeleter {
    void operator()(vbip_report* r) const { vbip_report_free(r); }
};
using ConfigPtr = std::unique_ptr<vbip_config, ConfigDeleter>;
using ReportPtr = std::unique_ptr<vbip_report, ReportDeleter>;

struct CommonArgs {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool out_set = false;
};

void add_common(CLI::App* app, CommonArgs& args) {
    app->add_option("--config", args.config_path, "experiment config (JSON)");
    app->add_option("--preset", args.preset, "built-in preset name");
    app->add_option("--seed", args.seed, "random seed override")
        ->each([&args](const std::string&) { args.seed_set = true; });
    app->add_option("--out", args.out_dir, "output directory override")
        ->each([&args](const std::string&) { args.out_set = true; });
}

ConfigPtr load_config(const CommonArgs& args) {
    vbip_config* raw = nullptr;
    int rc;
    if (!args.config_path.empty()) {
        rc = vbip_config_from_file(args.config_path.c_str(), &raw);
    } else if (!args.preset.empty()) {
        rc = vbip_config_from_preset(args.preset.c_str(), &raw);
    } else {
        std::fprintf(stderr, "error: pass --config <path> or --preset <name>\n");
        return nullptr;
    }
    if (rc != VBIP_OK) {
        std::fprintf(stderr, "error: %s\n", vbip_last_error());
        return nullptr;
    }
    ConfigPtr cfg(raw);
    if (args.seed_set) vbip_config_set_seed(cfg.get(), args.seed);
    if (args.out_set) vbip_config_set_output_dir(cfg.get(), args.out_dir.c_str());
    return cfg;
}

std::string config_json(const vbip_config* cfg) {
    size_t needed = 0;
    vbip_config_to_json(cfg, nullptr, 0, &needed);
    std::string text(needed, '\0');
    vbip_config_to_json(cfg, text.data(), text.size(), &needed);
    text.resize(needed ? needed - 1 : 0);
    return text;
}

std::string output_dir_of(const vbip_config* cfg) {
    const std::string json = config_json(cfg);
    // cheap extraction to avoid a JSON dependency in the CLI
    const std::string key = "\"directory\": \"";
    const auto pos = json.find(key);
    if (pos == std::string::npos) return "out";
    const auto end = json.find('"', pos + key.size());
    return json.substr(pos + key.size(), end - pos - key.size());
}

int run_and_write(const vbip_config* cfg, bool generate_only) {
    vbip_report* raw = nullptr;
    const int rc = generate_only ? vbip_generate_data(cfg, &raw)
                                 : vbip_run_experiment(cfg, &raw);
    if (rc != VBIP_OK) {
        std::fprintf(stderr, "error: %s\n", vbip_last_error());
        return 1;
    }
    ReportPtr report(raw);
    const std::string dir = output_dir_of(cfg);
    if (vbip_report_write(report.get(), dir.c_str()) != VBIP_OK) {
        std::fprintf(stderr, "error: %s\n", vbip_last_error());
        return 1;
    }

    double rel_error = 0.0, sigma_hat = 0.0, iterations = 0.0;
    vbip_report_scalar(report.get(), "rel_error", &rel_error);
    vbip_report_scalar(report.get(), "sigma_hat", &sigma_hat);
    vbip_report_scalar(report.get(), "iterations", &iterations);
    const int status = vbip_report_status(report.get());
    if (generate_only) {
        std::printf("wrote data to %s\n", dir.c_str());
    } else {
        std::printf("status=%d iterations=%d rel_error_linf=%.6g sigma_hat=%.6g -> %s\n",
                    status, int(iterations), rel_error, sigma_hat, dir.c_str());
    }
    return status == VBIP_STATUS_CONVERGED ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"variational Bayes solvers for the 1D Helmholtz inverse source problem"};
    app.require_subcommand(1);

    CommonArgs gen_args;
    CLI::App* gen = app.add_subcommand("generate-data", "write synthetic data CSV");
    add_common(gen, gen_args);

    CommonArgs inv_args;
    std::string model;
    CLI::App* inv = app.add_subcommand("invert", "run an inversion");
    inv->add_option("model", model, "gaussian | laplace | sequential")->required();
    add_common(inv, inv_args);

    CLI::App* oracle = app.add_subcommand("oracle-suite", "run the oracle cross-checks");

    CLI::App* presets = app.add_subcommand("presets", "preset utilities");
    CLI::App* presets_list = presets->add_subcommand("list", "list built-in presets");
    presets->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        ConfigPtr cfg = load_config(gen_args);
        if (!cfg) return 1;
        return run_and_write(cfg.get(), true);
    }
    if (inv->parsed()) {
        ConfigPtr cfg = load_config(inv_args);
        if (!cfg) return 1;
        if (vbip_config_set_model(cfg.get(), model.c_str()) != VBIP_OK) {
            std::fprintf(stderr, "error: %s\n", vbip_last_error());
            return 1;
        }
        return run_and_write(cfg.get(), false);
    }
    if (oracle->parsed()) {
        size_t needed = 0;
        vbip_oracle_suite(nullptr, 0, &needed);
        std::string text(needed, '\0');
        const int rc = vbip_oracle_suite(text.data(), text.size(), &needed);
        std::fputs(text.c_str(), stdout);
        if (rc != VBIP_OK) {
            std::printf("oracle suite: FAILED\n");
            return 1;
        }
        std::printf("oracle suite: all checks passed\n");
        return 0;
    }
    if (presets_list->parsed()) {
        size_t needed = 0;
        vbip_presets_list(nullptr, 0, &needed);
        std::string text(needed, '\0');
        vbip_presets_list(text.data(), text.size(), &needed);
        std::fputs(text.c_str(), stdout);
        return 0;
    }
    return 1;
}
