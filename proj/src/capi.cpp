#include "vbip.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "vbip/experiment.hpp"
#include "vbip/oracle.hpp"

struct vbip_config {
    vbip::ExperimentConfig cfg;
};

struct vbip_report {
    vbip::RunReport report;
};

namespace {

thread_local std::string g_last_error = "ok";

int fail(int code, const char* what) {
    g_last_error = what;
    return code;
}

int catch_all(const std::exception& e) {
    g_last_error = e.what();
    if (dynamic_cast<const std::invalid_argument*>(&e)) return VBIP_ERR_ARGUMENT;
    return VBIP_ERR_NUMERIC;
}

int copy_out(const std::string& text, char* buf, size_t cap, size_t* needed) {
    if (needed) *needed = text.size() + 1;
    if (!buf) return VBIP_OK;
    if (cap < text.size() + 1) return fail(VBIP_ERR_BUFFER, "output buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return VBIP_OK;
}

} // namespace

extern "C" {

const char* vbip_version(void) { return "0.1.0"; }

const char* vbip_last_error(void) { return g_last_error.c_str(); }

int vbip_config_from_file(const char* path, vbip_config** out) {
    if (!path || !out) return fail(VBIP_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    try {
        if (!std::filesystem::exists(path)) return fail(VBIP_ERR_IO, "config file not found");
        *out = new vbip_config{vbip::ExperimentConfig::from_file(path)};
        return VBIP_OK;
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

int vbip_config_from_string(const char* json_text, vbip_config** out) {
    if (!json_text || !out) return fail(VBIP_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    try {
        *out = new vbip_config{
            vbip::ExperimentConfig::from_json(nlohmann::json::parse(json_text))};
        return VBIP_OK;
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

int vbip_config_from_preset(const char* name, vbip_config** out) {
    if (!name || !out) return fail(VBIP_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    try {
        *out = new vbip_config{vbip::ExperimentConfig::preset(name)};
        return VBIP_OK;
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

int vbip_config_set_seed(vbip_config* cfg, uint64_t seed) {
    if (!cfg) return fail(VBIP_ERR_ARGUMENT, "null config");
    cfg->cfg.output.seed = seed;
    return VBIP_OK;
}

int vbip_config_set_output_dir(vbip_config* cfg, const char* dir) {
    if (!cfg || !dir) return fail(VBIP_ERR_ARGUMENT, "null argument");
    cfg->cfg.output.directory = dir;
    return VBIP_OK;
}

int vbip_config_set_model(vbip_config* cfg, const char* model) {
    if (!cfg || !model) return fail(VBIP_ERR_ARGUMENT, "null argument");
    const std::string m = model;
    if (m != "gaussian" && m != "laplace" && m != "sequential")
        return fail(VBIP_ERR_ARGUMENT, "model must be gaussian, laplace or sequential");
    cfg->cfg.solver.model = m;
    return VBIP_OK;
}

int vbip_config_to_json(const vbip_config* cfg, char* buf, size_t cap, size_t* needed) {
    if (!cfg) return fail(VBIP_ERR_ARGUMENT, "null config");
    try {
        return copy_out(cfg->cfg.to_json().dump(2), buf, cap, needed);
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

void vbip_config_free(vbip_config* cfg) { delete cfg; }

int vbip_generate_data(const vbip_config* cfg, vbip_report** out) {
    if (!cfg || !out) return fail(VBIP_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    try {
        *out = new vbip_report{vbip::generate_data_only(cfg->cfg)};
        return VBIP_OK;
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

int vbip_run_experiment(const vbip_config* cfg, vbip_report** out) {
    if (!cfg || !out) return fail(VBIP_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    try {
        *out = new vbip_report{vbip::run_experiment(cfg->cfg)};
        return VBIP_OK;
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

int vbip_report_status(const vbip_report* rep) {
    if (!rep) return VBIP_ERR_ARGUMENT;
    return rep->report.status;
}

int vbip_report_scalar(const vbip_report* rep, const char* key, double* out) {
    if (!rep || !key || !out) return fail(VBIP_ERR_ARGUMENT, "null argument");
    const vbip::RunReport& r = rep->report;
    const std::string k = key;
    if (k == "sigma_hat") *out = r.sigma_hat;
    else if (k == "tau") *out = r.tau_final;
    else if (k == "lambda") *out = r.lambda_final;
    else if (k == "rel_error") *out = r.rel_error;
    else if (k == "iterations") *out = r.iterations;
    else if (k == "n_data") *out = r.n_data;
    else if (k == "intrinsic_dim") *out = r.intrinsic_dim;
    else if (k == "seed") *out = static_cast<double>(r.seed);
    else if (k == "wall_seconds") *out = r.wall_seconds;
    else return fail(VBIP_ERR_ARGUMENT, "unknown report scalar");
    return VBIP_OK;
}

int vbip_report_write(const vbip_report* rep, const char* dir) {
    if (!rep || !dir) return fail(VBIP_ERR_ARGUMENT, "null argument");
    try {
        vbip::write_report(rep->report, dir);
        return VBIP_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VBIP_ERR_IO;
    }
}

void vbip_report_free(vbip_report* rep) { delete rep; }

int vbip_oracle_suite(char* buf, size_t cap, size_t* needed) {
    try {
        const vbip::oracle::SuiteResult suite = vbip::oracle::run_oracle_suite();
        const int rc = copy_out(suite.report, buf, cap, needed);
        if (rc != VBIP_OK) return rc;
        if (!suite.all_passed) return fail(VBIP_ERR_NUMERIC, "oracle suite reported failures");
        return VBIP_OK;
    } catch (const std::exception& e) {
        return catch_all(e);
    }
}

int vbip_presets_list(char* buf, size_t cap, size_t* needed) {
    std::string text;
    for (const auto& [name, desc] : vbip::ExperimentConfig::preset_list())
        text += name + ": " + desc + "\n";
    return copy_out(text, buf, cap, needed);
}

} // extern "C"
