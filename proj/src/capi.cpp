#include "cubicon.h"

#include "cubicon/config.hpp"
#include "cubicon/dynamics.hpp"
#include "cubicon/errors.hpp"
#include "cubicon/report.hpp"
#include "cubicon/selftest.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

using namespace cubicon;

namespace {

thread_local std::string g_last_error;

cubicon_status classify(const Error& e) {
    std::string name = e.name();
    if (name == "ConfigError" || name == "ParseError") return CUBICON_ERR_CONFIG;
    if (name == "IoError") return CUBICON_ERR_IO;
    if (name == "NotTrapping") return CUBICON_ERR_NOT_TRAPPING;
    if (name == "NotIsolated" || name == "ContinuationBroken") return CUBICON_ERR_NOT_ISOLATED;
    return CUBICON_ERR_RUNTIME;
}

template <class Fn>
cubicon_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const Error& e) {
        g_last_error = e.what();
        return classify(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CUBICON_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return CUBICON_ERR_INTERNAL;
    }
}

cubicon_status invalid(const char* msg) {
    g_last_error = msg;
    return CUBICON_ERR_INVALID_ARGUMENT;
}

} // namespace

struct cubicon_flow {
    ParametrizedFlow flow;
};

struct cubicon_config {
    RunConfig cfg;
};

struct cubicon_result {
    RunResult run;
};

extern "C" {

const char* cubicon_status_name(cubicon_status status) {
    switch (status) {
        case CUBICON_OK: return "ok";
        case CUBICON_ERR_INVALID_ARGUMENT: return "invalid argument";
        case CUBICON_ERR_CONFIG: return "configuration error";
        case CUBICON_ERR_IO: return "i/o error";
        case CUBICON_ERR_NOT_TRAPPING: return "region not trapping";
        case CUBICON_ERR_NOT_ISOLATED: return "invariant set not isolated";
        case CUBICON_ERR_RUNTIME: return "runtime error";
        case CUBICON_ERR_INTERNAL: return "internal error";
    }
    return "?";
}

const char* cubicon_version_string(void) { return "1.0.0"; }

const char* cubicon_last_error(void) { return g_last_error.c_str(); }

cubicon_status cubicon_flow_create_builtin(const char* name, cubicon_flow** out) {
    if (!name || !out) return invalid("null argument");
    return guarded([&] {
        std::string n = name;
        if (n == "eqn1")
            *out = new cubicon_flow{builtin_eqn1()};
        else if (n == "lorenz")
            *out = new cubicon_flow{builtin_lorenz()};
        else
            throw ConfigError("unknown builtin flow: " + n);
        return CUBICON_OK;
    });
}

cubicon_status cubicon_flow_create_from_file(const char* path, cubicon_flow** out) {
    if (!path || !out) return invalid("null argument");
    return guarded([&] {
        *out = new cubicon_flow{flow_from_expression_file(path)};
        return CUBICON_OK;
    });
}

cubicon_status cubicon_flow_create_from_text(const char* text, cubicon_flow** out) {
    if (!text || !out) return invalid("null argument");
    return guarded([&] {
        *out = new cubicon_flow{flow_from_expression_text(text)};
        return CUBICON_OK;
    });
}

void cubicon_flow_destroy(cubicon_flow* flow) { delete flow; }

int cubicon_flow_dim(const cubicon_flow* flow) { return flow ? flow->flow.dim : 0; }

cubicon_status cubicon_flow_eval(const cubicon_flow* flow, const double* x,
                                 double lambda, double* out) {
    if (!flow || !x || !out) return invalid("null argument");
    return guarded([&] {
        flow->flow.eval(x, lambda, out);
        return CUBICON_OK;
    });
}

cubicon_status cubicon_flow_integrate(const cubicon_flow* flow, double lambda,
                                      const double* x0, double t_end,
                                      double escape_radius, double tol,
                                      double* out_state, int* out_escaped,
                                      double* out_escape_time) {
    if (!flow || !x0 || !out_state) return invalid("null argument");
    return guarded([&] {
        std::vector<double> start(x0, x0 + flow->flow.dim);
        EscapePolicy policy{escape_radius};
        IntegrateOptions opts;
        if (tol > 0) opts.tol = tol;
        Trajectory tr = integrate(flow->flow, lambda, start, t_end, policy, opts);
        const TrajectorySample& end = tr.integration_end(t_end);
        std::memcpy(out_state, end.state.data(), sizeof(double) * flow->flow.dim);
        if (out_escaped) *out_escaped = tr.escaped ? 1 : 0;
        if (out_escape_time) *out_escape_time = tr.escape_time.value_or(0.0);
        return CUBICON_OK;
    });
}

cubicon_status cubicon_config_parse_file(const char* path, cubicon_config** out) {
    if (!path || !out) return invalid("null argument");
    return guarded([&] {
        *out = new cubicon_config{parse_config_file(path)};
        return CUBICON_OK;
    });
}

cubicon_status cubicon_config_parse_text(const char* text, cubicon_config** out) {
    if (!text || !out) return invalid("null argument");
    return guarded([&] {
        *out = new cubicon_config{parse_config_text(text)};
        return CUBICON_OK;
    });
}

cubicon_status cubicon_config_set(cubicon_config* config, const char* key,
                                  const char* value) {
    if (!config || !key || !value) return invalid("null argument");
    return guarded([&] {
        // reuse the parser so every key accepts exactly the file syntax
        std::string section, k = key;
        size_t dot = k.find('.');
        if (dot == std::string::npos)
            throw ConfigError("config key must be section.key: " + k);
        section = k.substr(0, dot);
        std::string text = "[" + section + "]\n" + k.substr(dot + 1) + " = " + value + "\n";
        RunConfig patch = parse_config_text(text);
        RunConfig merged = config->cfg;
        if (k == "output.threads") merged.threads = patch.threads;
        else if (k == "output.dir") merged.out_dir = patch.out_dir;
        else if (k == "output.formats") {
            merged.write_json = patch.write_json;
            merged.write_csv = patch.write_csv;
            merged.write_svg = patch.write_svg;
        } else if (k == "map.tau") merged.tau = patch.tau;
        else if (k == "map.samples_per_axis") merged.samples_per_axis = patch.samples_per_axis;
        else if (k == "map.bloat") merged.bloat = patch.bloat;
        else if (k == "map.escape_radius") merged.escape_radius = patch.escape_radius;
        else if (k == "map.tolerance") merged.tolerance = patch.tolerance;
        else if (k == "analysis.collar") merged.collar = patch.collar;
        else if (k == "analysis.refine_separator") merged.refine_separator = patch.refine_separator;
        else if (k == "analysis.separator_max_tau") merged.separator_max_tau = patch.separator_max_tau;
        else if (k == "analysis.separator_tau_factor") merged.separator_tau_factor = patch.separator_tau_factor;
        else if (k == "analysis.separator_tolerance") merged.separator_tolerance = patch.separator_tolerance;
        else if (k == "analysis.attraction_samples") merged.attraction_samples = patch.attraction_samples;
        else if (k == "analysis.attraction_horizon") merged.attraction_horizon = patch.attraction_horizon;
        else if (k == "analysis.polarity_horizon") merged.polarity_horizon = patch.polarity_horizon;
        else if (k == "analysis.polarity_levels") merged.polarity_levels = patch.polarity_levels;
        else if (k == "analysis.seed") merged.seed = patch.seed;
        else if (k == "lambda.values") merged.lambda_values = patch.lambda_values;
        else
            throw ConfigError("config key not settable through the API: " + k);
        config->cfg = std::move(merged);
        return CUBICON_OK;
    });
}

void cubicon_config_destroy(cubicon_config* config) { delete config; }

const char* cubicon_config_output_dir(const cubicon_config* config) {
    return config ? config->cfg.out_dir.c_str() : "";
}
int cubicon_config_write_json(const cubicon_config* config) {
    return config && config->cfg.write_json ? 1 : 0;
}
int cubicon_config_write_csv(const cubicon_config* config) {
    return config && config->cfg.write_csv ? 1 : 0;
}
int cubicon_config_write_svg(const cubicon_config* config) {
    return config && config->cfg.write_svg ? 1 : 0;
}

cubicon_status cubicon_run_analyze(const cubicon_config* config, cubicon_result** out) {
    if (!config || !out) return invalid("null argument");
    return guarded([&] {
        *out = new cubicon_result{run_analyze(config->cfg)};
        return CUBICON_OK;
    });
}

cubicon_status cubicon_run_sweep(const cubicon_config* config, cubicon_result** out) {
    if (!config || !out) return invalid("null argument");
    return guarded([&] {
        *out = new cubicon_result{run_sweep(config->cfg)};
        return CUBICON_OK;
    });
}

void cubicon_result_destroy(cubicon_result* result) { delete result; }

const char* cubicon_result_verdict_json(const cubicon_result* result) {
    return result ? result->run.verdict_json.c_str() : "";
}
const char* cubicon_result_sweep_csv(const cubicon_result* result) {
    return result ? result->run.sweep_csv.c_str() : "";
}
const char* cubicon_result_diameter_svg(const cubicon_result* result) {
    return result ? result->run.diam_svg.c_str() : "";
}
size_t cubicon_result_plot_count(const cubicon_result* result) {
    return result ? result->run.cell_plots.size() : 0;
}
const char* cubicon_result_plot_name(const cubicon_result* result, size_t index) {
    if (!result || index >= result->run.cell_plots.size()) return "";
    return result->run.cell_plots[index].first.c_str();
}
const char* cubicon_result_plot_svg(const cubicon_result* result, size_t index) {
    if (!result || index >= result->run.cell_plots.size()) return "";
    return result->run.cell_plots[index].second.c_str();
}

cubicon_status cubicon_selftest(char** out_table) {
    return guarded([&] {
        SelftestResult res = run_selftest();
        if (out_table) {
            *out_table = static_cast<char*>(std::malloc(res.table.size() + 1));
            if (*out_table) std::memcpy(*out_table, res.table.c_str(), res.table.size() + 1);
        }
        if (!res.pass) {
            g_last_error = "self-test failed";
            return CUBICON_ERR_RUNTIME;
        }
        return CUBICON_OK;
    });
}

void cubicon_string_free(char* s) { std::free(s); }

} // extern "C"
