#include "cubicon/config.hpp"
#include "cubicon/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cubicon {

namespace {

struct KvStore {
    std::map<std::string, std::string> kv; // "section.key" -> value

    bool has(const std::string& k) const { return kv.count(k) != 0; }
    std::string get(const std::string& k, const std::string& dflt = "") const {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : it->second;
    }
};

KvStore parse_kv(const std::string& text) {
    KvStore store;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        size_t b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            size_t x = s.find_first_not_of(" \t");
            size_t y = s.find_last_not_of(" \t");
            s = x == std::string::npos ? "" : s.substr(x, y - x + 1);
        };
        trim(key);
        trim(val);
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        store.kv[section.empty() ? key : section + "." + key] = val;
    }
    return store;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw ConfigError("config key " + key + ": bad number \"" + v + "\"");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int d = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw ConfigError("config key " + key + ": bad integer \"" + v + "\"");
    }
}

std::vector<std::string> split_ws(const std::string& v) {
    std::istringstream in(v);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const std::string& t : split_ws(v)) out.push_back(to_double(key, t));
    return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const std::string& t : split_ws(v)) out.push_back(to_int(key, t));
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("config key " + key + ": bad boolean \"" + v + "\"");
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    KvStore s = parse_kv(text);
    RunConfig c;
    if (s.has("system.builtin")) c.builtin = s.get("system.builtin");
    if (s.has("system.file")) c.file = s.get("system.file");
    if (s.has("system.lorenz_sigma"))
        c.lorenz.sigma = to_double("system.lorenz_sigma", s.get("system.lorenz_sigma"));
    if (s.has("system.lorenz_b"))
        c.lorenz.b = to_double("system.lorenz_b", s.get("system.lorenz_b"));
    if (s.has("system.lorenz_r_min"))
        c.lorenz.r_min = to_double("system.lorenz_r_min", s.get("system.lorenz_r_min"));
    if (s.has("system.lorenz_r_max"))
        c.lorenz.r_max = to_double("system.lorenz_r_max", s.get("system.lorenz_r_max"));
    if (s.has("system.lipschitz_hint"))
        c.lipschitz_hint = to_double("system.lipschitz_hint", s.get("system.lipschitz_hint"));

    if (s.has("domain.lo")) c.lo = to_doubles("domain.lo", s.get("domain.lo"));
    if (s.has("domain.hi")) c.hi = to_doubles("domain.hi", s.get("domain.hi"));
    if (s.has("domain.divisions"))
        c.divisions = to_ints("domain.divisions", s.get("domain.divisions"));

    if (s.has("lambda.values"))
        c.lambda_values = to_doubles("lambda.values", s.get("lambda.values"));
    else if (s.has("lambda.min") || s.has("lambda.max") || s.has("lambda.count")) {
        double mn = to_double("lambda.min", s.get("lambda.min", "0"));
        double mx = to_double("lambda.max", s.get("lambda.max", "1"));
        int count = to_int("lambda.count", s.get("lambda.count", "2"));
        if (count < 1) throw ConfigError("config key lambda.count: must be >= 1");
        for (int i = 0; i < count; ++i)
            c.lambda_values.push_back(count == 1 ? mn
                                                 : mn + (mx - mn) * i / (count - 1));
    }

    if (s.has("map.tau")) c.tau = to_double("map.tau", s.get("map.tau"));
    if (s.has("map.samples_per_axis"))
        c.samples_per_axis = to_int("map.samples_per_axis", s.get("map.samples_per_axis"));
    if (s.has("map.bloat")) {
        std::string v = s.get("map.bloat");
        c.bloat = v == "auto" ? -1 : to_int("map.bloat", v);
    }
    if (s.has("map.escape_radius")) {
        std::string v = s.get("map.escape_radius");
        c.escape_radius = v == "auto" ? 0.0 : to_double("map.escape_radius", v);
    }
    if (s.has("map.tolerance")) c.tolerance = to_double("map.tolerance", s.get("map.tolerance"));

    if (s.has("analysis.collar")) c.collar = to_int("analysis.collar", s.get("analysis.collar"));
    if (s.has("analysis.seed")) c.seed = s.get("analysis.seed");
    if (s.has("analysis.seed_lo")) c.seed_lo = to_doubles("analysis.seed_lo", s.get("analysis.seed_lo"));
    if (s.has("analysis.seed_hi")) c.seed_hi = to_doubles("analysis.seed_hi", s.get("analysis.seed_hi"));
    if (s.has("analysis.refine_separator"))
        c.refine_separator = to_bool("analysis.refine_separator", s.get("analysis.refine_separator"));
    if (s.has("analysis.separator_max_tau"))
        c.separator_max_tau = to_double("analysis.separator_max_tau", s.get("analysis.separator_max_tau"));
    if (s.has("analysis.separator_sharp_tau"))
        c.separator_sharp_tau =
            to_double("analysis.separator_sharp_tau", s.get("analysis.separator_sharp_tau"));
    if (s.has("analysis.separator_tau_factor"))
        c.separator_tau_factor =
            to_double("analysis.separator_tau_factor", s.get("analysis.separator_tau_factor"));
    if (s.has("analysis.separator_tolerance"))
        c.separator_tolerance =
            to_double("analysis.separator_tolerance", s.get("analysis.separator_tolerance"));
    if (s.has("analysis.attraction_samples"))
        c.attraction_samples = to_int("analysis.attraction_samples", s.get("analysis.attraction_samples"));
    if (s.has("analysis.attraction_horizon"))
        c.attraction_horizon = to_double("analysis.attraction_horizon", s.get("analysis.attraction_horizon"));
    if (s.has("analysis.polarity_levels"))
        c.polarity_levels = to_doubles("analysis.polarity_levels", s.get("analysis.polarity_levels"));
    if (s.has("analysis.polarity_horizon"))
        c.polarity_horizon = to_double("analysis.polarity_horizon", s.get("analysis.polarity_horizon"));

    if (s.has("output.dir")) c.out_dir = s.get("output.dir");
    if (s.has("output.formats")) {
        c.write_json = c.write_csv = c.write_svg = false;
        for (const std::string& f : split_ws(s.get("output.formats"))) {
            if (f == "json") c.write_json = true;
            else if (f == "csv") c.write_csv = true;
            else if (f == "svg") c.write_svg = true;
            else throw ConfigError("config key output.formats: unknown format \"" + f + "\"");
        }
    }
    if (s.has("output.threads")) c.threads = to_int("output.threads", s.get("output.threads"));

    // unknown keys are rejected so typos do not silently change runs
    static const char* known[] = {
        "system.builtin", "system.file", "system.lorenz_sigma", "system.lorenz_b",
        "system.lorenz_r_min", "system.lorenz_r_max", "system.lipschitz_hint",
        "domain.lo", "domain.hi", "domain.divisions",
        "lambda.values", "lambda.min", "lambda.max", "lambda.count",
        "map.tau", "map.samples_per_axis", "map.bloat", "map.escape_radius", "map.tolerance",
        "analysis.collar", "analysis.seed", "analysis.seed_lo", "analysis.seed_hi",
        "analysis.refine_separator", "analysis.separator_max_tau",
        "analysis.separator_sharp_tau",
        "analysis.separator_tau_factor", "analysis.separator_tolerance",
        "analysis.attraction_samples", "analysis.attraction_horizon",
        "analysis.polarity_levels", "analysis.polarity_horizon",
        "output.dir", "output.formats", "output.threads",
    };
    for (const auto& [k, v] : s.kv) {
        bool ok = false;
        for (const char* kk : known)
            if (k == kk) ok = true;
        if (!ok) throw ConfigError("unknown config key: " + k);
    }
    return c;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void validate_config(RunConfig& cfg) {
    if (cfg.builtin.empty() && cfg.file.empty())
        throw ConfigError("system: either builtin or file is required");
    if (!cfg.builtin.empty() && !cfg.file.empty())
        throw ConfigError("system: builtin and file are mutually exclusive");
    if (!cfg.builtin.empty() && cfg.builtin != "eqn1" && cfg.builtin != "lorenz")
        throw ConfigError("system.builtin: unknown system \"" + cfg.builtin + "\"");

    ParametrizedFlow flow = flow_from_config(cfg);
    int n = flow.dim;
    if (static_cast<int>(cfg.lo.size()) != n || static_cast<int>(cfg.hi.size()) != n)
        throw ConfigError("domain: lo/hi must have " + std::to_string(n) + " entries");
    for (int a = 0; a < n; ++a)
        if (!(cfg.lo[a] < cfg.hi[a]))
            throw ConfigError("domain box axis " + std::to_string(a) +
                              ": lo must be strictly below hi");
    if (static_cast<int>(cfg.divisions.size()) != n)
        throw ConfigError("domain.divisions: need " + std::to_string(n) + " entries");
    for (int a = 0; a < n; ++a)
        if (cfg.divisions[a] < 2)
            throw ConfigError("domain.divisions axis " + std::to_string(a) + ": must be >= 2");

    if (cfg.lambda_values.empty())
        throw ConfigError("lambda: values (or min/max/count) required");
    for (double l : cfg.lambda_values)
        if (l < flow.param_range.first - 1e-12 || l > flow.param_range.second + 1e-12)
            throw ConfigError("lambda value " + std::to_string(l) +
                              " outside the system parameter range");

    if (cfg.tau < 0) cfg.tau = cfg.builtin == "lorenz" ? 0.1 : 0.5;
    if (cfg.tau <= 0) throw ConfigError("map.tau: must be positive");
    if (cfg.samples_per_axis < 2) throw ConfigError("map.samples_per_axis: must be >= 2");
    if (cfg.tolerance <= 0) throw ConfigError("map.tolerance: must be positive");
    if (cfg.collar < 1) throw ConfigError("analysis.collar: must be >= 1");
    if (cfg.separator_max_tau < 0) cfg.separator_max_tau = 128.0 * cfg.tau;
    if (cfg.separator_tau_factor <= 1)
        throw ConfigError("analysis.separator_tau_factor: must be > 1");
    if (cfg.attraction_samples < 1)
        throw ConfigError("analysis.attraction_samples: must be >= 1");
    if (cfg.threads < 1) throw ConfigError("output.threads: must be >= 1");

    if (cfg.seed.empty()) cfg.seed = cfg.builtin == "lorenz" ? "global" : "box";
    if (cfg.seed != "global" && cfg.seed != "box")
        throw ConfigError("analysis.seed: must be \"global\" or \"box\"");
    if (cfg.seed == "box") {
        if (cfg.seed_lo.empty() && cfg.seed_hi.empty()) {
            // default: centered box spanning 1/8 of each extent
            for (int a = 0; a < n; ++a) {
                double c = (cfg.lo[a] + cfg.hi[a]) / 2;
                double w = (cfg.hi[a] - cfg.lo[a]) / 16;
                cfg.seed_lo.push_back(c - w);
                cfg.seed_hi.push_back(c + w);
            }
        }
        if (static_cast<int>(cfg.seed_lo.size()) != n ||
            static_cast<int>(cfg.seed_hi.size()) != n)
            throw ConfigError("analysis.seed_lo/seed_hi: need " + std::to_string(n) +
                              " entries");
        for (int a = 0; a < n; ++a)
            if (!(cfg.seed_lo[a] < cfg.seed_hi[a]))
                throw ConfigError("analysis seed box axis " + std::to_string(a) +
                                  ": lo must be strictly below hi");
    }
    for (double l : cfg.polarity_levels)
        if (l <= 0) throw ConfigError("analysis.polarity_levels: must be positive");
}

ParametrizedFlow flow_from_config(const RunConfig& cfg) {
    ParametrizedFlow f;
    if (cfg.builtin == "eqn1")
        f = builtin_eqn1();
    else if (cfg.builtin == "lorenz")
        f = builtin_lorenz(cfg.lorenz);
    else
        f = flow_from_expression_file(cfg.file);
    f.lipschitz_hint = cfg.lipschitz_hint;
    return f;
}

GridPtr grid_from_config(const RunConfig& cfg) {
    Box box;
    for (size_t a = 0; a < cfg.lo.size(); ++a)
        box.bounds.emplace_back(cfg.lo[a], cfg.hi[a]);
    return make_grid(box, cfg.divisions);
}

AnalysisOptions analysis_options_from_config(const RunConfig& cfg) {
    AnalysisOptions o;
    o.map.tau = cfg.tau;
    o.map.samples_per_axis = cfg.samples_per_axis;
    o.map.bloat = cfg.bloat;
    o.map.tol = cfg.tolerance;
    o.map.threads = cfg.threads;
    o.policy.radius = cfg.escape_radius;
    o.collar = cfg.collar;
    o.refine_separator = cfg.refine_separator;
    o.separator_max_tau = cfg.separator_max_tau;
    o.separator_sharp_tau = cfg.separator_sharp_tau;
    o.separator_tau_factor = cfg.separator_tau_factor;
    o.separator_tol = cfg.separator_tolerance;
    o.attraction_samples = cfg.attraction_samples;
    o.attraction_horizon = cfg.attraction_horizon;
    o.polarity_horizon = cfg.polarity_horizon;
    o.seed = cfg.seed == "global" ? AnalysisOptions::Seed::Global
                                  : AnalysisOptions::Seed::Box;
    if (cfg.seed == "box") {
        Box sb;
        for (size_t a = 0; a < cfg.seed_lo.size(); ++a)
            sb.bounds.emplace_back(cfg.seed_lo[a], cfg.seed_hi[a]);
        o.seed_box = sb;
    }
    return o;
}

} // namespace cubicon
