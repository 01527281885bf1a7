#include "cubicon/report.hpp"
#include "cubicon/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace cubicon {

namespace {

using njson = nlohmann::ordered_json;

std::string fmt(double v, const char* f = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

njson box_json(const Box& b) {
    njson arr = njson::array();
    for (const auto& [lo, hi] : b.bounds) arr.push_back({lo, hi});
    return arr;
}

njson index_json(const std::optional<ConleyIndex>& ix) {
    if (!ix) return nullptr;
    return ix->to_json();
}

njson signature_json(const std::optional<SignatureResult>& s) {
    if (!s) return nullptr;
    njson j;
    j["separates"] = s->separates;
    j["complement_components"] = s->complement_components;
    j["k_in_bounded"] = s->k_in_bounded;
    j["sphere_homology"] = s->sphere_homology;
    j["c_homology"] = s->c_homology.to_json();
    j["attracts_unbounded"] = s->attracts_unbounded;
    j["repels_bounded"] = s->repels_bounded;
    j["entry_time_bound"] = s->entry_time_bound;
    j["samples_per_side"] = s->samples_per_side;
    j["all_pass"] = s->all_pass();
    return j;
}

njson exact_json(const std::optional<ExactSequenceResult>& e) {
    if (!e) return nullptr;
    njson j;
    j["pass"] = e->pass;
    j["fail_degree"] = e->fail_degree;
    j["fail_group"] = e->fail_group;
    j["torsion_checked"] = e->torsion_checked;
    j["image_ranks"] = e->image_ranks;
    j["detail"] = e->detail;
    return j;
}

njson witness_json(const PolarityWitness& w) {
    njson j;
    j["lambda"] = w.lambda;
    j["level"] = w.level;
    j["valid"] = w.valid;
    j["t_lambda"] = w.t_lambda;
    j["start"] = w.start;
    j["backward_min_norm"] = w.backward_min_norm;
    j["forward_bounded"] = w.forward_bounded;
    return j;
}

bool lambda_polar(const FamilyVerdict& v, double lambda) {
    for (const PolarityLevel& pl : v.polarity.levels)
        for (const PolarityWitness& w : pl.witnesses)
            if (w.lambda == lambda && w.valid) return true;
    return false;
}

} // namespace

std::string render_sweep_csv(const FamilyVerdict& v) {
    std::string out =
        "lambda,k_cells,c_cells,diameter,index_trivial,separates,sphere_homology,"
        "coercive,polar\n";
    for (const LambdaReport& r : v.per_lambda) {
        bool index_trivial = r.c_index && r.c_index->trivial();
        bool separates = r.signature && r.signature->separates && r.signature->k_in_bounded;
        bool sphere = r.signature && r.signature->sphere_homology;
        bool coercive = r.signature && r.signature->all_pass();
        out += fmt(r.lambda) + "," + std::to_string(r.k_cells) + "," +
               std::to_string(r.c_cells) + "," + fmt(r.c_diameter) + "," +
               (index_trivial ? "1" : "0") + "," + (separates ? "1" : "0") + "," +
               (sphere ? "1" : "0") + "," + (coercive ? "1" : "0") + "," +
               (lambda_polar(v, r.lambda) ? "1" : "0") + "\n";
    }
    return out;
}

std::string render_verdict_json(const RunResult& run) {
    const RunConfig& cfg = run.config;
    const FamilyVerdict& v = run.verdict;
    njson j;
    j["schema_version"] = 1;
    j["command"] = run.command;
    {
        njson sys;
        sys["name"] = cfg.builtin.empty() ? cfg.file : cfg.builtin;
        if (cfg.builtin == "lorenz") {
            sys["sigma"] = cfg.lorenz.sigma;
            sys["b"] = cfg.lorenz.b;
            sys["r_min"] = cfg.lorenz.r_min;
            sys["r_max"] = cfg.lorenz.r_max;
        }
        j["system"] = sys;
    }
    {
        njson grid;
        njson box = njson::array();
        for (size_t a = 0; a < cfg.lo.size(); ++a) box.push_back({cfg.lo[a], cfg.hi[a]});
        grid["box"] = box;
        grid["divisions"] = cfg.divisions;
        j["grid"] = grid;
    }
    {
        njson p;
        p["tau"] = cfg.tau;
        p["samples_per_axis"] = cfg.samples_per_axis;
        p["bloat"] = cfg.bloat;
        p["escape_radius"] = cfg.escape_radius; // 0 = auto
        p["tolerance"] = cfg.tolerance;
        p["collar"] = cfg.collar;
        p["seed"] = cfg.seed;
        if (cfg.seed == "box") {
            p["seed_lo"] = cfg.seed_lo;
            p["seed_hi"] = cfg.seed_hi;
        }
        p["refine_separator"] = cfg.refine_separator;
        p["separator_max_tau"] = cfg.separator_max_tau;
        p["separator_sharp_tau"] = cfg.separator_sharp_tau;
        p["separator_tau_factor"] = cfg.separator_tau_factor;
        p["separator_tolerance"] = cfg.separator_tolerance;
        p["attraction_samples"] = cfg.attraction_samples;
        p["attraction_horizon"] = cfg.attraction_horizon;
        p["polarity_levels"] = cfg.polarity_levels;
        p["polarity_horizon"] = cfg.polarity_horizon;
        j["parameters"] = p;
    }
    j["lambda_grid"] = v.lambda_grid;
    {
        njson per = njson::array();
        for (const LambdaReport& r : v.per_lambda) {
            njson e;
            e["lambda"] = r.lambda;
            e["trapping"] = r.trapping;
            e["ambient"] = {{"cells", r.ambient_cells}, {"index", index_json(r.ambient_index)}};
            e["k"] = {{"cells", r.k_cells},
                      {"global", r.k_is_global},
                      {"index", index_json(r.k_index)}};
            e["c"] = {{"cells", r.c_cells},
                      {"diameter", r.c_diameter},
                      {"isolated", r.c_isolated},
                      {"tau", r.separator_tau},
                      {"index", index_json(r.c_index)}};
            e["signature"] = signature_json(r.signature);
            e["exact_sequence"] = exact_json(r.exact_sequence);
            e["polar"] = lambda_polar(v, r.lambda);
            e["notes"] = r.notes;
            per.push_back(std::move(e));
        }
        j["per_lambda"] = per;
    }
    {
        njson f;
        f["uniform_trapping"] = v.uniform_trapping;
        f["witness_box"] = box_json(v.witness_box);
        f["global_continuation_ok"] = v.global_continuation_ok;
        f["globality_lost_at"] =
            v.globality_lost_at ? njson(*v.globality_lost_at) : njson(nullptr);
        f["continuation_broken_at"] =
            v.continuation_broken_at ? njson(*v.continuation_broken_at) : njson(nullptr);
        f["continuation_index_constant"] = v.continuation_index_constant;
        f["uniform_dissipative"] = v.uniform_dissipative;
        f["polar"] = v.polar;
        {
            njson levels = njson::array();
            for (const PolarityLevel& pl : v.polarity.levels) {
                njson l;
                l["level"] = pl.level;
                l["lambda_hat"] = pl.lambda_hat ? njson(*pl.lambda_hat) : njson(nullptr);
                njson ws = njson::array();
                for (const PolarityWitness& w : pl.witnesses) ws.push_back(witness_json(w));
                l["witnesses"] = ws;
                levels.push_back(std::move(l));
            }
            f["polarity_levels"] = levels;
        }
        f["coercive"] = v.coercive;
        f["coercive_note"] = v.coercive_note;
        f["failure_mode"] = v.failure_mode;
        f["notes"] = v.notes;
        j["family"] = f;
    }
    return j.dump(2) + "\n";
}

std::string render_diameter_svg(const FamilyVerdict& v) {
    const int W = 640, H = 480, ML = 70, MR = 20, MT = 20, MB = 50;
    std::vector<std::pair<double, double>> pts; // (lambda, diam), C nonempty only
    for (const LambdaReport& r : v.per_lambda)
        if (r.c_cells > 0) pts.push_back({r.lambda, r.c_diameter});
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
         "\" height=\"" + std::to_string(H) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!pts.empty()) {
        x0 = x1 = pts[0].first;
        y0 = 0;
        y1 = pts[0].second;
        for (auto& [x, y] : pts) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
        if (x1 == x0) x1 = x0 + 1;
        if (y1 == y0) y1 = y0 + 1;
        y1 *= 1.05;
    }
    auto px = [&](double x) { return ML + (x - x0) / (x1 - x0) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (y - y0) / (y1 - y0) * (H - MT - MB); };
    // axes
    s += "<line x1=\"" + fmt(px(x0), "%.2f") + "\" y1=\"" + fmt(py(y0), "%.2f") +
         "\" x2=\"" + fmt(px(x1), "%.2f") + "\" y2=\"" + fmt(py(y0), "%.2f") +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt(px(x0), "%.2f") + "\" y1=\"" + fmt(py(y0), "%.2f") +
         "\" x2=\"" + fmt(px(x0), "%.2f") + "\" y2=\"" + fmt(py(y1), "%.2f") +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + std::to_string(W / 2) + "\" y=\"" + std::to_string(H - 12) +
         "\" font-size=\"14\" text-anchor=\"middle\">lambda</text>\n";
    s += "<text x=\"18\" y=\"" + std::to_string(H / 2) +
         "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         std::to_string(H / 2) + ")\">diam(C)</text>\n";
    if (!pts.empty()) {
        std::string poly;
        for (auto& [x, y] : pts)
            poly += fmt(px(x), "%.2f") + "," + fmt(py(y), "%.2f") + " ";
        s += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"crimson\" stroke-width=\"2\"/>\n";
        for (auto& [x, y] : pts) {
            s += "<circle cx=\"" + fmt(px(x), "%.2f") + "\" cy=\"" + fmt(py(y), "%.2f") +
                 "\" r=\"4\" fill=\"crimson\"/>\n";
            s += "<text x=\"" + fmt(px(x), "%.2f") + "\" y=\"" + fmt(py(y) - 10, "%.2f") +
                 "\" font-size=\"12\" text-anchor=\"middle\">" + fmt(y, "%.4g") + "</text>\n";
        }
        // lambda tick labels
        for (auto& [x, y] : pts)
            s += "<text x=\"" + fmt(px(x), "%.2f") + "\" y=\"" + std::to_string(H - MB + 18) +
                 "\" font-size=\"12\" text-anchor=\"middle\">" + fmt(x, "%.4g") + "</text>\n";
    } else {
        s += "<text x=\"" + std::to_string(W / 2) + "\" y=\"" + std::to_string(H / 2) +
             "\" font-size=\"14\" text-anchor=\"middle\">no separating sets found</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string render_cells_svg(const RunConfig& cfg, const LambdaReport& rep) {
    if (cfg.lo.size() != 2) return "";
    const int W = 640, H = 640, M = 30;
    double x0 = cfg.lo[0], x1 = cfg.hi[0], y0 = cfg.lo[1], y1 = cfg.hi[1];
    auto px = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
    auto py = [&](double y) { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); };
    double cw = (px(x1) - px(x0)) / cfg.divisions[0];
    double ch = (py(y0) - py(y1)) / cfg.divisions[1];
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
         "\" height=\"" + std::to_string(H) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<rect x=\"" + fmt(px(x0), "%.2f") + "\" y=\"" + fmt(py(y1), "%.2f") + "\" width=\"" +
         fmt(px(x1) - px(x0), "%.2f") + "\" height=\"" + fmt(py(y0) - py(y1), "%.2f") +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    auto emit = [&](const CellSet& cells, const char* color) {
        if (!cells.grid()) return;
        const CubicalGrid& g = *cells.grid();
        double low[2];
        cells.for_each([&](std::uint64_t i) {
            g.cell_low(i, low);
            s += "<rect x=\"" + fmt(px(low[0]), "%.2f") + "\" y=\"" +
                 fmt(py(low[1] + g.cell_side(1)), "%.2f") + "\" width=\"" +
                 fmt(cw, "%.3f") + "\" height=\"" + fmt(ch, "%.3f") + "\" fill=\"" + color +
                 "\"/>\n";
        });
    };
    emit(rep.c_set, "crimson");
    emit(rep.k_set, "royalblue");
    s += "<text x=\"" + std::to_string(M) + "\" y=\"20\" font-size=\"14\">lambda=" +
         fmt(rep.lambda, "%.6g") + "  K=" + std::to_string(rep.k_cells) +
         " cells (blue)  C=" + std::to_string(rep.c_cells) + " cells (red)</text>\n";
    s += "</svg>\n";
    return s;
}

namespace {

RunResult run_common(const RunConfig& cfg_in, const std::string& command) {
    RunConfig cfg = cfg_in;
    validate_config(cfg);
    if (command == "analyze" && cfg.lambda_values.size() != 1)
        throw ConfigError("analyze requires exactly one lambda value");
    if (command == "sweep" && cfg.lambda_values.size() < 2)
        throw ConfigError("sweep requires at least two lambda values");

    ParametrizedFlow flow = flow_from_config(cfg);
    GridPtr grid = grid_from_config(cfg);
    AnalysisOptions opts = analysis_options_from_config(cfg);

    RunResult run;
    run.command = command;
    run.config = cfg;
    run.verdict = analyze_family(flow, cfg.lambda_values, grid, opts, cfg.polarity_levels);
    run.verdict_json = render_verdict_json(run);
    run.sweep_csv = render_sweep_csv(run.verdict);
    run.diam_svg = render_diameter_svg(run.verdict);
    if (cfg.lo.size() == 2) {
        for (size_t i = 0; i < run.verdict.per_lambda.size(); ++i) {
            std::string name = "cells_" + std::to_string(i) + ".svg";
            run.cell_plots.emplace_back(name,
                                        render_cells_svg(cfg, run.verdict.per_lambda[i]));
        }
    }
    return run;
}

} // namespace

RunResult run_analyze(const RunConfig& cfg) { return run_common(cfg, "analyze"); }
RunResult run_sweep(const RunConfig& cfg) { return run_common(cfg, "sweep"); }

} // namespace cubicon
