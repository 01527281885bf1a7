// cubicon command-line tool.  Talks to the library exclusively through the
// C API in cubicon.h; file output and exit codes live here.

#include <cubicon.h>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

int fail_config(const std::string& msg) {
    std::cerr << "cubicon: config error: " << msg << "\n";
    return 2;
}

int fail_runtime(const std::string& msg) {
    std::cerr << "cubicon: error: " << msg << "\n";
    return 1;
}

bool write_file(const std::filesystem::path& path, const std::string& content,
                std::string& err) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        err = "cannot open " + path.string() + " for writing";
        return false;
    }
    out << content;
    if (!out) {
        err = "write failed: " + path.string();
        return false;
    }
    return true;
}

struct RunFlags {
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    bool no_svg = false;
    bool quiet = false;
};

int run_pipeline(const RunFlags& flags, bool sweep) {
    cubicon_config* cfg = nullptr;
    cubicon_status st = cubicon_config_parse_file(flags.config_path.c_str(), &cfg);
    if (st != CUBICON_OK) return fail_config(cubicon_last_error());

    if (flags.threads > 0) {
        st = cubicon_config_set(cfg, "output.threads", std::to_string(flags.threads).c_str());
        if (st != CUBICON_OK) {
            std::string msg = cubicon_last_error();
            cubicon_config_destroy(cfg);
            return fail_config(msg);
        }
    }

    cubicon_result* result = nullptr;
    st = sweep ? cubicon_run_sweep(cfg, &result) : cubicon_run_analyze(cfg, &result);
    if (st != CUBICON_OK) {
        std::string msg = cubicon_last_error();
        bool config_issue = st == CUBICON_ERR_CONFIG || st == CUBICON_ERR_IO;
        cubicon_config_destroy(cfg);
        return config_issue ? fail_config(msg) : fail_runtime(msg);
    }

    std::string out_dir =
        !flags.out_dir.empty() ? flags.out_dir : cubicon_config_output_dir(cfg);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        cubicon_result_destroy(result);
        cubicon_config_destroy(cfg);
        return fail_runtime("cannot create output directory " + out_dir);
    }

    std::string err;
    bool ok = true;
    if (cubicon_config_write_json(cfg))
        ok = ok && write_file(std::filesystem::path(out_dir) / "verdict.json",
                              cubicon_result_verdict_json(result), err);
    if (ok && cubicon_config_write_csv(cfg))
        ok = ok && write_file(std::filesystem::path(out_dir) / "sweep.csv",
                              cubicon_result_sweep_csv(result), err);
    if (ok && cubicon_config_write_svg(cfg) && !flags.no_svg) {
        ok = ok && write_file(std::filesystem::path(out_dir) / "diam_vs_lambda.svg",
                              cubicon_result_diameter_svg(result), err);
        for (size_t i = 0; ok && i < cubicon_result_plot_count(result); ++i)
            ok = ok && write_file(std::filesystem::path(out_dir) /
                                      cubicon_result_plot_name(result, i),
                                  cubicon_result_plot_svg(result, i), err);
    }
    if (!flags.quiet && ok) {
        std::cout << "cubicon: " << (sweep ? "sweep" : "analyze") << " finished; reports in "
                  << out_dir << "\n";
    }
    cubicon_result_destroy(result);
    cubicon_config_destroy(cfg);
    return ok ? 0 : fail_runtime(err);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cubicon: combinatorial Conley-index analysis of parametrized flows"};
    app.require_subcommand(1);

    RunFlags analyze_flags, sweep_flags;
    bool selftest_quiet = false;

    CLI::App* analyze = app.add_subcommand("analyze", "analyze one parameter value");
    analyze->add_option("--config", analyze_flags.config_path, "config file path")
        ->required();
    analyze->add_option("--out", analyze_flags.out_dir, "output directory override");
    analyze->add_option("--threads", analyze_flags.threads, "worker thread cap");
    analyze->add_flag("--no-svg", analyze_flags.no_svg, "skip SVG output");
    analyze->add_flag("--quiet", analyze_flags.quiet, "suppress the summary line");

    CLI::App* sweep = app.add_subcommand("sweep", "sweep a parameter family");
    sweep->add_option("--config", sweep_flags.config_path, "config file path")->required();
    sweep->add_option("--out", sweep_flags.out_dir, "output directory override");
    sweep->add_option("--threads", sweep_flags.threads, "worker thread cap");
    sweep->add_flag("--no-svg", sweep_flags.no_svg, "skip SVG output");
    sweep->add_flag("--quiet", sweep_flags.quiet, "suppress the summary line");

    CLI::App* selftest = app.add_subcommand("selftest", "run the embedded oracle suites");
    selftest->add_flag("--quiet", selftest_quiet, "print only failures");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    if (app.got_subcommand(analyze)) return run_pipeline(analyze_flags, false);
    if (app.got_subcommand(sweep)) return run_pipeline(sweep_flags, true);
    if (app.got_subcommand(selftest)) {
        char* table = nullptr;
        cubicon_status st = cubicon_selftest(&table);
        if (table) {
            if (!selftest_quiet || st != CUBICON_OK) std::fputs(table, stdout);
            cubicon_string_free(table);
        }
        return st == CUBICON_OK ? 0 : 1;
    }
    return 2;
}
