#include "ghostdiff/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ghostdiff/experiments.hpp"
#include "ghostdiff/io.hpp"
#include "ghostdiff/version.hpp"

namespace gd::cli {

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInsufficient = 3;

/// Six significant digits for the console; CSV/manifest keep full precision.
std::string show(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void print_report(const ScenarioConfig& cfg, const ScenarioReport& rep) {
    std::cout << "scenario " << rep.name << " (" << to_string(cfg.experiment) << ")\n";
    if (!rep.metrics.empty()) {
        std::cout << "metrics:\n";
        for (const auto& [name, value] : rep.metrics)
            std::cout << "  " << name << " = " << show(value) << "\n";
    }
    if (!rep.transition.empty()) {
        std::cout << "transition:\n";
        for (const auto& t : rep.transition)
            std::cout << "  D0 " << show(t.D0 * 1e3) << " mm: " << show(t.n_speckles)
                      << " speckles, FWHM " << show(t.measured_fwhm * 1e6) << " um (expect "
                      << show(t.expected_fwhm * 1e6) << "), shot visibility "
                      << show(t.visibility) << " (best " << show(t.visibility_best)
                      << "), shot NRMS " << show(t.nrms_best) << "\n";
    }
    if (!rep.assertions.empty()) {
        std::cout << "checks:\n";
        for (const auto& a : rep.assertions)
            std::cout << "  [" << (a.pass ? "PASS" : "FAIL") << "] " << a.name << " = "
                      << show(a.value) << " " << a.cmp << " " << show(a.threshold) << "\n";
    }
    for (const auto& f : rep.flags) std::cout << "note: " << f << "\n";
    for (const auto& a : rep.artifacts) std::cout << "wrote " << a << "\n";
    std::cout << "result: " << (rep.all_pass ? "PASS" : "FAIL") << " (" << show(rep.wall_seconds)
              << " s)\n";
}

void prepare_out_dir(const std::string& out, bool force) {
    if (out.empty()) return;
    namespace fs = std::filesystem;
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw std::runtime_error("output directory '" + out +
                                 "' is not empty; pass --force to write into it");
    fs::create_directories(out);
}

int finish(const ScenarioConfig& cfg, const ScenarioReport& rep) {
    print_report(cfg, rep);
    if (!cfg.out_dir.empty()) {
        std::string path = cfg.out_dir + "/manifest.json";
        io::write_manifest(path, io::make_manifest(cfg, rep));
        std::cout << "manifest " << path << "\n";
    }
    for (const auto& f : rep.flags)
        if (f.rfind("insufficient frames", 0) == 0) return kExitInsufficient;
    return rep.all_pass ? kExitPass : kExitCheckFailed;
}

struct Options {
    std::string scenario_file, out_dir, sweep_key, sweep_values;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    long frames = 0;
    int workers = 0;
    bool force = false, quick = false;
};

ScenarioConfig assemble(const Options& opt, const CLI::App* sub) {
    ScenarioConfig cfg = opt.scenario_file.empty() ? oracle_reference_config()
                                                   : io::load_scenario(opt.scenario_file);
    for (const auto& s : opt.sets) io::apply_override(cfg, s);
    if (sub->count("--seed")) cfg.seed = opt.seed;
    if (sub->count("--frames")) {
        if (opt.frames < 1) throw std::runtime_error("--frames must be >= 1");
        cfg.frames = opt.frames;
    }
    if (sub->count("--workers")) {
        if (opt.workers < 0) throw std::runtime_error("--workers must be >= 0");
        cfg.workers = opt.workers;
    }
    cfg.out_dir = opt.out_dir;
    return cfg;
}

int cmd_run(const Options& opt, const CLI::App* sub) {
    prepare_out_dir(opt.out_dir, opt.force);
    ScenarioConfig cfg = assemble(opt, sub);
    ScenarioReport rep = run_scenario(cfg, opt.quick);
    return finish(cfg, rep);
}

int cmd_oracle(const Options& opt, const CLI::App* sub) {
    prepare_out_dir(opt.out_dir, opt.force);
    ScenarioConfig cfg = assemble(opt, sub);
    cfg.experiment = ExperimentKind::oracle_suite;
    ScenarioReport rep = run_oracle_suite(cfg, opt.quick);
    return finish(cfg, rep);
}

int cmd_sweep(const Options& opt, const CLI::App* sub) {
    prepare_out_dir(opt.out_dir, opt.force);
    std::vector<std::string> values;
    std::size_t start = 0;
    while (start <= opt.sweep_values.size()) {
        auto comma = opt.sweep_values.find(',', start);
        std::string v = opt.sweep_values.substr(start, comma - start);
        if (!v.empty()) values.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (values.empty()) throw std::runtime_error("--values needs at least one value");
    std::vector<double> numeric;
    for (const auto& v : values) {
        try {
            numeric.push_back(io::parse_length(v));
        } catch (const std::exception&) {
            throw std::runtime_error("sweep value '" + v + "' is not numeric");
        }
    }

    ScenarioConfig base = assemble(opt, sub);
    base.out_dir.clear();
    std::vector<std::vector<double>> table(5);
    bool all_pass = true;
    double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < values.size(); ++i) {
        ScenarioConfig cfg = base;
        io::apply_override(cfg, opt.sweep_key + "=" + values[i]);
        cfg.name = base.name + "[" + opt.sweep_key + "=" + values[i] + "]";
        if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir + "/point_" + std::to_string(i);
        ScenarioReport rep = run_scenario(cfg, opt.quick);
        all_pass = all_pass && rep.all_pass;
        if (!cfg.out_dir.empty())
            io::write_manifest(cfg.out_dir + "/manifest.json", io::make_manifest(cfg, rep));

        double dxsp = cfg.source.target_dx_speckle > 0.0
                          ? cfg.source.target_dx_speckle
                          : expected_speckle_size(cfg.source.lambda, cfg.source.z, cfg.source.D0);
        auto metric = [&](const char* name) {
            auto it = rep.metrics.find(name);
            return it == rep.metrics.end() ? nan : it->second;
        };
        table[0].push_back(numeric[i]);
        table[1].push_back(speckle_count(cfg.diaphragm_D, dxsp));
        table[2].push_back(dxsp);
        table[3].push_back(metric("g_fringe_visibility"));
        table[4].push_back(metric("g_nrms_vs_reference"));
        std::cout << opt.sweep_key << " = " << values[i] << ": "
                  << (rep.all_pass ? "PASS" : "FAIL") << " (" << show(rep.wall_seconds)
                  << " s)\n";
    }
    const std::vector<std::string> columns = {"value", "n_speckles", "speckle_size",
                                              "visibility", "nrms"};
    if (!opt.out_dir.empty()) {
        std::string path = opt.out_dir + "/sweep.csv";
        io::write_csv(path, columns, table, {"sweep of " + opt.sweep_key});
        std::cout << "wrote " << path << "\n";
    } else {
        for (std::size_t c = 0; c < columns.size(); ++c)
            std::cout << columns[c] << (c + 1 < columns.size() ? ',' : '\n');
        for (std::size_t r = 0; r < values.size(); ++r)
            for (std::size_t c = 0; c < table.size(); ++c)
                std::cout << show(table[c][r]) << (c + 1 < table.size() ? ',' : '\n');
    }
    return all_pass ? kExitPass : kExitCheckFailed;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"speckle-correlation ghost diffraction simulator"};
    app.set_version_flag("--version", std::string("ghostdiff ") + GHOSTDIFF_VERSION);
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub, bool file_required) {
        auto* pos = sub->add_option("scenario", opt.scenario_file,
                                    file_required
                                        ? "scenario file"
                                        : "scenario file (default: built-in small-grid geometry)");
        pos->check(CLI::ExistingFile);
        if (file_required) pos->required();
        sub->add_option("--set", opt.sets, "override a scenario key (key=value, repeatable)");
        sub->add_option("--seed", opt.seed, "override the base random seed");
        sub->add_option("--frames", opt.frames, "override the frame count");
        sub->add_option("--workers", opt.workers,
                        "worker threads (0: GHOSTDIFF_WORKERS env, else hardware)");
        sub->add_option("--out", opt.out_dir, "directory for artifacts and the run manifest");
        sub->add_flag("--force", opt.force, "write into a non-empty artifact directory");
        sub->add_flag("--quick", opt.quick,
                      "reduced-frame statistical gates (oracle suite only)");
    };

    CLI::App* run = app.add_subcommand("run", "run one scenario end to end");
    add_common(run, true);
    CLI::App* sweep = app.add_subcommand("sweep", "rerun a scenario across values of one key");
    add_common(sweep, true);
    sweep->add_option("--key", opt.sweep_key, "dotted scenario key to sweep")->required();
    sweep->add_option("--values", opt.sweep_values, "comma-separated values for the key")
        ->required();
    CLI::App* oracle =
        app.add_subcommand("oracle", "cross-check Monte Carlo against quadrature on a small grid");
    add_common(oracle, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(opt, run);
        if (sweep->parsed()) return cmd_sweep(opt, sweep);
        return cmd_oracle(opt, oracle);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace gd::cli
