// mmt: run, check and time transport scenarios.
//
// Verbosity comes from MMT_LOG (quiet | info | debug); default info.

#include "mmt/error.hpp"
#include "mmt/io.hpp"
#include "mmt/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum class Level { quiet, info, debug };

Level log_level() {
    const char* env = std::getenv("MMT_LOG");
    const std::string v = env != nullptr ? env : "info";
    if (v == "quiet") return Level::quiet;
    if (v == "debug") return Level::debug;
    return Level::info;
}

void report(const mmt::ScenarioError& e) {
    std::cerr << "scenario invalid:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> H, H_p, H_r;
};

mmt::sim::Scenario load(const std::string& path, const Overrides& o) {
    auto s = mmt::io::load_scenario(path);
    if (o.seed) s.seed = *o.seed;
    if (o.H) s.dvb.H = *o.H;
    if (o.H_p) s.roll.H_p = *o.H_p;
    if (o.H_r) s.formation.H_r = *o.H_r;
    if (auto p = mmt::sim::check_scenario(s); !p.empty()) throw mmt::ScenarioError(std::move(p));
    return s;
}

double percentile95(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[std::min(v.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1)];
}

double mean(const std::vector<double>& v) {
    double a = 0.0;
    for (double x : v) a += x;
    return v.empty() ? 0.0 : a / static_cast<double>(v.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative payload transport with a deformable virtual bounding box"};
    app.require_subcommand(1);
    const Level level = log_level();

    std::string scenario_path, out_dir = "out";
    Overrides ov;
    bool strict = false, no_svg = false, no_csv = false, no_json = false;
    std::size_t repeats = 3;

    auto* run = app.add_subcommand("run", "Simulate a scenario and write log.csv, summary.json, run.svg");
    run->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--seed", ov.seed, "Seed override");
    run->add_option("--horizon", ov.H, "Box planner horizon override");
    run->add_option("--horizon-payload", ov.H_p, "Roll planner horizon override");
    run->add_option("--horizon-robots", ov.H_r, "Base planner horizon override");
    run->add_flag("--strict", strict, "Exit non-zero when any violation is logged");
    run->add_flag("--no-svg", no_svg, "Skip the SVG plot");
    run->add_flag("--no-csv", no_csv, "Skip the CSV log");
    run->add_flag("--no-json", no_json, "Skip the JSON summary");

    auto* val = app.add_subcommand("validate", "Parse and check a scenario");
    val->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("bench", "Time the planning stages over repeated runs");
    bench->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    bench->add_option("--repeats", repeats, "Number of runs")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--seed", ov.seed, "Seed override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (val->parsed()) {
            const auto s = load(scenario_path, ov);
            std::cout << "ok: " << s.name << ", " << s.K << " robots, " << s.static_obstacles.size() << " static and "
                      << s.dynamic_obstacles.size() << " dynamic obstacles, " << s.duration << " s at dt " << s.dt << '\n';
            if (level == Level::debug) std::cout << mmt::io::dump_scenario(s);
            return 0;
        }

        if (run->parsed()) {
            const auto s = load(scenario_path, ov);
            if (level != Level::quiet) std::cerr << "running " << s.name << " (seed " << s.seed << ")\n";
            const auto log = mmt::sim::run(s);
            const auto files = mmt::io::emit(log, s, out_dir, {!no_csv, !no_json, !no_svg});
            const auto& sum = log.summary;
            if (level != Level::quiet) {
                for (const auto& f : files) std::cerr << "wrote " << f.string() << '\n';
                std::printf("ticks %zu  r [%.4f, %.4f]  min clearance ratio %.4f  min base separation %.4f  "
                            "max joint rate %.4f  violations %zu  mean tick %.2f ms\n",
                            sum.ticks, sum.r_lo, sum.r_hi, sum.min_clearance_ratio, sum.min_base_separation,
                            sum.max_joint_rate, sum.violations, 1e3 * sum.mean_total_time);
            }
            if (level == Level::debug)
                for (const auto& r : log.records)
                    for (const auto& v : r.violations)
                        std::cerr << "tick " << r.tick << ' ' << mmt::sim::to_string(v.kind) << ' ' << v.measured << ' '
                                  << v.detail << '\n';
            if (strict && sum.violations > 0) {
                for (const auto& [k, n] : sum.violations_by_kind) std::cerr << "violation " << k << ": " << n << '\n';
                return 1;
            }
            return 0;
        }

        if (bench->parsed()) {
            const auto s = load(scenario_path, ov);
            std::vector<double> dvb, roll, robots, total;
            for (std::size_t i = 0; i < repeats; ++i) {
                const auto log = mmt::sim::run(s);
                for (const auto& r : log.records) {
                    if (r.tick == 0) continue;
                    dvb.push_back(r.times.dvb);
                    roll.push_back(r.times.roll);
                    robots.push_back(r.times.robots);
                    total.push_back(r.times.total());
                }
                if (level == Level::debug) std::cerr << "repeat " << i + 1 << " done\n";
            }
            std::printf("%-8s %12s %12s\n", "stage", "mean [ms]", "p95 [ms]");
            auto row = [](const char* n, const std::vector<double>& v) {
                std::printf("%-8s %12.3f %12.3f\n", n, 1e3 * mean(v), 1e3 * percentile95(v));
            };
            row("dvb", dvb);
            row("payload", roll);
            row("robots", robots);
            row("total", total);
            std::printf("ticks %zu over %zu runs\n", total.size(), repeats);
            return 0;
        }
    } catch (const mmt::ScenarioError& e) {
        report(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
