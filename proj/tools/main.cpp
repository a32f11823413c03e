#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedup/errors.hpp"
#include "fedup/report.hpp"

namespace {

namespace fs = std::filesystem;

int exit_code_for(const std::string& category) {
    if (category == "usage") return 2;
    if (category == "config") return 3;
    if (category == "numerical") return 4;
    if (category == "integrity") return 5;
    if (category == "state") return 6;
    if (category == "io") return 7;
    return 1;
}

std::string output_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("FEDUP_OUT_DIR")) return env;
    return ".";
}

fedup::ExperimentConfig load_with_overrides(const std::string& config_path,
                                            const std::vector<std::string>& overrides) {
    auto cfg = fedup::load_config(config_path);
    for (const auto& o : overrides) fedup::apply_override(cfg, o);
    return cfg;
}

void write_run_outputs(const fedup::MetricsReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::string base = (fs::path(out_dir) / report.run_id).string();
    fedup::emit_csv(report, base + ".csv");
    fedup::emit_summary_json(report, base + ".summary.json");
}

void print_run_line(const fedup::MetricsReport& report) {
    const auto& s = report.summary;
    std::cout << report.run_id << " strategy=" << report.strategy
              << " rounds=" << report.rounds.size() << " test_acc=" << s.test_acc_before << "->"
              << s.test_acc_after << " malicious_acc=" << s.malicious_acc_before << "->"
              << s.malicious_acc_after;
    if (s.unlearning_performed && !s.unlearns.empty()) {
        const auto& u = s.unlearns.back();
        std::cout << " P=" << u.p_used << " R*=" << u.r_star << " R_rec=" << u.r_rec
                  << " bound=" << u.bound << " B=" << u.baseline_b;
    }
    std::cout << "\n";
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        const std::uint64_t s = std::stoull(text);
        return {s, s};
    }
    const std::uint64_t a = std::stoull(text.substr(0, dots));
    const std::uint64_t b = std::stoull(text.substr(dots + 2));
    if (b < a) throw fedup::UsageError("sweep: seed range end before start");
    return {a, b};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic federated-learning simulator with pruning-based unlearning"};
    app.require_subcommand(1);

    std::string config_path, out_dir_flag, seeds_text, in_dir, out_path;
    std::vector<std::string> overrides;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;

    auto* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("--config", config_path, "JSON experiment config")->required();
    auto* seed_opt = run->add_option("--seed", seed_flag, "Override the config seed");
    run->add_option("--override", overrides, "Field override, key.path=value (repeatable)");
    run->add_option("--out-dir", out_dir_flag, "Output directory (default $FEDUP_OUT_DIR or .)");

    auto* sweep = app.add_subcommand("sweep", "Run an inclusive seed range");
    sweep->add_option("--config", config_path, "JSON experiment config")->required();
    sweep->add_option("--seeds", seeds_text, "Seed range a..b")->required();
    sweep->add_option("--override", overrides, "Field override, key.path=value (repeatable)");
    sweep->add_option("--out-dir", out_dir_flag, "Output directory (default $FEDUP_OUT_DIR or .)");

    auto* report = app.add_subcommand("report", "Merge per-run CSV files");
    report->add_option("--in", in_dir, "Directory of per-run CSV files")->required();
    report->add_option("--out", out_path, "Merged output path (.csv or .json)")->required();

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;

    try {
        if (run->parsed()) {
            auto cfg = load_with_overrides(config_path, overrides);
            if (seed_set) cfg.seed = seed_flag;
            const auto rep = fedup::run_experiment(cfg);
            write_run_outputs(rep, output_dir(out_dir_flag));
            print_run_line(rep);
        } else if (sweep->parsed()) {
            auto cfg = load_with_overrides(config_path, overrides);
            const auto [first, last] = parse_seed_range(seeds_text);
            std::vector<std::future<fedup::MetricsReport>> jobs;
            for (std::uint64_t s = first; s <= last; ++s) {
                auto job_cfg = cfg;
                job_cfg.seed = s;
                jobs.push_back(std::async(std::launch::async, [job_cfg] {
                    return fedup::run_experiment(job_cfg);
                }));
            }
            const std::string dir = output_dir(out_dir_flag);
            for (auto& j : jobs) {
                const auto rep = j.get();
                write_run_outputs(rep, dir);
                print_run_line(rep);
            }
        } else if (report->parsed()) {
            const auto rows = fedup::merge_report_dir(in_dir);
            std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
            if (!f) throw fedup::IoError("cannot open for write: " + out_path);
            if (out_path.size() >= 5 && out_path.substr(out_path.size() - 5) == ".json")
                f << fedup::rows_to_json_text(rows);
            else
                f << fedup::rows_to_csv(rows);
            std::cout << "merged " << rows.size() << " rows into " << out_path << "\n";
        }
    } catch (const fedup::Error& e) {
        std::cerr << "error category=" << e.category << ": " << e.what() << "\n";
        return exit_code_for(e.category);
    } catch (const std::exception& e) {
        std::cerr << "error category=internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
