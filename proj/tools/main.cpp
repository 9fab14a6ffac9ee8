// orch: run, replay, score, and export coordinator-substrate episodes.

#include "orch/errors.hpp"
#include "orch/harness.hpp"
#include "orch/rl.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartialFailure = 2;

struct CommonOptions {
    std::string config_path;
    std::string dataset_path;
    std::string out;
    std::optional<int> parallel;
    std::string cassette_dir;
    bool record = false;
    bool replay_strict = false;
    std::optional<std::uint64_t> seed;
};

orch::harness::RunConfig resolve_config(const CommonOptions& opts) {
    orch::harness::RunConfig config = opts.config_path.empty()
                                          ? orch::harness::default_run_config()
                                          : orch::harness::load_run_config(opts.config_path);
    if (opts.parallel) config.parallelism = *opts.parallel;
    if (!opts.cassette_dir.empty()) config.cassette_dir = opts.cassette_dir;
    if (opts.record) config.record = true;
    if (opts.replay_strict) config.replay_strict = true;
    if (opts.seed) config.episode.seed = *opts.seed;
    if (!opts.out.empty()) config.output_dir = opts.out;
    if (!opts.dataset_path.empty()) {
        config.dataset_name = fs::path(opts.dataset_path).stem().string();
    }
    return config;
}

void write_or_print(const std::string& content, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    const fs::path path(out_path);
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw orch::ConfigError("cannot write " + out_path);
    out << content;
}

int run_or_replay(const CommonOptions& opts, bool replay) {
    orch::harness::RunConfig config = resolve_config(opts);
    if (replay) {
        config.policy.kind = orch::harness::BackendKind::Cassette;
        config.executor.kind = orch::harness::BackendKind::Cassette;
        config.record = false;
    }
    const auto records = orch::harness::load_dataset(opts.dataset_path);
    fs::create_directories(config.output_dir);
    const auto trajectory_path = config.output_dir / "trajectories.jsonl";
    const auto result = orch::harness::run_benchmark(records, config, trajectory_path);

    const auto report_path = config.output_dir / "report.csv";
    write_or_print(result.report.csv(), report_path.string());
    std::cout << result.report.csv();
    std::cerr << "episodes: " << result.records.size() << " total, " << result.episodes_skipped
              << " resumed, " << result.episodes_failed << " failed\n"
              << "trajectories: " << trajectory_path.string() << "\n"
              << "report: " << report_path.string() << "\n";
    return result.episodes_failed > 0 ? kExitPartialFailure : kExitOk;
}

int score(const std::string& trajectory_path, const CommonOptions& opts) {
    const orch::harness::RunConfig config = resolve_config(opts);
    const auto result =
        orch::harness::score_trajectories(trajectory_path, opts.dataset_path, config.reward);
    write_or_print(result.report.csv(), opts.out);
    if (result.drift > 0) {
        std::cerr << result.drift
                  << " record(s) no longer match their stored scores; reporting recomputed "
                     "values\n";
    }
    return kExitOk;
}

int report(const std::string& trajectory_path, const CommonOptions& opts) {
    const auto records = orch::harness::load_trajectories(trajectory_path);
    std::string name = fs::path(trajectory_path).stem().string();
    if (!records.empty() && !records.front().dataset.empty()) name = records.front().dataset;
    const auto agg = orch::harness::aggregate(name, records);
    write_or_print(agg.csv(), opts.out);
    return kExitOk;
}

int train_toy(const CommonOptions& opts, int iterations) {
    const orch::harness::RunConfig config = resolve_config(opts);
    const auto result = orch::rl::train_toy_policy(opts.seed.value_or(config.episode.seed),
                                                   iterations, config.grpo);
    std::string curve = "iteration,mean_batch_reward\n";
    for (std::size_t i = 0; i < result.curve.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i, result.curve[i]);
        curve += buf;
    }
    if (!opts.out.empty()) write_or_print(curve, opts.out);
    double tail = 0.0;
    const std::size_t window = std::min<std::size_t>(20, result.curve.size());
    for (std::size_t i = result.curve.size() - window; i < result.curve.size(); ++i) {
        tail += result.curve[i];
    }
    if (window > 0) tail /= static_cast<double>(window);
    std::printf("iterations: %zu\nfinal mean batch reward (last %zu): %.4f\n",
                result.curve.size(), window, tail);
    return kExitOk;
}

int grpo_export_cmd(const std::string& trajectory_path, const CommonOptions& opts) {
    const orch::harness::RunConfig config = resolve_config(opts);
    const auto records = orch::harness::load_trajectories(trajectory_path);
    write_or_print(orch::harness::grpo_export(records, config.grpo), opts.out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coordinator-substrate episode runtime and reward/RL toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string trajectory_path;
    int iterations = 500;

    const auto add_common = [&](CLI::App* cmd, bool needs_dataset) {
        cmd->add_option("--config", opts.config_path, "JSON run configuration");
        auto* dataset = cmd->add_option("--dataset", opts.dataset_path, "dataset JSONL");
        if (needs_dataset) dataset->required();
        cmd->add_option("--out", opts.out, "output directory or file");
        cmd->add_option("--parallel", opts.parallel, "worker pool size");
        cmd->add_option("--cassette-dir", opts.cassette_dir, "per-episode cassette directory");
        cmd->add_flag("--record", opts.record, "record live completions to cassettes");
        cmd->add_flag("--replay-strict", opts.replay_strict,
                      "verify request fingerprints during replay");
        cmd->add_option("--seed", opts.seed, "run seed");
    };

    auto* run_cmd = app.add_subcommand("run", "run a benchmark with the configured backends");
    add_common(run_cmd, true);

    auto* replay_cmd =
        app.add_subcommand("replay", "run a benchmark offline from recorded cassettes");
    add_common(replay_cmd, true);

    auto* score_cmd =
        app.add_subcommand("score", "recompute rewards and metrics from stored trajectories");
    score_cmd->add_option("trajectories", trajectory_path, "trajectory JSONL")->required();
    add_common(score_cmd, true);

    auto* report_cmd = app.add_subcommand("report", "aggregate stored metrics into a CSV report");
    report_cmd->add_option("trajectories", trajectory_path, "trajectory JSONL")->required();
    add_common(report_cmd, false);

    auto* toy_cmd =
        app.add_subcommand("train-toy", "train the tabular policy on the synthetic task");
    toy_cmd->add_option("--iterations", iterations, "training iterations");
    add_common(toy_cmd, false);

    auto* export_cmd =
        app.add_subcommand("grpo-export", "export rewards, advantages, and log-probs as JSONL");
    export_cmd->add_option("trajectories", trajectory_path, "trajectory JSONL")->required();
    add_common(export_cmd, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return run_or_replay(opts, /*replay=*/false);
        if (replay_cmd->parsed()) return run_or_replay(opts, /*replay=*/true);
        if (score_cmd->parsed()) return score(trajectory_path, opts);
        if (report_cmd->parsed()) return report(trajectory_path, opts);
        if (toy_cmd->parsed()) return train_toy(opts, iterations);
        if (export_cmd->parsed()) return grpo_export_cmd(trajectory_path, opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
