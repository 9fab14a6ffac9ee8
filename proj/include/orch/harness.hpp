#pragma once

#include "orch/backends.hpp"
#include "orch/metrics.hpp"
#include "orch/orchestration.hpp"
#include "orch/reward.hpp"
#include "orch/rl.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace orch::harness {

inline constexpr int kSchemaVersion = 1;

struct DatasetRecord {
    std::string id;
    std::string question;
    std::vector<std::string> answers;  // non-empty
    metrics::MetricKind metric = metrics::MetricKind::EmF1;
    std::optional<std::string> context;  // appended to the question rendering
};

/// Validated records in file order. Throws DatasetError naming the line on
/// malformed rows, missing fields, empty answers, or duplicate ids.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);

enum class BackendKind { Http, Cassette };

struct BackendSettings {
    BackendKind kind = BackendKind::Cassette;
    std::string url;
    std::string model;
    std::string api_key_env;
    double temperature = 0.0;
    int max_tokens = 1024;
    bool logprobs = false;
    int max_retries = 3;
    int retry_backoff_ms = 250;

    backends::SamplingParams sampling() const;
};

struct RunConfig {
    BackendSettings policy;
    BackendSettings executor;
    orchestration::EpisodeConfig episode;
    reward::RewardConfig reward;
    rl::GrpoConfig grpo;
    int parallelism = 1;
    std::string dataset_name = "dataset";  // report row label
    std::filesystem::path output_dir = "out";
    std::filesystem::path cassette_dir;  // per-episode cassettes live here
    bool record = false;                 // wrap live backends and record
    bool replay_strict = false;          // verify fingerprints during replay

    void validate() const;  // throws ConfigError
};

RunConfig default_run_config();

/// Parses the declarative JSON config document; unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);

struct MetricValues {
    std::optional<int> em;
    std::optional<double> f1;
    std::optional<double> cosine;
};

/// One persisted episode: the trajectory plus its scores and accounting.
struct TrajectoryRecord {
    int schema_version = kSchemaVersion;
    std::string episode_id;
    std::string dataset;
    orchestration::Trajectory trajectory;
    reward::RewardBreakdown reward_breakdown;
    MetricValues metric_values;
    long long duration_ms = 0;
    std::optional<std::string> error;  // transport/episode failure, if any

    bool failed() const {
        return error.has_value() ||
               trajectory.termination == orchestration::Termination::MalformedAbort;
    }
};

std::string serialize_record(const TrajectoryRecord& record);
TrajectoryRecord parse_record(const std::string& line);  // throws SchemaError

std::vector<TrajectoryRecord> load_trajectories(const std::filesystem::path& path);

struct AggregateReport {
    std::vector<metrics::DatasetReportRow> rows;
    std::string csv() const { return metrics::render_report_csv(rows); }
};

AggregateReport aggregate(const std::string& dataset_name,
                          const std::vector<TrajectoryRecord>& records);

struct BenchmarkResult {
    std::vector<TrajectoryRecord> records;
    AggregateReport report;
    int episodes_failed = 0;
    int episodes_skipped = 0;  // already present in the output file
};

/// Runs every record through the episode loop with a bounded worker pool of
/// size parallelism. Trajectories are appended to `output_path` in dataset
/// order as soon as their prefix completes, so an interrupted run resumes by
/// id-skip. Individual episode failures become error records; they never
/// abort the batch.
BenchmarkResult run_benchmark(const std::vector<DatasetRecord>& records, const RunConfig& config,
                              const std::filesystem::path& output_path);

/// Recomputes rewards and metrics from the stored trajectories without any
/// backend access. Every trajectory id must appear in the dataset. Stored
/// values are recomputed from raw text, so an untouched run file reproduces
/// its run-time numbers exactly; `drift` counts records whose stored fields
/// no longer match.
struct ScoreResult {
    std::vector<TrajectoryRecord> rescored;
    AggregateReport report;
    int drift = 0;
};

ScoreResult score_trajectories(const std::filesystem::path& trajectory_path,
                               const std::filesystem::path& dataset_path,
                               const reward::RewardConfig& reward_config);

/// Re-scores one record in place from its stored trajectory text.
void rescore_record(TrajectoryRecord& record, const DatasetRecord& dataset_record,
                    const reward::RewardConfig& reward_config);

/// RL export: one JSONL line per trajectory with reward, group-normalized
/// advantage, and per-turn token log-probs. Advantages are normalized within
/// consecutive groups of group_size records.
std::string grpo_export(const std::vector<TrajectoryRecord>& records, const rl::GrpoConfig& config);

}  // namespace orch::harness
