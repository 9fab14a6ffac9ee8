#include "orch/harness.hpp"

#include "orch/errors.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

namespace orch::harness {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json parse_json_line(const std::string& line, const std::string& where, int line_no) {
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw DatasetError(where + " line " + std::to_string(line_no) + ": not a JSON object");
    }
    return doc;
}

void reject_unknown_keys(const json& doc, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, _] : doc.items()) {
        bool known = false;
        for (const char* name : allowed) known = known || key == name;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

orchestration::Termination termination_from_string(const std::string& name) {
    using orchestration::Termination;
    if (name == "policy_finalize") return Termination::PolicyFinalize;
    if (name == "turn_cap_assembly") return Termination::TurnCapAssembly;
    if (name == "malformed_abort") return Termination::MalformedAbort;
    throw SchemaError("unknown termination: " + name);
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset: " + path.string());
    std::vector<DatasetRecord> records;
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json doc = parse_json_line(line, path.string(), line_no);
        const auto where = path.string() + " line " + std::to_string(line_no);

        DatasetRecord record;
        if (!doc.contains("id") || !doc["id"].is_string()) {
            throw DatasetError(where + ": missing string field 'id'");
        }
        record.id = doc["id"].get<std::string>();
        if (!doc.contains("question") || !doc["question"].is_string()) {
            throw DatasetError(where + ": missing string field 'question'");
        }
        record.question = doc["question"].get<std::string>();
        if (!doc.contains("answers") || !doc["answers"].is_array() || doc["answers"].empty()) {
            throw DatasetError(where + ": 'answers' must be a non-empty array");
        }
        for (const auto& answer : doc["answers"]) {
            if (!answer.is_string()) throw DatasetError(where + ": answers must be strings");
            record.answers.push_back(answer.get<std::string>());
        }
        if (!doc.contains("metric") || !doc["metric"].is_string()) {
            throw DatasetError(where + ": missing string field 'metric'");
        }
        record.metric = metrics::metric_kind_from_string(doc["metric"].get<std::string>());
        if (doc.contains("context")) {
            if (!doc["context"].is_string()) throw DatasetError(where + ": context must be a string");
            record.context = doc["context"].get<std::string>();
        }
        if (!ids.insert(record.id).second) {
            throw DatasetError(where + ": duplicate id '" + record.id + "'");
        }
        records.push_back(std::move(record));
    }
    return records;
}

backends::SamplingParams BackendSettings::sampling() const {
    backends::SamplingParams params;
    params.temperature = temperature;
    params.max_tokens = max_tokens;
    params.logprobs = logprobs;
    params.model = model;
    return params;
}

RunConfig default_run_config() {
    RunConfig config;
    config.policy.api_key_env = "ORCH_POLICY_API_KEY";
    config.executor.api_key_env = "ORCH_EXEC_API_KEY";
    return config;
}

void RunConfig::validate() const {
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (episode.max_turns < 1) throw ConfigError("episode.max_turns must be at least 1");
    if (episode.token_budget == 0) throw ConfigError("episode.token_budget must be positive");
    try {
        reward.validate();
        grpo.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto check_backend = [&](const BackendSettings& s, const char* which) {
        if (s.kind == BackendKind::Http && s.url.empty()) {
            throw ConfigError(std::string(which) + ": http backend needs a url");
        }
        if (s.kind == BackendKind::Cassette && cassette_dir.empty()) {
            throw ConfigError(std::string(which) + ": cassette backend needs cassette_dir");
        }
    };
    check_backend(policy, "policy");
    check_backend(executor, "executor");
    if (record) {
        if (policy.kind != BackendKind::Http || executor.kind != BackendKind::Http) {
            throw ConfigError("record mode wraps live backends; set both kinds to http");
        }
        if (cassette_dir.empty()) throw ConfigError("record mode needs cassette_dir");
    }
}

namespace {

BackendSettings parse_backend_settings(const json& doc, const std::string& where,
                                       BackendSettings defaults) {
    reject_unknown_keys(doc,
                        {"kind", "url", "model", "api_key_env", "temperature", "max_tokens",
                         "logprobs", "max_retries", "retry_backoff_ms"},
                        where);
    BackendSettings s = std::move(defaults);
    if (doc.contains("kind")) {
        const auto kind = doc["kind"].get<std::string>();
        if (kind == "http") {
            s.kind = BackendKind::Http;
        } else if (kind == "cassette") {
            s.kind = BackendKind::Cassette;
        } else {
            throw ConfigError(where + ": unknown backend kind '" + kind + "'");
        }
    }
    s.url = doc.value("url", s.url);
    s.model = doc.value("model", s.model);
    s.api_key_env = doc.value("api_key_env", s.api_key_env);
    s.temperature = doc.value("temperature", s.temperature);
    s.max_tokens = doc.value("max_tokens", s.max_tokens);
    s.logprobs = doc.value("logprobs", s.logprobs);
    s.max_retries = doc.value("max_retries", s.max_retries);
    s.retry_backoff_ms = doc.value("retry_backoff_ms", s.retry_backoff_ms);
    return s;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    reject_unknown_keys(doc,
                        {"policy", "executor", "episode", "reward", "grpo", "parallelism",
                         "dataset_name", "output_dir", "cassette_dir", "record", "replay_strict"},
                        path.string());

    RunConfig config = default_run_config();
    if (doc.contains("policy")) {
        config.policy = parse_backend_settings(doc["policy"], "policy", config.policy);
    }
    if (doc.contains("executor")) {
        config.executor = parse_backend_settings(doc["executor"], "executor", config.executor);
    }
    if (doc.contains("episode")) {
        const auto& ep = doc["episode"];
        reject_unknown_keys(
            ep, {"max_turns", "token_budget", "on_malformed", "seed", "collect_logprobs"},
            "episode");
        config.episode.max_turns = ep.value("max_turns", config.episode.max_turns);
        config.episode.token_budget = ep.value("token_budget", config.episode.token_budget);
        if (ep.contains("on_malformed")) {
            const auto mode = ep["on_malformed"].get<std::string>();
            if (mode == "retry_once") {
                config.episode.on_malformed = orchestration::MalformedPolicy::RetryOnce;
            } else if (mode == "force_finalize") {
                config.episode.on_malformed = orchestration::MalformedPolicy::ForceFinalize;
            } else {
                throw ConfigError("episode.on_malformed: unknown mode '" + mode + "'");
            }
        }
        config.episode.seed = ep.value("seed", config.episode.seed);
        config.episode.collect_logprobs =
            ep.value("collect_logprobs", config.episode.collect_logprobs);
    }
    if (doc.contains("reward")) {
        const auto& rw = doc["reward"];
        reject_unknown_keys(rw, {"kappa", "alpha_total", "beta", "gamma", "delta"}, "reward");
        config.reward.kappa = rw.value("kappa", config.reward.kappa);
        config.reward.alpha_total = rw.value("alpha_total", config.reward.alpha_total);
        config.reward.beta = rw.value("beta", config.reward.beta);
        config.reward.gamma = rw.value("gamma", config.reward.gamma);
        config.reward.delta = rw.value("delta", config.reward.delta);
    }
    if (doc.contains("grpo")) {
        const auto& gr = doc["grpo"];
        reject_unknown_keys(
            gr, {"eps_stab", "eps_clip", "kl_coeff", "learning_rate", "group_size", "kl_aggregation"},
            "grpo");
        config.grpo.eps_stab = gr.value("eps_stab", config.grpo.eps_stab);
        config.grpo.eps_clip = gr.value("eps_clip", config.grpo.eps_clip);
        config.grpo.kl_coeff = gr.value("kl_coeff", config.grpo.kl_coeff);
        config.grpo.learning_rate = gr.value("learning_rate", config.grpo.learning_rate);
        config.grpo.group_size = gr.value("group_size", config.grpo.group_size);
        if (gr.contains("kl_aggregation")) {
            const auto mode = gr["kl_aggregation"].get<std::string>();
            if (mode == "token_mean") {
                config.grpo.kl_aggregation = rl::KlAggregation::TokenMeanPerTrajectory;
            } else if (mode == "pooled") {
                config.grpo.kl_aggregation = rl::KlAggregation::PooledTokens;
            } else {
                throw ConfigError("grpo.kl_aggregation: unknown mode '" + mode + "'");
            }
        }
    }
    config.parallelism = doc.value("parallelism", config.parallelism);
    config.dataset_name = doc.value("dataset_name", config.dataset_name);
    if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("cassette_dir")) config.cassette_dir = doc["cassette_dir"].get<std::string>();
    config.record = doc.value("record", config.record);
    config.replay_strict = doc.value("replay_strict", config.replay_strict);
    config.validate();
    return config;
}

// --- trajectory records -------------------------------------------------------

std::string serialize_record(const TrajectoryRecord& record) {
    ordered_json doc;
    doc["schema_version"] = record.schema_version;
    doc["episode_id"] = record.episode_id;
    doc["dataset"] = record.dataset;
    doc["question"] = record.trajectory.question;
    auto exchanges = ordered_json::array();
    for (const auto& ex : record.trajectory.exchanges) {
        ordered_json e;
        e["turn_index"] = ex.turn_index;
        e["reasoning"] = ex.reasoning;
        e["role"] = ex.role;
        e["request"] = ex.request;
        e["feedback"] = ex.feedback;
        exchanges.push_back(std::move(e));
    }
    doc["exchanges"] = std::move(exchanges);
    doc["final_answer"] = record.trajectory.final_answer;
    doc["terminal_turn"] = record.trajectory.terminal_turn;
    doc["termination"] = orchestration::to_string(record.trajectory.termination);
    doc["terminal_emission"] = record.trajectory.terminal_emission;
    if (record.trajectory.per_turn_token_logprobs) {
        doc["per_turn_token_logprobs"] = *record.trajectory.per_turn_token_logprobs;
    }
    doc["unknown_tool_calls"] = record.trajectory.unknown_tool_calls;
    doc["think_budget_violations"] = record.trajectory.think_budget_violations;
    doc["max_context_tokens"] = record.trajectory.max_context_tokens;
    doc["prompt_tokens"] = record.trajectory.prompt_tokens;
    doc["completion_tokens"] = record.trajectory.completion_tokens;
    ordered_json rw;
    rw["lambda_per_turn"] = record.reward_breakdown.lambda_per_turn;
    rw["b_m"] = record.reward_breakdown.b_m;
    rw["b_v"] = record.reward_breakdown.b_v;
    rw["i_c"] = record.reward_breakdown.i_c;
    rw["r_fmt"] = record.reward_breakdown.r_fmt;
    rw["r_prec"] = record.reward_breakdown.r_prec;
    rw["r_total"] = record.reward_breakdown.r_total;
    rw["gate_open"] = record.reward_breakdown.gate_open;
    doc["reward"] = std::move(rw);
    ordered_json mv;
    if (record.metric_values.em) mv["em"] = *record.metric_values.em;
    if (record.metric_values.f1) mv["f1"] = *record.metric_values.f1;
    if (record.metric_values.cosine) mv["cosine"] = *record.metric_values.cosine;
    doc["metrics"] = std::move(mv);
    doc["duration_ms"] = record.duration_ms;
    if (record.error) doc["error"] = *record.error;
    return doc.dump();
}

TrajectoryRecord parse_record(const std::string& line) {
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw SchemaError("trajectory record is not a JSON object");
    }
    TrajectoryRecord record;
    record.schema_version = doc.value("schema_version", -1);
    if (record.schema_version != kSchemaVersion) {
        throw SchemaError("unsupported trajectory schema_version " +
                          std::to_string(record.schema_version));
    }
    try {
        record.episode_id = doc.at("episode_id").get<std::string>();
        record.dataset = doc.value("dataset", std::string{});
        record.trajectory.question = doc.at("question").get<std::string>();
        for (const auto& e : doc.at("exchanges")) {
            dialogue::Exchange ex;
            ex.turn_index = e.at("turn_index").get<int>();
            ex.reasoning = e.at("reasoning").get<std::string>();
            ex.role = e.at("role").get<std::string>();
            ex.request = e.at("request").get<std::string>();
            ex.feedback = e.at("feedback").get<std::string>();
            record.trajectory.exchanges.push_back(std::move(ex));
        }
        record.trajectory.final_answer = doc.at("final_answer").get<std::string>();
        record.trajectory.terminal_turn = doc.at("terminal_turn").get<int>();
        record.trajectory.termination =
            termination_from_string(doc.at("termination").get<std::string>());
        record.trajectory.terminal_emission = doc.at("terminal_emission").get<std::string>();
        if (doc.contains("per_turn_token_logprobs")) {
            record.trajectory.per_turn_token_logprobs =
                doc["per_turn_token_logprobs"].get<std::vector<std::vector<double>>>();
        }
        record.trajectory.unknown_tool_calls = doc.value("unknown_tool_calls", 0);
        record.trajectory.think_budget_violations = doc.value("think_budget_violations", 0);
        record.trajectory.max_context_tokens = doc.value("max_context_tokens", 0u);
        record.trajectory.prompt_tokens = doc.value("prompt_tokens", 0LL);
        record.trajectory.completion_tokens = doc.value("completion_tokens", 0LL);
        const auto& rw = doc.at("reward");
        record.reward_breakdown.lambda_per_turn = rw.at("lambda_per_turn").get<std::vector<int>>();
        record.reward_breakdown.b_m = rw.at("b_m").get<int>();
        record.reward_breakdown.b_v = rw.at("b_v").get<int>();
        record.reward_breakdown.i_c = rw.at("i_c").get<int>();
        record.reward_breakdown.r_fmt = rw.at("r_fmt").get<double>();
        record.reward_breakdown.r_prec = rw.at("r_prec").get<double>();
        record.reward_breakdown.r_total = rw.at("r_total").get<double>();
        record.reward_breakdown.gate_open = rw.at("gate_open").get<bool>();
        const auto& mv = doc.at("metrics");
        if (mv.contains("em")) record.metric_values.em = mv["em"].get<int>();
        if (mv.contains("f1")) record.metric_values.f1 = mv["f1"].get<double>();
        if (mv.contains("cosine")) record.metric_values.cosine = mv["cosine"].get<double>();
        record.duration_ms = doc.value("duration_ms", 0LL);
        if (doc.contains("error")) record.error = doc["error"].get<std::string>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("trajectory record: ") + e.what());
    }
    return record;
}

std::vector<TrajectoryRecord> load_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open trajectory file: " + path.string());
    std::vector<TrajectoryRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(parse_record(line));
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + " line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    return records;
}

AggregateReport aggregate(const std::string& dataset_name,
                          const std::vector<TrajectoryRecord>& records) {
    AggregateReport report;
    if (records.empty()) return report;
    double em_sum = 0.0, f1_sum = 0.0, cos_sum = 0.0;
    std::size_t em_n = 0, cos_n = 0;
    for (const auto& record : records) {
        if (record.metric_values.em || record.metric_values.f1) {
            em_sum += record.metric_values.em.value_or(0);
            f1_sum += record.metric_values.f1.value_or(0.0);
            ++em_n;
        }
        if (record.metric_values.cosine) {
            cos_sum += *record.metric_values.cosine;
            ++cos_n;
        }
    }
    metrics::DatasetReportRow row;
    row.dataset = dataset_name;
    row.n = records.size();
    if (em_n > 0) {
        row.em_percent = metrics::to_percent(em_sum / static_cast<double>(em_n));
        row.f1_percent = metrics::to_percent(f1_sum / static_cast<double>(em_n));
    }
    if (cos_n > 0) row.cosine_percent = metrics::to_percent(cos_sum / static_cast<double>(cos_n));
    report.rows.push_back(std::move(row));
    return report;
}

// --- benchmark runner ---------------------------------------------------------

namespace {

backends::BackendHandle make_backend(const BackendSettings& settings, const RunConfig& config,
                                     const std::string& episode_id, const char* side) {
    const auto cassette_path = config.cassette_dir / (episode_id + "." + side + ".jsonl");
    if (settings.kind == BackendKind::Cassette) {
        return std::make_shared<backends::ScriptedBackend>(
            backends::load_cassette(cassette_path, config.replay_strict));
    }
    backends::HttpBackendConfig http;
    http.url = settings.url;
    http.model = settings.model;
    http.api_key_env = settings.api_key_env;
    http.max_retries = settings.max_retries;
    http.retry_backoff_ms = settings.retry_backoff_ms;
    backends::BackendHandle handle = std::make_shared<backends::HttpBackend>(http);
    if (config.record) {
        handle = std::make_shared<backends::RecordBackend>(handle, cassette_path);
    }
    return handle;
}

std::string question_with_context(const DatasetRecord& record) {
    if (!record.context || record.context->empty()) return record.question;
    return record.question + "\n" + *record.context;
}

void fill_metrics(TrajectoryRecord& record, const DatasetRecord& dataset_record) {
    const reward::ReferenceSet refs{dataset_record.answers};
    const std::string& answer = record.trajectory.final_answer;
    if (dataset_record.metric == metrics::MetricKind::EmF1) {
        record.metric_values.em = metrics::exact_match(answer, refs);
        record.metric_values.f1 = metrics::token_f1(answer, refs);
        record.metric_values.cosine.reset();
    } else {
        double best = 0.0;
        for (const auto& ref : dataset_record.answers) {
            best = std::max(best, metrics::cosine_similarity(answer, ref));
        }
        record.metric_values.cosine = best;
        record.metric_values.em.reset();
        record.metric_values.f1.reset();
    }
}

TrajectoryRecord run_one_episode(const DatasetRecord& dataset_record, const RunConfig& config,
                                 const std::string& dataset_name) {
    TrajectoryRecord record;
    record.episode_id = dataset_record.id;
    record.dataset = dataset_name;
    const auto started = std::chrono::steady_clock::now();
    try {
        const auto policy = make_backend(config.policy, config, dataset_record.id, "policy");
        const auto executor = make_backend(config.executor, config, dataset_record.id, "executor");
        orchestration::EpisodeConfig episode = config.episode;
        episode.policy_params = config.policy.sampling();
        episode.executor_params = config.executor.sampling();
        record.trajectory = orchestration::run_episode(question_with_context(dataset_record),
                                                       policy, executor, episode);
        rescore_record(record, dataset_record, config.reward);
    } catch (const Error& e) {
        record.error = e.what();
        record.trajectory.question = question_with_context(dataset_record);
        // Failed episodes take the format floor and score zero on metrics.
        record.reward_breakdown = {};
        record.reward_breakdown.r_total = -config.reward.kappa;
        if (dataset_record.metric == metrics::MetricKind::EmF1) {
            record.metric_values.em = 0;
            record.metric_values.f1 = 0.0;
        } else {
            record.metric_values.cosine = 0.0;
        }
    }
    record.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    return record;
}

}  // namespace

void rescore_record(TrajectoryRecord& record, const DatasetRecord& dataset_record,
                    const reward::RewardConfig& reward_config) {
    const reward::ReferenceSet refs{dataset_record.answers};
    record.reward_breakdown = reward::score_trajectory(record.trajectory, refs, reward_config);
    fill_metrics(record, dataset_record);
}

BenchmarkResult run_benchmark(const std::vector<DatasetRecord>& records, const RunConfig& config,
                              const std::filesystem::path& output_path) {
    config.validate();
    const std::string& dataset_name = config.dataset_name;

    BenchmarkResult result;
    std::set<std::string> done_ids;
    if (std::filesystem::exists(output_path)) {
        for (auto& record : load_trajectories(output_path)) {
            done_ids.insert(record.episode_id);
            result.records.push_back(std::move(record));
        }
    }

    std::vector<const DatasetRecord*> work;
    for (const auto& record : records) {
        if (done_ids.count(record.id) > 0) {
            ++result.episodes_skipped;
        } else {
            work.push_back(&record);
        }
    }

    // Replay mode promises its cassettes up front.
    if (!config.record && (config.policy.kind == BackendKind::Cassette ||
                           config.executor.kind == BackendKind::Cassette)) {
        for (const auto* record : work) {
            for (const char* side : {"policy", "executor"}) {
                const bool needed = (std::string(side) == "policy")
                                        ? config.policy.kind == BackendKind::Cassette
                                        : config.executor.kind == BackendKind::Cassette;
                const auto path = config.cassette_dir / (record->id + "." + side + ".jsonl");
                if (needed && !std::filesystem::exists(path)) {
                    throw ConfigError("missing cassette for episode '" + record->id +
                                      "': " + path.string());
                }
            }
        }
    }

    if (!output_path.parent_path().empty()) {
        std::filesystem::create_directories(output_path.parent_path());
    }
    std::ofstream out(output_path, std::ios::app);
    if (!out) throw ConfigError("cannot open output file: " + output_path.string());

    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::optional<TrajectoryRecord>> slots(work.size());
    std::atomic<std::size_t> next{0};

    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= work.size()) return;
            TrajectoryRecord record = run_one_episode(*work[i], config, dataset_name);
            {
                std::lock_guard<std::mutex> lock(mu);
                slots[i] = std::move(record);
            }
            cv.notify_all();
        }
    };

    const std::size_t pool =
        std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), work.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < pool; ++i) threads.emplace_back(worker);

    // Flush results in dataset order as soon as each prefix completes, so an
    // interrupted run leaves a resumable file and reruns are byte-stable.
    for (std::size_t i = 0; i < work.size(); ++i) {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return slots[i].has_value(); });
        TrajectoryRecord record = std::move(*slots[i]);
        slots[i].reset();
        lock.unlock();
        out << serialize_record(record) << "\n";
        out.flush();
        if (record.failed()) ++result.episodes_failed;
        result.records.push_back(std::move(record));
    }
    for (auto& thread : threads) thread.join();

    result.report = aggregate(dataset_name, result.records);
    return result;
}

ScoreResult score_trajectories(const std::filesystem::path& trajectory_path,
                               const std::filesystem::path& dataset_path,
                               const reward::RewardConfig& reward_config) {
    ScoreResult result;
    result.rescored = load_trajectories(trajectory_path);
    const auto dataset = load_dataset(dataset_path);
    std::unordered_map<std::string, const DatasetRecord*> by_id;
    for (const auto& record : dataset) by_id[record.id] = &record;

    for (auto& record : result.rescored) {
        const auto it = by_id.find(record.episode_id);
        if (it == by_id.end()) {
            throw DatasetError("trajectory id '" + record.episode_id +
                               "' is not in the dataset " + dataset_path.string());
        }
        if (record.error) continue;  // nothing to recompute for failed episodes
        const TrajectoryRecord before = record;
        rescore_record(record, *it->second, reward_config);
        const bool same =
            before.reward_breakdown.r_fmt == record.reward_breakdown.r_fmt &&
            before.reward_breakdown.r_prec == record.reward_breakdown.r_prec &&
            before.reward_breakdown.r_total == record.reward_breakdown.r_total &&
            before.reward_breakdown.b_m == record.reward_breakdown.b_m &&
            before.reward_breakdown.b_v == record.reward_breakdown.b_v &&
            before.reward_breakdown.i_c == record.reward_breakdown.i_c &&
            before.reward_breakdown.lambda_per_turn == record.reward_breakdown.lambda_per_turn &&
            before.metric_values.em == record.metric_values.em &&
            before.metric_values.f1 == record.metric_values.f1 &&
            before.metric_values.cosine == record.metric_values.cosine;
        if (!same) ++result.drift;
    }
    std::string name = trajectory_path.stem().string();
    if (!result.rescored.empty() && !result.rescored.front().dataset.empty()) {
        name = result.rescored.front().dataset;
    }
    result.report = aggregate(name, result.rescored);
    return result;
}

std::string grpo_export(const std::vector<TrajectoryRecord>& records,
                        const rl::GrpoConfig& config) {
    std::string out;
    for (std::size_t begin = 0; begin < records.size(); begin += config.group_size) {
        const std::size_t end =
            std::min(records.size(), begin + static_cast<std::size_t>(config.group_size));
        std::vector<double> rewards;
        for (std::size_t i = begin; i < end; ++i) {
            rewards.push_back(records[i].reward_breakdown.r_total);
        }
        const auto advantages = rl::normalize_advantages(rewards, config.eps_stab);
        for (std::size_t i = begin; i < end; ++i) {
            ordered_json line;
            line["episode_id"] = records[i].episode_id;
            line["reward"] = records[i].reward_breakdown.r_total;
            line["advantage"] = advantages[i - begin];
            line["turn_logprobs"] = records[i].trajectory.per_turn_token_logprobs.value_or(
                std::vector<std::vector<double>>{});
            out += line.dump();
            out += "\n";
        }
    }
    return out;
}

}  // namespace orch::harness

