#pragma once

#include "orch/backends.hpp"
#include "orch/dialogue.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace orch::orchestration {

enum class RoleCategory {
    InformationGathering,
    Planning,
    DomainSolving,
    Verification,
    Critique,
    Synthesis,
};

const char* to_string(RoleCategory category);

/// Open role taxonomy: roles are free-form strings; the taxonomy only names
/// the functional stages observed in practice and a few example roles each.
struct RoleRepertoire {
    struct Entry {
        RoleCategory category;
        std::vector<std::string> example_roles;
        std::string stage;  // early / middle / late / terminal
    };
    std::vector<Entry> taxonomy;
    bool free_form_allowed = true;

    /// Throws std::invalid_argument unless all six categories appear exactly once.
    void validate() const;
};

RoleRepertoire default_repertoire();

/// One-line rendering of the repertoire used as the dialogue hint.
std::string render_hint(const RoleRepertoire& repertoire);

/// Case-insensitive keyword classification of a free-form role string.
/// Unmatched roles fall back to DomainSolving.
RoleCategory classify_role(std::string_view role);

enum class MalformedPolicy {
    RetryOnce,      // one corrective retry, then abort
    ForceFinalize,  // skip straight to final assembly
};

struct EpisodeConfig {
    int max_turns = 5;
    std::size_t token_budget = 8192;
    MalformedPolicy on_malformed = MalformedPolicy::RetryOnce;
    std::uint64_t seed = 0;
    bool collect_logprobs = false;
    backends::SamplingParams policy_params;
    backends::SamplingParams executor_params;
};

enum class Termination {
    PolicyFinalize,   // the policy emitted an answer block on its own
    TurnCapAssembly,  // the turn cap forced a final assembly call
    MalformedAbort,   // malformed output survived the configured handling
};

const char* to_string(Termination termination);

/// One complete episode: the execution path, the final answer, and the
/// accounting needed to score and export it.
struct Trajectory {
    std::string question;
    std::vector<dialogue::Exchange> exchanges;
    std::string final_answer;
    int terminal_turn = 0;
    Termination termination = Termination::MalformedAbort;
    std::string terminal_emission;  // raw text of the last policy output
    /// Per policy turn, the token log-probabilities reported by the backend.
    std::optional<std::vector<std::vector<double>>> per_turn_token_logprobs;
    int unknown_tool_calls = 0;
    int think_budget_violations = 0;     // advisory first-turn word-cap breaches
    std::size_t max_context_tokens = 0;  // peak rendered-context estimate
    long long prompt_tokens = 0;
    long long completion_tokens = 0;

    /// Sum over turns of per-token log-probabilities (0 when not recorded).
    double total_logprob() const;
};

/// Builds the executor message list for one routed request: the dynamic role
/// system prompt, prior exchanges as alternating user/assistant messages,
/// then the request. Returns the completion content verbatim.
std::string route_request(const std::string& role, const std::string& request,
                          const dialogue::DialogueHistory& history,
                          const backends::BackendHandle& executor,
                          const backends::SamplingParams& params = {});

struct FinalAssembly {
    std::string answer;
    std::string emission;
    backends::CompletionResult completion;
    long long prompt_tokens = 0;      // includes any corrective retry
    long long completion_tokens = 0;
};

/// Terminal policy call demanding a think block plus an answer block,
/// conditioned on the full history rendering. Applies the configured
/// malformed-output handling; throws MalformedEmissionError when exhausted.
FinalAssembly assemble_final(const std::string& question,
                             const dialogue::DialogueHistory& history,
                             const backends::BackendHandle& policy, const EpisodeConfig& config);

/// Runs one coordinator-substrate episode to completion. Turns 1..max_turns-1
/// are free policy turns; if none of them finalizes, turn max_turns is the
/// forced assembly. Backend transport failures propagate as EpisodeError with
/// the turn index attached.
Trajectory run_episode(const std::string& question, const backends::BackendHandle& policy,
                       const backends::BackendHandle& executor, const EpisodeConfig& config);

/// Instruction text the policy backend sees as its system message.
std::string policy_protocol_instruction();

/// System message for the forced final assembly call.
std::string assembly_instruction();

}  // namespace orch::orchestration
