#include "orch/orchestration.hpp"

#include "orch/errors.hpp"
#include "orch/protocol.hpp"
#include "orch/text_util.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <utility>

namespace orch::orchestration {

namespace {

using backends::assistant_message;
using backends::ChatMessage;
using backends::CompletionResult;
using backends::system_message;
using backends::user_message;

constexpr std::array<std::pair<std::string_view, RoleCategory>, 12> kRoleKeywords = {{
    {"researcher", RoleCategory::InformationGathering},
    {"domain expert", RoleCategory::InformationGathering},
    {"planner", RoleCategory::Planning},
    {"strategist", RoleCategory::Planning},
    {"solver", RoleCategory::DomainSolving},
    {"coder", RoleCategory::DomainSolving},
    {"psychologist", RoleCategory::DomainSolving},
    {"verifier", RoleCategory::Verification},
    {"clarifier", RoleCategory::Verification},
    {"critiquer", RoleCategory::Critique},
    {"critic", RoleCategory::Critique},
    {"assistant", RoleCategory::Synthesis},
}};

}  // namespace

const char* to_string(RoleCategory category) {
    switch (category) {
        case RoleCategory::InformationGathering: return "Information Gathering";
        case RoleCategory::Planning: return "Planning";
        case RoleCategory::DomainSolving: return "Domain Solving";
        case RoleCategory::Verification: return "Verification";
        case RoleCategory::Critique: return "Critique";
        case RoleCategory::Synthesis: return "Synthesis";
    }
    return "Domain Solving";
}

const char* to_string(Termination termination) {
    switch (termination) {
        case Termination::PolicyFinalize: return "policy_finalize";
        case Termination::TurnCapAssembly: return "turn_cap_assembly";
        case Termination::MalformedAbort: return "malformed_abort";
    }
    return "malformed_abort";
}

void RoleRepertoire::validate() const {
    constexpr std::array<RoleCategory, 6> all = {
        RoleCategory::InformationGathering, RoleCategory::Planning, RoleCategory::DomainSolving,
        RoleCategory::Verification,         RoleCategory::Critique, RoleCategory::Synthesis,
    };
    for (const auto category : all) {
        const auto count = std::count_if(taxonomy.begin(), taxonomy.end(),
                                         [&](const Entry& e) { return e.category == category; });
        if (count != 1) {
            throw std::invalid_argument(std::string("repertoire must list category '") +
                                        to_string(category) + "' exactly once");
        }
    }
}

RoleRepertoire default_repertoire() {
    RoleRepertoire r;
    r.taxonomy = {
        {RoleCategory::InformationGathering, {"Researcher", "Domain Expert"}, "early"},
        {RoleCategory::Planning, {"Planner", "Strategist"}, "early"},
        {RoleCategory::DomainSolving, {"Math Solver", "Coder", "Psychologist"}, "middle"},
        {RoleCategory::Verification, {"Verifier", "Clarifier"}, "late"},
        {RoleCategory::Critique, {"Critiquer"}, "late"},
        {RoleCategory::Synthesis, {"Assistant"}, "terminal"},
    };
    r.free_form_allowed = true;
    return r;
}

std::string render_hint(const RoleRepertoire& repertoire) {
    std::string hint = repertoire.free_form_allowed ? "any free-form role; typical stages: "
                                                    : "typical stages: ";
    for (std::size_t i = 0; i < repertoire.taxonomy.size(); ++i) {
        const auto& entry = repertoire.taxonomy[i];
        if (i > 0) hint += "; ";
        hint += to_string(entry.category);
        hint += " (";
        for (std::size_t j = 0; j < entry.example_roles.size(); ++j) {
            if (j > 0) hint += ", ";
            hint += entry.example_roles[j];
        }
        hint += "; " + entry.stage + ")";
    }
    return hint;
}

RoleCategory classify_role(std::string_view role) {
    const std::string lowered = to_lower_ascii(role);
    for (const auto& [keyword, category] : kRoleKeywords) {
        if (lowered.find(keyword) != std::string::npos) return category;
    }
    return RoleCategory::DomainSolving;
}

double Trajectory::total_logprob() const {
    if (!per_turn_token_logprobs) return 0.0;
    double total = 0.0;
    for (const auto& turn : *per_turn_token_logprobs) {
        for (const double lp : turn) total += lp;
    }
    return total;
}

std::string policy_protocol_instruction() {
    return "You coordinate a team of expert agents to answer the question below. Work in "
           "turns. Every turn starts with your reasoning inside <think>...</think>; on the "
           "first turn keep it under 80 words. To consult an agent, follow the think block "
           "with exactly one <interaction_prompt>{\"name\": \"prompt_dynamic\", \"arguments\": "
           "{\"prompt\": \"...\", \"agent_role\": \"...\"}}</interaction_prompt> block, where "
           "agent_role is any role you invent for the task and prompt is your request to that "
           "agent. Each agent reply reaches you inside "
           "<interaction_response>...</interaction_response>; build on it instead of repeating "
           "yourself. Once the answer is ready, emit <think>...</think><answer>final "
           "answer</answer> and nothing else.";
}

std::string assembly_instruction() {
    return "The collaboration below has ended. Assemble the final answer to the question "
           "from the full record. Reply with exactly one <think>...</think> block followed by "
           "one <answer>...</answer> block containing only the final answer.";
}

namespace {

std::string corrective_instruction() {
    return "Your previous reply did not follow the protocol. Reply again with exactly one "
           "<think>...</think> block followed by either one "
           "<interaction_prompt>...</interaction_prompt> tool call or one "
           "<answer>...</answer> block.";
}

CompletionResult call_policy(const backends::BackendHandle& policy,
                             std::span<const ChatMessage> messages,
                             const backends::SamplingParams& params, int turn) {
    try {
        return backends::complete(policy, messages, params);
    } catch (const MalformedEmissionError&) {
        throw;
    } catch (const Error& e) {
        throw EpisodeError(turn, e.what());
    }
}

struct PolicyTurn {
    protocol::ParsedTurn turn;
    CompletionResult completion;
    std::string emission;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

/// One policy call plus, when configured, a single corrective retry. Throws
/// MalformedEmissionError carrying the last raw emission once handling is
/// exhausted. `require_finalize` additionally rejects Continue actions (the
/// assembly call demands an answer block).
PolicyTurn elicit_policy_turn(const backends::BackendHandle& policy,
                              std::vector<ChatMessage> messages,
                              const backends::SamplingParams& params, int turn, bool retry_once,
                              bool require_finalize) {
    PolicyTurn out;
    for (int attempt = 0;; ++attempt) {
        const CompletionResult result = call_policy(policy, messages, params, turn);
        out.prompt_tokens += result.prompt_tokens;
        out.completion_tokens += result.completion_tokens;
        const auto parsed = protocol::parse_policy_turn(result.content);
        const auto* ok = std::get_if<protocol::ParsedTurn>(&parsed);
        const bool acceptable =
            ok != nullptr &&
            (!require_finalize || std::holds_alternative<protocol::FinalAnswer>(ok->action));
        if (acceptable) {
            out.turn = *ok;
            out.completion = result;
            out.emission = result.content;
            return out;
        }
        if (attempt > 0 || !retry_once) {
            throw MalformedEmissionError("policy emission malformed at turn " +
                                             std::to_string(turn),
                                         result.content);
        }
        messages.push_back(assistant_message(result.content));
        messages.push_back(user_message(corrective_instruction()));
    }
}

}  // namespace

std::string route_request(const std::string& role, const std::string& request,
                          const dialogue::DialogueHistory& history,
                          const backends::BackendHandle& executor,
                          const backends::SamplingParams& params) {
    if (is_blank(role) || is_blank(request)) {
        throw std::invalid_argument("route_request needs a non-empty role and request");
    }
    std::vector<ChatMessage> messages;
    messages.reserve(2 * history.exchanges.size() + 2);
    messages.push_back(system_message(backends::executor_system_prompt(role)));
    for (const auto& ex : history.exchanges) {
        messages.push_back(user_message(ex.request));
        messages.push_back(assistant_message(ex.feedback));
    }
    messages.push_back(user_message(request));
    const CompletionResult result = backends::complete(executor, messages, params);
    if (result.content.empty()) {
        throw EmptyFeedbackError("executor returned an empty completion for role '" + role + "'");
    }
    return result.content;
}

FinalAssembly assemble_final(const std::string& question,
                             const dialogue::DialogueHistory& history,
                             const backends::BackendHandle& policy, const EpisodeConfig& config) {
    (void)question;  // the history rendering already leads with the question
    const auto enc = dialogue::render_encoding(history, config.token_budget);
    std::vector<ChatMessage> messages{system_message(assembly_instruction()),
                                      user_message(enc.rendered)};
    const bool retry = config.on_malformed == MalformedPolicy::RetryOnce;
    PolicyTurn turn =
        elicit_policy_turn(policy, std::move(messages), config.policy_params,
                           config.max_turns, retry, /*require_finalize=*/true);
    FinalAssembly out;
    out.answer = std::get<protocol::FinalAnswer>(turn.turn.action).text;
    out.emission = std::move(turn.emission);
    out.completion = std::move(turn.completion);
    out.prompt_tokens = turn.prompt_tokens;
    out.completion_tokens = turn.completion_tokens;
    return out;
}

Trajectory run_episode(const std::string& question, const backends::BackendHandle& policy,
                       const backends::BackendHandle& executor, const EpisodeConfig& config) {
    if (config.max_turns < 1) throw std::invalid_argument("max_turns must be at least 1");

    const RoleRepertoire repertoire = default_repertoire();
    dialogue::DialogueHistory history{question, render_hint(repertoire), {}};

    Trajectory traj;
    traj.question = question;
    std::vector<std::vector<double>> logprobs;
    std::string last_feedback;

    const auto note_completion = [&](const CompletionResult& result) {
        if (config.collect_logprobs) {
            std::vector<double> turn_lps;
            if (result.token_logprobs) {
                for (const auto& [_, lp] : *result.token_logprobs) turn_lps.push_back(lp);
            }
            logprobs.push_back(std::move(turn_lps));
        }
    };

    const auto finish = [&](Termination termination, int turn, std::string answer,
                            std::string emission) {
        traj.termination = termination;
        traj.terminal_turn = turn;
        traj.final_answer = std::move(answer);
        traj.terminal_emission = std::move(emission);
        traj.exchanges = history.exchanges;
        if (config.collect_logprobs) traj.per_turn_token_logprobs = std::move(logprobs);
    };

    const auto run_assembly = [&](int turn) {
        try {
            FinalAssembly assembly = assemble_final(question, history, policy, config);
            traj.prompt_tokens += assembly.prompt_tokens;
            traj.completion_tokens += assembly.completion_tokens;
            const auto enc = dialogue::render_encoding(history, config.token_budget);
            traj.max_context_tokens = std::max(traj.max_context_tokens, enc.token_estimate);
            note_completion(assembly.completion);
            finish(Termination::TurnCapAssembly, turn, std::move(assembly.answer),
                   std::move(assembly.emission));
        } catch (const MalformedEmissionError& e) {
            finish(Termination::MalformedAbort, turn, "", e.last_emission);
        }
    };

    for (int turn = 1; turn <= config.max_turns; ++turn) {
        if (turn == config.max_turns) {
            // Last allowed turn: the policy no longer gets a free action, it
            // must assemble under full-history conditioning.
            run_assembly(turn);
            return traj;
        }

        const auto enc = dialogue::render_encoding(history, config.token_budget);
        traj.max_context_tokens = std::max(traj.max_context_tokens, enc.token_estimate);
        std::string user_content = enc.rendered;
        if (turn > 1) {
            user_content += "\n";
            user_content += protocol::kInteractionResponseOpen;
            user_content += last_feedback;
            user_content += protocol::kInteractionResponseClose;
        }
        std::vector<ChatMessage> messages{system_message(policy_protocol_instruction()),
                                          user_message(user_content)};

        PolicyTurn policy_turn;
        try {
            policy_turn = elicit_policy_turn(policy, std::move(messages), config.policy_params,
                                             turn, config.on_malformed == MalformedPolicy::RetryOnce,
                                             /*require_finalize=*/false);
        } catch (const MalformedEmissionError& e) {
            if (config.on_malformed == MalformedPolicy::ForceFinalize) {
                run_assembly(turn);
                return traj;
            }
            finish(Termination::MalformedAbort, turn, "", e.last_emission);
            return traj;
        }
        traj.prompt_tokens += policy_turn.prompt_tokens;
        traj.completion_tokens += policy_turn.completion_tokens;
        note_completion(policy_turn.completion);
        if (!protocol::check_think_budget(policy_turn.turn.reasoning, turn == 1).within_budget) {
            ++traj.think_budget_violations;
        }

        if (const auto* fin = std::get_if<protocol::FinalAnswer>(&policy_turn.turn.action)) {
            finish(Termination::PolicyFinalize, turn, fin->text, policy_turn.emission);
            return traj;
        }

        const auto& tc = std::get<protocol::ToolCall>(policy_turn.turn.action);
        if (!protocol::is_known_tool(tc.name)) ++traj.unknown_tool_calls;

        std::string feedback;
        try {
            feedback = route_request(tc.agent_role, tc.prompt, history, executor,
                                     config.executor_params);
        } catch (const EpisodeError&) {
            throw;
        } catch (const Error& e) {
            throw EpisodeError(turn, e.what());
        }

        history = dialogue::append_exchange(
            history, dialogue::Exchange{turn, policy_turn.turn.reasoning, tc.agent_role,
                                        tc.prompt, feedback});
        last_feedback = feedback;
    }
    return traj;  // unreachable: the cap turn always returns
}

}  // namespace orch::orchestration

