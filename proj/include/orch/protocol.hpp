#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace orch::protocol {

// Literal tags of the turn grammar. The grammar is flat: a block ends at the
// first matching close tag, and matching is case-sensitive.
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kInteractionPromptOpen = "<interaction_prompt>";
inline constexpr std::string_view kInteractionPromptClose = "</interaction_prompt>";
inline constexpr std::string_view kInteractionResponseOpen = "<interaction_response>";
inline constexpr std::string_view kInteractionResponseClose = "</interaction_response>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::string_view kQueryOpen = "<query>";
inline constexpr std::string_view kQueryClose = "</query>";
inline constexpr std::string_view kReplyOpen = "<reply>";
inline constexpr std::string_view kReplyClose = "</reply>";

/// The one tool the coordinator is expected to call.
inline constexpr std::string_view kDynamicPromptTool = "prompt_dynamic";

/// First-turn thinking is advised to stay under this many words.
inline constexpr std::size_t kFirstTurnThinkWordBudget = 80;

/// A request the coordinator routes to a role-instantiated executor agent.
struct ToolCall {
    std::string name;        // tool identifier, normally "prompt_dynamic"
    std::string prompt;      // the request text handed to the executor
    std::string agent_role;  // free-form role the executor should assume
    bool operator==(const ToolCall&) const = default;
};

struct FinalAnswer {
    std::string text;
    bool operator==(const FinalAnswer&) const = default;
};

/// Either keep collaborating (tool call) or finish with an answer.
using TurnAction = std::variant<ToolCall, FinalAnswer>;

struct ParsedTurn {
    std::string reasoning;  // contents of the first balanced think block
    TurnAction action;
    bool operator==(const ParsedTurn&) const = default;
};

enum class ProtocolErrorKind {
    MissingThink,
    MissingAction,
    MalformedToolPayload,
    UnbalancedTags,
    BothActions,
};

const char* to_string(ProtocolErrorKind kind);

/// Character offsets into the raw emission; begin <= end <= raw.size().
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const Span&) const = default;
};

struct ProtocolError {
    ProtocolErrorKind kind;
    Span span;
};

using ParseResult = std::variant<ParsedTurn, ProtocolError>;

/// Parses one complete policy emission. Total: any byte sequence yields
/// either a ParsedTurn or a ProtocolError, never an abort.
ParseResult parse_policy_turn(std::string_view raw);

/// Inverse of parse_policy_turn for well-formed turns. Throws
/// std::invalid_argument if any field contains a literal protocol tag,
/// which would break the byte-exact wire format.
std::string serialize_policy_turn(const ParsedTurn& turn);

/// Wraps one query/reply pair in boundary tokens:
/// "<query>" + request + "</query><reply>" + reply + "</reply>".
std::string encapsulate_exchange(std::string_view request, std::string_view reply);

/// Recovers (request, reply) from an encapsulated exchange. Returns nullopt
/// unless the text is exactly one query pair followed by one reply pair.
std::optional<std::pair<std::string, std::string>> parse_exchange(std::string_view text);

struct ThinkBudget {
    std::size_t word_count = 0;
    bool within_budget = true;
};

/// Advisory word-count check on the think block; the 80-word cap applies to
/// the first turn only and never rejects a turn.
ThinkBudget check_think_budget(std::string_view reasoning, bool is_first_turn);

bool is_known_tool(std::string_view name);

}  // namespace orch::protocol
