#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace orch::dialogue {

/// One completed collaboration turn: the coordinator's reasoning, the role it
/// chose, the request it routed, and the executor's feedback.
struct Exchange {
    int turn_index = 0;  // 1-based, contiguous
    std::string reasoning;
    std::string role;
    std::string request;
    std::string feedback;
    bool operator==(const Exchange&) const = default;
};

/// Append-only collaboration record. Values are immutable once built;
/// append_exchange returns a fresh history.
struct DialogueHistory {
    std::string question;
    std::string repertoire_hint;
    std::vector<Exchange> exchanges;
};

struct HistoryEncoding {
    std::string rendered;
    std::size_t token_estimate = 0;
};

/// Placed where an elided feedback or reasoning body used to be.
inline constexpr std::string_view kElisionMarker = "[elided]";

/// Returns a new history with the exchange appended. Throws
/// std::invalid_argument unless exchange.turn_index == exchanges.size() + 1.
DialogueHistory append_exchange(const DialogueHistory& history, Exchange exchange);

/// The query body rendered inside the boundary tokens: "[role] request".
std::string exchange_query_body(const Exchange& exchange);

/// Backend-independent token estimate: whitespace words times 1.3, rounded up.
std::size_t estimate_tokens(std::string_view text);

/// Deterministic rendering of the full collaboration state: question, role
/// repertoire hint, then one block per exchange (reasoning plus the
/// boundary-token query/reply pair). When the estimate exceeds the budget,
/// feedback bodies are elided oldest-first, then reasoning bodies
/// oldest-first; the question, the hint, and the most recent exchange are
/// never elided.
HistoryEncoding render_encoding(const DialogueHistory& history, std::size_t budget);

}  // namespace orch::dialogue
