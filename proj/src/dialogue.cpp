#include "orch/dialogue.hpp"

#include "orch/protocol.hpp"
#include "orch/text_util.hpp"

#include <cmath>
#include <stdexcept>

namespace orch::dialogue {

DialogueHistory append_exchange(const DialogueHistory& history, Exchange exchange) {
    const int expected = static_cast<int>(history.exchanges.size()) + 1;
    if (exchange.turn_index != expected) {
        throw std::invalid_argument("exchange index gap: got turn " +
                                    std::to_string(exchange.turn_index) + ", expected " +
                                    std::to_string(expected));
    }
    DialogueHistory next = history;
    next.exchanges.push_back(std::move(exchange));
    return next;
}

std::string exchange_query_body(const Exchange& exchange) {
    return "[" + exchange.role + "] " + exchange.request;
}

std::size_t estimate_tokens(std::string_view text) {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(count_words(text)) * 1.3));
}

namespace {

struct Elision {
    std::vector<bool> feedback;
    std::vector<bool> reasoning;
};

std::string render(const DialogueHistory& history, const Elision& elide) {
    std::string out = "Question: " + history.question + "\n";
    out += "Roles: " + history.repertoire_hint + "\n";
    for (std::size_t i = 0; i < history.exchanges.size(); ++i) {
        const Exchange& ex = history.exchanges[i];
        const std::string marker(kElisionMarker);
        out += "\n";
        out += elide.reasoning[i] ? marker : ex.reasoning;
        out += "\n";
        out += protocol::encapsulate_exchange(exchange_query_body(ex),
                                              elide.feedback[i] ? marker : ex.feedback);
        out += "\n";
    }
    return out;
}

}  // namespace

HistoryEncoding render_encoding(const DialogueHistory& history, std::size_t budget) {
    const std::size_t n = history.exchanges.size();
    Elision elide{std::vector<bool>(n, false), std::vector<bool>(n, false)};

    HistoryEncoding enc;
    enc.rendered = render(history, elide);
    enc.token_estimate = estimate_tokens(enc.rendered);
    if (enc.token_estimate <= budget || n == 0) return enc;

    // The most recent exchange is load-bearing for the next action and is
    // never elided; everything older loses feedback first, reasoning second.
    for (int pass = 0; pass < 2 && enc.token_estimate > budget; ++pass) {
        auto& flags = (pass == 0) ? elide.feedback : elide.reasoning;
        for (std::size_t i = 0; i + 1 < n && enc.token_estimate > budget; ++i) {
            flags[i] = true;
            enc.rendered = render(history, elide);
            enc.token_estimate = estimate_tokens(enc.rendered);
        }
    }
    return enc;
}

}  // namespace orch::dialogue
