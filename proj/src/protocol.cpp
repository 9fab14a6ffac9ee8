#include "orch/protocol.hpp"

#include "orch/text_util.hpp"

#include "json.hpp"

#include <array>
#include <stdexcept>

namespace orch::protocol {

namespace {

constexpr std::array<std::string_view, 12> kAllTags = {
    kThinkOpen,  kThinkClose,  kInteractionPromptOpen,   kInteractionPromptClose,
    kAnswerOpen, kAnswerClose, kInteractionResponseOpen, kInteractionResponseClose,
    kQueryOpen,  kQueryClose,  kReplyOpen,               kReplyClose,
};

struct Block {
    std::string_view body;
    Span span;  // from open tag to past the close tag
};

/// First balanced open/close pair at or after `from`. Sets `unbalanced` when
/// the open tag exists without a matching close.
std::optional<Block> find_block(std::string_view raw, std::string_view open,
                                std::string_view close, std::size_t from, bool& unbalanced) {
    const auto o = raw.find(open, from);
    if (o == std::string_view::npos) return std::nullopt;
    const auto body_begin = o + open.size();
    const auto c = raw.find(close, body_begin);
    if (c == std::string_view::npos) {
        unbalanced = true;
        return Block{{}, {o, raw.size()}};
    }
    return Block{raw.substr(body_begin, c - body_begin), {o, c + close.size()}};
}

std::optional<ToolCall> decode_tool_payload(std::string_view payload) {
    const auto doc = nlohmann::json::parse(payload, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    const auto name = doc.find("name");
    const auto args = doc.find("arguments");
    if (name == doc.end() || !name->is_string()) return std::nullopt;
    if (args == doc.end() || !args->is_object()) return std::nullopt;
    const auto prompt = args->find("prompt");
    const auto role = args->find("agent_role");
    if (prompt == args->end() || !prompt->is_string()) return std::nullopt;
    if (role == args->end() || !role->is_string()) return std::nullopt;
    ToolCall tc{name->get<std::string>(), prompt->get<std::string>(), role->get<std::string>()};
    if (tc.name.empty() || is_blank(tc.prompt) || is_blank(tc.agent_role)) return std::nullopt;
    return tc;
}

bool contains_any_tag(std::string_view s) {
    for (const auto tag : kAllTags) {
        if (s.find(tag) != std::string_view::npos) return true;
    }
    return false;
}

void require_tag_free(std::string_view s, const char* what) {
    if (contains_any_tag(s)) {
        throw std::invalid_argument(std::string(what) + " contains a literal protocol tag");
    }
}

}  // namespace

const char* to_string(ProtocolErrorKind kind) {
    switch (kind) {
        case ProtocolErrorKind::MissingThink: return "MissingThink";
        case ProtocolErrorKind::MissingAction: return "MissingAction";
        case ProtocolErrorKind::MalformedToolPayload: return "MalformedToolPayload";
        case ProtocolErrorKind::UnbalancedTags: return "UnbalancedTags";
        case ProtocolErrorKind::BothActions: return "BothActions";
    }
    return "Unknown";
}

ParseResult parse_policy_turn(std::string_view raw) {
    bool unbalanced = false;
    const auto think = find_block(raw, kThinkOpen, kThinkClose, 0, unbalanced);
    if (!think) return ProtocolError{ProtocolErrorKind::MissingThink, {0, raw.size()}};
    if (unbalanced) return ProtocolError{ProtocolErrorKind::UnbalancedTags, think->span};

    // Exclusivity is judged on open tags so that an unbalanced second block
    // still reads as an attempt at both actions.
    const auto ip_open = raw.find(kInteractionPromptOpen);
    const auto ans_open = raw.find(kAnswerOpen);
    if (ip_open != std::string_view::npos && ans_open != std::string_view::npos) {
        const auto second = std::max(ip_open, ans_open);
        return ProtocolError{ProtocolErrorKind::BothActions, {second, raw.size()}};
    }
    if (ip_open == std::string_view::npos && ans_open == std::string_view::npos) {
        return ProtocolError{ProtocolErrorKind::MissingAction, {think->span.end, raw.size()}};
    }

    ParsedTurn turn;
    turn.reasoning = std::string(think->body);

    if (ip_open != std::string_view::npos) {
        const auto block =
            find_block(raw, kInteractionPromptOpen, kInteractionPromptClose, ip_open, unbalanced);
        if (unbalanced) return ProtocolError{ProtocolErrorKind::UnbalancedTags, block->span};
        auto tc = decode_tool_payload(block->body);
        if (!tc) return ProtocolError{ProtocolErrorKind::MalformedToolPayload, block->span};
        turn.action = std::move(*tc);
        return turn;
    }

    const auto block = find_block(raw, kAnswerOpen, kAnswerClose, ans_open, unbalanced);
    if (unbalanced) return ProtocolError{ProtocolErrorKind::UnbalancedTags, block->span};
    if (is_blank(block->body)) {
        return ProtocolError{ProtocolErrorKind::MissingAction, block->span};
    }
    turn.action = FinalAnswer{std::string(block->body)};
    return turn;
}

std::string serialize_policy_turn(const ParsedTurn& turn) {
    require_tag_free(turn.reasoning, "reasoning");
    std::string out;
    out += kThinkOpen;
    out += turn.reasoning;
    out += kThinkClose;
    if (const auto* tc = std::get_if<ToolCall>(&turn.action)) {
        nlohmann::ordered_json args;
        args["prompt"] = tc->prompt;
        args["agent_role"] = tc->agent_role;
        nlohmann::ordered_json payload;
        payload["name"] = tc->name;
        payload["arguments"] = std::move(args);
        const std::string body = payload.dump();
        require_tag_free(body, "tool payload");
        out += kInteractionPromptOpen;
        out += body;
        out += kInteractionPromptClose;
    } else {
        const auto& fin = std::get<FinalAnswer>(turn.action);
        require_tag_free(fin.text, "answer");
        out += kAnswerOpen;
        out += fin.text;
        out += kAnswerClose;
    }
    return out;
}

std::string encapsulate_exchange(std::string_view request, std::string_view reply) {
    std::string out;
    out.reserve(request.size() + reply.size() + 32);
    out += kQueryOpen;
    out += request;
    out += kQueryClose;
    out += kReplyOpen;
    out += reply;
    out += kReplyClose;
    return out;
}

std::optional<std::pair<std::string, std::string>> parse_exchange(std::string_view text) {
    if (text.substr(0, kQueryOpen.size()) != kQueryOpen) return std::nullopt;
    const auto qc = text.find(kQueryClose);
    if (qc == std::string_view::npos) return std::nullopt;
    const std::string_view request = text.substr(kQueryOpen.size(), qc - kQueryOpen.size());
    std::size_t pos = qc + kQueryClose.size();
    if (text.substr(pos, kReplyOpen.size()) != kReplyOpen) return std::nullopt;
    pos += kReplyOpen.size();
    const auto rc = text.find(kReplyClose, pos);
    if (rc == std::string_view::npos) return std::nullopt;
    if (rc + kReplyClose.size() != text.size()) return std::nullopt;  // trailing bytes
    return std::make_pair(std::string(request), std::string(text.substr(pos, rc - pos)));
}

ThinkBudget check_think_budget(std::string_view reasoning, bool is_first_turn) {
    ThinkBudget b;
    b.word_count = count_words(reasoning);
    b.within_budget = !is_first_turn || b.word_count <= kFirstTurnThinkWordBudget;
    return b;
}

bool is_known_tool(std::string_view name) { return name == kDynamicPromptTool; }

}  // namespace orch::protocol
