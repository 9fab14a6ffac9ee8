#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "orch/protocol.hpp"
#include "support.hpp"

#include <string>
#include <variant>

using namespace orch::protocol;
using orch::testing::make_rng;
using orch::testing::random_text;
using orch::testing::random_word_text;
using orch::testing::random_bytes;

namespace {

ParsedTurn require_turn(const ParseResult& r) {
    REQUIRE(std::holds_alternative<ParsedTurn>(r));
    return std::get<ParsedTurn>(r);
}

ProtocolErrorKind require_error(const ParseResult& r) {
    REQUIRE(std::holds_alternative<ProtocolError>(r));
    return std::get<ProtocolError>(r).kind;
}

bool contains_tag(const std::string& s) {
    for (std::string_view tag :
         {kThinkOpen, kThinkClose, kInteractionPromptOpen, kInteractionPromptClose,
          kInteractionResponseOpen, kInteractionResponseClose, kAnswerOpen, kAnswerClose,
          kQueryOpen, kQueryClose, kReplyOpen, kReplyClose}) {
        if (s.find(tag) != std::string::npos) return true;
    }
    return false;
}

ParsedTurn random_continue_turn(std::mt19937_64& rng) {
    ToolCall tc;
    tc.name = "prompt_dynamic";
    tc.prompt = random_word_text(rng, 60);
    tc.agent_role = random_word_text(rng, 24);
    ParsedTurn t;
    t.reasoning = random_text(rng, 80);
    t.action = tc;
    return t;
}

ParsedTurn random_finalize_turn(std::mt19937_64& rng) {
    ParsedTurn t;
    t.reasoning = random_text(rng, 80);
    t.action = FinalAnswer{random_word_text(rng, 40)};
    return t;
}

}  // namespace

TEST_CASE("parse extracts tool call from interaction_prompt block") {
    const std::string raw =
        "<think>x</think><interaction_prompt>{\"name\":\"prompt_dynamic\","
        "\"arguments\":{\"prompt\":\"Who directed F?\",\"agent_role\":\"researcher\"}}"
        "</interaction_prompt>";
    const ParsedTurn t = require_turn(parse_policy_turn(raw));
    CHECK(t.reasoning == "x");
    REQUIRE(std::holds_alternative<ToolCall>(t.action));
    const auto& tc = std::get<ToolCall>(t.action);
    CHECK(tc.name == "prompt_dynamic");
    CHECK(tc.prompt == "Who directed F?");
    CHECK(tc.agent_role == "researcher");
}

TEST_CASE("parse extracts final answer") {
    const ParsedTurn t = require_turn(parse_policy_turn("<think>done</think><answer>No</answer>"));
    CHECK(t.reasoning == "done");
    REQUIRE(std::holds_alternative<FinalAnswer>(t.action));
    CHECK(std::get<FinalAnswer>(t.action).text == "No");
}

TEST_CASE("parse error kinds") {
    CHECK(require_error(parse_policy_turn("<think>x</think>")) == ProtocolErrorKind::MissingAction);
    CHECK(require_error(parse_policy_turn("no tags at all")) == ProtocolErrorKind::MissingThink);
    CHECK(require_error(parse_policy_turn("<answer>No</answer>")) == ProtocolErrorKind::MissingThink);
    CHECK(require_error(parse_policy_turn("<think>x<answer>No</answer>")) ==
          ProtocolErrorKind::UnbalancedTags);
    CHECK(require_error(parse_policy_turn("<think>x</think><answer>No")) ==
          ProtocolErrorKind::UnbalancedTags);
    CHECK(require_error(parse_policy_turn(
              "<think>x</think><interaction_prompt>{\"name\":\"t\"}</interaction_prompt>"
              "<answer>No</answer>")) == ProtocolErrorKind::BothActions);
    CHECK(require_error(parse_policy_turn(
              "<think>x</think><interaction_prompt>not json</interaction_prompt>")) ==
          ProtocolErrorKind::MalformedToolPayload);
    // Payload shape violations: missing fields, wrong types, blank strings.
    CHECK(require_error(parse_policy_turn(
              "<think>x</think><interaction_prompt>{\"name\":\"prompt_dynamic\","
              "\"arguments\":{\"prompt\":\"p\"}}</interaction_prompt>")) ==
          ProtocolErrorKind::MalformedToolPayload);
    CHECK(require_error(parse_policy_turn(
              "<think>x</think><interaction_prompt>{\"name\":\"prompt_dynamic\","
              "\"arguments\":{\"prompt\":\"  \",\"agent_role\":\"r\"}}</interaction_prompt>")) ==
          ProtocolErrorKind::MalformedToolPayload);
    CHECK(require_error(parse_policy_turn(
              "<think>x</think><interaction_prompt>{\"name\":\"prompt_dynamic\","
              "\"arguments\":{\"prompt\":\"p\",\"agent_role\":7}}</interaction_prompt>")) ==
          ProtocolErrorKind::MalformedToolPayload);
    // Whitespace-only answers carry no usable finalize action.
    CHECK(require_error(parse_policy_turn("<think>x</think><answer>  </answer>")) ==
          ProtocolErrorKind::MissingAction);
}

TEST_CASE("error spans stay inside the input") {
    auto rng = make_rng(0x5eed01);
    for (int i = 0; i < 500; ++i) {
        const std::string raw = random_bytes(rng, 200);
        const ParseResult r = parse_policy_turn(raw);
        if (const auto* err = std::get_if<ProtocolError>(&r)) {
            CHECK(err->span.begin <= err->span.end);
            CHECK(err->span.end <= raw.size());
        }
    }
}

TEST_CASE("unknown tool names parse but are reported as unknown") {
    const std::string raw =
        "<think>x</think><interaction_prompt>{\"name\":\"tool_call\","
        "\"arguments\":{\"prompt\":\"p\",\"agent_role\":\"critiquer\"}}</interaction_prompt>";
    const ParsedTurn t = require_turn(parse_policy_turn(raw));
    const auto& tc = std::get<ToolCall>(t.action);
    CHECK_FALSE(is_known_tool(tc.name));
    CHECK(is_known_tool("prompt_dynamic"));
}

TEST_CASE("extra payload keys are tolerated") {
    const std::string raw =
        "<think>x</think><interaction_prompt>{\"name\":\"prompt_dynamic\","
        "\"arguments\":{\"prompt\":\"p\",\"agent_role\":\"r\",\"criteria\":\"c\"}}"
        "</interaction_prompt>";
    const ParsedTurn t = require_turn(parse_policy_turn(raw));
    CHECK(std::get<ToolCall>(t.action).agent_role == "r");
}

TEST_CASE("serialize emits the tagged wire form") {
    ParsedTurn fin{"done", FinalAnswer{"No"}};
    CHECK(serialize_policy_turn(fin) == "<think>done</think><answer>No</answer>");

    ParsedTurn cont{"r", ToolCall{"prompt_dynamic", "find the director", "researcher"}};
    const std::string wire = serialize_policy_turn(cont);
    CHECK(wire.find("\"agent_role\":\"researcher\"") != std::string::npos);
    CHECK(wire.find("\"name\":\"prompt_dynamic\"") != std::string::npos);
    // Round trip is structural identity.
    CHECK(require_turn(parse_policy_turn(wire)) == cont);
}

TEST_CASE("serialize rejects payloads carrying literal tags") {
    ParsedTurn bad{"uses </think> inside", FinalAnswer{"No"}};
    CHECK_THROWS_AS(serialize_policy_turn(bad), std::invalid_argument);
    ParsedTurn bad2{"ok", FinalAnswer{"<answer>nested</answer>"}};
    CHECK_THROWS_AS(serialize_policy_turn(bad2), std::invalid_argument);
}

TEST_CASE("round trip over fuzzed well-formed turns") {
    auto rng = make_rng(0x5eed02);
    int kept = 0;
    for (int i = 0; i < 1000; ++i) {
        ParsedTurn t = (i % 2 == 0) ? random_continue_turn(rng) : random_finalize_turn(rng);
        if (contains_tag(t.reasoning)) continue;  // serializer rejects these by design
        const std::string wire = serialize_policy_turn(t);
        CHECK(require_turn(parse_policy_turn(wire)) == t);
        ++kept;
    }
    CHECK(kept > 900);
}

TEST_CASE("totality: parser never throws on arbitrary bytes") {
    auto rng = make_rng(0x5eed03);
    for (int i = 0; i < 2000; ++i) {
        const std::string raw = random_bytes(rng, 400);
        CHECK_NOTHROW((void)parse_policy_turn(raw));
    }
    // Tag soup: fragments of real tags in random order.
    const std::string frags[] = {"<think>", "</think>", "<answer>", "</answer>",
                                 "<interaction_prompt>", "</interaction_prompt>",
                                 "{\"name\":", "\"prompt_dynamic\"", "}}", "x y z"};
    for (int i = 0; i < 2000; ++i) {
        std::string raw;
        std::uniform_int_distribution<int> n(0, 12), pick(0, 9);
        const int parts = n(rng);
        for (int p = 0; p < parts; ++p) raw += frags[pick(rng)];
        CHECK_NOTHROW((void)parse_policy_turn(raw));
    }
}

TEST_CASE("exclusivity: both action blocks always error") {
    auto rng = make_rng(0x5eed04);
    for (int i = 0; i < 200; ++i) {
        ParsedTurn c = random_continue_turn(rng);
        ParsedTurn f = random_finalize_turn(rng);
        if (contains_tag(c.reasoning) || contains_tag(f.reasoning)) continue;
        std::string both = serialize_policy_turn(c);
        const std::string fin = serialize_policy_turn(f);
        both += fin.substr(fin.find("<answer>"));
        CHECK(require_error(parse_policy_turn(both)) == ProtocolErrorKind::BothActions);
    }
}

TEST_CASE("encapsulate_exchange wraps with boundary tokens") {
    CHECK(encapsulate_exchange("q", "r") == "<query>q</query><reply>r</reply>");
    CHECK(encapsulate_exchange("", "") == "<query></query><reply></reply>");
}

TEST_CASE("exchange round trip on token-free payloads") {
    auto rng = make_rng(0x5eed05);
    for (int i = 0; i < 1000; ++i) {
        const std::string q = random_text(rng, 120);
        const std::string r = random_text(rng, 120);
        const auto back = parse_exchange(encapsulate_exchange(q, r));
        REQUIRE(back.has_value());
        CHECK(back->first == q);
        CHECK(back->second == r);
    }
}

TEST_CASE("parse_exchange rejects trailing or missing structure") {
    CHECK_FALSE(parse_exchange("<query>q</query>").has_value());
    CHECK_FALSE(parse_exchange("<query>q</query><reply>r</reply>junk").has_value());
    CHECK_FALSE(parse_exchange("<reply>r</reply><query>q</query>").has_value());
    // A reply body smuggling its own close tag cannot round-trip.
    CHECK_FALSE(parse_exchange("<query>q</query><reply>r</reply>x</reply>").has_value());
}

TEST_CASE("think budget rule applies to the first turn only") {
    std::string eighty, eighty_one, five_hundred;
    for (int i = 0; i < 80; ++i) eighty += "w ";
    eighty_one = eighty + "w";
    for (int i = 0; i < 500; ++i) five_hundred += "w ";

    auto a = check_think_budget(eighty, /*is_first_turn=*/true);
    CHECK(a.word_count == 80);
    CHECK(a.within_budget);

    auto b = check_think_budget(eighty_one, true);
    CHECK(b.word_count == 81);
    CHECK_FALSE(b.within_budget);

    auto c = check_think_budget(five_hundred, /*is_first_turn=*/false);
    CHECK(c.word_count == 500);
    CHECK(c.within_budget);
}
