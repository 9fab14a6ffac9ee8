#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "orch/dialogue.hpp"
#include "support.hpp"

#include <stdexcept>
#include <string>

using namespace orch::dialogue;
using orch::testing::make_rng;
using orch::testing::random_word_text;

namespace {

Exchange make_exchange(int turn, const std::string& tag) {
    return Exchange{turn, "reasoning " + tag, "researcher", "request " + tag, "feedback " + tag};
}

DialogueHistory history_of(int n) {
    DialogueHistory h{"What is the answer?", "roles: researcher, assistant", {}};
    for (int i = 1; i <= n; ++i) h = append_exchange(h, make_exchange(i, std::to_string(i)));
    return h;
}

}  // namespace

TEST_CASE("append grows the history and preserves prior content") {
    DialogueHistory h0{"Q", "hint", {}};
    CHECK(h0.exchanges.empty());

    DialogueHistory h1 = append_exchange(h0, make_exchange(1, "a"));
    CHECK(h1.exchanges.size() == 1);
    CHECK(h0.exchanges.empty());  // source untouched

    DialogueHistory h2 = append_exchange(h1, make_exchange(2, "b"));
    CHECK(h2.exchanges.size() == 2);
    CHECK(h2.exchanges[0] == h1.exchanges[0]);
}

TEST_CASE("append rejects index gaps") {
    DialogueHistory h = history_of(1);
    CHECK_THROWS_AS(append_exchange(h, make_exchange(3, "gap")), std::invalid_argument);
    CHECK_THROWS_AS(append_exchange(h, make_exchange(1, "dup")), std::invalid_argument);
}

TEST_CASE("fold of k appends preserves order") {
    const int k = 7;
    DialogueHistory h = history_of(k);
    REQUIRE(h.exchanges.size() == static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        CHECK(h.exchanges[i].turn_index == i + 1);
        CHECK(h.exchanges[i].request == "request " + std::to_string(i + 1));
    }
}

TEST_CASE("empty history renders the question with a positive estimate") {
    DialogueHistory h{"Q", "", {}};
    const auto enc = render_encoding(h, 8192);
    CHECK(enc.rendered.find("Q") != std::string::npos);
    CHECK(enc.token_estimate > 0);
}

TEST_CASE("two-exchange rendering holds both pairs in turn order") {
    const auto enc = render_encoding(history_of(2), 8192);
    const auto p1 = enc.rendered.find("<query>[researcher] request 1</query><reply>feedback 1</reply>");
    const auto p2 = enc.rendered.find("<query>[researcher] request 2</query><reply>feedback 2</reply>");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    CHECK(p1 < p2);
}

TEST_CASE("rendering is deterministic and grows incrementally") {
    DialogueHistory prev = history_of(0);
    std::string prev_render = render_encoding(prev, 1 << 20).rendered;
    for (int t = 1; t <= 5; ++t) {
        DialogueHistory cur = append_exchange(prev, make_exchange(t, std::to_string(t)));
        const std::string cur_render = render_encoding(cur, 1 << 20).rendered;
        // Identical inputs give identical bytes.
        CHECK(cur_render == render_encoding(cur, 1 << 20).rendered);
        // Pre-truncation rendering extends the previous rendering.
        REQUIRE(cur_render.size() >= prev_render.size());
        CHECK(cur_render.substr(0, prev_render.size()) == prev_render);
        prev = cur;
        prev_render = cur_render;
    }
}

TEST_CASE("token estimate is ceil(words * 1.3)") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("one") == 2);           // ceil(1.3)
    CHECK(estimate_tokens("one two three") == 4);  // ceil(3.9)
    CHECK(estimate_tokens("a b c d e f g h i j") == 13);
}

TEST_CASE("over-budget rendering elides oldest feedback first, never the question") {
    DialogueHistory h{"UNIQUE-QUESTION-TOKEN", "hint", {}};
    std::string pad;
    for (int i = 0; i < 400; ++i) pad += "pad ";
    for (int t = 1; t <= 3; ++t) {
        Exchange ex = make_exchange(t, std::to_string(t));
        ex.reasoning = pad + "reasoning " + std::to_string(t);
        ex.feedback = pad + "feedback " + std::to_string(t);
        h = append_exchange(h, ex);
    }

    const auto full = render_encoding(h, 1 << 20);
    REQUIRE(full.token_estimate > 3000);

    // A budget that forces exactly the oldest feedback out.
    const auto trimmed = render_encoding(h, full.token_estimate - 200);
    CHECK(trimmed.token_estimate <= full.token_estimate - 200);
    CHECK(trimmed.rendered.find("UNIQUE-QUESTION-TOKEN") != std::string::npos);
    CHECK(trimmed.rendered.find(std::string(kElisionMarker)) != std::string::npos);
    // Oldest feedback gone, newest retained.
    CHECK(trimmed.rendered.find("feedback 1") == std::string::npos);
    CHECK(trimmed.rendered.find("feedback 3") != std::string::npos);
    CHECK(trimmed.rendered.find("reasoning 1") != std::string::npos);

    // A much tighter budget also elides old reasoning, but the most recent
    // exchange and the question always survive verbatim.
    const auto tight = render_encoding(h, 1200);
    CHECK(tight.rendered.find("UNIQUE-QUESTION-TOKEN") != std::string::npos);
    CHECK(tight.rendered.find("request 3") != std::string::npos);
    CHECK(tight.rendered.find("feedback 3") != std::string::npos);
    CHECK(tight.rendered.find("reasoning 3") != std::string::npos);
    CHECK(tight.rendered.find("reasoning 1") == std::string::npos);
    CHECK(tight.rendered.find("feedback 1") == std::string::npos);
}

TEST_CASE("question retention under fuzzed histories") {
    auto rng = make_rng(0xd1a106);
    for (int i = 0; i < 50; ++i) {
        DialogueHistory h{"Q" + std::to_string(i), random_word_text(rng, 20), {}};
        const int n = 1 + static_cast<int>(i % 5);
        for (int t = 1; t <= n; ++t) {
            h = append_exchange(
                h, Exchange{t, random_word_text(rng, 200), "r", random_word_text(rng, 100),
                            random_word_text(rng, 300)});
        }
        for (std::size_t budget : {16u, 64u, 256u, 4096u}) {
            const auto enc = render_encoding(h, budget);
            CHECK(enc.rendered.find(h.question) != std::string::npos);
        }
    }
}
