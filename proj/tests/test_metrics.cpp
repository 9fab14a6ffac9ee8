#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "orch/metrics.hpp"
#include "support.hpp"

#include <cmath>
#include <string>

using namespace orch::metrics;
using orch::reward::ReferenceSet;
using orch::testing::make_rng;
using orch::testing::random_text;

TEST_CASE("exact match works on standardized text") {
    CHECK(exact_match("no", ReferenceSet{{"No"}}) == 1);
    CHECK(exact_match("Newport, Monmouthshire, Wales", ReferenceSet{{"Newport, Wales"}}) == 0);
    CHECK(exact_match("American", ReferenceSet{{"American"}}) == 1);
    CHECK(exact_match("the answer", ReferenceSet{{"answer"}}) == 1);  // article dropped
    CHECK(exact_match("maybe", ReferenceSet{{"yes", "maybe"}}) == 1);
}

TEST_CASE("token F1 matches the shared reward machinery") {
    CHECK(token_f1("no", ReferenceSet{{"No"}}) == doctest::Approx(1.0));
    CHECK(token_f1("Newport, Monmouthshire, Wales", ReferenceSet{{"Newport, Wales"}}) ==
          doctest::Approx(0.8).epsilon(1e-12));
    CHECK(token_f1("alpha", ReferenceSet{{"beta"}}) == doctest::Approx(0.0));
}

TEST_CASE("EM implies full F1") {
    auto rng = make_rng(0xe301);
    for (int i = 0; i < 300; ++i) {
        const std::string text = random_text(rng, 40);
        ReferenceSet refs{{text}};
        if (exact_match(text, refs) == 1) {
            CHECK(token_f1(text, refs) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("cosine similarity frozen examples") {
    CHECK(cosine_similarity("same words here", "same words here") == doctest::Approx(1.0));
    CHECK(cosine_similarity("alpha beta", "gamma delta") == doctest::Approx(0.0));
    // TF vectors (1,2,0) and (0,1,1): dot 2, norms sqrt(5), sqrt(2).
    CHECK(cosine_similarity("x y y", "y z") ==
          doctest::Approx(2.0 / std::sqrt(10.0)).epsilon(1e-12));
    // Degenerate standardized-empty cases.
    CHECK(cosine_similarity("the the", "a an") == doctest::Approx(1.0));
    CHECK(cosine_similarity("the", "word") == doctest::Approx(0.0));
}

TEST_CASE("cosine is symmetric and self-similar") {
    auto rng = make_rng(0xe302);
    for (int i = 0; i < 300; ++i) {
        const std::string a = random_text(rng, 60);
        const std::string b = random_text(rng, 60);
        CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-12));
        if (!orch::reward::standardize(a).empty()) {
            CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
        }
        const double c = cosine_similarity(a, b);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0 + 1e-12);
    }
}

TEST_CASE("external vectorizer path checks dimensions") {
    Vectorizer fixed = [](std::string_view text) {
        return text.size() % 2 == 0 ? std::vector<double>{1.0, 0.0}
                                    : std::vector<double>{1.0, 0.0, 0.0};
    };
    CHECK(cosine_similarity("ab", "cd", fixed) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cosine_similarity("ab", "cde", fixed), std::invalid_argument);
}

TEST_CASE("percent rounding is half-up at two decimals") {
    CHECK(to_percent(1.0) == doctest::Approx(100.0));
    CHECK(to_percent(0.5) == doctest::Approx(50.0));
    CHECK(to_percent(0.33335) == doctest::Approx(33.34));   // rounds up
    CHECK(to_percent(0.333349) == doctest::Approx(33.33));  // rounds down
    CHECK(format_percent(to_percent(2.0 / 3.0)) == "66.67");
    CHECK(format_percent(to_percent(1.0)) == "100.00");
}

TEST_CASE("report CSV renders blanks for inapplicable metrics") {
    DatasetReportRow qa{"demo", 3, 100.0, 93.33, std::nullopt};
    DatasetReportRow summ{"books", 2, std::nullopt, std::nullopt, 59.09};
    const std::string csv = render_report_csv({qa, summ});
    CHECK(csv ==
          "dataset,n,em_percent,f1_percent,cosine_percent\n"
          "demo,3,100.00,93.33,\n"
          "books,2,,,59.09\n");
}
