#pragma once

// Shared helpers for the test suites: seeded generators, filesystem
// scratch space, and the scripted case-study cassettes.

#include "orch/backends.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace orch::testing {

/// Deterministic RNG for property-style tests; a fixed seed keeps the fuzz
/// corpus identical across runs.
inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64{seed}; }

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len,
                               bool allow_angle = false) {
    static const std::string plain =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,'\"?!-:;()[]{}";
    static const std::string with_angle = plain + "<>/";
    const std::string& alphabet = allow_angle ? with_angle : plain;
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out;
    const std::size_t n = len(rng);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(alphabet[pick(rng)]);
    return out;
}

/// Non-blank variant for fields that must survive a whitespace trim.
inline std::string random_word_text(std::mt19937_64& rng, std::size_t max_len) {
    std::string s = random_text(rng, max_len);
    if (s.find_first_not_of(" \t\r\n") == std::string::npos) s += "x";
    return s;
}

/// Arbitrary bytes, including NULs and invalid UTF-8, for totality fuzzing.
inline std::string random_bytes(std::mt19937_64& rng, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<int> byte(0, 255);
    std::string out;
    const std::size_t n = len(rng);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(byte(rng)));
    return out;
}

/// Fresh scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("orch_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Scripted episode: the coordinator emissions, the executor feedback texts,
/// the question, and the gold answers the episode is graded against.
struct CaseScript {
    std::string id;
    std::string question;
    std::vector<std::string> policy_emissions;
    std::vector<std::string> executor_replies;
    std::vector<std::string> gold_answers;
};

/// Two-turn nationality comparison: one researcher hop, then finalize "No".
inline CaseScript nationality_case() {
    CaseScript c;
    c.id = "case-nationality";
    c.question =
        "Do both Beauty and Bullets and In the Name of the King 3: The Last Mission films "
        "have the directors from the same country?";
    c.policy_emissions = {
        "<think>The question asks whether the directors of 'Beauty and Bullets' and 'In the "
        "Name of the King 3: The Last Mission' are from the same country. I need to identify "
        "each film's director and their nationality.</think>"
        "<interaction_prompt>{\"name\":\"prompt_dynamic\",\"arguments\":{\"prompt\":\"Do both "
        "Beauty and Bullets and In the Name of the King 3: The Last Mission films have the "
        "directors from the same country?\",\"agent_role\":\"researcher\"}}"
        "</interaction_prompt>",
        "<think>The response confirms that the two directors are from different countries "
        "(China vs. Germany). The answer is definitively 'No'. No further verification "
        "needed.</think><answer>No</answer>",
    };
    c.executor_replies = {
        "Beauty and Bullets: directed by Derrick Ku (China). In the Name of the King 3: "
        "directed by Uwe Boll (Germany). China is not Germany, so the directors do not share "
        "the same country.",
    };
    c.gold_answers = {"No"};
    return c;
}

/// Three-turn birthplace chase: researcher -> clarifier -> finalize.
inline CaseScript birthplace_case() {
    CaseScript c;
    c.id = "case-birthplace";
    c.question = "Where was the director of film A Zed & Two Noughts born?";
    c.policy_emissions = {
        "<think>The question asks about the birthplace of the director of 'A Zed & Two "
        "Noughts.' I need to identify the director first.</think>"
        "<interaction_prompt>{\"name\":\"prompt_dynamic\",\"arguments\":{\"prompt\":\"Who was "
        "the director of the film 'A Zed & Two Noughts'?\",\"agent_role\":\"researcher\"}}"
        "</interaction_prompt>",
        "<think>The director is Peter Greenaway. Now I need to find out where he was "
        "born.</think>"
        "<interaction_prompt>{\"name\":\"prompt_dynamic\",\"arguments\":{\"prompt\":\"Where "
        "was Peter Greenaway born?\",\"agent_role\":\"clarifier\"}}</interaction_prompt>",
        "<think>Peter Greenaway was born in Newport, Monmouthshire, Wales. The answer is "
        "confirmed.</think><answer>Newport, Monmouthshire, Wales</answer>",
    };
    c.executor_replies = {
        "The film was directed by Peter Greenaway.",
        "Peter Greenaway was born in Newport, Monmouthshire, Wales, UK (5 April 1942).",
    };
    c.gold_answers = {"Newport, Wales"};
    return c;
}

/// Three-turn performer disambiguation: researcher -> clarifier -> finalize.
inline CaseScript performer_case() {
    CaseScript c;
    c.id = "case-performer";
    c.question = "What nationality is the performer of song You're My One And Only Love?";
    c.policy_emissions = {
        "<think>The question asks the nationality of the performer. I suspect Celine Dion "
        "(Canadian), but need to verify the actual performer.</think>"
        "<interaction_prompt>{\"name\":\"prompt_dynamic\",\"arguments\":{\"prompt\":\"What "
        "nationality is the performer of song 'You're My One And Only Love'?\","
        "\"agent_role\":\"researcher\"}}</interaction_prompt>",
        "<think>The response says American, contradicting my initial guess of Celine Dion. I "
        "need to verify the exact artist.</think>"
        "<interaction_prompt>{\"name\":\"prompt_dynamic\",\"arguments\":{\"prompt\":\"Verify "
        "the nationality of the artist for the song 'You're My One And Only Love.'\","
        "\"agent_role\":\"clarifier\"}}</interaction_prompt>",
        "<think>Confirmed: the song is by Jimmy Brown (American), not Celine Dion. The "
        "correct answer is American.</think><answer>American</answer>",
    };
    c.executor_replies = {
        "The performer is American.",
        "The primary artist is Jimmy Brown (jazz vocalist), born in Chicago, Illinois, USA. "
        "Nationality: American.",
    };
    c.gold_answers = {"American"};
    return c;
}

/// Deterministic two-turn episode for bulk benchmarks: one researcher hop
/// whose feedback names the answer, then finalize.
inline CaseScript synthetic_case(int k) {
    const std::string n = std::to_string(k);
    CaseScript c;
    c.id = "syn-" + n;
    c.question = "What is fact number " + n + "?";
    c.policy_emissions = {
        "<think>I need the stored fact " + n + " before answering.</think>"
        "<interaction_prompt>{\"name\":\"prompt_dynamic\",\"arguments\":{\"prompt\":\"Look up "
        "fact " + n + ".\",\"agent_role\":\"researcher\"}}</interaction_prompt>",
        "<think>The researcher reports fact " + n + " directly.</think><answer>fact value " +
            n + "</answer>",
    };
    c.executor_replies = {"The stored entry says: fact value " + n + "."};
    c.gold_answers = {"fact value " + n};
    return c;
}

/// Writes <id>.policy.jsonl and <id>.executor.jsonl cassettes for a script.
inline void write_case_cassettes(const std::filesystem::path& cassette_dir, const CaseScript& c) {
    using orch::backends::Cassette;
    using orch::backends::CassetteEntry;
    std::filesystem::create_directories(cassette_dir);
    Cassette policy;
    for (const auto& emission : c.policy_emissions) {
        policy.entries.push_back(CassetteEntry{"", emission, 0, 0, std::nullopt});
    }
    save_cassette(policy, cassette_dir / (c.id + ".policy.jsonl"));
    Cassette executor;
    for (const auto& reply : c.executor_replies) {
        executor.entries.push_back(CassetteEntry{"", reply, 0, 0, std::nullopt});
    }
    save_cassette(executor, cassette_dir / (c.id + ".executor.jsonl"));
}

/// One dataset JSONL line for a script (metric em_f1).
inline std::string dataset_line(const CaseScript& c) {
    auto escape = [](const std::string& s) {
        std::string out;
        for (char ch : s) {
            if (ch == '"' || ch == '\\') out.push_back('\\');
            out.push_back(ch);
        }
        return out;
    };
    std::string line = "{\"id\":\"" + escape(c.id) + "\",\"question\":\"" + escape(c.question) +
                       "\",\"answers\":[";
    for (std::size_t i = 0; i < c.gold_answers.size(); ++i) {
        if (i > 0) line += ",";
        line += "\"" + escape(c.gold_answers[i]) + "\"";
    }
    line += "],\"metric\":\"em_f1\"}";
    return line;
}

inline void write_fixture_set(const std::filesystem::path& dir,
                              const std::vector<CaseScript>& cases,
                              const std::string& dataset_file = "dataset.jsonl") {
    std::filesystem::create_directories(dir / "cassettes");
    std::ofstream data(dir / dataset_file);
    for (const auto& c : cases) {
        data << dataset_line(c) << "\n";
        write_case_cassettes(dir / "cassettes", c);
    }
}

}  // namespace orch::testing
