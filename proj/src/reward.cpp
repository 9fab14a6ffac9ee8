#include "orch/reward.hpp"

#include "orch/dialogue.hpp"
#include "orch/orchestration.hpp"
#include "orch/protocol.hpp"
#include "orch/text_util.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace orch::reward {

namespace {

// Tolerance for deciding that the weighted indicator sum reached the cap;
// the default 1/6 weights cannot sum to it exactly in binary floating point.
constexpr double kGateEps = 1e-9;

bool is_punct_codepoint(char32_t cp) {
    if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
    return (cp >= 0x2000 && cp <= 0x206F) ||  // general punctuation
           (cp >= 0x2E00 && cp <= 0x2E7F) ||  // supplemental punctuation
           cp == 0x00A1 || cp == 0x00A7 || cp == 0x00AB || cp == 0x00B6 || cp == 0x00B7 ||
           cp == 0x00BB || cp == 0x00BF ||
           (cp >= 0x3001 && cp <= 0x3003) || cp == 0x301C || cp == 0x30FB ||
           (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF1F) ||
           (cp >= 0xFF3B && cp <= 0xFF3F) || (cp >= 0xFF5B && cp <= 0xFF65);
}

/// Decodes one UTF-8 sequence at `i`; malformed bytes pass through as-is.
char32_t next_codepoint(std::string_view s, std::size_t& i, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    len = 1;
    if (b0 < 0x80) return b0;
    int extra = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        return b0;  // stray continuation byte
    }
    if (i + extra >= s.size()) return b0;
    for (int k = 1; k <= extra; ++k) {
        const auto bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) return b0;
        cp = (cp << 6) | (bk & 0x3F);
    }
    len = static_cast<std::size_t>(extra) + 1;
    return cp;
}

bool is_article(std::string_view token) {
    return token == "a" || token == "an" || token == "the";
}

}  // namespace

void RewardConfig::validate() const {
    if (kappa <= 0.0) throw std::invalid_argument("reward config: kappa must be positive");
    if (alpha_total < 0.0 || beta < 0.0 || gamma < 0.0 || delta < 0.0) {
        throw std::invalid_argument("reward config: weights must be non-negative");
    }
    const double sum = alpha_total + beta + gamma + delta;
    if (std::fabs(sum - kappa) > 1e-9) {
        throw std::invalid_argument(
            "reward config: alpha_total + beta + gamma + delta must equal kappa");
    }
}

std::string standardize(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t len = 1;
        const char32_t cp = next_codepoint(text, i, len);
        if (cp < 0x80) {
            const auto c = static_cast<unsigned char>(cp);
            if (std::isspace(c)) {
                cleaned.push_back(' ');
            } else if (std::ispunct(c)) {
                // dropped
            } else if (c >= 'A' && c <= 'Z') {
                cleaned.push_back(static_cast<char>(c - 'A' + 'a'));
            } else {
                cleaned.push_back(static_cast<char>(c));
            }
        } else if (!is_punct_codepoint(cp)) {
            cleaned.append(text.substr(i, len));
        }
        i += len;
    }

    std::string out;
    out.reserve(cleaned.size());
    std::size_t pos = 0;
    while (pos < cleaned.size()) {
        const auto start = cleaned.find_first_not_of(' ', pos);
        if (start == std::string::npos) break;
        auto end = cleaned.find(' ', start);
        if (end == std::string::npos) end = cleaned.size();
        const std::string_view token(&cleaned[start], end - start);
        if (!is_article(token)) {
            if (!out.empty()) out.push_back(' ');
            out.append(token);
        }
        pos = end;
    }
    return out;
}

std::map<std::string, int> segment(std::string_view standardized) {
    std::map<std::string, int> multiset;
    std::size_t pos = 0;
    while (pos < standardized.size()) {
        const auto start = standardized.find_first_not_of(' ', pos);
        if (start == std::string_view::npos) break;
        auto end = standardized.find(' ', start);
        if (end == std::string_view::npos) end = standardized.size();
        ++multiset[std::string(standardized.substr(start, end - start))];
        pos = end;
    }
    return multiset;
}

double segment_f1(std::string_view pred, std::string_view ref) {
    const auto a = segment(standardize(pred));
    const auto b = segment(standardize(ref));
    std::size_t size_a = 0, size_b = 0;
    for (const auto& [_, n] : a) size_a += static_cast<std::size_t>(n);
    for (const auto& [_, n] : b) size_b += static_cast<std::size_t>(n);
    if (size_a == 0 && size_b == 0) return 1.0;
    if (size_a == 0 || size_b == 0) return 0.0;
    std::size_t overlap = 0;
    for (const auto& [token, n] : a) {
        const auto it = b.find(token);
        if (it != b.end()) overlap += static_cast<std::size_t>(std::min(n, it->second));
    }
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(size_a + size_b);
}

double precision_reward(std::string_view pred, const ReferenceSet& refs) {
    if (refs.references.empty()) {
        throw std::invalid_argument("precision reward needs at least one reference");
    }
    double best = 0.0;
    for (const auto& ref : refs.references) best = std::max(best, segment_f1(pred, ref));
    return best;
}

double format_reward_from_indicators(const std::vector<int>& lambda, int b_m, int b_v, int i_c,
                                     int terminal_turn, const RewardConfig& config) {
    double intermediate;
    if (terminal_turn <= 1) {
        intermediate = config.alpha_total;  // no intermediate turns to judge
    } else {
        const double alpha = config.alpha_total / static_cast<double>(terminal_turn - 1);
        const int hits = std::accumulate(lambda.begin(), lambda.end(), 0);
        intermediate = alpha * static_cast<double>(hits);
    }
    const double unclamped =
        intermediate + config.beta * b_m + config.gamma * b_v + config.delta * i_c;
    if (unclamped >= config.kappa - kGateEps) return config.kappa;
    return unclamped;
}

RewardBreakdown format_reward(const orchestration::Trajectory& trajectory,
                              const RewardConfig& config) {
    RewardBreakdown out;

    for (const auto& ex : trajectory.exchanges) {
        const bool ok = !is_blank(ex.reasoning) && !is_blank(ex.role) && !is_blank(ex.request);
        out.lambda_per_turn.push_back(ok ? 1 : 0);
    }

    out.b_m = 1;
    for (const auto& ex : trajectory.exchanges) {
        const std::string body = dialogue::exchange_query_body(ex);
        const auto back = protocol::parse_exchange(protocol::encapsulate_exchange(body, ex.feedback));
        if (!back || back->first != body || back->second != ex.feedback) {
            out.b_m = 0;
            break;
        }
    }

    const auto parsed = protocol::parse_policy_turn(trajectory.terminal_emission);
    const bool single_answer = [&] {
        std::size_t count = 0, pos = 0;
        while ((pos = trajectory.terminal_emission.find(protocol::kAnswerOpen, pos)) !=
               std::string::npos) {
            ++count;
            pos += protocol::kAnswerOpen.size();
        }
        return count == 1;
    }();
    const auto* turn = std::get_if<protocol::ParsedTurn>(&parsed);
    out.b_v = (turn != nullptr && std::holds_alternative<protocol::FinalAnswer>(turn->action) &&
               single_answer)
                  ? 1
                  : 0;

    bool complete = !is_blank(trajectory.final_answer);
    for (const auto& ex : trajectory.exchanges) {
        complete = complete && !is_blank(ex.role) && !is_blank(ex.request);
    }
    out.i_c = complete ? 1 : 0;

    out.r_fmt = format_reward_from_indicators(out.lambda_per_turn, out.b_m, out.b_v, out.i_c,
                                              trajectory.terminal_turn, config);
    out.gate_open = out.r_fmt >= config.kappa;
    return out;
}

double aggregate_reward(double r_fmt, double r_prec, const RewardConfig& config) {
    if (r_fmt >= config.kappa) return -config.kappa + r_fmt + r_prec;
    return -config.kappa + r_fmt;
}

RewardBreakdown score_trajectory(const orchestration::Trajectory& trajectory,
                                 const ReferenceSet& refs, const RewardConfig& config) {
    RewardBreakdown out = format_reward(trajectory, config);
    out.r_prec = precision_reward(trajectory.final_answer, refs);
    out.r_total = aggregate_reward(out.r_fmt, out.r_prec, config);
    return out;
}

}  // namespace orch::reward

