#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace orch::orchestration {
struct Trajectory;
}

namespace orch::reward {

/// Weights of the layered reward. The cap kappa is reachable exactly when
/// alpha_total + beta + gamma + delta == kappa, so a fully well-formed
/// episode earns the full format reward and unlocks precision credit.
struct RewardConfig {
    double kappa = 1.0;         // format reward cap
    double alpha_total = 0.5;   // total mass of the per-turn indicators
    double beta = 1.0 / 6.0;    // boundary-token validity
    double gamma = 1.0 / 6.0;   // final assembly interpretability
    double delta = 1.0 / 6.0;   // structural completeness

    /// Throws std::invalid_argument when the weights cannot reach the cap.
    void validate() const;
};

struct RewardBreakdown {
    std::vector<int> lambda_per_turn;  // per intermediate turn, 0/1
    int b_m = 0;                       // boundary-token validity
    int b_v = 0;                       // terminal emission interpretability
    int i_c = 0;                       // structural completeness
    double r_fmt = 0.0;                // in [0, kappa]
    double r_prec = 0.0;               // in [0, 1]
    double r_total = 0.0;              // in [-kappa, 1]
    bool gate_open = false;            // precision credit unlocked
};

/// Lowercases, strips punctuation, drops the articles a/an/the, and
/// collapses whitespace. Idempotent.
std::string standardize(std::string_view text);

/// Whitespace split of standardized text into a multiset (token -> count).
std::map<std::string, int> segment(std::string_view standardized);

/// Multiset-overlap F1 between the two texts after standardization.
/// Both sides empty -> 1.0; exactly one side empty -> 0.0.
double segment_f1(std::string_view pred, std::string_view ref);

struct ReferenceSet {
    std::vector<std::string> references;  // at least one gold answer
};

/// Best segment F1 over the reference collection.
double precision_reward(std::string_view pred, const ReferenceSet& refs);

/// Capped weighted indicator sum. lambda holds the per-intermediate-turn
/// indicators for turns 1..T-1; when terminal_turn == 1 the intermediate
/// component is granted in full (there are no intermediate turns to judge).
/// When the unclamped sum reaches the cap the result snaps to exactly kappa,
/// so downstream gate comparisons are not at the mercy of float rounding in
/// the default 1/6 weights.
double format_reward_from_indicators(const std::vector<int>& lambda, int b_m, int b_v, int i_c,
                                     int terminal_turn, const RewardConfig& config);

/// Extracts the structural indicators from a finished trajectory and scores
/// the format reward. r_prec and r_total are left for aggregate_reward.
RewardBreakdown format_reward(const orchestration::Trajectory& trajectory,
                              const RewardConfig& config);

/// Gated aggregation: precision is acknowledged only at the full format cap;
/// otherwise the reward stays strictly negative at -kappa + r_fmt.
double aggregate_reward(double r_fmt, double r_prec, const RewardConfig& config);

/// Full pipeline: format indicators, precision vs the references, gating.
RewardBreakdown score_trajectory(const orchestration::Trajectory& trajectory,
                                 const ReferenceSet& refs, const RewardConfig& config);

}  // namespace orch::reward
