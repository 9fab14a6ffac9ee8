#pragma once

#include "orch/reward.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace orch::rl {

/// M execution paths with per-token log-probabilities under the current,
/// pre-update, and frozen base policies.
struct RLBatch {
    std::vector<double> rewards;
    std::vector<std::vector<double>> logp_current;
    std::vector<std::vector<double>> logp_previous;
    std::vector<std::vector<double>> logp_base;

    std::size_t size() const { return rewards.size(); }
    /// Throws std::invalid_argument on ragged or mismatched sequences.
    void validate() const;
};

/// Whether the KL penalty is token-averaged within each trajectory before the
/// batch average (mirroring the surrogate) or pooled over all tokens.
enum class KlAggregation { TokenMeanPerTrajectory, PooledTokens };

struct GrpoConfig {
    double eps_stab = 1e-8;   // advantage normalization stabilizer
    double eps_clip = 0.2;    // ratio clip half-width
    double kl_coeff = 0.001;  // lambda
    double learning_rate = 1e-6;
    int group_size = 8;       // rollouts normalized together
    KlAggregation kl_aggregation = KlAggregation::TokenMeanPerTrajectory;

    void validate() const;
};

/// Batch-normalized advantages: subtract the mean, divide by the population
/// standard deviation stabilized by eps_stab.
std::vector<double> normalize_advantages(std::span<const double> rewards, double eps_stab);

/// min(ratio * advantage, clip(ratio, 1 - eps, 1 + eps) * advantage).
double clipped_term(double ratio, double advantage, double eps_clip);

/// Non-negative per-token KL estimate; zero iff the log-probs are equal.
double kl_estimate(double logp_base, double logp_current);

struct ObjectiveTerms {
    double objective = 0.0;   // surrogate - kl_coeff * kl_penalty
    double surrogate = 0.0;   // token- then batch-averaged clipped terms
    double kl_penalty = 0.0;  // aggregated KL estimate, before kl_coeff
    std::vector<double> per_trajectory;
};

/// The clipped surrogate with KL regularization under explicit advantages.
ObjectiveTerms agrpo_objective(const RLBatch& batch, std::span<const double> advantages,
                               const GrpoConfig& config);

/// Convenience overload: advantages from normalize_advantages(batch.rewards).
ObjectiveTerms agrpo_objective(const RLBatch& batch, const GrpoConfig& config);

// --- desk-scale closed loop --------------------------------------------------

/// Tabular softmax policy over (state, action) logits.
struct ToyPolicy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> logits;  // row-major [state][action]

    static ToyPolicy uniform(int n_states, int n_actions);
    double logit(int state, int action) const { return logits[state * n_actions + action]; }
    double& logit(int state, int action) { return logits[state * n_actions + action]; }
    std::vector<double> action_probs(int state) const;
    double logp(int state, int action) const;
    int sample(int state, std::mt19937_64& rng) const;
};

/// Synthetic role-selection task: each question type rewards exactly one role
/// sequence; the reward is the full gated pipeline over a synthetic
/// trajectory, so only structurally sound episodes with the right final
/// answer earn 1.
struct ToyEnvConfig {
    int question_types = 2;
    int sequence_length = 2;
    std::vector<std::string> roles = {"researcher", "verifier", "assistant"};
    int epochs_per_iteration = 160;  // ascent steps per sampled batch
    double lr_scale = 1e3;           // toy scale-up of the configured rate
};

struct ToyEnvironment {
    ToyEnvConfig config;

    int n_states() const { return config.question_types * config.sequence_length; }
    int n_actions() const { return static_cast<int>(config.roles.size()); }
    int state_of(int question_type, int step) const {
        return question_type * config.sequence_length + step;
    }
    int rewarded_action(int question_type, int step) const;

    /// Builds the synthetic trajectory for the chosen roles and scores it
    /// with the gated reward; 1.0 for the rewarded sequence, 0.0 otherwise.
    double episode_reward(int question_type, const std::vector<int>& actions,
                          const reward::RewardConfig& reward_config) const;
};

struct ToyEpisode {
    int question_type = 0;
    std::vector<int> states;
    std::vector<int> actions;
    std::vector<double> logp_behavior;  // under the sampling (previous) policy
    double reward = 0.0;
};

std::vector<ToyEpisode> sample_toy_batch(const ToyEnvironment& env, const ToyPolicy& policy,
                                         int batch_size, std::mt19937_64& rng,
                                         const reward::RewardConfig& reward_config);

/// Assembles the RLBatch view of sampled episodes: current and base log-probs
/// recomputed from the given policies, previous from the sampling record.
RLBatch toy_rl_batch(std::span<const ToyEpisode> episodes, const ToyPolicy& current,
                     const ToyPolicy& base);

double toy_objective(const ToyPolicy& current, const ToyPolicy& base,
                     std::span<const ToyEpisode> episodes, std::span<const double> advantages,
                     const GrpoConfig& config);

/// Analytic gradient of toy_objective with respect to the current logits;
/// same layout as ToyPolicy::logits.
std::vector<double> toy_objective_gradient(const ToyPolicy& current, const ToyPolicy& base,
                                           std::span<const ToyEpisode> episodes,
                                           std::span<const double> advantages,
                                           const GrpoConfig& config);

struct ToyTrainResult {
    std::vector<double> curve;  // mean batch reward per iteration
    ToyPolicy policy;
};

/// Plain gradient ascent on the clipped objective: snapshot the previous
/// policy, sample a batch under it, take epochs_per_iteration steps, repeat.
/// The base policy stays frozen at initialization. Throws orch::Error if the
/// objective turns non-finite.
ToyTrainResult train_toy_policy(std::uint64_t seed, int iterations, const GrpoConfig& config,
                                const ToyEnvConfig& env_config = {});

}  // namespace orch::rl
