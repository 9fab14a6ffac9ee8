#include "orch/rl.hpp"

#include "orch/errors.hpp"
#include "orch/orchestration.hpp"
#include "orch/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace orch::rl {

void RLBatch::validate() const {
    const std::size_t m = rewards.size();
    if (logp_current.size() != m || logp_previous.size() != m || logp_base.size() != m) {
        throw std::invalid_argument("batch: per-trajectory sequence counts disagree with M");
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto len = logp_current[i].size();
        if (logp_previous[i].size() != len || logp_base[i].size() != len) {
            throw std::invalid_argument("batch: log-prob sequence lengths disagree at trajectory " +
                                        std::to_string(i));
        }
        if (len == 0) {
            throw std::invalid_argument("batch: empty trajectory at index " + std::to_string(i));
        }
    }
}

void GrpoConfig::validate() const {
    if (eps_stab <= 0.0) throw std::invalid_argument("grpo: eps_stab must be positive");
    if (eps_clip <= 0.0 || eps_clip >= 1.0) {
        throw std::invalid_argument("grpo: eps_clip must lie in (0, 1)");
    }
    if (kl_coeff < 0.0) throw std::invalid_argument("grpo: kl_coeff must be non-negative");
    if (group_size < 1) throw std::invalid_argument("grpo: group_size must be at least 1");
}

std::vector<double> normalize_advantages(std::span<const double> rewards, double eps_stab) {
    if (rewards.empty()) return {};
    // An all-equal batch has zero deviations exactly; computing them through
    // the mean would leave rounding residue in every advantage.
    const bool constant = std::all_of(rewards.begin(), rewards.end(),
                                      [&](double r) { return r == rewards.front(); });
    if (constant) return std::vector<double>(rewards.size(), 0.0);
    const double mean =
        std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    double variance = 0.0;
    for (const double r : rewards) variance += (r - mean) * (r - mean);
    variance /= static_cast<double>(rewards.size());
    const double denom = std::sqrt(variance + eps_stab);
    std::vector<double> advantages;
    advantages.reserve(rewards.size());
    for (const double r : rewards) advantages.push_back((r - mean) / denom);
    return advantages;
}

double clipped_term(double ratio, double advantage, double eps_clip) {
    const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_estimate(double logp_base, double logp_current) {
    const double diff = logp_base - logp_current;
    return std::exp(diff) - diff - 1.0;
}

ObjectiveTerms agrpo_objective(const RLBatch& batch, std::span<const double> advantages,
                               const GrpoConfig& config) {
    batch.validate();
    if (advantages.size() != batch.size()) {
        throw std::invalid_argument("advantage count must equal batch size");
    }

    ObjectiveTerms terms;
    const std::size_t m = batch.size();
    double kl_pooled = 0.0;
    std::size_t total_tokens = 0;

    for (std::size_t i = 0; i < m; ++i) {
        const auto& cur = batch.logp_current[i];
        const auto& prev = batch.logp_previous[i];
        const auto& base = batch.logp_base[i];
        const auto len = cur.size();
        double surr_sum = 0.0;
        double kl_sum = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            const double ratio = std::exp(cur[t] - prev[t]);
            surr_sum += clipped_term(ratio, advantages[i], config.eps_clip);
            kl_sum += kl_estimate(base[t], cur[t]);
        }
        const double token_mean = surr_sum / static_cast<double>(len);
        terms.per_trajectory.push_back(token_mean);
        terms.surrogate += token_mean;
        if (config.kl_aggregation == KlAggregation::TokenMeanPerTrajectory) {
            terms.kl_penalty += kl_sum / static_cast<double>(len);
        } else {
            kl_pooled += kl_sum;
            total_tokens += len;
        }
    }

    terms.surrogate /= static_cast<double>(m);
    if (config.kl_aggregation == KlAggregation::TokenMeanPerTrajectory) {
        terms.kl_penalty /= static_cast<double>(m);
    } else {
        terms.kl_penalty = kl_pooled / static_cast<double>(total_tokens);
    }
    terms.objective = terms.surrogate - config.kl_coeff * terms.kl_penalty;
    return terms;
}

ObjectiveTerms agrpo_objective(const RLBatch& batch, const GrpoConfig& config) {
    return agrpo_objective(batch, normalize_advantages(batch.rewards, config.eps_stab), config);
}

// --- toy policy and environment ----------------------------------------------

ToyPolicy ToyPolicy::uniform(int n_states, int n_actions) {
    ToyPolicy p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.logits.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    return p;
}

std::vector<double> ToyPolicy::action_probs(int state) const {
    std::vector<double> probs(n_actions);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_actions; ++a) max_logit = std::max(max_logit, logit(state, a));
    double z = 0.0;
    for (int a = 0; a < n_actions; ++a) {
        probs[a] = std::exp(logit(state, a) - max_logit);
        z += probs[a];
    }
    for (double& p : probs) p /= z;
    return probs;
}

double ToyPolicy::logp(int state, int action) const {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_actions; ++a) max_logit = std::max(max_logit, logit(state, a));
    double z = 0.0;
    for (int a = 0; a < n_actions; ++a) z += std::exp(logit(state, a) - max_logit);
    return logit(state, action) - max_logit - std::log(z);
}

int ToyPolicy::sample(int state, std::mt19937_64& rng) const {
    const auto probs = action_probs(state);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    for (int a = 0; a < n_actions; ++a) {
        u -= probs[a];
        if (u <= 0.0) return a;
    }
    return n_actions - 1;
}

int ToyEnvironment::rewarded_action(int question_type, int step) const {
    return (question_type + step) % n_actions();
}

double ToyEnvironment::episode_reward(int question_type, const std::vector<int>& actions,
                                      const reward::RewardConfig& reward_config) const {
    bool correct = actions.size() == static_cast<std::size_t>(config.sequence_length);
    for (std::size_t step = 0; step < actions.size(); ++step) {
        correct = correct &&
                  actions[step] == rewarded_action(question_type, static_cast<int>(step));
    }
    const std::string answer = correct ? "right" : "wrong";

    // Full pipeline on a structurally sound synthetic trajectory: the format
    // gate opens, so the reward reduces to the precision term.
    orchestration::Trajectory traj;
    traj.question = "toy question " + std::to_string(question_type);
    for (std::size_t step = 0; step < actions.size(); ++step) {
        traj.exchanges.push_back({static_cast<int>(step) + 1,
                                  "choose a role for step " + std::to_string(step),
                                  config.roles[static_cast<std::size_t>(actions[step])],
                                  "work on step " + std::to_string(step), "step feedback"});
    }
    traj.final_answer = answer;
    traj.terminal_turn = static_cast<int>(actions.size()) + 1;
    traj.termination = orchestration::Termination::PolicyFinalize;
    traj.terminal_emission = "<think>decide</think><answer>" + answer + "</answer>";

    const reward::ReferenceSet refs{{"right"}};
    return reward::score_trajectory(traj, refs, reward_config).r_total;
}

std::vector<ToyEpisode> sample_toy_batch(const ToyEnvironment& env, const ToyPolicy& policy,
                                         int batch_size, std::mt19937_64& rng,
                                         const reward::RewardConfig& reward_config) {
    std::uniform_int_distribution<int> pick_question(0, env.config.question_types - 1);
    std::vector<ToyEpisode> episodes;
    episodes.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        ToyEpisode ep;
        ep.question_type = pick_question(rng);
        for (int step = 0; step < env.config.sequence_length; ++step) {
            const int state = env.state_of(ep.question_type, step);
            const int action = policy.sample(state, rng);
            ep.states.push_back(state);
            ep.actions.push_back(action);
            ep.logp_behavior.push_back(policy.logp(state, action));
        }
        ep.reward = env.episode_reward(ep.question_type, ep.actions, reward_config);
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

RLBatch toy_rl_batch(std::span<const ToyEpisode> episodes, const ToyPolicy& current,
                     const ToyPolicy& base) {
    RLBatch batch;
    for (const auto& ep : episodes) {
        batch.rewards.push_back(ep.reward);
        std::vector<double> cur, prev, bas;
        for (std::size_t t = 0; t < ep.states.size(); ++t) {
            cur.push_back(current.logp(ep.states[t], ep.actions[t]));
            bas.push_back(base.logp(ep.states[t], ep.actions[t]));
        }
        prev = ep.logp_behavior;
        batch.logp_current.push_back(std::move(cur));
        batch.logp_previous.push_back(std::move(prev));
        batch.logp_base.push_back(std::move(bas));
    }
    return batch;
}

double toy_objective(const ToyPolicy& current, const ToyPolicy& base,
                     std::span<const ToyEpisode> episodes, std::span<const double> advantages,
                     const GrpoConfig& config) {
    return agrpo_objective(toy_rl_batch(episodes, current, base), advantages, config).objective;
}

std::vector<double> toy_objective_gradient(const ToyPolicy& current, const ToyPolicy& base,
                                           std::span<const ToyEpisode> episodes,
                                           std::span<const double> advantages,
                                           const GrpoConfig& config) {
    std::vector<double> grad(current.logits.size(), 0.0);
    const double m = static_cast<double>(episodes.size());
    std::size_t total_tokens = 0;
    for (const auto& ep : episodes) total_tokens += ep.states.size();

    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& ep = episodes[i];
        const double len = static_cast<double>(ep.states.size());
        for (std::size_t t = 0; t < ep.states.size(); ++t) {
            const int s = ep.states[t];
            const int a = ep.actions[t];
            const double lc = current.logp(s, a);
            const double lb = base.logp(s, a);
            const double ratio = std::exp(lc - ep.logp_behavior[t]);

            // d/d lc of the clipped surrogate: the unclipped branch carries
            // ratio * advantage; the clipped branch is constant in lc.
            const double unclipped = ratio * advantages[i];
            const double clipped =
                std::clamp(ratio, 1.0 - config.eps_clip, 1.0 + config.eps_clip) * advantages[i];
            double d_obj_d_lc = 0.0;
            if (unclipped <= clipped) d_obj_d_lc += (1.0 / (m * len)) * unclipped;

            // KL estimate exp(lb - lc) - (lb - lc) - 1 has d/d lc = 1 - exp(lb - lc).
            const double d_kl_d_lc = 1.0 - std::exp(lb - lc);
            const double kl_scale =
                config.kl_aggregation == KlAggregation::TokenMeanPerTrajectory
                    ? 1.0 / (m * len)
                    : 1.0 / static_cast<double>(total_tokens);
            d_obj_d_lc -= config.kl_coeff * kl_scale * d_kl_d_lc;

            // d lc / d logit(s, b) = [b == a] - pi(b | s).
            const auto probs = current.action_probs(s);
            for (int b = 0; b < current.n_actions; ++b) {
                const double indicator = (b == a) ? 1.0 : 0.0;
                grad[static_cast<std::size_t>(s) * current.n_actions + b] +=
                    d_obj_d_lc * (indicator - probs[b]);
            }
        }
    }
    return grad;
}

ToyTrainResult train_toy_policy(std::uint64_t seed, int iterations, const GrpoConfig& config,
                                const ToyEnvConfig& env_config) {
    config.validate();
    const ToyEnvironment env{env_config};
    const reward::RewardConfig reward_config;
    std::mt19937_64 rng(seed);

    ToyTrainResult result;
    result.policy = ToyPolicy::uniform(env.n_states(), env.n_actions());
    const ToyPolicy base = result.policy;  // frozen reference
    const double step_size = config.learning_rate * env_config.lr_scale;

    for (int iter = 0; iter < iterations; ++iter) {
        const ToyPolicy previous = result.policy;  // pre-update snapshot
        const auto episodes =
            sample_toy_batch(env, previous, config.group_size, rng, reward_config);

        std::vector<double> rewards;
        rewards.reserve(episodes.size());
        for (const auto& ep : episodes) rewards.push_back(ep.reward);
        result.curve.push_back(std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                               static_cast<double>(rewards.size()));

        const auto advantages = normalize_advantages(rewards, config.eps_stab);

        for (int epoch = 0; epoch < env_config.epochs_per_iteration; ++epoch) {
            const auto grad =
                toy_objective_gradient(result.policy, base, episodes, advantages, config);
            for (std::size_t k = 0; k < grad.size(); ++k) {
                result.policy.logits[k] += step_size * grad[k];
            }
        }
        const double objective = toy_objective(result.policy, base, episodes, advantages, config);
        if (!std::isfinite(objective)) {
            throw Error("toy training diverged: non-finite objective at iteration " +
                        std::to_string(iter));
        }
    }
    return result;
}

}  // namespace orch::rl

