#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ifear/envs.hpp"
#include "ifear/fear.hpp"
#include "ifear/memory.hpp"
#include "ifear/numerics.hpp"
#include "ifear/rng.hpp"

namespace ifear {

struct AgentConfig {
  double gamma = 0.95;
  double lambda = 0.0;         // fear factor; 0 disables fear entirely
  int fear_radius = 5;         // k_r, states labeled danger before a catastrophe
  long lambda_phase_in = 1000; // k_lambda, steps until lambda reaches full strength
  double epsilon = 0.05;       // exploration floor after the decay window
  long epsilon_decay_steps = 0;  // 0 = total_steps / 10, or 6000 without a step budget
  int batch_size = 32;
  int hidden_width = 128;
  double q_lr = 1e-3;
  double fear_lr = 1e-3;
  long total_steps = 0;   // 0 = no step budget
  int max_episodes = 0;   // 0 = no episode budget
  int max_episode_steps = 500;  // agent-side truncation; 0 = none
  bool discount_in_target = true;
  std::size_t replay_capacity = 100000;
  std::size_t fear_store_capacity = 10000;
  std::uint64_t seed = 0;

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma");
    if (lambda < 0.0) throw std::invalid_argument("lambda");
    if (fear_radius < 0) throw std::invalid_argument("fear_radius");
    if (lambda_phase_in <= 0) throw std::invalid_argument("lambda_phase_in");
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon");
    if (batch_size <= 0) throw std::invalid_argument("batch_size");
    if (hidden_width <= 0) throw std::invalid_argument("hidden_width");
    if (q_lr <= 0.0 || fear_lr <= 0.0) throw std::invalid_argument("learning rate");
    if (total_steps < 0 || max_episodes < 0 || max_episode_steps < 0)
      throw std::invalid_argument("budget");
    if (total_steps == 0 && max_episodes == 0)
      throw std::invalid_argument("need a step or episode budget");
  }
};

struct EpisodeStats {
  int episode = 0;  // 1-based
  long steps = 0;
  double ret = 0.0;
  bool catastrophe = false;
  double mean_q_loss = 0.0;
  double mean_fear_loss = 0.0;
  double mean_fear_score = 0.0;
};

struct TrainMetrics {
  std::vector<EpisodeStats> episodes;
  long total_steps = 0;

  int total_catastrophes() const {
    int n = 0;
    for (const auto& e : episodes) n += e.catastrophe ? 1 : 0;
    return n;
  }
};

/// Phased-in fear factor: min(lambda, lambda * t / k_lambda).
inline double fear_factor_at(long t, double lambda, long k_lambda) {
  if (t < 0 || k_lambda <= 0) throw std::invalid_argument("fear_factor_at");
  return std::min(lambda, lambda * static_cast<double>(t) /
                              static_cast<double>(k_lambda));
}

/// Epsilon-greedy over the two actions; greedy ties break toward the lowest
/// action index. Returns an action in {-1, +1}.
inline int select_action(const MlpParams& q, std::span<const double> s,
                         double epsilon, Rng& rng) {
  if (epsilon > 0.0 && rng.uniform() < epsilon)
    return action_from_index(rng.uniform_int(Env::kNumActions));
  const std::vector<double> qs = forward(q, s);
  int best = 0;
  for (int i = 1; i < static_cast<int>(qs.size()); ++i)
    if (qs[i] > qs[best]) best = i;
  return action_from_index(best);
}

/// Temporal-difference target with the intrinsic-fear penalty. Terminal
/// transitions yield r - lambda_t; the rest bootstrap and subtract the
/// scaled fear score of the successor state. A null fear model means no
/// penalty, which with lambda_t = 0 is the standard target.
inline double compute_target(const Transition& tr, const MlpParams& q,
                             const FearModel* fear, double lambda_t,
                             double gamma) {
  if (lambda_t < 0.0) throw std::invalid_argument("lambda_t");
  if (tr.terminal) return tr.r - lambda_t;
  const std::vector<double> qs = forward(q, tr.s_next);
  const double max_q = *std::max_element(qs.begin(), qs.end());
  const double penalty =
      fear != nullptr && lambda_t > 0.0 ? lambda_t * fear_score(*fear, tr.s_next) : 0.0;
  return tr.r + gamma * max_q - penalty;
}

struct DqnUpdateResult {
  double q_loss = 0.0;        // mean squared Bellman error over the batch
  double mean_fear_score = 0.0;  // mean F(s') over non-terminal batch entries
};

/// One Adam step on the mean squared Bellman error. Targets are constants:
/// no gradient flows through the bootstrap term or the fear model.
inline DqnUpdateResult dqn_update(MlpParams& q, AdamState& opt,
                                  const std::vector<Transition>& batch,
                                  const FearModel* fear, double lambda_t,
                                  double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty dqn batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Gradients acc = zero_gradients(q);
  DqnUpdateResult res;
  int n_fear = 0;
  for (const Transition& tr : batch) {
    const double y = compute_target(tr, q, fear, lambda_t, gamma);
    if (!tr.terminal && fear != nullptr) {
      res.mean_fear_score += fear_score(*fear, tr.s_next);
      n_fear += 1;
    }
    const std::vector<double> qs = forward(q, tr.s);
    const int ai = action_index(tr.a);
    const auto [loss, dpred] = squared_error(qs[ai], y);
    res.q_loss += loss;
    std::vector<double> upstream(qs.size(), 0.0);
    upstream[ai] = dpred * inv_n;
    accumulate(acc, backward(q, tr.s, upstream));
  }
  adam_step(opt, q, acc);
  res.q_loss *= inv_n;
  if (n_fear > 0) res.mean_fear_score /= static_cast<double>(n_fear);
  return res;
}

/// Optional observation points for trajectory dumps and buffer audits.
class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_step(int /*episode*/, long /*step_in_episode*/,
                       const State& /*s*/, int /*action*/,
                       const StepResult& /*result*/) {}
  virtual void on_training_end(const FearBuffers& /*buffers*/) {}
};

inline double epsilon_at(long t, const AgentConfig& cfg) {
  long window = cfg.epsilon_decay_steps;
  if (window <= 0) window = cfg.total_steps > 0 ? cfg.total_steps / 10 : 6000;
  if (window <= 0) return cfg.epsilon;
  const double frac =
      std::min(1.0, static_cast<double>(t) / static_cast<double>(window));
  return 1.0 + (cfg.epsilon - 1.0) * frac;
}

/// The interleaved training loop: act epsilon-greedily, store the
/// transition, update the Q-network from a replay batch, and co-train the
/// fear model on 50/50 danger/safe batches. Episodes that end are segmented
/// into the fear buffers; agent-side truncation ends the episode without
/// marking the final transition terminal, so its target still bootstraps.
/// With lambda = 0 the fear model is neither trained nor consulted and the
/// loop is a plain DQN.
inline TrainMetrics train(Env& env, const AgentConfig& cfg,
                          TrainObserver* observer = nullptr) {
  cfg.validate();
  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng explore_rng(derive_seed(cfg.seed, "explore"));
  Rng replay_rng(derive_seed(cfg.seed, "replay"));
  Rng fear_batch_rng(derive_seed(cfg.seed, "fear-batch"));

  const bool use_fear = cfg.lambda > 0.0;
  MlpParams q = make_mlp(env.state_dim(), cfg.hidden_width, Env::kNumActions,
                         Head::Identity, init_rng);
  AdamState q_opt = make_adam(q, cfg.q_lr);
  std::optional<FearModel> fear;
  if (use_fear)
    fear = make_fear_model(env.state_dim(), cfg.hidden_width, cfg.fear_lr,
                           init_rng);

  ReplayBuffer replay(cfg.replay_capacity);
  FearBuffers fear_buffers(cfg.fear_store_capacity);

  TrainMetrics metrics;
  std::vector<State> episode_states;
  State s = env.reset();
  episode_states.push_back(s);

  EpisodeStats ep;
  ep.episode = 1;
  long updates = 0, fear_updates = 0;

  for (long t = 1; cfg.total_steps == 0 || t <= cfg.total_steps; ++t) {
    const int a = select_action(q, s, epsilon_at(t, cfg), explore_rng);
    StepResult res = env.step(a);
    ep.steps += 1;
    ep.ret += res.reward;
    if (observer != nullptr) observer->on_step(ep.episode, ep.steps, s, a, res);

    const bool truncated = !res.terminal && cfg.max_episode_steps > 0 &&
                           ep.steps >= cfg.max_episode_steps;
    replay.push({s, a, res.reward, res.next_state, res.terminal,
                 res.catastrophe});

    if (replay.size() >= static_cast<std::size_t>(cfg.batch_size)) {
      const double lambda_t =
          use_fear ? fear_factor_at(t, cfg.lambda, cfg.lambda_phase_in) : 0.0;
      const double g = cfg.discount_in_target ? cfg.gamma : 1.0;
      const DqnUpdateResult r =
          dqn_update(q, q_opt, replay.sample_uniform(cfg.batch_size, replay_rng),
                     use_fear ? &*fear : nullptr, lambda_t, g);
      ep.mean_q_loss += r.q_loss;
      ep.mean_fear_score += r.mean_fear_score;
      updates += 1;
      if (use_fear) {
        if (auto batch =
                sample_fear_batch(fear_buffers, cfg.batch_size, fear_batch_rng)) {
          ep.mean_fear_loss += fear_train_step(*fear, *batch);
          fear_updates += 1;
        }
      }
    }

    if (res.terminal || truncated) {
      if (use_fear)
        fear_buffers.absorb(
            label_episode(episode_states, res.catastrophe, cfg.fear_radius));
      ep.catastrophe = res.catastrophe;
      if (updates > 0) {
        ep.mean_q_loss /= static_cast<double>(updates);
        ep.mean_fear_score /= static_cast<double>(updates);
      }
      if (fear_updates > 0)
        ep.mean_fear_loss /= static_cast<double>(fear_updates);
      metrics.episodes.push_back(ep);
      metrics.total_steps = t;
      if (cfg.max_episodes > 0 &&
          static_cast<int>(metrics.episodes.size()) >= cfg.max_episodes)
        break;
      ep = EpisodeStats{};
      ep.episode = static_cast<int>(metrics.episodes.size()) + 1;
      updates = fear_updates = 0;
      s = env.reset();
      episode_states.clear();
      episode_states.push_back(s);
    } else {
      s = res.next_state;
      episode_states.push_back(s);
      metrics.total_steps = t;
    }
  }
  if (observer != nullptr) observer->on_training_end(fear_buffers);
  return metrics;
}

}  // namespace ifear
