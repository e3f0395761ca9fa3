#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ifear/agent.hpp"

using namespace ifear;
using Catch::Approx;

namespace {

// Q-network with zero weights and chosen output biases: forward() returns
// the biases for every input.
MlpParams const_q(double q_left, double q_right) {
  MlpParams p = zero_mlp(1, 4, 2, Head::Identity);
  p.b2 = {q_left, q_right};
  return p;
}

std::vector<double*> param_ptrs(MlpParams& p) {
  std::vector<double*> ptrs;
  for (double& v : p.w1) ptrs.push_back(&v);
  for (double& v : p.b1) ptrs.push_back(&v);
  for (double& v : p.w2) ptrs.push_back(&v);
  for (double& v : p.b2) ptrs.push_back(&v);
  return ptrs;
}

AgentConfig tiny_config(std::uint64_t seed) {
  AgentConfig cfg;
  cfg.hidden_width = 8;
  cfg.batch_size = 8;
  cfg.max_episodes = 10;
  cfg.max_episode_steps = 60;
  cfg.lambda = 40.0;
  cfg.fear_radius = 5;
  cfg.lambda_phase_in = 100;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("fear factor phases in linearly and clamps") {
  REQUIRE(fear_factor_at(0, 40.0, 1000) == 0.0);
  REQUIRE(fear_factor_at(1000, 40.0, 1000) == 40.0);
  REQUIRE(fear_factor_at(500, 40.0, 1000) == 20.0);
  REQUIRE(fear_factor_at(100000, 40.0, 1000) == 40.0);
  double prev = -1.0;
  for (long t = 0; t < 3000; t += 7) {
    const double v = fear_factor_at(t, 40.0, 1000);
    REQUIRE(v >= prev);
    REQUIRE(v <= 40.0);
    prev = v;
  }
}

TEST_CASE("full exploration is uniform over both actions") {
  const MlpParams q = const_q(2.0, 5.0);
  Rng rng(42);
  int rights = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    if (select_action(q, std::vector<double>{0.0}, 1.0, rng) == +1) rights += 1;
  REQUIRE(rights > n / 2 - 200);
  REQUIRE(rights < n / 2 + 200);
}

TEST_CASE("greedy selection takes the argmax and breaks ties low") {
  Rng rng(1);
  const std::vector<double> s = {0.3};
  REQUIRE(select_action(const_q(2.0, 5.0), s, 0.0, rng) == +1);
  REQUIRE(select_action(const_q(5.0, 2.0), s, 0.0, rng) == -1);
  REQUIRE(select_action(const_q(3.0, 3.0), s, 0.0, rng) == -1);
}

TEST_CASE("target arithmetic on terminal and bootstrapped transitions") {
  FearModel fear;
  fear.params = zero_mlp(1, 4, 1, Head::Logistic);  // scores 0.5 everywhere
  fear.opt = make_adam(fear.params);

  Transition terminal;
  terminal.s = {0.5};
  terminal.a = 1;
  terminal.r = 1.0;
  terminal.s_next = {1.1};
  terminal.terminal = true;
  terminal.catastrophe = true;
  REQUIRE(compute_target(terminal, const_q(0, 0), &fear, 40.0, 0.95) == -39.0);

  Transition hop;
  hop.s = {0.5};
  hop.a = 1;
  hop.r = 1.0;
  hop.s_next = {0.6};
  REQUIRE(compute_target(hop, const_q(3.0, 10.0), &fear, 40.0, 0.95) ==
          Approx(1.0 + 9.5 - 20.0).margin(1e-12));

  // Disabled fear recovers the standard target.
  REQUIRE(compute_target(hop, const_q(3.0, 10.0), &fear, 0.0, 0.95) ==
          Approx(1.0 + 9.5).margin(1e-12));
  REQUIRE(compute_target(hop, const_q(3.0, 10.0), nullptr, 0.0, 0.95) ==
          Approx(1.0 + 9.5).margin(1e-12));
}

TEST_CASE("zero fear factor reproduces standard targets on random batches") {
  Rng rng(17);
  MlpParams q = make_mlp(1, 8, 2, Head::Identity, rng);
  FearModel fear = make_fear_model(1, 8, 1e-3, rng);
  for (int i = 0; i < 200; ++i) {
    Transition tr;
    tr.s = {rng.uniform(0, 1)};
    tr.a = rng.uniform() < 0.5 ? -1 : 1;
    tr.r = rng.uniform(-1, 1);
    tr.s_next = {rng.uniform(0, 1)};
    tr.terminal = rng.uniform() < 0.2;
    const double with_fear = compute_target(tr, q, &fear, 0.0, 0.9);
    const double without = compute_target(tr, q, nullptr, 0.0, 0.9);
    REQUIRE(with_fear == without);
  }
}

TEST_CASE("an already-fit batch leaves the network untouched") {
  MlpParams q = const_q(0.0, 0.0);
  const MlpParams before = q;
  AdamState opt = make_adam(q, 1e-3);
  std::vector<Transition> batch(4);
  for (auto& tr : batch) {
    tr.s = {0.2};
    tr.a = 1;
    tr.r = 0.0;  // terminal target 0 matches the zero net exactly
    tr.s_next = {0.3};
    tr.terminal = true;
  }
  dqn_update(q, opt, batch, nullptr, 0.0, 0.95);
  REQUIRE(q.w1 == before.w1);
  REQUIRE(q.b1 == before.b1);
  REQUIRE(q.w2 == before.w2);
  REQUIRE(q.b2 == before.b2);
}

TEST_CASE("repeated updates converge to a frozen target") {
  Rng rng(5);
  MlpParams q = make_mlp(1, 16, 2, Head::Identity, rng);
  AdamState opt = make_adam(q, 1e-2);
  Transition tr;
  tr.s = {0.4};
  tr.a = 1;
  tr.r = 2.0;
  tr.s_next = {0.5};
  tr.terminal = true;  // target is the constant r
  for (int i = 0; i < 3000; ++i) dqn_update(q, opt, {tr}, nullptr, 0.0, 0.95);
  REQUIRE(forward(q, tr.s)[1] == Approx(2.0).margin(1e-3));
}

TEST_CASE("dqn batch gradient matches finite differences") {
  Rng rng(271828);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    MlpParams q = make_mlp(1, 1 + rng.uniform_int(6), 2, Head::Identity, rng);
    std::vector<Transition> batch;
    const int n = 1 + rng.uniform_int(4);
    for (int i = 0; i < n; ++i) {
      Transition tr;
      tr.s = {rng.uniform(-1, 1)};
      tr.a = rng.uniform() < 0.5 ? -1 : 1;
      tr.r = rng.uniform(-1, 1);
      tr.s_next = {rng.uniform(-1, 1)};
      tr.terminal = rng.uniform() < 0.3;
      batch.push_back(tr);
    }
    // Targets are constants for the update; freeze them for both paths.
    std::vector<double> targets;
    for (const auto& tr : batch)
      targets.push_back(compute_target(tr, q, nullptr, 0.0, 0.9));

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    Gradients acc = zero_gradients(q);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto qs = forward(q, batch[i].s);
      const int ai = action_index(batch[i].a);
      std::vector<double> up(2, 0.0);
      up[ai] = squared_error(qs[ai], targets[i]).dpred * inv_n;
      accumulate(acc, backward(q, batch[i].s, up));
    }
    std::vector<double> analytic;
    for (double v : acc.w1) analytic.push_back(v);
    for (double v : acc.b1) analytic.push_back(v);
    for (double v : acc.w2) analytic.push_back(v);
    for (double v : acc.b2) analytic.push_back(v);

    auto loss_at = [&] {
      double loss = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto qs = forward(q, batch[i].s);
        loss += squared_error(qs[action_index(batch[i].a)], targets[i]).loss;
      }
      return loss * inv_n;
    };
    const std::vector<double*> ptrs = param_ptrs(q);
    double worst = 0.0;
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
      const double saved = *ptrs[k];
      *ptrs[k] = saved + h;
      const double up_loss = loss_at();
      *ptrs[k] = saved - h;
      const double dn_loss = loss_at();
      *ptrs[k] = saved;
      const double fd = (up_loss - dn_loss) / (2.0 * h);
      const double rel = std::abs(analytic[k] - fd) /
                         std::max({std::abs(analytic[k]), std::abs(fd), 1e-4});
      worst = std::max(worst, rel);
    }
    REQUIRE(worst < 1e-4);
  }
}

TEST_CASE("q updates never touch the fear model") {
  Rng rng(9);
  MlpParams q = make_mlp(1, 8, 2, Head::Identity, rng);
  AdamState opt = make_adam(q, 1e-3);
  FearModel fear = make_fear_model(1, 8, 1e-3, rng);
  const MlpParams fear_before = fear.params;
  std::vector<Transition> batch;
  for (int i = 0; i < 8; ++i) {
    Transition tr;
    tr.s = {rng.uniform(0, 1)};
    tr.a = rng.uniform() < 0.5 ? -1 : 1;
    tr.r = rng.uniform(0, 1);
    tr.s_next = {rng.uniform(0, 1)};
    batch.push_back(tr);
  }
  dqn_update(q, opt, batch, &fear, 20.0, 0.95);
  REQUIRE(fear.params.w1 == fear_before.w1);
  REQUIRE(fear.params.b1 == fear_before.b1);
  REQUIRE(fear.params.w2 == fear_before.w2);
  REQUIRE(fear.params.b2 == fear_before.b2);
}

TEST_CASE("epsilon decays linearly to the floor") {
  AgentConfig cfg;
  cfg.epsilon = 0.05;
  cfg.epsilon_decay_steps = 100;
  cfg.max_episodes = 1;
  REQUIRE(epsilon_at(0, cfg) == 1.0);
  REQUIRE(epsilon_at(50, cfg) == Approx(0.525).margin(1e-12));
  REQUIRE(epsilon_at(100, cfg) == Approx(0.05).margin(1e-12));
  REQUIRE(epsilon_at(100000, cfg) == Approx(0.05).margin(1e-12));
}

TEST_CASE("training twice with one seed is bitwise identical") {
  const AgentConfig cfg = tiny_config(77);
  AdventureSeeker env_a(derive_seed(77, "env"));
  AdventureSeeker env_b(derive_seed(77, "env"));
  const TrainMetrics a = train(env_a, cfg);
  const TrainMetrics b = train(env_b, cfg);
  REQUIRE(a.total_steps == b.total_steps);
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    REQUIRE(a.episodes[i].episode == b.episodes[i].episode);
    REQUIRE(a.episodes[i].steps == b.episodes[i].steps);
    REQUIRE(a.episodes[i].ret == b.episodes[i].ret);
    REQUIRE(a.episodes[i].catastrophe == b.episodes[i].catastrophe);
    REQUIRE(a.episodes[i].mean_q_loss == b.episodes[i].mean_q_loss);
    REQUIRE(a.episodes[i].mean_fear_loss == b.episodes[i].mean_fear_loss);
    REQUIRE(a.episodes[i].mean_fear_score == b.episodes[i].mean_fear_score);
  }
}

TEST_CASE("metrics catastrophe count matches the observed episode ends") {
  struct Counter final : TrainObserver {
    int catastrophes = 0;
    void on_step(int, long, const State&, int, const StepResult& r) override {
      if (r.catastrophe) catastrophes += 1;
    }
  } counter;
  AgentConfig cfg = tiny_config(5);
  cfg.lambda = 0.0;  // plain DQN dies often enough to make this interesting
  cfg.max_episodes = 20;
  AdventureSeeker env(derive_seed(5, "env"));
  const TrainMetrics m = train(env, cfg, &counter);
  REQUIRE(m.total_catastrophes() == counter.catastrophes);
  REQUIRE(static_cast<int>(m.episodes.size()) == 20);
  for (std::size_t i = 0; i < m.episodes.size(); ++i) {
    REQUIRE(m.episodes[i].episode == static_cast<int>(i) + 1);
    REQUIRE(m.episodes[i].steps > 0);
    REQUIRE(m.episodes[i].steps <= cfg.max_episode_steps);
  }
}

TEST_CASE("step budget halts training mid-stream") {
  AgentConfig cfg = tiny_config(11);
  cfg.max_episodes = 0;
  cfg.total_steps = 500;
  AdventureSeeker env(derive_seed(11, "env"));
  const TrainMetrics m = train(env, cfg);
  REQUIRE(m.total_steps == 500);
}

TEST_CASE("config validation rejects out-of-range settings") {
  AgentConfig cfg = tiny_config(1);
  cfg.gamma = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config(1);
  cfg.lambda = -1.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config(1);
  cfg.total_steps = 0;
  cfg.max_episodes = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
