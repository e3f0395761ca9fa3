#include <exception>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ifear/harness.hpp"

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct SubState {
  std::string mode;
  std::string config_path;
  KeyValues overrides;
};

void add_kv_option(CLI::App* sub, KeyValues& sink, const std::string& flag,
                   std::string key, const std::string& help) {
  sub->add_option_function<std::string>(
      flag,
      [&sink, key = std::move(key)](const std::string& v) {
        sink.emplace_back(key, v);
      },
      help);
}

void add_kv_flag(CLI::App* sub, KeyValues& sink, const std::string& flag,
                 std::string key, const std::string& help) {
  sub->add_flag_callback(
      flag, [&sink, key = std::move(key)] { sink.emplace_back(key, "true"); },
      help);
}

std::shared_ptr<SubState> make_sub(CLI::App& app, const std::string& name,
                                   const std::string& desc, bool rl_mode) {
  auto st = std::make_shared<SubState>();
  st->mode = name;
  CLI::App* sub = app.add_subcommand(name, desc);
  sub->add_option_function<std::string>(
      "--config", [st](const std::string& v) { st->config_path = v; },
      "flat key-value config file; flags override file values");
  add_kv_option(sub, st->overrides, "--seed", "seed", "base seed");
  add_kv_option(sub, st->overrides, "--seeds", "seeds", "number of seeded runs");
  add_kv_option(sub, st->overrides, "--out", "out", "output directory");
  if (rl_mode) {
    add_kv_option(sub, st->overrides, "--env", "env",
                  "environment id: adventure-seeker or cartpole");
    add_kv_option(sub, st->overrides, "--episodes", "episodes",
                  "episode budget per run (0 = environment default)");
    add_kv_option(sub, st->overrides, "--lambda", "agent.lambda",
                  "fear factor (0 disables intrinsic fear)");
    add_kv_option(sub, st->overrides, "--gamma", "agent.gamma",
                  "discount factor");
    add_kv_option(sub, st->overrides, "--fear-radius", "agent.fear_radius",
                  "danger labeling radius in steps");
    add_kv_option(sub, st->overrides, "--k-lambda", "agent.k_lambda",
                  "fear phase-in length in steps");
    add_kv_option(sub, st->overrides, "--epsilon", "agent.epsilon",
                  "exploration floor after decay");
    add_kv_option(sub, st->overrides, "--hidden", "agent.hidden",
                  "hidden layer width");
    add_kv_option(sub, st->overrides, "--batch-size", "agent.batch_size",
                  "minibatch size for both networks");
    add_kv_option(sub, st->overrides, "--q-lr", "agent.q_lr",
                  "Q-network learning rate");
    add_kv_option(sub, st->overrides, "--fear-lr", "agent.fear_lr",
                  "fear-model learning rate");
    add_kv_option(sub, st->overrides, "--total-steps", "agent.total_steps",
                  "step budget (0 = unlimited)");
    add_kv_option(sub, st->overrides, "--max-episode-steps",
                  "agent.max_episode_steps",
                  "agent-side episode truncation (0 = none)");
    add_kv_option(sub, st->overrides, "--discount-in-target",
                  "agent.discount_in_target",
                  "true: r + gamma*maxQ - lambda*F; false drops the gamma");
    add_kv_flag(sub, st->overrides, "--dump-trajectories", "dump_trajectories",
                "write per-step trajectory CSVs");
    add_kv_flag(sub, st->overrides, "--dump-buffers", "dump_buffers",
                "write a danger/safe buffer audit CSV per run");
  } else {
    add_kv_option(sub, st->overrides, "--instances", "instances",
                  "number of random models");
    add_kv_option(sub, st->overrides, "--lambda", "theory.lambda",
                  "fear factor (0 = cycle 0.1, 1, 10)");
    add_kv_option(sub, st->overrides, "--gamma", "theory.gamma",
                  "evaluation discount");
    add_kv_option(sub, st->overrides, "--gamma-plan", "theory.gamma_plan",
                  "planning discount (< 0 = cycle 0.5, 0.9, 1.0 of gamma)");
    add_kv_option(sub, st->overrides, "--flip-prob", "theory.flip_prob",
                  "classifier corruption: per-state flip probability");
    add_kv_option(sub, st->overrides, "--grid", "theory.grid",
                  "comma-separated gamma_plan grid for the sweep");
    add_kv_flag(sub, st->overrides, "--normalize", "theory.normalize",
                "rescale rewards and fear into [0,1] before checking");
  }
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Intrinsic-fear DQN toolkit: toy-environment training runs and exact "
      "tabular verification of the shaping bounds"};
  app.require_subcommand(1);

  std::vector<std::shared_ptr<SubState>> subs;
  subs.push_back(make_sub(app, "train",
                          "train one variant across seeds and summarize", true));
  subs.push_back(make_sub(
      app, "compare", "train baseline DQN and intrinsic-fear DQN side by side",
      true));
  subs.push_back(make_sub(app, "theorem1",
                          "verify the average-return chain on random models",
                          false));
  subs.push_back(make_sub(
      app, "theorem2",
      "verify the imperfect-classifier decomposition on random models", false));
  subs.push_back(make_sub(app, "sweep-gamma",
                          "measure the loss curve over planning discounts",
                          false));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& st : subs) {
      if (!app.get_subcommand(st->mode)->parsed()) continue;
      ifear::ExperimentConfig cfg;
      cfg.mode = st->mode;
      if (!st->config_path.empty())
        ifear::apply_config_file(cfg, st->config_path);
      for (const auto& [key, value] : st->overrides)
        ifear::apply_kv(cfg, key, value);
      return ifear::run(std::move(cfg));
    }
  } catch (const ifear::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
