#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ifear/agent.hpp"
#include "ifear/envs.hpp"
#include "ifear/theory.hpp"

namespace ifear {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Round-trip-stable, locale-independent float formatting; every emitted
/// byte must be a pure function of (config, seed).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "episode,steps,return,catastrophe,mean_q_loss,mean_fear_loss,"
    "mean_fear_score";

inline void write_metrics_csv(const TrainMetrics& metrics,
                              const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << kMetricsHeader << "\n";
  for (const EpisodeStats& e : metrics.episodes)
    f << e.episode << ',' << e.steps << ',' << fmt_double(e.ret) << ','
      << (e.catastrophe ? 1 : 0) << ',' << fmt_double(e.mean_q_loss) << ','
      << fmt_double(e.mean_fear_loss) << ',' << fmt_double(e.mean_fear_score)
      << "\n";
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: '" + s + "'");
  }
}

inline long parse_long(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not an integer: '" + s + "'");
  }
}

inline bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(where + ": not a boolean: '" + s + "'");
}

}  // namespace detail

inline TrainMetrics read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line != kMetricsHeader)
    throw ConfigError(path + ":1: unexpected metrics header");
  TrainMetrics m;
  int lineno = 1;
  while (std::getline(f, line)) {
    lineno += 1;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 7) throw ConfigError(where + ": expected 7 columns");
    EpisodeStats e;
    e.episode = static_cast<int>(detail::parse_long(cells[0], where));
    e.steps = detail::parse_long(cells[1], where);
    e.ret = detail::parse_double(cells[2], where);
    e.catastrophe = detail::parse_long(cells[3], where) != 0;
    e.mean_q_loss = detail::parse_double(cells[4], where);
    e.mean_fear_loss = detail::parse_double(cells[5], where);
    e.mean_fear_score = detail::parse_double(cells[6], where);
    m.episodes.push_back(e);
    m.total_steps += e.steps;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Optional dumps
// ---------------------------------------------------------------------------

/// Streams every transition of a training run:
/// episode,t,s0..s{d-1},action,reward,terminal,catastrophe.
class TrajectoryRecorder final : public TrainObserver {
 public:
  TrajectoryRecorder(const std::string& path, int state_dim) : f_(path) {
    if (!f_) throw ConfigError("cannot write " + path);
    f_ << "episode,t";
    for (int i = 0; i < state_dim; ++i) f_ << ",s" << i;
    f_ << ",action,reward,terminal,catastrophe\n";
  }

  void on_step(int episode, long step, const State& s, int action,
               const StepResult& r) override {
    f_ << episode << ',' << step;
    for (double v : s) f_ << ',' << fmt_double(v);
    f_ << ',' << action << ',' << fmt_double(r.reward) << ','
       << (r.terminal ? 1 : 0) << ',' << (r.catastrophe ? 1 : 0) << "\n";
  }

 private:
  std::ofstream f_;
};

/// Writes the classifier's training data at the end of a run:
/// store,s0..s{d-1} with store in {danger, safe}.
class BufferAuditRecorder final : public TrainObserver {
 public:
  BufferAuditRecorder(std::string path, int state_dim)
      : path_(std::move(path)), state_dim_(state_dim) {}

  void on_training_end(const FearBuffers& buffers) override {
    std::ofstream f(path_);
    if (!f) throw ConfigError("cannot write " + path_);
    f << "store";
    for (int i = 0; i < state_dim_; ++i) f << ",s" << i;
    f << "\n";
    auto dump = [&f](const StateStore& store, const char* name) {
      for (std::size_t i = 0; i < store.size(); ++i) {
        f << name;
        for (double v : store.at(i)) f << ',' << fmt_double(v);
        f << "\n";
      }
    };
    dump(buffers.danger, "danger");
    dump(buffers.safe, "safe");
  }

 private:
  std::string path_;
  int state_dim_;
};

struct FanoutObserver final : TrainObserver {
  std::vector<TrainObserver*> sinks;
  void on_step(int episode, long step, const State& s, int action,
               const StepResult& r) override {
    for (auto* o : sinks) o->on_step(episode, step, s, action, r);
  }
  void on_training_end(const FearBuffers& buffers) override {
    for (auto* o : sinks) o->on_training_end(buffers);
  }
};

// ---------------------------------------------------------------------------
// Flat key-value configuration files
// ---------------------------------------------------------------------------

/// Parses "dotted.key = value" lines; '#' starts a comment. Returned in file
/// order so later lines can override earlier ones.
inline std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(f, line)) {
    lineno += 1;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": empty key or value");
    out.emplace_back(key, value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string mode = "train";  // train|compare|theorem1|theorem2|sweep-gamma
  std::string env_id = "adventure-seeker";
  int seeds = 5;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int episodes = 0;  // 0 = environment default (300 / 500)
  bool dump_trajectories = false;
  bool dump_buffers = false;

  AgentConfig agent;

  // Theorem-suite knobs.
  int instances = 0;  // 0 = mode default (200 / 100 / 5)
  double theory_gamma = 0.95;
  double theory_lambda = 0.0;  // 0 = cycle {0.1, 1, 10}
  double gamma_plan = -1.0;    // < 0 = cycle {0.5, 0.9, 1.0} * gamma
  double flip_prob = 0.1;
  bool normalize = false;
  std::vector<double> grid;  // sweep-gamma; empty = 11 evenly spaced points

  ExperimentConfig() {
    agent.fear_radius = -1;  // resolved per environment
    agent.max_episodes = 0;
  }
};

/// Applies one key/value pair; unknown keys are configuration errors.
inline void apply_kv(ExperimentConfig& cfg, const std::string& key,
                     const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_long;
  const std::string where = "config key '" + key + "'";
  if (key == "env") cfg.env_id = value;
  else if (key == "seeds") cfg.seeds = static_cast<int>(parse_long(value, where));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value, where));
  else if (key == "out") cfg.out_dir = value;
  else if (key == "episodes") cfg.episodes = static_cast<int>(parse_long(value, where));
  else if (key == "instances") cfg.instances = static_cast<int>(parse_long(value, where));
  else if (key == "dump_trajectories") cfg.dump_trajectories = parse_bool(value, where);
  else if (key == "dump_buffers") cfg.dump_buffers = parse_bool(value, where);
  else if (key == "agent.gamma") cfg.agent.gamma = parse_double(value, where);
  else if (key == "agent.lambda") cfg.agent.lambda = parse_double(value, where);
  else if (key == "agent.fear_radius") cfg.agent.fear_radius = static_cast<int>(parse_long(value, where));
  else if (key == "agent.k_lambda") cfg.agent.lambda_phase_in = parse_long(value, where);
  else if (key == "agent.epsilon") cfg.agent.epsilon = parse_double(value, where);
  else if (key == "agent.epsilon_decay_steps") cfg.agent.epsilon_decay_steps = parse_long(value, where);
  else if (key == "agent.batch_size") cfg.agent.batch_size = static_cast<int>(parse_long(value, where));
  else if (key == "agent.hidden") cfg.agent.hidden_width = static_cast<int>(parse_long(value, where));
  else if (key == "agent.q_lr") cfg.agent.q_lr = parse_double(value, where);
  else if (key == "agent.fear_lr") cfg.agent.fear_lr = parse_double(value, where);
  else if (key == "agent.total_steps") cfg.agent.total_steps = parse_long(value, where);
  else if (key == "agent.max_episode_steps") cfg.agent.max_episode_steps = static_cast<int>(parse_long(value, where));
  else if (key == "agent.discount_in_target") cfg.agent.discount_in_target = parse_bool(value, where);
  else if (key == "agent.replay_capacity") cfg.agent.replay_capacity = static_cast<std::size_t>(parse_long(value, where));
  else if (key == "agent.fear_store_capacity") cfg.agent.fear_store_capacity = static_cast<std::size_t>(parse_long(value, where));
  else if (key == "theory.gamma") cfg.theory_gamma = parse_double(value, where);
  else if (key == "theory.lambda") cfg.theory_lambda = parse_double(value, where);
  else if (key == "theory.gamma_plan") cfg.gamma_plan = parse_double(value, where);
  else if (key == "theory.flip_prob") cfg.flip_prob = parse_double(value, where);
  else if (key == "theory.normalize") cfg.normalize = parse_bool(value, where);
  else if (key == "theory.grid") {
    cfg.grid.clear();
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      cfg.grid.push_back(parse_double(tok, where));
  } else {
    throw ConfigError("unknown " + where);
  }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  for (const auto& [key, value] : parse_kv_file(path)) apply_kv(cfg, key, value);
}

/// Environment-specific defaults for fields the caller left unset.
inline void resolve_defaults(ExperimentConfig& cfg) {
  const bool cartpole = cfg.env_id == "cartpole";
  if (cfg.agent.fear_radius < 0) cfg.agent.fear_radius = cartpole ? 20 : 5;
  if (cfg.episodes == 0) cfg.episodes = cartpole ? 500 : 300;
  if (cfg.instances == 0) {
    if (cfg.mode == "theorem1") cfg.instances = 200;
    else if (cfg.mode == "theorem2") cfg.instances = 100;
    else cfg.instances = 5;
  }
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct SeedSummary {
  std::string file;
  int episodes = 0;
  int catastrophes = 0;
  int final_third_catastrophes = 0;
  double mean_return = 0.0;
  double mean_length = 0.0;
};

struct VariantSummary {
  std::string name;
  std::vector<SeedSummary> seeds;
  long total_catastrophes = 0;
  long final_third_catastrophes = 0;
  double mean_return = 0.0;  // over all episodes of all seeds
  double mean_length = 0.0;
};

/// Aggregates stored per-seed metrics files for one variant. Totals are
/// column sums of the files as written; nothing is recomputed from live
/// training state.
inline VariantSummary summarize_variant(const std::string& name,
                                        const std::vector<std::string>& files) {
  VariantSummary v;
  v.name = name;
  double ret_sum = 0.0, len_sum = 0.0;
  long rows = 0;
  for (const std::string& file : files) {
    const TrainMetrics m = read_metrics_csv(file);
    SeedSummary s;
    s.file = file;
    s.episodes = static_cast<int>(m.episodes.size());
    const int third_start =
        s.episodes - s.episodes / 3;  // final third, 0-based row index
    double seed_ret = 0.0, seed_len = 0.0;
    for (int i = 0; i < s.episodes; ++i) {
      const EpisodeStats& e = m.episodes[i];
      if (e.catastrophe) {
        s.catastrophes += 1;
        if (i >= third_start) s.final_third_catastrophes += 1;
      }
      seed_ret += e.ret;
      seed_len += static_cast<double>(e.steps);
    }
    if (s.episodes > 0) {
      s.mean_return = seed_ret / s.episodes;
      s.mean_length = seed_len / s.episodes;
    }
    v.total_catastrophes += s.catastrophes;
    v.final_third_catastrophes += s.final_third_catastrophes;
    ret_sum += seed_ret;
    len_sum += seed_len;
    rows += s.episodes;
    v.seeds.push_back(std::move(s));
  }
  if (rows > 0) {
    v.mean_return = ret_sum / static_cast<double>(rows);
    v.mean_length = len_sum / static_cast<double>(rows);
  }
  return v;
}

struct ComparisonReport {
  std::vector<VariantSummary> variants;

  std::string to_text() const {
    std::string out;
    for (const auto& v : variants) {
      out += v.name + ": catastrophes=" + std::to_string(v.total_catastrophes) +
             " final_third=" + std::to_string(v.final_third_catastrophes) +
             " mean_return=" + fmt_double(v.mean_return) +
             " mean_length=" + fmt_double(v.mean_length) + "\n";
      for (const auto& s : v.seeds)
        out += "  " + s.file + ": episodes=" + std::to_string(s.episodes) +
               " catastrophes=" + std::to_string(s.catastrophes) +
               " final_third=" + std::to_string(s.final_third_catastrophes) +
               " mean_return=" + fmt_double(s.mean_return) +
               " mean_length=" + fmt_double(s.mean_length) + "\n";
    }
    return out;
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "variant,seed_file,episodes,catastrophes,final_third_catastrophes,"
         "mean_return,mean_length\n";
    for (const auto& v : variants) {
      long episodes = 0;
      for (const auto& s : v.seeds) {
        episodes += s.episodes;
        f << v.name << ',' << s.file << ',' << s.episodes << ','
          << s.catastrophes << ',' << s.final_third_catastrophes << ','
          << fmt_double(s.mean_return) << ',' << fmt_double(s.mean_length)
          << "\n";
      }
      f << v.name << ",all," << episodes << ',' << v.total_catastrophes << ','
        << v.final_third_catastrophes << ',' << fmt_double(v.mean_return)
        << ',' << fmt_double(v.mean_length) << "\n";
    }
  }
};

inline ComparisonReport summarize(const std::vector<std::string>& files) {
  ComparisonReport rep;
  rep.variants.push_back(summarize_variant("all", files));
  return rep;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

namespace detail {

inline void append_report_csv(std::ofstream& f, int instance,
                              const std::string& tag, const BoundReport& rep) {
  for (const auto& c : rep.inequalities)
    f << instance << ',' << tag << ',' << c.name << ',' << fmt_double(c.lhs)
      << ',' << fmt_double(c.rhs) << ',' << fmt_double(c.slack) << ','
      << (c.pass ? 1 : 0) << "\n";
}

inline TrainMetrics run_one_seed(const ExperimentConfig& cfg,
                                 const AgentConfig& agent,
                                 std::uint64_t run_seed,
                                 const std::string& stem) {
  AgentConfig a = agent;
  a.seed = run_seed;
  a.max_episodes = cfg.episodes;
  auto env = make_env(cfg.env_id, derive_seed(run_seed, "env"));

  FanoutObserver fanout;
  std::vector<std::unique_ptr<TrainObserver>> owned;
  if (cfg.dump_trajectories) {
    owned.push_back(std::make_unique<TrajectoryRecorder>(
        stem + "_trajectory.csv", env->state_dim()));
    fanout.sinks.push_back(owned.back().get());
  }
  if (cfg.dump_buffers) {
    owned.push_back(std::make_unique<BufferAuditRecorder>(
        stem + "_buffers.csv", env->state_dim()));
    fanout.sinks.push_back(owned.back().get());
  }
  TrainMetrics metrics =
      train(*env, a, fanout.sinks.empty() ? nullptr : &fanout);
  write_metrics_csv(metrics, stem + ".csv");
  return metrics;
}

inline std::vector<double> lambda_cycle(double fixed) {
  if (fixed > 0.0) return {fixed};
  return {0.1, 1.0, 10.0};
}

}  // namespace detail

inline int run_train(const ExperimentConfig& cfg) {
  std::vector<std::string> files;
  for (int i = 0; i < cfg.seeds; ++i) {
    const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(i);
    const std::string stem = cfg.out_dir + "/train_" + cfg.env_id + "_seed" +
                             std::to_string(run_seed);
    detail::run_one_seed(cfg, cfg.agent, run_seed, stem);
    files.push_back(stem + ".csv");
  }
  const ComparisonReport rep = summarize(files);
  rep.write_csv(cfg.out_dir + "/summary.csv");
  std::ofstream txt(cfg.out_dir + "/report.txt");
  txt << rep.to_text();
  std::cout << rep.to_text();
  return 0;
}

inline int run_compare(const ExperimentConfig& cfg) {
  AgentConfig baseline = cfg.agent;
  baseline.lambda = 0.0;
  AgentConfig shaped = cfg.agent;
  // Default fear factors: 40 matches the reward scale of the hill task;
  // cart-pole rewards 1 per step, where 40 swamps the Q-range and a unit
  // penalty is enough to clear the threshold region.
  if (shaped.lambda <= 0.0)
    shaped.lambda = cfg.env_id == "cartpole" ? 1.0 : 40.0;

  std::vector<std::string> base_files, fear_files;
  for (int i = 0; i < cfg.seeds; ++i) {
    const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(i);
    const std::string tag = cfg.env_id + "_seed" + std::to_string(run_seed);
    detail::run_one_seed(cfg, baseline, run_seed,
                         cfg.out_dir + "/dqn_" + tag);
    detail::run_one_seed(cfg, shaped, run_seed,
                         cfg.out_dir + "/intrinsic_fear_" + tag);
    base_files.push_back(cfg.out_dir + "/dqn_" + tag + ".csv");
    fear_files.push_back(cfg.out_dir + "/intrinsic_fear_" + tag + ".csv");
  }
  ComparisonReport rep;
  rep.variants.push_back(summarize_variant("dqn", base_files));
  rep.variants.push_back(summarize_variant("intrinsic-fear", fear_files));
  rep.write_csv(cfg.out_dir + "/summary.csv");
  std::ofstream txt(cfg.out_dir + "/report.txt");
  txt << rep.to_text();
  std::cout << rep.to_text();
  return 0;
}

inline int run_theorem1(const ExperimentConfig& cfg) {
  std::ofstream csv(cfg.out_dir + "/theorem1_checks.csv");
  if (!csv) throw ConfigError("cannot write theorem1_checks.csv");
  csv << "instance,lambda,name,lhs,rhs,slack,pass\n";
  Rng gen(derive_seed(cfg.seed, "theorem1"));
  const std::vector<double> lambdas = detail::lambda_cycle(cfg.theory_lambda);
  int failures = 0;
  for (int i = 0; i < cfg.instances; ++i) {
    const TabularMdp mdp = random_mdp(gen);
    const double lambda = lambdas[i % lambdas.size()];
    const BoundReport rep = verify_theorem1(mdp, lambda);
    detail::append_report_csv(csv, i, fmt_double(lambda), rep);
    if (!rep.all_pass()) failures += 1;
  }
  const std::string line =
      "theorem1: " + std::to_string(cfg.instances - failures) + "/" +
      std::to_string(cfg.instances) + " inequality chains passed\n";
  std::ofstream txt(cfg.out_dir + "/theorem1_report.txt");
  txt << line;
  std::cout << line;
  return failures == 0 ? 0 : 1;
}

inline int run_theorem2(const ExperimentConfig& cfg) {
  std::ofstream csv(cfg.out_dir + "/theorem2_checks.csv");
  if (!csv) throw ConfigError("cannot write theorem2_checks.csv");
  csv << "instance,gamma_plan,name,lhs,rhs,slack,pass\n";
  Rng gen(derive_seed(cfg.seed, "theorem2"));
  const std::vector<double> lambdas = detail::lambda_cycle(cfg.theory_lambda);
  const double gamma = cfg.theory_gamma;
  std::vector<double> plans;
  if (cfg.gamma_plan >= 0.0) plans = {cfg.gamma_plan};
  else plans = {0.5 * gamma, 0.9 * gamma, gamma};
  int failures = 0, checks = 0;
  for (int i = 0; i < cfg.instances; ++i) {
    const TabularMdp mdp = random_mdp(gen, 6, 3, gamma);
    const LookupFear fear = indicator_fear(mdp);
    const LookupFear hat = corrupt_lookup(fear, CorruptMode::Flip,
                                          cfg.flip_prob, gen);
    const double lambda = lambdas[i % lambdas.size()];
    const std::vector<double> start(mdp.n_states, 1.0 / mdp.n_states);
    for (double gp : plans) {
      const BoundReport rep = verify_theorem2(mdp, fear, hat, gamma, gp,
                                              lambda, start, cfg.normalize);
      detail::append_report_csv(csv, i, fmt_double(gp), rep);
      checks += 1;
      if (!rep.all_pass()) failures += 1;
    }
  }
  const std::string line = "theorem2: " + std::to_string(checks - failures) +
                           "/" + std::to_string(checks) + " reports passed\n";
  std::ofstream txt(cfg.out_dir + "/theorem2_report.txt");
  txt << line;
  std::cout << line;
  return failures == 0 ? 0 : 1;
}

inline int run_sweep_gamma(const ExperimentConfig& cfg) {
  std::ofstream csv(cfg.out_dir + "/gamma_sweep.csv");
  if (!csv) throw ConfigError("cannot write gamma_sweep.csv");
  csv << "instance,gamma_plan,loss\n";
  Rng gen(derive_seed(cfg.seed, "sweep-gamma"));
  const double gamma = cfg.theory_gamma;
  std::vector<double> grid = cfg.grid;
  if (grid.empty())
    for (int i = 0; i <= 10; ++i) grid.push_back(gamma * i / 10.0);
  std::string summary;
  for (int i = 0; i < cfg.instances; ++i) {
    const TabularMdp mdp = random_mdp(gen, 6, 3, gamma);
    const LookupFear fear = indicator_fear(mdp);
    const LookupFear hat = corrupt_lookup(fear, CorruptMode::Flip,
                                          cfg.flip_prob, gen);
    const double lambda = cfg.theory_lambda > 0.0 ? cfg.theory_lambda : 1.0;
    const GammaSweepResult sweep =
        sweep_gamma_plan(mdp, fear, hat, gamma, lambda, grid);
    for (const auto& pt : sweep.curve)
      csv << i << ',' << fmt_double(pt.gamma_plan) << ','
          << fmt_double(pt.loss) << "\n";
    summary += "instance " + std::to_string(i) +
               ": gamma_star=" + fmt_double(sweep.gamma_star) +
               " loss=" + fmt_double(sweep.gamma_star_loss) + "\n";
  }
  std::ofstream txt(cfg.out_dir + "/gamma_sweep_report.txt");
  txt << summary;
  std::cout << summary;
  return 0;
}

/// Dispatches one experiment. Returns the process exit code: 0 on success,
/// 1 if any theorem check failed. Configuration problems throw ConfigError,
/// which the CLI maps to exit code 2.
inline int run(ExperimentConfig cfg) {
  if (cfg.seeds <= 0) throw ConfigError("seeds must be positive");
  if (cfg.mode == "train" || cfg.mode == "compare") {
    make_env(cfg.env_id, 0);  // validates the id
  }
  resolve_defaults(cfg);
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out_dir);

  if (cfg.mode == "train") return run_train(cfg);
  if (cfg.mode == "compare") return run_compare(cfg);
  if (cfg.mode == "theorem1") return run_theorem1(cfg);
  if (cfg.mode == "theorem2") return run_theorem2(cfg);
  if (cfg.mode == "sweep-gamma") return run_sweep_gamma(cfg);
  throw ConfigError("unknown mode " + cfg.mode);
}

}  // namespace ifear
