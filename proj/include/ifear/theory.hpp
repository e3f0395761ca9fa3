#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ifear/linalg.hpp"
#include "ifear/rng.hpp"
#include "ifear/simplex.hpp"

namespace ifear {

// ---------------------------------------------------------------------------
// Tabular model
// ---------------------------------------------------------------------------

/// Finite MDP with a designated danger-state set. Transition rows must be
/// stochastic to 1e-12. Rewards of an unshaped model live in [0, 1]; shaping
/// relaxes that to finiteness.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transitions;  // [s][a][s'] flattened
  std::vector<double> rewards;      // [s][a]
  double gamma = 0.95;
  std::vector<std::uint8_t> danger;  // per-state mask

  double t(int s, int a, int s2) const {
    return transitions[(static_cast<std::size_t>(s) * n_actions + a) * n_states +
                       s2];
  }
  double& t(int s, int a, int s2) {
    return transitions[(static_cast<std::size_t>(s) * n_actions + a) * n_states +
                       s2];
  }
  double r(int s, int a) const {
    return rewards[static_cast<std::size_t>(s) * n_actions + a];
  }
  double& r(int s, int a) {
    return rewards[static_cast<std::size_t>(s) * n_actions + a];
  }

  void validate() const {
    if (n_states <= 0 || n_actions <= 0)
      throw std::invalid_argument("mdp dimensions");
    if (transitions.size() !=
            static_cast<std::size_t>(n_states) * n_actions * n_states ||
        rewards.size() != static_cast<std::size_t>(n_states) * n_actions ||
        danger.size() != static_cast<std::size_t>(n_states))
      throw std::invalid_argument("mdp array shapes");
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) {
        double sum = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) {
          const double p = t(s, a, s2);
          if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument("transition probabilities");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument("transition row does not sum to 1");
        if (!std::isfinite(r(s, a)))
          throw std::invalid_argument("rewards must be finite");
      }
  }

  bool has_unit_rewards() const {
    for (double v : rewards)
      if (v < 0.0 || v > 1.0) return false;
    return true;
  }
};

inline TabularMdp make_mdp(int n_states, int n_actions, double gamma) {
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.transitions.assign(
      static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  m.rewards.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  m.danger.assign(n_states, 0);
  return m;
}

/// Seeded generator for verification sweeps: Dirichlet(1) transition rows,
/// Uniform[0,1] rewards, a danger set of one or two distinct states.
inline TabularMdp random_mdp(Rng& rng, int max_states = 6, int max_actions = 3,
                             double gamma = 0.95) {
  const int S = 2 + rng.uniform_int(max_states - 1);
  const int A = 2 + rng.uniform_int(std::max(1, max_actions - 1));
  TabularMdp m = make_mdp(S, A, gamma);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double sum = 0.0;
      std::vector<double> row(S);
      for (int s2 = 0; s2 < S; ++s2) {
        row[s2] = rng.exponential();
        sum += row[s2];
      }
      for (int s2 = 0; s2 < S; ++s2) m.t(s, a, s2) = row[s2] / sum;
      m.r(s, a) = rng.uniform();
    }
  const int n_danger = 1 + rng.uniform_int(2);
  const int first = rng.uniform_int(S);
  m.danger[first] = 1;
  if (n_danger == 2 && S > 1) {
    int second = rng.uniform_int(S - 1);
    if (second >= first) second += 1;
    m.danger[second] = 1;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

using DetPolicy = std::vector<int>;

struct StochasticPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> p;  // [s][a]

  double prob(int s, int a) const {
    return p[static_cast<std::size_t>(s) * n_actions + a];
  }

  static StochasticPolicy from_deterministic(const DetPolicy& d,
                                             int n_actions) {
    StochasticPolicy sp;
    sp.n_states = static_cast<int>(d.size());
    sp.n_actions = n_actions;
    sp.p.assign(static_cast<std::size_t>(sp.n_states) * n_actions, 0.0);
    for (int s = 0; s < sp.n_states; ++s)
      sp.p[static_cast<std::size_t>(s) * n_actions + d[s]] = 1.0;
    return sp;
  }
};

/// State-to-state chain T_pi induced by a policy; row-major S x S.
inline std::vector<double> induced_chain(const TabularMdp& m,
                                         const StochasticPolicy& pi) {
  const int S = m.n_states;
  std::vector<double> chain(static_cast<std::size_t>(S) * S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < m.n_actions; ++a) {
      const double w = pi.prob(s, a);
      if (w == 0.0) continue;
      for (int s2 = 0; s2 < S; ++s2)
        chain[static_cast<std::size_t>(s) * S + s2] += w * m.t(s, a, s2);
    }
  return chain;
}

// ---------------------------------------------------------------------------
// Dynamic programming
// ---------------------------------------------------------------------------

struct ValueIterationResult {
  std::vector<double> v;
  DetPolicy policy;
  long iterations = 0;
};

/// Bellman iteration to sup-norm residual <= tol; greedy ties break toward
/// the lowest action index. Discounted only; average-reward questions go
/// through the occupancy LP instead.
inline ValueIterationResult value_iteration(const TabularMdp& m, double gamma,
                                            double tol = 1e-12) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("value_iteration needs gamma in [0, 1)");
  const int S = m.n_states, A = m.n_actions;
  ValueIterationResult res;
  res.v.assign(S, 0.0);
  res.policy.assign(S, 0);
  std::vector<double> next(S);
  const long max_iter = 1000000;
  for (long it = 1; it <= max_iter; ++it) {
    double residual = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        double q = m.r(s, a);
        for (int s2 = 0; s2 < S; ++s2) q += gamma * m.t(s, a, s2) * res.v[s2];
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      next[s] = best;
      res.policy[s] = best_a;
      residual = std::max(residual, std::abs(next[s] - res.v[s]));
    }
    res.v = next;
    res.iterations = it;
    if (residual <= tol) return res;
  }
  throw std::runtime_error("value_iteration did not converge");
}

/// Exact solve of the linear Bellman system (I - gamma T_pi) V = R_pi.
inline std::vector<double> policy_evaluation(const TabularMdp& m,
                                             const DetPolicy& pi,
                                             double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("policy_evaluation needs gamma in [0, 1)");
  const int S = m.n_states;
  if (static_cast<int>(pi.size()) != S)
    throw std::invalid_argument("policy size");
  std::vector<double> a(static_cast<std::size_t>(S) * S, 0.0);
  std::vector<double> b(S, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int s2 = 0; s2 < S; ++s2)
      a[static_cast<std::size_t>(s) * S + s2] =
          (s == s2 ? 1.0 : 0.0) - gamma * m.t(s, pi[s], s2);
    b[s] = m.r(s, pi[s]);
  }
  return solve_linear(std::move(a), std::move(b));
}

namespace detail {

/// Closed communicating classes of a chain (edges above 1e-14). The
/// stationary distribution is unique exactly when there is one.
inline std::vector<std::vector<int>> closed_classes(
    const std::vector<double>& chain, int S) {
  constexpr double kEdge = 1e-14;
  std::vector<std::uint8_t> reach(static_cast<std::size_t>(S) * S, 0);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j)
      reach[static_cast<std::size_t>(i) * S + j] =
          i == j || chain[static_cast<std::size_t>(i) * S + j] > kEdge;
  for (int k = 0; k < S; ++k)
    for (int i = 0; i < S; ++i)
      if (reach[static_cast<std::size_t>(i) * S + k])
        for (int j = 0; j < S; ++j)
          if (reach[static_cast<std::size_t>(k) * S + j])
            reach[static_cast<std::size_t>(i) * S + j] = 1;

  std::vector<int> cls(S, -1);
  int n_cls = 0;
  for (int i = 0; i < S; ++i) {
    if (cls[i] >= 0) continue;
    cls[i] = n_cls;
    for (int j = i + 1; j < S; ++j)
      if (reach[static_cast<std::size_t>(i) * S + j] &&
          reach[static_cast<std::size_t>(j) * S + i])
        cls[j] = n_cls;
    n_cls += 1;
  }
  std::vector<std::vector<int>> result;
  for (int c = 0; c < n_cls; ++c) {
    std::vector<int> members;
    bool closed = true;
    for (int i = 0; i < S; ++i) {
      if (cls[i] != c) continue;
      members.push_back(i);
      for (int j = 0; j < S; ++j)
        if (chain[static_cast<std::size_t>(i) * S + j] > kEdge && cls[j] != c)
          closed = false;
    }
    if (closed) result.push_back(std::move(members));
  }
  return result;
}

}  // namespace detail

/// Stationary distribution of the chain a policy induces. Requires a
/// unichain structure; otherwise the reducible decomposition is reported in
/// the error.
inline std::vector<double> stationary_distribution(
    const TabularMdp& m, const StochasticPolicy& pi) {
  const int S = m.n_states;
  const std::vector<double> chain = induced_chain(m, pi);
  const auto closed = detail::closed_classes(chain, S);
  if (closed.size() != 1) {
    std::string msg = "stationary distribution is not unique: " +
                      std::to_string(closed.size()) + " closed classes";
    for (const auto& c : closed) {
      msg += " {";
      for (std::size_t i = 0; i < c.size(); ++i)
        msg += (i ? "," : "") + std::to_string(c[i]);
      msg += "}";
    }
    throw std::runtime_error(msg);
  }

  // omega' (T_pi - I) = 0 with one equation replaced by normalization.
  for (int replaced = S - 1; replaced >= 0; --replaced) {
    std::vector<double> a(static_cast<std::size_t>(S) * S, 0.0);
    std::vector<double> b(S, 0.0);
    for (int j = 0; j < S; ++j) {
      if (j == replaced) {
        for (int i = 0; i < S; ++i) a[static_cast<std::size_t>(j) * S + i] = 1.0;
        b[j] = 1.0;
        continue;
      }
      for (int i = 0; i < S; ++i)
        a[static_cast<std::size_t>(j) * S + i] =
            chain[static_cast<std::size_t>(i) * S + j] - (i == j ? 1.0 : 0.0);
    }
    std::vector<double> omega;
    try {
      omega = solve_linear(std::move(a), std::move(b));
    } catch (const std::runtime_error&) {
      continue;  // singular with this replacement; try another row
    }
    double residual = 0.0, total = 0.0;
    for (int j = 0; j < S; ++j) {
      double in = 0.0;
      for (int i = 0; i < S; ++i)
        in += omega[i] * chain[static_cast<std::size_t>(i) * S + j];
      residual = std::max(residual, std::abs(in - omega[j]));
      total += omega[j];
    }
    if (residual > 1e-10 || std::abs(total - 1.0) > 1e-9) continue;
    for (double& w : omega)
      w = w < 0.0 ? 0.0 : w;  // clamp roundoff on transient states
    double norm = 0.0;
    for (double w : omega) norm += w;
    for (double& w : omega) w /= norm;
    return omega;
  }
  throw std::runtime_error("stationary distribution solve failed");
}

inline std::vector<double> stationary_distribution(const TabularMdp& m,
                                                   const DetPolicy& pi) {
  return stationary_distribution(
      m, StochasticPolicy::from_deterministic(pi, m.n_actions));
}

/// Long-run average reward sum_s omega(s) sum_a pi(a|s) R(s,a).
inline double average_return(const TabularMdp& m, const StochasticPolicy& pi) {
  const std::vector<double> omega = stationary_distribution(m, pi);
  double eta = 0.0;
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a)
      eta += omega[s] * pi.prob(s, a) * m.r(s, a);
  return eta;
}

inline double average_return(const TabularMdp& m, const DetPolicy& pi) {
  return average_return(m,
                        StochasticPolicy::from_deterministic(pi, m.n_actions));
}

/// Normalized discounted return (1 - gamma) * <start, V_pi>.
inline double discounted_return(const TabularMdp& m, const DetPolicy& pi,
                                double gamma,
                                const std::vector<double>& start) {
  const std::vector<double> v = policy_evaluation(m, pi, gamma);
  double eta = 0.0;
  for (int s = 0; s < m.n_states; ++s) eta += start[s] * v[s];
  return (1.0 - gamma) * eta;
}

// ---------------------------------------------------------------------------
// Occupancy-measure linear program
// ---------------------------------------------------------------------------

/// Joint stationary distribution over state-action pairs.
struct OccupancyMeasure {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> mu;  // [s][a]

  double at(int s, int a) const {
    return mu[static_cast<std::size_t>(s) * n_actions + a];
  }
  double state_marginal(int s) const {
    double acc = 0.0;
    for (int a = 0; a < n_actions; ++a) acc += at(s, a);
    return acc;
  }
  double total() const {
    double acc = 0.0;
    for (double v : mu) acc += v;
    return acc;
  }
  /// Largest violation of the flow constraints under the given dynamics.
  double flow_residual(const TabularMdp& m) const {
    double worst = 0.0;
    for (int s2 = 0; s2 < n_states; ++s2) {
      double inflow = 0.0;
      for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) inflow += m.t(s, a, s2) * at(s, a);
      worst = std::max(worst, std::abs(inflow - state_marginal(s2)));
    }
    return worst;
  }
};

struct OccupancySolution {
  double eta_star = 0.0;
  OccupancyMeasure mu;
  StochasticPolicy policy;
  double danger_mass = 0.0;  // epsilon under the minimizing tie-break
};

/// Maximum average reward over the occupancy polytope
///   { mu >= 0, sum mu = 1, per-state inflow = marginal },
/// solved as two LPs: the optimum first, then the least danger-zone mass
/// among optimal measures. The recovered policy is mu(s,a) / marginal(s)
/// where the marginal is positive and action 0 elsewhere.
inline OccupancySolution occupancy_lp(const TabularMdp& m) {
  m.validate();
  const int S = m.n_states, A = m.n_actions;
  const std::size_t n = static_cast<std::size_t>(S) * A;

  LpProblem lp;
  lp.n = n;
  lp.m = static_cast<std::size_t>(S) + 1;
  lp.a.assign(lp.m * n, 0.0);
  lp.b.assign(lp.m, 0.0);
  lp.c.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) lp.a[j] = 1.0;  // normalization row
  lp.b[0] = 1.0;
  for (int s2 = 0; s2 < S; ++s2) {
    double* row = lp.a.data() + (static_cast<std::size_t>(s2) + 1) * n;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        row[static_cast<std::size_t>(s) * A + a] =
            (s == s2 ? 1.0 : 0.0) - m.t(s, a, s2);
  }
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      lp.c[static_cast<std::size_t>(s) * A + a] = -m.r(s, a);

  const SimplexSolver solver;
  const LpResult first = solver.solve(lp);
  const double eta_star = -first.value;

  // Second phase: pin the objective value, minimize danger-zone mass.
  LpProblem tie = lp;
  tie.m += 1;
  tie.a.resize(tie.m * n);
  double* value_row = tie.a.data() + (tie.m - 1) * n;
  for (std::size_t j = 0; j < n; ++j) value_row[j] = -lp.c[j];
  tie.b.push_back(eta_star);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      tie.c[static_cast<std::size_t>(s) * A + a] = m.danger[s] ? 1.0 : 0.0;
  const LpResult second = solver.solve(tie);

  OccupancySolution sol;
  sol.eta_star = eta_star;
  sol.danger_mass = second.value;
  sol.mu.n_states = S;
  sol.mu.n_actions = A;
  sol.mu.mu = second.x;
  for (double& v : sol.mu.mu)
    v = v < 0.0 ? 0.0 : v;  // solver roundoff only

  sol.policy.n_states = S;
  sol.policy.n_actions = A;
  sol.policy.p.assign(n, 0.0);
  for (int s = 0; s < S; ++s) {
    const double marginal = sol.mu.state_marginal(s);
    if (marginal > 1e-12) {
      for (int a = 0; a < A; ++a)
        sol.policy.p[static_cast<std::size_t>(s) * A + a] =
            sol.mu.at(s, a) / marginal;
    } else {
      sol.policy.p[static_cast<std::size_t>(s) * A] = 1.0;
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Lookup-table fear models
// ---------------------------------------------------------------------------

/// Per-state catastrophe score in [0, 1]; an indicator when exact.
struct LookupFear {
  std::vector<double> f;

  void validate() const {
    for (double v : f)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("lookup fear entries must be in [0, 1]");
  }
};

inline LookupFear indicator_fear(const TabularMdp& m) {
  LookupFear lf;
  lf.f.resize(m.n_states);
  for (int s = 0; s < m.n_states; ++s) lf.f[s] = m.danger[s] ? 1.0 : 0.0;
  return lf;
}

enum class CorruptMode { Flip, Estimate };

/// Perturbed copy of a lookup classifier. Flip inverts each entry with the
/// given probability; Estimate replaces each entry with the empirical mean
/// of round(param) Bernoulli(f(s)) draws, so a deterministic table is
/// recovered exactly from a single visit.
inline LookupFear corrupt_lookup(const LookupFear& fear, CorruptMode mode,
                                 double param, Rng& rng) {
  fear.validate();
  LookupFear out = fear;
  switch (mode) {
    case CorruptMode::Flip: {
      if (param < 0.0 || param > 1.0)
        throw std::invalid_argument("flip probability");
      for (double& v : out.f)
        if (rng.uniform() < param) v = 1.0 - v;
      return out;
    }
    case CorruptMode::Estimate: {
      const long n = std::lround(param);
      if (n < 1) throw std::invalid_argument("estimate sample count");
      for (double& v : out.f) {
        long hits = 0;
        for (long i = 0; i < n; ++i)
          if (rng.uniform() < v) hits += 1;
        v = static_cast<double>(hits) / static_cast<double>(n);
      }
      return out;
    }
  }
  throw std::invalid_argument("corrupt mode");
}

/// Shaped model: R'(s,a) = R(s,a) - lambda * f(s), dynamics untouched.
/// With scale_by_reward_range the penalty is lambda * (Rmax - Rmin) * f(s).
inline TabularMdp shape_with_fear(const TabularMdp& m, const LookupFear& fear,
                                  double lambda,
                                  bool scale_by_reward_range = false) {
  if (lambda < 0.0) throw std::invalid_argument("lambda");
  if (fear.f.size() != static_cast<std::size_t>(m.n_states))
    throw std::invalid_argument("fear table size");
  double scale = 1.0;
  if (scale_by_reward_range) {
    const auto [lo, hi] =
        std::minmax_element(m.rewards.begin(), m.rewards.end());
    scale = *hi - *lo;
  }
  TabularMdp shaped = m;
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a)
      shaped.r(s, a) -= lambda * scale * fear.f[s];
  return shaped;
}

// ---------------------------------------------------------------------------
// Bound reports
// ---------------------------------------------------------------------------

struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // lhs - rhs; negative means violated
  bool pass = false;
};

/// Evaluated inequality chain of a theorem check plus the named quantities
/// that built it. Slacks are measured, never assumed.
struct BoundReport {
  std::vector<InequalityCheck> inequalities;
  std::vector<std::pair<std::string, double>> quantities;

  void require_ge(const std::string& name, double lhs, double rhs,
                  double tol) {
    InequalityCheck c;
    c.name = name;
    c.lhs = lhs;
    c.rhs = rhs;
    c.slack = lhs - rhs;
    c.pass = c.slack >= -tol;
    inequalities.push_back(std::move(c));
  }

  void note(const std::string& name, double value) {
    quantities.emplace_back(name, value);
  }

  double quantity(const std::string& name) const {
    for (const auto& [k, v] : quantities)
      if (k == name) return v;
    throw std::out_of_range("no quantity named " + name);
  }

  bool all_pass() const {
    for (const auto& c : inequalities)
      if (!c.pass) return false;
    return true;
  }

  std::string to_text() const {
    auto fmt = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", v);
      return std::string(buf);
    };
    std::string out;
    for (const auto& c : inequalities)
      out += std::string(c.pass ? "[pass] " : "[FAIL] ") + c.name +
             ": lhs=" + fmt(c.lhs) + " rhs=" + fmt(c.rhs) +
             " slack=" + fmt(c.slack) + "\n";
    for (const auto& [k, v] : quantities) out += "  " + k + " = " + fmt(v) + "\n";
    return out;
  }
};

// ---------------------------------------------------------------------------
// Theorem checks
// ---------------------------------------------------------------------------

/// Average-return chain under indicator fear on the danger set:
///   eta_M(pi*) >= eta_M(pi~) >= eta_{M,F}(pi~) >= eta_M(pi*) - lambda*eps,
/// where pi* comes from the occupancy LP on M (with the danger-minimizing
/// tie-break supplying eps) and pi~ from the LP on the shaped model.
inline BoundReport verify_theorem1(const TabularMdp& m, double lambda,
                                   double tol = 1e-8) {
  if (!m.has_unit_rewards())
    throw std::invalid_argument("verify_theorem1 needs rewards in [0, 1]");
  if (lambda < 0.0) throw std::invalid_argument("lambda");

  const OccupancySolution base = occupancy_lp(m);
  const LookupFear fear = indicator_fear(m);
  const TabularMdp shaped = shape_with_fear(m, fear, lambda);
  const OccupancySolution tilde = occupancy_lp(shaped);

  double eta_m_tilde = 0.0;  // pi~'s return on the original rewards
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a)
      eta_m_tilde += tilde.mu.at(s, a) * m.r(s, a);

  const double eta_star = base.eta_star;
  const double eta_mf_tilde = tilde.eta_star;
  const double epsilon = base.danger_mass;
  const double lower = eta_star - lambda * epsilon;

  BoundReport rep;
  rep.note("eta_M(pi_star)", eta_star);
  rep.note("eta_M(pi_tilde)", eta_m_tilde);
  rep.note("eta_MF(pi_tilde)", eta_mf_tilde);
  rep.note("lower_bound", lower);
  rep.note("epsilon", epsilon);
  rep.note("lambda", lambda);
  rep.require_ge("eta_M(pi_star) >= eta_M(pi_tilde)", eta_star, eta_m_tilde,
                 tol);
  rep.require_ge("eta_M(pi_tilde) >= eta_MF(pi_tilde)", eta_m_tilde,
                 eta_mf_tilde, tol);
  rep.require_ge("eta_MF(pi_tilde) >= eta_M(pi_star) - lambda*eps",
                 eta_mf_tilde, lower, tol);
  return rep;
}

/// Exact measurement of the return lost to planning with a corrupted
/// classifier at a reduced discount. Optimal policies come from value
/// iteration on the shaped models; every value function is an exact linear
/// solve. The report carries the average reduction L under both the
/// (1-gamma) and (1-gamma_plan) normalizations, the horizon term against
/// (gamma-gamma_plan)/((1-gamma_plan)(1-gamma)), and the classifier term
/// against 2*lambda*max|F-Fhat|/(1-gamma_plan). The normalize flag first
/// rescales rewards and fear into [0,1] (lambda' = lambda/(1+lambda)), the
/// regime in which every step of the derivation applies verbatim.
inline BoundReport verify_theorem2(const TabularMdp& m, const LookupFear& fear,
                                   const LookupFear& fear_hat, double gamma,
                                   double gamma_plan, double lambda,
                                   const std::vector<double>& start_dist,
                                   bool normalize = false, double tol = 1e-8) {
  if (!(gamma < 1.0 && gamma >= 0.0)) throw std::invalid_argument("gamma");
  if (gamma_plan > gamma || gamma_plan < 0.0)
    throw std::invalid_argument("gamma_plan must lie in [0, gamma]");
  if (lambda < 0.0) throw std::invalid_argument("lambda");
  fear.validate();
  fear_hat.validate();
  if (start_dist.size() != static_cast<std::size_t>(m.n_states))
    throw std::invalid_argument("start distribution size");

  TabularMdp base = m;
  double lambda_eff = lambda;
  if (normalize) {
    for (double& r : base.rewards) r = (r + lambda) / (1.0 + lambda);
    lambda_eff = lambda / (1.0 + lambda);
  }
  const TabularMdp mf = shape_with_fear(base, fear, lambda_eff);
  const TabularMdp mf_hat = shape_with_fear(base, fear_hat, lambda_eff);

  const DetPolicy pi_star = value_iteration(mf, gamma).policy;
  const DetPolicy pi_hat = value_iteration(mf_hat, gamma_plan).policy;

  const std::vector<double> v_opt = policy_evaluation(mf, pi_star, gamma);
  const std::vector<double> v_hat = policy_evaluation(mf, pi_hat, gamma);
  const std::vector<double> omega = stationary_distribution(m, pi_hat);

  double weighted = 0.0, pointwise_min = std::numeric_limits<double>::infinity();
  for (int s = 0; s < m.n_states; ++s) {
    const double d = v_opt[s] - v_hat[s];
    weighted += omega[s] * d;
    pointwise_min = std::min(pointwise_min, d);
  }
  const double loss_gamma = (1.0 - gamma) * weighted;
  const double loss_plan = (1.0 - gamma_plan) * weighted;

  // Horizon term: same policy, same shaping, reduced discount.
  const std::vector<double> v_opt_plan =
      policy_evaluation(mf, pi_star, gamma_plan);
  double horizon_term = 0.0;
  for (int s = 0; s < m.n_states; ++s)
    horizon_term = std::max(horizon_term, v_opt[s] - v_opt_plan[s]);
  const double horizon_bound =
      (gamma - gamma_plan) / ((1.0 - gamma_plan) * (1.0 - gamma));

  // Classifier term: value lost at gamma_plan by following the policy that
  // is optimal for the corrupted classifier.
  const DetPolicy pi_star_plan = value_iteration(mf, gamma_plan).policy;
  const std::vector<double> v_star_plan =
      policy_evaluation(mf, pi_star_plan, gamma_plan);
  const std::vector<double> v_hat_plan =
      policy_evaluation(mf, pi_hat, gamma_plan);
  double classifier_term = 0.0;
  for (int s = 0; s < m.n_states; ++s)
    classifier_term = std::max(classifier_term, v_star_plan[s] - v_hat_plan[s]);
  double max_dev = 0.0;
  for (int s = 0; s < m.n_states; ++s)
    max_dev = std::max(max_dev, std::abs(fear.f[s] - fear_hat.f[s]));
  const double classifier_bound =
      2.0 * lambda_eff * max_dev / (1.0 - gamma_plan);

  double eta_opt = 0.0, eta_hat = 0.0;
  for (int s = 0; s < m.n_states; ++s) {
    eta_opt += start_dist[s] * v_opt[s];
    eta_hat += start_dist[s] * v_hat[s];
  }

  BoundReport rep;
  rep.note("L", loss_gamma);
  rep.note("L_gamma_plan_normalized", loss_plan);
  rep.note("horizon_term", horizon_term);
  rep.note("horizon_bound", horizon_bound);
  rep.note("classifier_term", classifier_term);
  rep.note("classifier_bound", classifier_bound);
  rep.note("max_classifier_deviation", max_dev);
  rep.note("lambda_effective", lambda_eff);
  rep.note("gamma", gamma);
  rep.note("gamma_plan", gamma_plan);
  rep.note("eta_opt_start", (1.0 - gamma) * eta_opt);
  rep.note("eta_hat_start", (1.0 - gamma) * eta_hat);
  rep.require_ge("L >= 0", loss_gamma, 0.0, 1e-9);
  rep.require_ge("V_opt >= V_hat pointwise", pointwise_min, 0.0, 1e-9);
  rep.require_ge("horizon_bound >= horizon_term", horizon_bound, horizon_term,
                 tol);
  rep.require_ge("classifier_bound >= classifier_term", classifier_bound,
                 classifier_term, tol);
  return rep;
}

struct GammaSweepPoint {
  double gamma_plan = 0.0;
  double loss = 0.0;
};

struct GammaSweepResult {
  double gamma_star = 0.0;
  double gamma_star_loss = 0.0;
  std::vector<GammaSweepPoint> curve;
};

/// Measured L over a grid of planning discounts; the argmin breaks ties
/// toward the larger gamma_plan.
inline GammaSweepResult sweep_gamma_plan(const TabularMdp& m,
                                         const LookupFear& fear,
                                         const LookupFear& fear_hat,
                                         double gamma, double lambda,
                                         const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("empty gamma_plan grid");
  const std::vector<double> start(m.n_states, 1.0 / m.n_states);
  GammaSweepResult res;
  bool have_best = false;
  for (double gp : grid) {
    if (gp < 0.0 || gp > gamma)
      throw std::invalid_argument("grid point outside [0, gamma]");
    const BoundReport rep =
        verify_theorem2(m, fear, fear_hat, gamma, gp, lambda, start);
    const double loss = rep.quantity("L");
    res.curve.push_back({gp, loss});
    if (!have_best || loss < res.gamma_star_loss ||
        (loss == res.gamma_star_loss && gp > res.gamma_star)) {
      res.gamma_star = gp;
      res.gamma_star_loss = loss;
      have_best = true;
    }
  }
  return res;
}

}  // namespace ifear
