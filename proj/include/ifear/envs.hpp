#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ifear/rng.hpp"

namespace ifear {

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;
  bool catastrophe = false;  // catastrophe implies terminal
};

inline void check_action(int a) {
  if (a != -1 && a != 1) throw std::invalid_argument("action must be -1 or +1");
}

inline int action_index(int a) {
  check_action(a);
  return a == -1 ? 0 : 1;
}

inline int action_from_index(int idx) { return idx == 0 ? -1 : 1; }

/// Episodic two-action environment. Instances own their noise stream; the
/// agent's sampling never perturbs it.
class Env {
 public:
  virtual ~Env() = default;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(int action) = 0;
  virtual int state_dim() const = 0;
  virtual std::string_view id() const = 0;
  static constexpr int kNumActions = 2;
};

// ---------------------------------------------------------------------------
// Adventure Seeker: a single hill coordinate s in [0, 1]. Moving right earns
// more reward but falling off either edge ends the episode in catastrophe.
// ---------------------------------------------------------------------------

namespace adventure {
inline constexpr double kStep = 0.01;
inline constexpr double kNoiseSd = 0.01;
inline constexpr double kStartLo = 0.25;
inline constexpr double kStartHi = 0.75;
}  // namespace adventure

/// Start position from one uniform draw in [0, 1): maps onto [0.25, 0.75].
inline double adventure_start_from(double u01) {
  return adventure::kStartLo + (adventure::kStartHi - adventure::kStartLo) * u01;
}

/// One transition with the noise value made explicit:
///   next = s + 0.01 * a + noise, reward = s, catastrophe past either edge.
inline StepResult adventure_transition(double s, int action, double noise) {
  check_action(action);
  if (!(s >= 0.0 && s <= 1.0))
    throw std::invalid_argument("adventure state outside [0, 1]");
  const double next = s + adventure::kStep * action + noise;
  StepResult r;
  r.next_state = {next};
  r.reward = s;
  r.catastrophe = next > 1.0 || next < 0.0;
  r.terminal = r.catastrophe;
  return r;
}

class AdventureSeeker final : public Env {
 public:
  explicit AdventureSeeker(std::uint64_t seed) : rng_(seed) {}

  std::vector<double> reset() override {
    s_ = adventure_start_from(rng_.uniform());
    alive_ = true;
    return {s_};
  }

  StepResult step(int action) override {
    if (!alive_) throw std::logic_error("step after terminal; call reset");
    StepResult r =
        adventure_transition(s_, action, rng_.normal(0.0, adventure::kNoiseSd));
    if (r.terminal)
      alive_ = false;
    else
      s_ = r.next_state[0];
    return r;
  }

  int state_dim() const override { return 1; }
  std::string_view id() const override { return "adventure-seeker"; }

 private:
  Rng rng_;
  double s_ = 0.5;
  bool alive_ = false;
};

// ---------------------------------------------------------------------------
// Cart-pole: the classic balancing task with the reference constants
// (gravity 9.8, cart mass 1.0, pole mass 0.1, half-length 0.5, force 10,
// Euler step 0.02 s, thresholds |x| > 2.4 and |theta| > 12 deg, cap 200).
// ---------------------------------------------------------------------------

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kPoleHalfLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kPoleHalfLength;
inline constexpr double kForceMag = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kXThreshold = 2.4;
inline constexpr double kThetaThreshold = 12.0 * std::numbers::pi / 180.0;
inline constexpr int kEpisodeCap = 200;
inline constexpr double kResetRange = 0.05;
}  // namespace cartpole

using CartPoleState = std::array<double, 4>;  // x, v, theta, omega

/// One Euler step of the cart-pole dynamics under an arbitrary force.
/// Position and angle integrate with the pre-update derivatives.
inline CartPoleState cartpole_physics(const CartPoleState& st, double force) {
  const auto [x, v, theta, omega] = st;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp =
      (force + cartpole::kPoleMassLength * omega * omega * sin_t) /
      cartpole::kTotalMass;
  const double theta_acc =
      (cartpole::kGravity * sin_t - cos_t * temp) /
      (cartpole::kPoleHalfLength *
       (4.0 / 3.0 - cartpole::kPoleMass * cos_t * cos_t / cartpole::kTotalMass));
  const double x_acc =
      temp - cartpole::kPoleMassLength * theta_acc * cos_t / cartpole::kTotalMass;
  return {x + cartpole::kTau * v, v + cartpole::kTau * x_acc,
          theta + cartpole::kTau * omega, omega + cartpole::kTau * theta_acc};
}

inline bool cartpole_fallen(const CartPoleState& st) {
  return std::abs(st[0]) > cartpole::kXThreshold ||
         std::abs(st[2]) > cartpole::kThetaThreshold;
}

/// Reset state from four uniform draws in [0, 1): each component maps onto
/// [-0.05, 0.05].
inline CartPoleState cartpole_start_from(const std::array<double, 4>& u01) {
  CartPoleState st;
  for (int i = 0; i < 4; ++i)
    st[i] = -cartpole::kResetRange + 2.0 * cartpole::kResetRange * u01[i];
  return st;
}

class CartPole final : public Env {
 public:
  explicit CartPole(std::uint64_t seed) : rng_(seed) {}

  std::vector<double> reset() override {
    std::array<double, 4> u{};
    for (double& v : u) v = rng_.uniform();
    st_ = cartpole_start_from(u);
    steps_ = 0;
    alive_ = true;
    return {st_.begin(), st_.end()};
  }

  /// Reward 1 for every surviving step, 0 on the transition that drops the
  /// pole or leaves the track. The 200-step cap terminates without
  /// catastrophe so successful survival is never labeled as danger.
  StepResult step(int action) override {
    check_action(action);
    if (!alive_) throw std::logic_error("step after terminal; call reset");
    st_ = cartpole_physics(st_, cartpole::kForceMag * action);
    steps_ += 1;
    StepResult r;
    r.next_state.assign(st_.begin(), st_.end());
    if (cartpole_fallen(st_)) {
      r.reward = 0.0;
      r.terminal = true;
      r.catastrophe = true;
    } else {
      r.reward = 1.0;
      r.terminal = steps_ >= cartpole::kEpisodeCap;
      r.catastrophe = false;
    }
    if (r.terminal) alive_ = false;
    return r;
  }

  int state_dim() const override { return 4; }
  std::string_view id() const override { return "cartpole"; }

 private:
  Rng rng_;
  CartPoleState st_{};
  int steps_ = 0;
  bool alive_ = false;
};

inline std::unique_ptr<Env> make_env(std::string_view id, std::uint64_t seed) {
  if (id == "adventure-seeker") return std::make_unique<AdventureSeeker>(seed);
  if (id == "cartpole") return std::make_unique<CartPole>(seed);
  throw std::invalid_argument("unknown environment id: " + std::string(id));
}

}  // namespace ifear
