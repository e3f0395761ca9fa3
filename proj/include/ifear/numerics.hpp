#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ifear/rng.hpp"

namespace ifear {

enum class Head { Identity, Logistic };

/// Probabilities leaving the logistic head are clamped into
/// [kProbMargin, 1 - kProbMargin] so the cross-entropy never sees 0 or 1.
inline constexpr double kProbMargin = 1e-7;

/// Dense two-layer perceptron: out = head(w2 * relu(w1 * x + b1) + b2).
/// Weights are row-major; w1 is hidden x in, w2 is out x hidden.
struct MlpParams {
  int in = 0;
  int hidden = 0;
  int out = 0;
  Head head = Head::Identity;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;
};

/// Parameter-shaped container, produced by backward().
struct Gradients {
  std::vector<double> w1, b1, w2, b2;
};

inline MlpParams zero_mlp(int in, int hidden, int out, Head head) {
  if (in <= 0 || hidden <= 0 || out <= 0)
    throw std::invalid_argument("mlp dimensions must be positive");
  MlpParams p;
  p.in = in;
  p.hidden = hidden;
  p.out = out;
  p.head = head;
  p.w1.assign(static_cast<size_t>(hidden) * in, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(static_cast<size_t>(out) * hidden, 0.0);
  p.b2.assign(out, 0.0);
  return p;
}

/// Seeded init: every weight uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline MlpParams make_mlp(int in, int hidden, int out, Head head, Rng& rng) {
  MlpParams p = zero_mlp(in, hidden, out, head);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : p.w1) w = rng.uniform(-s1, s1);
  for (double& w : p.b1) w = rng.uniform(-s1, s1);
  for (double& w : p.w2) w = rng.uniform(-s2, s2);
  for (double& w : p.b2) w = rng.uniform(-s2, s2);
  return p;
}

inline Gradients zero_gradients(const MlpParams& p) {
  Gradients g;
  g.w1.assign(p.w1.size(), 0.0);
  g.b1.assign(p.b1.size(), 0.0);
  g.w2.assign(p.w2.size(), 0.0);
  g.b2.assign(p.b2.size(), 0.0);
  return g;
}

inline void accumulate(Gradients& acc, const Gradients& g) {
  for (size_t i = 0; i < acc.w1.size(); ++i) acc.w1[i] += g.w1[i];
  for (size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += g.b1[i];
  for (size_t i = 0; i < acc.w2.size(); ++i) acc.w2[i] += g.w2[i];
  for (size_t i = 0; i < acc.b2.size(); ++i) acc.b2[i] += g.b2[i];
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double clamp_prob(double p) {
  if (p < kProbMargin) return kProbMargin;
  if (p > 1.0 - kProbMargin) return 1.0 - kProbMargin;
  return p;
}

namespace detail {

inline void check_input(const MlpParams& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.in)
    throw std::invalid_argument("mlp input width mismatch");
}

// Hidden pre-activations z1 = w1 x + b1.
inline std::vector<double> hidden_pre(const MlpParams& p,
                                      std::span<const double> x) {
  std::vector<double> z1(p.hidden);
  for (int h = 0; h < p.hidden; ++h) {
    double acc = p.b1[h];
    const double* row = p.w1.data() + static_cast<size_t>(h) * p.in;
    for (int i = 0; i < p.in; ++i) acc += row[i] * x[i];
    z1[h] = acc;
  }
  return z1;
}

inline std::vector<double> output_pre(const MlpParams& p,
                                      const std::vector<double>& act) {
  std::vector<double> z2(p.out);
  for (int o = 0; o < p.out; ++o) {
    double acc = p.b2[o];
    const double* row = p.w2.data() + static_cast<size_t>(o) * p.hidden;
    for (int h = 0; h < p.hidden; ++h) acc += row[h] * act[h];
    z2[o] = acc;
  }
  return z2;
}

}  // namespace detail

/// Pre-head output (the affine+ReLU chain without the output nonlinearity).
inline std::vector<double> logits(const MlpParams& p,
                                  std::span<const double> x) {
  detail::check_input(p, x);
  std::vector<double> act = detail::hidden_pre(p, x);
  for (double& v : act) v = v > 0.0 ? v : 0.0;
  return detail::output_pre(p, act);
}

/// Full forward pass. A logistic head returns values strictly inside (0, 1).
inline std::vector<double> forward(const MlpParams& p,
                                   std::span<const double> x) {
  std::vector<double> z = logits(p, x);
  if (p.head == Head::Logistic)
    for (double& v : z) v = clamp_prob(sigmoid(v));
  return z;
}

/// Gradients of (upstream . logits(x)) with respect to every parameter.
/// This is the fused path used when a loss already differentiated through
/// the output nonlinearity supplies the pre-head cotangent.
inline Gradients backward_logits(const MlpParams& p, std::span<const double> x,
                                 std::span<const double> upstream) {
  detail::check_input(p, x);
  if (static_cast<int>(upstream.size()) != p.out)
    throw std::invalid_argument("mlp upstream width mismatch");

  std::vector<double> z1 = detail::hidden_pre(p, x);
  std::vector<double> act(p.hidden);
  for (int h = 0; h < p.hidden; ++h) act[h] = z1[h] > 0.0 ? z1[h] : 0.0;

  Gradients g = zero_gradients(p);
  for (int o = 0; o < p.out; ++o) {
    const double u = upstream[o];
    g.b2[o] = u;
    double* grow = g.w2.data() + static_cast<size_t>(o) * p.hidden;
    for (int h = 0; h < p.hidden; ++h) grow[h] = u * act[h];
  }
  for (int h = 0; h < p.hidden; ++h) {
    if (z1[h] <= 0.0) continue;  // ReLU gate closed
    double uh = 0.0;
    for (int o = 0; o < p.out; ++o)
      uh += upstream[o] * p.w2[static_cast<size_t>(o) * p.hidden + h];
    g.b1[h] = uh;
    double* grow = g.w1.data() + static_cast<size_t>(h) * p.in;
    for (int i = 0; i < p.in; ++i) grow[i] = uh * x[i];
  }
  return g;
}

/// Gradients of (upstream . forward(x)) with respect to every parameter,
/// chaining through the output head where present.
inline Gradients backward(const MlpParams& p, std::span<const double> x,
                          std::span<const double> upstream) {
  if (p.head == Head::Identity) return backward_logits(p, x, upstream);
  if (static_cast<int>(upstream.size()) != p.out)
    throw std::invalid_argument("mlp upstream width mismatch");
  std::vector<double> z = logits(p, x);
  std::vector<double> up(p.out);
  for (int o = 0; o < p.out; ++o) {
    const double s = sigmoid(z[o]);
    up[o] = upstream[o] * s * (1.0 - s);
  }
  return backward_logits(p, x, up);
}

/// Adam moment accumulators plus the usual hyperparameters.
struct AdamState {
  Gradients m, v;
  long t = 0;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const MlpParams& p, double alpha = 1e-3) {
  if (alpha <= 0.0) throw std::invalid_argument("adam alpha must be positive");
  AdamState st;
  st.m = zero_gradients(p);
  st.v = zero_gradients(p);
  st.alpha = alpha;
  return st;
}

namespace detail {

inline void adam_apply(std::vector<double>& w, std::vector<double>& m,
                       std::vector<double>& v, const std::vector<double>& g,
                       const AdamState& st, double c1, double c2) {
  if (w.size() != g.size())
    throw std::invalid_argument("adam gradient shape mismatch");
  for (size_t i = 0; i < w.size(); ++i) {
    m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
    v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    w[i] -= st.alpha * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace detail

/// One bias-corrected Adam step; increments the step counter by exactly 1.
inline void adam_step(AdamState& st, MlpParams& p, const Gradients& g) {
  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  detail::adam_apply(p.w1, st.m.w1, st.v.w1, g.w1, st, c1, c2);
  detail::adam_apply(p.b1, st.m.b1, st.v.b1, g.b1, st, c1, c2);
  detail::adam_apply(p.w2, st.m.w2, st.v.w2, g.w2, st, c1, c2);
  detail::adam_apply(p.b2, st.m.b2, st.v.b2, g.b2, st, c1, c2);
}

struct LossGrad {
  double loss;
  double dpred;
};

inline LossGrad squared_error(double pred, double target) {
  const double d = pred - target;
  return {d * d, 2.0 * d};
}

/// Binary cross-entropy on a probability. Training code fuses this with the
/// logistic head (the pre-head derivative is simply p - label); the
/// standalone form exists for scoring and tests.
inline LossGrad bce(double pred, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce label");
  if (!(pred > 0.0) || !(pred < 1.0))
    throw std::invalid_argument("bce prediction outside (0, 1)");
  const double p = clamp_prob(pred);
  const double loss =
      label == 1 ? -std::log(p) : -std::log(1.0 - p);
  const double dpred = (p - static_cast<double>(label)) / (p * (1.0 - p));
  return {loss, dpred};
}

// ---------------------------------------------------------------------------
// Snapshot format: "IFMLP1", then head/in/hidden/out as little-endian u32,
// then w1, b1, w2, b2 as little-endian f64 in row-major order.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

inline constexpr char kMlpMagic[6] = {'I', 'F', 'M', 'L', 'P', '1'};

inline void save_mlp(const MlpParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(kMlpMagic, sizeof kMlpMagic);
  const std::uint32_t hdr[4] = {
      p.head == Head::Logistic ? 1u : 0u, static_cast<std::uint32_t>(p.in),
      static_cast<std::uint32_t>(p.hidden), static_cast<std::uint32_t>(p.out)};
  f.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  auto dump = [&f](const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  dump(p.w1);
  dump(p.b1);
  dump(p.w2);
  dump(p.b2);
  if (!f) throw std::runtime_error("short write to " + path);
}

inline MlpParams load_mlp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[6];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kMlpMagic, sizeof magic) != 0)
    throw std::runtime_error(path + ": not an IFMLP1 snapshot");
  std::uint32_t hdr[4];
  f.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  if (!f || hdr[0] > 1) throw std::runtime_error(path + ": bad header");
  MlpParams p = zero_mlp(static_cast<int>(hdr[1]), static_cast<int>(hdr[2]),
                         static_cast<int>(hdr[3]),
                         hdr[0] == 1 ? Head::Logistic : Head::Identity);
  auto slurp = [&](std::vector<double>& v) {
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  slurp(p.w1);
  slurp(p.b1);
  slurp(p.w2);
  slurp(p.b2);
  if (!f) throw std::runtime_error(path + ": truncated snapshot");
  return p;
}

}  // namespace ifear
