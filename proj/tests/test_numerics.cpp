#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "ifear/numerics.hpp"

using namespace ifear;
using Catch::Approx;

namespace {

// Reference forward chain, written out independently of the library path.
std::vector<double> ref_forward(const MlpParams& p,
                                const std::vector<double>& x) {
  std::vector<double> h(p.hidden, 0.0);
  for (int i = 0; i < p.hidden; ++i) {
    double z = p.b1[i];
    for (int j = 0; j < p.in; ++j) z += p.w1[i * p.in + j] * x[j];
    h[i] = z > 0.0 ? z : 0.0;
  }
  std::vector<double> y(p.out, 0.0);
  for (int o = 0; o < p.out; ++o) {
    double z = p.b2[o];
    for (int j = 0; j < p.hidden; ++j) z += p.w2[o * p.hidden + j] * h[j];
    y[o] = p.head == Head::Logistic ? 1.0 / (1.0 + std::exp(-z)) : z;
  }
  return y;
}

std::vector<double*> param_ptrs(MlpParams& p) {
  std::vector<double*> ptrs;
  for (double& v : p.w1) ptrs.push_back(&v);
  for (double& v : p.b1) ptrs.push_back(&v);
  for (double& v : p.w2) ptrs.push_back(&v);
  for (double& v : p.b2) ptrs.push_back(&v);
  return ptrs;
}

std::vector<double> grad_values(const Gradients& g) {
  std::vector<double> vals;
  for (double v : g.w1) vals.push_back(v);
  for (double v : g.b1) vals.push_back(v);
  for (double v : g.w2) vals.push_back(v);
  for (double v : g.b2) vals.push_back(v);
  return vals;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool near_relu_kink(const MlpParams& p, const std::vector<double>& x,
                    double margin) {
  for (int i = 0; i < p.hidden; ++i) {
    double z = p.b1[i];
    for (int j = 0; j < p.in; ++j) z += p.w1[i * p.in + j] * x[j];
    if (std::abs(z) < margin) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("forward with all-zero weights") {
  MlpParams id = zero_mlp(3, 4, 2, Head::Identity);
  const std::vector<double> x = {0.3, -1.0, 2.5};
  for (double v : forward(id, x)) REQUIRE(v == 0.0);

  MlpParams lg = zero_mlp(3, 4, 2, Head::Logistic);
  for (double v : forward(lg, x)) REQUIRE(v == 0.5);
}

TEST_CASE("forward matches the reference chain on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Head head = trial % 2 == 0 ? Head::Identity : Head::Logistic;
    MlpParams p = make_mlp(1 + rng.uniform_int(5), 1 + rng.uniform_int(8),
                           1 + rng.uniform_int(3), head, rng);
    std::vector<double> x(p.in);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const auto got = forward(p, x);
    const auto want = ref_forward(p, x);
    for (size_t i = 0; i < want.size(); ++i)
      REQUIRE(got[i] == Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("forward rejects a dimension mismatch") {
  MlpParams p = zero_mlp(3, 4, 2, Head::Identity);
  const std::vector<double> x = {1.0, 2.0};
  REQUIRE_THROWS_AS(forward(p, x), std::invalid_argument);
}

TEST_CASE("logistic outputs stay strictly inside (0, 1)") {
  Rng rng(11);
  MlpParams p = make_mlp(2, 6, 1, Head::Logistic, rng);
  for (double scale : {1.0, 10.0, 1000.0, 1e6}) {
    const std::vector<double> x = {scale, -scale};
    const double y = forward(p, x)[0];
    REQUIRE(y > 0.0);
    REQUIRE(y < 1.0);
  }
}

TEST_CASE("backward with zero upstream is a zero gradient") {
  Rng rng(3);
  MlpParams p = make_mlp(3, 5, 2, Head::Identity, rng);
  const std::vector<double> x = {0.1, 0.2, 0.3};
  const std::vector<double> u = {0.0, 0.0};
  for (double v : grad_values(backward(p, x, u))) REQUIRE(v == 0.0);
}

TEST_CASE("backward on an active linear path gives the hidden activation") {
  // 1-1-1 net with positive pre-activation, identity head, upstream 1:
  // d(out)/d(w2) is exactly the hidden activation.
  MlpParams p = zero_mlp(1, 1, 1, Head::Identity);
  p.w1[0] = 2.0;
  p.b1[0] = 0.5;
  p.w2[0] = -1.0;
  const std::vector<double> x = {1.5};
  const double hidden_act = 2.0 * 1.5 + 0.5;
  const std::vector<double> u = {1.0};
  const Gradients g = backward(p, x, u);
  REQUIRE(g.w2[0] == Approx(hidden_act).margin(1e-15));
  REQUIRE(g.b2[0] == 1.0);
  REQUIRE(g.w1[0] == Approx(-1.0 * 1.5).margin(1e-15));
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(1234);
  const double h = 1e-5;
  int done = 0;
  while (done < 100) {
    const Head head = done % 2 == 0 ? Head::Identity : Head::Logistic;
    MlpParams p = make_mlp(1 + rng.uniform_int(4), 1 + rng.uniform_int(6),
                           1 + rng.uniform_int(3), head, rng);
    std::vector<double> x(p.in);
    for (double& v : x) v = rng.uniform(-1.5, 1.5);
    if (near_relu_kink(p, x, 1e-3)) continue;  // FD is meaningless at the kink
    std::vector<double> u(p.out);
    for (double& v : u) v = rng.uniform(-1.0, 1.0);

    const std::vector<double> analytic = grad_values(backward(p, x, u));
    const std::vector<double*> ptrs = param_ptrs(p);
    double worst = 0.0;
    for (size_t k = 0; k < ptrs.size(); ++k) {
      const double saved = *ptrs[k];
      *ptrs[k] = saved + h;
      const double up = dot(u, forward(p, x));
      *ptrs[k] = saved - h;
      const double dn = dot(u, forward(p, x));
      *ptrs[k] = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double rel = std::abs(analytic[k] - fd) /
                         std::max({std::abs(analytic[k]), std::abs(fd), 1e-4});
      worst = std::max(worst, rel);
    }
    REQUIRE(worst < 1e-4);
    done += 1;
  }
}

TEST_CASE("adam leaves params alone on a zero gradient from rest") {
  Rng rng(5);
  MlpParams p = make_mlp(2, 3, 1, Head::Identity, rng);
  const MlpParams before = p;
  AdamState st = make_adam(p, 1e-3);
  adam_step(st, p, zero_gradients(p));
  REQUIRE(st.t == 1);
  REQUIRE(p.w1 == before.w1);
  REQUIRE(p.b1 == before.b1);
  REQUIRE(p.w2 == before.w2);
  REQUIRE(p.b2 == before.b2);
}

TEST_CASE("adam first step is a signed step of size alpha") {
  MlpParams p = zero_mlp(1, 1, 1, Head::Identity);
  p.w2[0] = 1.0;
  AdamState st = make_adam(p, 0.1);
  Gradients g = zero_gradients(p);
  g.w2[0] = 3.7;  // eps = 1e-8 is negligible next to |g|
  adam_step(st, p, g);
  REQUIRE(p.w2[0] == Approx(1.0 - 0.1).epsilon(1e-6));
  g.w2[0] = -0.02;
  MlpParams q = zero_mlp(1, 1, 1, Head::Identity);
  AdamState st2 = make_adam(q, 0.1);
  adam_step(st2, q, g);
  REQUIRE(q.w2[0] == Approx(0.1).epsilon(1e-4));
}

TEST_CASE("adam on w^2 matches a hand-stepped trace and descends") {
  // Minimize f(w) = w^2 from w = 1 at alpha = 0.1; gradient is 2w.
  MlpParams p = zero_mlp(1, 1, 1, Head::Identity);
  p.w2[0] = 1.0;
  AdamState st = make_adam(p, 0.1);

  double w = 1.0, m = 0.0, v = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 3; ++t) {
    Gradients g = zero_gradients(p);
    g.w2[0] = 2.0 * p.w2[0];
    adam_step(st, p, g);

    const double grad = 2.0 * w;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    const double w_next = w - 0.1 * mhat / (std::sqrt(vhat) + eps);
    REQUIRE(p.w2[0] == Approx(w_next).margin(1e-15));
    REQUIRE(p.w2[0] < w);
    REQUIRE(p.w2[0] > 0.0);
    w = w_next;
  }
  REQUIRE(st.t == 3);
}

TEST_CASE("adam is deterministic bitwise") {
  Rng rng_a(99), rng_b(99);
  MlpParams pa = make_mlp(3, 4, 2, Head::Identity, rng_a);
  MlpParams pb = make_mlp(3, 4, 2, Head::Identity, rng_b);
  AdamState sa = make_adam(pa, 1e-3), sb = make_adam(pb, 1e-3);
  Rng grng(17);
  for (int i = 0; i < 20; ++i) {
    Gradients g = zero_gradients(pa);
    for (double& v : g.w1) v = grng.uniform(-1, 1);
    for (double& v : g.b2) v = grng.uniform(-1, 1);
    adam_step(sa, pa, g);
    adam_step(sb, pb, g);
  }
  REQUIRE(pa.w1 == pb.w1);
  REQUIRE(pa.b1 == pb.b1);
  REQUIRE(pa.w2 == pb.w2);
  REQUIRE(pa.b2 == pb.b2);
  REQUIRE(sa.t == sb.t);
}

TEST_CASE("squared error values and derivative") {
  auto [l0, d0] = squared_error(3.0, 3.0);
  REQUIRE(l0 == 0.0);
  REQUIRE(d0 == 0.0);
  auto [l1, d1] = squared_error(5.0, 3.0);
  REQUIRE(l1 == 4.0);
  REQUIRE(d1 == 4.0);
  auto [l2, d2] = squared_error(0.0, -39.0);
  REQUIRE(l2 == 1521.0);
  REQUIRE(d2 == 78.0);
}

TEST_CASE("binary cross entropy values") {
  REQUIRE(bce(0.5, 1).loss == Approx(std::log(2.0)).epsilon(1e-12));
  REQUIRE(bce(0.5, 0).loss == Approx(std::log(2.0)).epsilon(1e-12));
  REQUIRE(bce(0.9, 1).loss == Approx(-std::log(0.9)).epsilon(1e-12));
  REQUIRE_THROWS_AS(bce(0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(bce(1.0, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(bce(-0.2, 0), std::invalid_argument);
}

TEST_CASE("losses are nonnegative and vanish only at a perfect fit") {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
    REQUIRE(squared_error(a, b).loss >= 0.0);
    if (a != b) REQUIRE(squared_error(a, b).loss > 0.0);
    const double p = rng.uniform(0.01, 0.99);
    REQUIRE(bce(p, i % 2).loss > 0.0);
  }
}

TEST_CASE("snapshot round trip preserves every byte and the head tag") {
  Rng rng(31);
  MlpParams p = make_mlp(4, 7, 2, Head::Logistic, rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ifear_numerics_rt.bin")
          .string();
  save_mlp(p, path);
  const MlpParams q = load_mlp(path);
  REQUIRE(q.head == Head::Logistic);
  REQUIRE(q.in == p.in);
  REQUIRE(q.hidden == p.hidden);
  REQUIRE(q.out == p.out);
  REQUIRE(q.w1 == p.w1);
  REQUIRE(q.b1 == p.b1);
  REQUIRE(q.w2 == p.w2);
  REQUIRE(q.b2 == p.b2);
  std::filesystem::remove(path);
}

TEST_CASE("snapshot loader rejects a foreign file") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ifear_numerics_bad.bin")
          .string();
  std::ofstream f(path, std::ios::binary);
  f << "NOTMLP-garbage";
  f.close();
  REQUIRE_THROWS_AS(load_mlp(path), std::runtime_error);
  std::filesystem::remove(path);
}
