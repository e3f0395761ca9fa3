#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ifear/rng.hpp"

namespace ifear {

struct Transition {
  std::vector<double> s;
  int a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  bool terminal = false;
  bool catastrophe = false;
};

/// Fixed-capacity ring of transitions, oldest evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity");
  }

  void push(Transition t) {
    if (data_.size() < cap_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % cap_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return cap_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  /// k draws uniform with replacement; an empty buffer yields an empty batch.
  std::vector<Transition> sample_uniform(std::size_t k, Rng& rng) const {
    std::vector<Transition> batch;
    if (data_.empty()) return batch;
    batch.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
      batch.push_back(data_[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(data_.size())))]);
    return batch;
  }

 private:
  std::vector<Transition> data_;
  std::size_t cap_;
  std::size_t next_ = 0;
};

using State = std::vector<double>;

struct LabeledStates {
  std::vector<State> danger;
  std::vector<State> safe;
};

/// Episode segmentation: on a catastrophic end the last fear_radius visited
/// states are danger and the rest safe; a short catastrophic episode is all
/// danger; an episode that ends any other way is all safe.
inline LabeledStates label_episode(const std::vector<State>& states,
                                   bool ended_in_catastrophe, int fear_radius) {
  if (fear_radius < 0) throw std::invalid_argument("fear radius");
  LabeledStates out;
  const std::size_t n = states.size();
  if (!ended_in_catastrophe) {
    out.safe = states;
    return out;
  }
  const std::size_t k = std::min<std::size_t>(n, fear_radius);
  out.safe.assign(states.begin(), states.begin() + (n - k));
  out.danger.assign(states.begin() + (n - k), states.end());
  return out;
}

/// Fixed-capacity FIFO of states.
class StateStore {
 public:
  explicit StateStore(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("state store capacity");
  }

  void push(State s) {
    if (data_.size() < cap_) {
      data_.push_back(std::move(s));
    } else {
      data_[next_] = std::move(s);
    }
    next_ = (next_ + 1) % cap_;
  }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  const State& at(std::size_t i) const { return data_.at(i); }

  const State& sample(Rng& rng) const {
    return data_[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(data_.size())))];
  }

 private:
  std::vector<State> data_;
  std::size_t cap_;
  std::size_t next_ = 0;
};

/// Paired danger/safe stores feeding the fear classifier. Danger states are
/// rare, so at these capacities the danger store effectively never forgets.
struct FearBuffers {
  StateStore danger;
  StateStore safe;

  explicit FearBuffers(std::size_t capacity = 10000)
      : danger(capacity), safe(capacity) {}

  void absorb(const LabeledStates& labels) {
    for (const State& s : labels.danger) danger.push(s);
    for (const State& s : labels.safe) safe.push(s);
  }
};

struct FearExample {
  State s;
  int label = 0;  // 1 danger, 0 safe
};

/// 50/50 batch: ceil(k/2) danger states labeled 1 and floor(k/2) safe states
/// labeled 0, uniform with replacement. With no danger states yet there is
/// nothing to train on (nullopt); with no safe states an all-danger batch is
/// permitted.
inline std::optional<std::vector<FearExample>> sample_fear_batch(
    const FearBuffers& buffers, std::size_t k, Rng& rng) {
  if (buffers.danger.empty()) return std::nullopt;
  std::vector<FearExample> batch;
  batch.reserve(k);
  const std::size_t n_danger =
      buffers.safe.empty() ? k : (k + 1) / 2;
  for (std::size_t i = 0; i < n_danger; ++i)
    batch.push_back({buffers.danger.sample(rng), 1});
  for (std::size_t i = n_danger; i < k; ++i)
    batch.push_back({buffers.safe.sample(rng), 0});
  return batch;
}

}  // namespace ifear
