#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rlkit/rng.hpp"

namespace rlkit {

// Bounded FIFO transition store with uniform or prioritized sampling.
// Uniform sampling is i.i.d. with replacement; prioritized sampling draws
// index i with probability proportional to (|delta_i| + eps_p)^eta_p.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, double eps_p = 1e-3, double eta_p = 0.6)
      : capacity_(capacity), eps_p_(eps_p), eta_p_(eta_p) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void push(T item, double priority = 1.0) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
      priorities_.push_back(priority);
    } else {
      items_[head_] = std::move(item);
      priorities_[head_] = priority;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }

  const T& at(std::size_t i) const { return items_[i]; }
  void set_priority(std::size_t i, double delta) { priorities_[i] = std::fabs(delta); }

  std::vector<std::size_t> sample_uniform(std::size_t batch, Rng& rng) const {
    if (empty()) throw std::runtime_error("ReplayBuffer: sample from empty buffer");
    std::vector<std::size_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i)
      idx[i] = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(items_.size())));
    return idx;
  }

  std::vector<std::size_t> sample_prioritized(std::size_t batch, Rng& rng) const {
    if (empty()) throw std::runtime_error("ReplayBuffer: sample from empty buffer");
    std::vector<double> w(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i)
      w[i] = std::pow(priorities_[i] + eps_p_, eta_p_);
    std::vector<std::size_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i)
      idx[i] = static_cast<std::size_t>(rng.categorical(w));
    return idx;
  }

 private:
  std::size_t capacity_;
  double eps_p_, eta_p_;
  std::vector<T> items_;
  std::vector<double> priorities_;
  std::size_t head_ = 0;  // next eviction slot once full
};

}  // namespace rlkit
