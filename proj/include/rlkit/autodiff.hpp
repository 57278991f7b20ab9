#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace rlkit::ad {

class Tape;

// Handle into a tape node.  Cheap to copy; valid until the tape is reset.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Reverse-mode tape with local partials stored at forward time.  Nodes are
// appended in topological order, so backward() is a single reverse sweep;
// no graph walk is needed.
class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  Var leaf(double value) { return push(value, -1, 0.0, -1, 0.0); }

  std::vector<Var> leaves(std::span<const double> values) {
    std::vector<Var> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = leaf(values[i]);
    return out;
  }

  double value(Var x) const { return nodes_[x.id].val; }
  double grad(Var x) const { return nodes_[x.id].grad; }

  // d(root)/d(node) for every node; grads of earlier backward calls are
  // cleared first.
  void backward(Var root) {
    for (Node& n : nodes_) n.grad = 0.0;
    nodes_[root.id].grad = 1.0;
    for (int i = root.id; i >= 0; --i) {
      const Node& n = nodes_[i];
      if (n.grad == 0.0) continue;
      if (n.p0 >= 0) nodes_[n.p0].grad += n.d0 * n.grad;
      if (n.p1 >= 0) nodes_[n.p1].grad += n.d1 * n.grad;
    }
  }

  std::vector<double> grads(std::span<const Var> vars) const {
    std::vector<double> out(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) out[i] = nodes_[vars[i].id].grad;
    return out;
  }

  void reset() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  Var push(double val, int p0, double d0, int p1, double d1) {
    nodes_.push_back(Node{val, 0.0, p0, p1, d0, d1});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    double val;
    double grad;
    int p0, p1;
    double d0, d1;
  };
  std::vector<Node> nodes_;
};

inline Var operator+(Var a, Var b) {
  return a.tape->push(a.tape->value(a) + b.tape->value(b), a.id, 1.0, b.id, 1.0);
}
inline Var operator+(Var a, double c) { return a.tape->push(a.tape->value(a) + c, a.id, 1.0, -1, 0.0); }
inline Var operator+(double c, Var a) { return a + c; }

inline Var operator-(Var a) { return a.tape->push(-a.tape->value(a), a.id, -1.0, -1, 0.0); }
inline Var operator-(Var a, Var b) {
  return a.tape->push(a.tape->value(a) - b.tape->value(b), a.id, 1.0, b.id, -1.0);
}
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return (-a) + c; }

inline Var operator*(Var a, Var b) {
  const double va = a.tape->value(a), vb = b.tape->value(b);
  return a.tape->push(va * vb, a.id, vb, b.id, va);
}
inline Var operator*(Var a, double c) { return a.tape->push(a.tape->value(a) * c, a.id, c, -1, 0.0); }
inline Var operator*(double c, Var a) { return a * c; }

inline Var operator/(Var a, Var b) {
  const double va = a.tape->value(a), vb = b.tape->value(b);
  return a.tape->push(va / vb, a.id, 1.0 / vb, b.id, -va / (vb * vb));
}
inline Var operator/(Var a, double c) { return a * (1.0 / c); }

inline Var exp(Var a) {
  const double e = std::exp(a.tape->value(a));
  return a.tape->push(e, a.id, e, -1, 0.0);
}
inline Var log(Var a) {
  const double v = a.tape->value(a);
  return a.tape->push(std::log(v), a.id, 1.0 / v, -1, 0.0);
}
inline Var tanh(Var a) {
  const double t = std::tanh(a.tape->value(a));
  return a.tape->push(t, a.id, 1.0 - t * t, -1, 0.0);
}
inline Var relu(Var a) {
  const double v = a.tape->value(a);
  return a.tape->push(v > 0.0 ? v : 0.0, a.id, v > 0.0 ? 1.0 : 0.0, -1, 0.0);
}
inline Var square(Var a) {
  const double v = a.tape->value(a);
  return a.tape->push(v * v, a.id, 2.0 * v, -1, 0.0);
}
inline Var pow(Var a, double c) {
  const double v = a.tape->value(a);
  return a.tape->push(std::pow(v, c), a.id, c * std::pow(v, c - 1.0), -1, 0.0);
}
// Hard clamp; subgradient 0 outside the interval.
inline Var clamp(Var a, double lo, double hi) {
  const double v = a.tape->value(a);
  const double c = v < lo ? lo : (v > hi ? hi : v);
  return a.tape->push(c, a.id, (v > lo && v < hi) ? 1.0 : 0.0, -1, 0.0);
}
inline Var vmin(Var a, Var b) {
  return a.tape->value(a) <= b.tape->value(b)
             ? a.tape->push(a.tape->value(a), a.id, 1.0, -1, 0.0)
             : a.tape->push(b.tape->value(b), b.id, 1.0, -1, 0.0);
}
inline Var vmax(Var a, Var b) {
  return a.tape->value(a) >= b.tape->value(b)
             ? a.tape->push(a.tape->value(a), a.id, 1.0, -1, 0.0)
             : a.tape->push(b.tape->value(b), b.id, 1.0, -1, 0.0);
}

// Value treated as a constant: gradient does not flow ("stop gradient").
inline Var stop_gradient(Var a) { return a.tape->push(a.tape->value(a), -1, 0.0, -1, 0.0); }
inline Var constant(Tape& t, double c) { return t.push(c, -1, 0.0, -1, 0.0); }

inline Var dot(std::span<const Var> w, std::span<const double> x) {
  if (w.empty()) throw std::invalid_argument("dot: empty");
  Var acc = w[0] * x[0];
  for (std::size_t i = 1; i < w.size(); ++i) acc = acc + w[i] * x[i];
  return acc;
}

inline Var sum(std::span<const Var> xs) {
  Var acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = acc + xs[i];
  return acc;
}

inline int argmax_val(Tape& t, std::span<const Var> xs) {
  int best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (t.value(xs[i]) > t.value(xs[best])) best = static_cast<int>(i);
  return best;
}

// log(sum exp(x_i)), max-subtracted.
inline Var logsumexp(std::span<const Var> xs) {
  Tape& t = *xs[0].tape;
  const Var m = xs[argmax_val(t, xs)];
  Var acc = exp(xs[0] - m);
  for (std::size_t i = 1; i < xs.size(); ++i) acc = acc + exp(xs[i] - m);
  return m + log(acc);
}

inline std::vector<Var> log_softmax(std::span<const Var> logits) {
  const Var lse = logsumexp(logits);
  std::vector<Var> out;
  out.reserve(logits.size());
  for (Var l : logits) out.push_back(l - lse);
  return out;
}

inline std::vector<Var> softmax(std::span<const Var> logits) {
  std::vector<Var> out = log_softmax(logits);
  for (Var& v : out) v = exp(v);
  return out;
}

}  // namespace rlkit::ad
