#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rlkit/autodiff.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

enum class Nonlin : std::uint32_t { ReLU = 0, Tanh = 1 };

// Output head semantics:
//   Scalar    - single value (out_dim must be 1)
//   PerAction - raw vector, one entry per action
//   Softmax   - probability distribution over out_dim actions
//   Gaussian  - out_dim means followed by out_dim log-stds, log-std clamped
//               to [-5, 2] to avoid entropy collapse
enum class Head : std::uint32_t { Scalar = 0, PerAction = 1, Softmax = 2, Gaussian = 3 };

struct ArchDesc {
  int input_dim = 0;
  std::vector<int> hidden;
  Nonlin nonlin = Nonlin::ReLU;
  Head head = Head::Scalar;
  int out_dim = 1;
  bool bias = true;
};

struct ParamSlice {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;  // 0 marks a bias vector
};

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

// A parameter vector plus a deterministic forward map.  Weights initialize
// uniformly in +-1/sqrt(fan_in) from per-layer derived streams.
class Approximator {
 public:
  Approximator(ArchDesc arch, std::uint64_t init_seed);

  static Approximator linear(int input_dim, int out_dim, Head head, bool bias,
                             std::uint64_t init_seed);
  static Approximator mlp(int input_dim, std::vector<int> hidden, int out_dim, Head head,
                          Nonlin nonlin, std::uint64_t init_seed);

  const ArchDesc& arch() const { return arch_; }
  int n_params() const { return static_cast<int>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }

  // Plain forward pass; Softmax heads return normalized probabilities,
  // Gaussian heads return [means..., clamped log stds...].
  std::vector<double> value(std::span<const double> x) const {
    return value_with(params_, x);
  }
  std::vector<double> value_with(std::span<const double> params, std::span<const double> x) const;

  // Taped forward pass through externally registered parameter leaves
  // (tape.leaves(params())), so one tape can hold several models.
  std::vector<ad::Var> forward(ad::Tape& tape, std::span<const ad::Var> params,
                               std::span<const double> x) const;

  void save(const std::string& path) const;
  static Approximator load(const std::string& path);

 private:
  void build_layout();
  ArchDesc arch_;
  std::vector<double> params_;
  std::vector<ParamSlice> slices_;
};

// Slowly moving shadow of a parameter vector; never receives gradients.
struct TargetCopy {
  std::vector<double> params;
  double rho = 0.995;

  TargetCopy() = default;
  TargetCopy(std::span<const double> online, double rho_) : params(online.begin(), online.end()), rho(rho_) {}
};

// w_bar <- rho w_bar + (1 - rho) w
void ema_update(TargetCopy& target, std::span<const double> online);

// w <- w - eta g.  Returns false (and leaves params untouched) when the
// gradient contains non-finite entries.
bool sgd_step(std::vector<double>& params, std::span<const double> grad, double eta);

// Optional per-coordinate RMS scaling for the adaptive-variant optimizer.
struct RmsScaler {
  std::vector<double> ms;
  double decay = 0.99;
  double eps = 1e-8;
  // replaces grad with grad / sqrt(ms + eps)
  void apply(std::vector<double>& grad);
};

// Scales grad in place so its L2 norm is at most max_norm; returns the norm.
double clip_grad_norm(std::vector<double>& grad, double max_norm);

}  // namespace rlkit
