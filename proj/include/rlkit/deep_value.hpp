#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rlkit/approx.hpp"
#include "rlkit/env.hpp"
#include "rlkit/replay.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

// Feature-space transition used by the function-approximation learners.
struct FeatTransition {
  std::vector<double> s;
  int a = 0;
  double r = 0.0;  // for n-step entries this is the discounted n-step sum
  std::vector<double> s_next;
  bool done = false;
  int n = 1;  // bootstrap exponent: target discounts by gamma^n
};

enum class TargetVariant { Vanilla, Double, Clipped, Redq };

// Ensemble of per-action Q heads with EMA target shadows.  Setting
// target_period > 0 switches to periodic hard copies instead of the EMA.
struct QNetworkBundle {
  std::vector<Approximator> online;
  std::vector<TargetCopy> targets;
  double gamma = 0.99;
  int subset_m = 1;  // M <= N networks enter the REDQ minimum
  double grad_clip = 10.0;
  long target_period = 0;
  long updates_done = 0;

  QNetworkBundle(Approximator proto, int n_nets, double gamma, double rho, int subset_m = 1);
  int n_nets() const { return static_cast<int>(online.size()); }
  int n_actions() const { return online[0].arch().out_dim; }
};

// Bootstrapped target for one transition.  done masks every bootstrap term.
// redq_subset supplies the random M-subset (defaults to {0..M-1}).
double dqn_target(const FeatTransition& t, const QNetworkBundle& bundle, TargetVariant variant,
                  std::span<const int> redq_subset = {});

// Q(s,a) = V(s) + A(s,a) - mean_a' A(s,a')
std::vector<double> dueling_combine(double v, std::span<const double> advantages);

struct DqnUpdateStats {
  double loss = 0.0;
  double mean_q = 0.0;
  bool skipped = false;
};

// One half-MSE gradient step per online net toward the detached targets,
// then an EMA refresh of every target copy.  The half-MSE convention makes
// a one-hot linear net with batch size 1 reproduce the tabular Q-learning
// update at the same eta.
DqnUpdateStats dqn_update(QNetworkBundle& bundle, std::span<const FeatTransition> batch, double eta,
                          TargetVariant variant, Rng& rng);

struct DqnConfig {
  double gamma = 0.9;
  double epsilon = 0.1;
  double eta = 0.05;
  int batch_size = 32;
  std::size_t buffer_capacity = 10000;
  long max_steps = 20000;
  int episode_horizon = 200;
  double rho = 0.995;
  TargetVariant variant = TargetVariant::Vanilla;
  int n_nets = 1;
  int subset_m = 1;
  long target_period = 0;  // 0: EMA refresh; > 0: hard copy every N updates
  long warmup = 100;
  std::string csv_path;  // per-step CSV when nonempty
};

struct DqnRunResult {
  QNetworkBundle bundle;
  std::vector<double> episode_returns;
  long steps = 0;
};

using FeatureMap = std::function<std::vector<double>(int state)>;

FeatureMap one_hot_features(int n_states);

// eps-greedy DQN control on a discrete-state env via a feature map.
DqnRunResult dqn_control(Env& env, const FeatureMap& phi, int feature_dim, const DqnConfig& cfg,
                         std::uint64_t seed);

// Off/on-policy linear semi-gradient TD(0) on the 7-state counterexample,
// run as expected (dynamic-programming style) sweeps: state weighting is the
// stationary distribution of the behavior chain, action expectation is taken
// under the target policy (the importance-sampling-corrected expectation).
// Returns the sup-norm of w after each sweep.
struct BairdRunResult {
  std::vector<double> w;
  std::vector<double> w_norm_trace;
  double final_td_error = 0.0;  // sup-norm of expected TD errors
};
BairdRunResult baird_td0_run(const BairdProblem& problem, const PolicyTable& behavior,
                             const PolicyTable& target, double eta, int sweeps,
                             double gamma = 0.99);

}  // namespace rlkit
