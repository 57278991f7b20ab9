#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rlkit/approx.hpp"
#include "rlkit/deep_value.hpp"
#include "rlkit/env.hpp"
#include "rlkit/replay.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

// One on-policy step over feature observations (discrete actions).
struct PgStep {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  bool done = false;
  double behavior_logp = 0.0;  // log prob of the taken action at collection time
};

// A rollout segment.  final_obs carries the bootstrap observation when the
// segment was truncated rather than terminated.
struct PgSegment {
  std::vector<PgStep> steps;
  std::vector<double> final_obs;
  bool truncated = false;
};

struct AdvantageBatch {
  std::vector<double> advantage;
  std::vector<double> td_target;  // q_t = A_t + v_t
};

// Backward GAE recursion: A' = delta_t + gamma lambda (1-done) A'.
// values has one entry per step plus the bootstrap value of the state after
// the last step (0 when that step terminated).
AdvantageBatch gae(std::span<const double> rewards, std::span<const double> values,
                   std::span<const std::uint8_t> dones, double gamma, double lambda);

struct ACConfig {
  double lambda_td = 0.5;
  double lambda_pg = 1.0;
  double lambda_ent = 0.01;
  double gamma = 0.99;
  double gae_lambda = 1.0;
  double clip_eps = 0.2;    // PPO likelihood-ratio clip
  int ppo_epochs = 4;
  int rollout_len = 128;
  bool normalize_adv = true;    // PPO default; zero-mean unit-std per rollout
  bool gamma_t_weighting = false;  // keep the gamma^t factor in PG updates
  double entropy_floor = 0.0;
};

// Policy plus state-value critic; either separate approximators or a single
// trunk with |A|+1 heads (logits then value).
class ActorCritic {
 public:
  static ActorCritic separate(Approximator policy, Approximator value);
  static ActorCritic shared(Approximator trunk, int n_actions);

  int n_actions() const { return n_actions_; }
  std::vector<double> policy_probs(std::span<const double> obs) const;
  double state_value(std::span<const double> obs) const;

  // taped heads; parameters registered on demand inside `begin`
  struct Taped {
    ad::Tape* tape = nullptr;
    std::vector<ad::Var> policy_params;
    std::vector<ad::Var> value_params;
  };
  Taped begin(ad::Tape& tape) const;
  std::vector<ad::Var> log_probs(const Taped& t, std::span<const double> obs) const;
  ad::Var value(const Taped& t, std::span<const double> obs) const;

  void apply_grads(const Taped& t, const ad::Tape& tape, double eta_policy, double eta_value);

  const Approximator& policy() const { return policy_; }
  const Approximator& critic() const { return value_; }
  Approximator& policy_mut() { return policy_; }
  Approximator& critic_mut() { return value_; }

 private:
  ActorCritic(Approximator p, Approximator v, bool shared, int n_actions)
      : policy_(std::move(p)), value_(std::move(v)), shared_(shared), n_actions_(n_actions) {}
  Approximator policy_;
  Approximator value_;  // unused in shared mode
  bool shared_ = false;
  int n_actions_ = 0;
};

// Sample a segment of at most `len` steps (ends early on termination).
PgSegment collect_segment(Env& env, const FeatureMap& phi, const ActorCritic& ac, int len,
                          int episode_horizon, Rng& rng_act, Rng& rng_env, bool greedy = false,
                          int* env_state = nullptr, int* steps_into_episode = nullptr);

// theta += eta sum_t [gamma^t] (G_t - b(s_t)) grad log pi(a_t|s_t)
// Returns the gradient applied (before the learning rate), for estimator
// diagnostics.
std::vector<double> reinforce_update(Approximator& policy, const PgSegment& episode,
                                     const Approximator* baseline, double eta, double gamma,
                                     bool gamma_t_weighting);

struct AcUpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_return = 0.0;
};

// Single-batch A2C loss/step: lambda_td (V - sg(q))^2 - lambda_pg sg(A) log pi
// - lambda_ent H(pi).
AcUpdateStats a2c_update(ActorCritic& ac, const PgSegment& seg, const ACConfig& cfg, double eta);

// Clipped-surrogate update with advantages frozen across the M epochs.
AcUpdateStats ppo_update(ActorCritic& ac, const PgSegment& seg, const ACConfig& cfg, double eta);

// Truncated importance-weighted value targets.
// behavior probs come from the segment; target probs from `target_logp`.
std::vector<double> vtrace_targets(const PgSegment& seg, std::span<const double> values,
                                   std::span<const double> target_logp, double gamma, double cbar,
                                   double rhobar);

// E[rho_t grad log pi(a_t|s_t) (r_t + gamma v_{t+1} - V(s_t))], rho truncated
// at rhobar, v the V-trace targets.
std::vector<double> offpolicy_pg_grad(const PgSegment& seg, const Approximator& policy,
                                      std::span<const double> values,
                                      std::span<const double> vtrace, double gamma, double rhobar);

// ---------------------------------------------------------------------------
// Soft actor-critic (discrete): exact action expectations, twin critics,
// optional learned temperature against a target entropy.

struct SacDiscreteConfig {
  double gamma = 0.95;
  double alpha = 0.2;
  bool learn_alpha = false;
  double target_entropy = 0.0;  // 0.5 log|A| when learned
  double eta_critic = 0.1;
  double eta_actor = 0.05;
  double eta_alpha = 1e-2;
  double rho = 0.99;
  int n_nets = 2;
  int subset_m = 2;
  int batch_size = 32;
  std::size_t buffer_capacity = 20000;
  long max_steps = 30000;
  int episode_horizon = 64;
  long warmup = 256;
};

struct SacDiscreteResult {
  Approximator policy;
  std::vector<Approximator> critics;
  double alpha = 0.0;
  double mean_policy_entropy = 0.0;  // over visited states at the end
};

// Soft value of a state under the current policy/critics:
// V(s) = sum_a pi(a|s) [min_i Q_i(s,a) - alpha log pi(a|s)].
double sac_soft_value(std::span<const double> probs, std::span<const std::vector<double>> qs,
                      double alpha);

SacDiscreteResult sac_discrete_train(Env& env, const FeatureMap& phi, int feature_dim,
                                     const SacDiscreteConfig& cfg, std::uint64_t seed);

// Continuous-action SAC: reparameterized Gaussian policy, twin critics.
struct SacContinuousConfig {
  double gamma = 0.95;
  double alpha = 0.2;
  double eta_critic = 3e-3;
  double eta_actor = 1e-3;
  double rho = 0.99;
  int batch_size = 64;
  bool rms_scaling = true;
};

struct SacContinuousState {
  Approximator policy;             // Gaussian head over the state
  std::vector<Approximator> critics;  // two (s,a) scalar heads
  std::vector<TargetCopy> critic_targets;
  RmsScaler actor_opt;
  std::vector<RmsScaler> critic_opts;

  SacContinuousState(int state_dim, int action_dim, std::uint64_t seed, double rho);
};

// One reparameterized update on a batch: critic targets
// y = r + gamma (min_i Q_target_i(s', a~') - alpha log pi(a~'|s')) with
// a~' = mu(s') + sigma(s') eps, actor minimizes
// E[alpha log pi(a~|s) - min_i Q_i(s, a~)] through the sample path.
struct BoxTransition;
void sac_continuous_update(SacContinuousState& st, std::span<const BoxTransition> batch,
                           const SacContinuousConfig& cfg, Rng& rng);

// Gaussian policy helpers shared by the tests: mean/std of the policy at a
// state, and the log density of an action.
struct GaussianAction {
  std::vector<double> mean;
  std::vector<double> std;
};
GaussianAction gaussian_policy_params(const Approximator& policy, std::span<const double> s);
double gaussian_log_prob(const GaussianAction& g, std::span<const double> a);

// ---------------------------------------------------------------------------
// Continuous control: 1-D box environments, TD3 and its DDPG degenerate.

struct BoxStep {
  std::vector<double> s_next;
  double r = 0.0;
  bool done = false;
  bool truncated = false;
};

class BoxEnv {
 public:
  virtual ~BoxEnv() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual double action_low() const = 0;
  virtual double action_high() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual BoxStep step(std::span<const double> a, Rng& rng) = 0;
};

// s' = s + a, r = -(s^2 + 0.1 a^2); episodes start at s ~ U(-1, 1) and run a
// fixed horizon.  States clamp to [-4, 4], actions to [-2, 2].
class Lqr1dEnv : public BoxEnv {
 public:
  explicit Lqr1dEnv(int horizon = 20) : horizon_(horizon) {}
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  double action_low() const override { return -2.0; }
  double action_high() const override { return 2.0; }
  std::vector<double> reset(Rng& rng) override;
  BoxStep step(std::span<const double> a, Rng& rng) override;

 private:
  int horizon_;
  double s_ = 0.0;
  int t_ = 0;
};

struct BoxTransition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

struct Td3Config {
  double gamma = 0.9;
  double eta_critic = 1e-2;
  double eta_actor = 3e-3;
  double rho = 0.98;
  double explore_noise = 0.3;
  double target_noise = 0.2;   // smoothing noise std
  double noise_clip = 0.5;     // clip(noise, -c, c)
  int policy_delay = 2;
  int batch_size = 128;
  std::size_t buffer_capacity = 40000;
  long max_steps = 30000;
  long warmup = 1000;      // uniform-random action steps before learning
  long actor_start = 500;  // critic updates before the first actor step
  double target_clip_lo = -1e6;  // TD target clamp, a bootstrap-runaway guard
  double target_clip_hi = 1e6;
  bool ddpg_mode = false;   // single critic, no smoothing noise, no delay
  bool rms_scaling = true;  // per-coordinate RMS-scaled steps
};

struct Td3Bundle {
  Approximator actor;
  TargetCopy actor_target;
  std::vector<Approximator> critics;
  std::vector<TargetCopy> critic_targets;
  RmsScaler actor_opt;
  std::vector<RmsScaler> critic_opts;
};

// One TD3 update on a batch: smoothed target action, clipped-double target,
// critic regression, delayed deterministic-gradient actor step, EMA refresh.
void td3_update(Td3Bundle& b, std::span<const BoxTransition> batch, const Td3Config& cfg,
                long update_index, double action_low, double action_high, Rng& rng);

struct Td3Result {
  Td3Bundle bundle;
  double final_avg_cost = 0.0;  // mean undiscounted episode cost under the actor
};

Td3Result td3_train(BoxEnv& env, const Td3Config& cfg, std::uint64_t seed);

// Mean undiscounted episode cost (negated return) of a deterministic policy.
double box_policy_cost(BoxEnv& env, const std::function<std::vector<double>(std::span<const double>)>& pi,
                       int episodes, std::uint64_t seed);

// Best proportional controller a = -K s on the 1-D task, by grid search.
struct LqrOracle {
  double best_k = 0.0;
  double best_cost = 0.0;
};
LqrOracle lqr_grid_search(int horizon = 20, double k_lo = 0.0, double k_hi = 2.0, int points = 201);

// ---------------------------------------------------------------------------
// Training drivers used by the harness and the acceptance suite.

struct PgTrainConfig {
  ACConfig ac;
  double eta = 0.05;
  long max_steps = 50000;
  int episode_horizon = 100;
  long eval_every = 1000;
  int eval_episodes = 8;
  std::string csv_path;  // per-update CSV when nonempty
};

struct PgTrainResult {
  std::vector<std::pair<long, double>> eval_returns;  // (env steps, greedy mean return)
  double final_greedy_return = 0.0;
};

PgTrainResult a2c_train(Env& env, const FeatureMap& phi, int feature_dim, const PgTrainConfig& cfg,
                        std::uint64_t seed);
PgTrainResult ppo_train(Env& env, const FeatureMap& phi, int feature_dim, const PgTrainConfig& cfg,
                        std::uint64_t seed);

}  // namespace rlkit
