#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "rlkit/mdp.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

struct StepResult {
  int s_next = 0;
  double r = 0.0;
  bool done = false;       // true termination (absorbing state entered)
  bool truncated = false;  // horizon hit; bootstrapping still allowed
};

// Single-owner mutable environment handle.  Identical (seed, action sequence)
// yields an identical observation/reward sequence; all stochasticity comes
// from the Rng passed to step/reset.
class Env {
 public:
  virtual ~Env() = default;
  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;
  // Number of legal actions in a state; legal actions are always the prefix
  // [0, n_legal_actions(s)).
  virtual int n_legal_actions(int) const { return n_actions(); }
  virtual int reset(Rng& rng) = 0;
  virtual StepResult step(int a, Rng& rng) = 0;
  virtual int state() const = 0;
};

// Samples a TabularMDP; episodes end when a terminal state is entered or the
// configured horizon is exhausted (truncated=true, done=false).
class TabularEnv : public Env {
 public:
  TabularEnv(TabularMDP mdp, int horizon = 0);  // horizon 0 = unbounded

  int n_states() const override { return mdp_.n_states; }
  int n_actions() const override { return mdp_.n_actions; }
  int reset(Rng& rng) override;
  StepResult step(int a, Rng& rng) override;
  int state() const override { return state_; }

  const TabularMDP& mdp() const { return mdp_; }

 private:
  TabularMDP mdp_;
  int horizon_;
  int state_ = 0;
  int t_ = 0;
};

// Two-room episodic MDP exhibiting maximization bias: from the start state A,
// one action ends the episode with reward 0, the other moves to B with reward
// 0; every action out of B ends the episode with a Gaussian reward.
class MaxBiasEnv : public Env {
 public:
  static constexpr int kStateA = 0;
  static constexpr int kStateB = 1;
  static constexpr int kTerminal = 2;
  static constexpr int kLeft = 0;
  static constexpr int kRight = 1;

  MaxBiasEnv(int n_b_actions, double mean, double std);

  int n_states() const override { return 3; }
  int n_actions() const override { return n_b_actions_ > 2 ? n_b_actions_ : 2; }
  int n_legal_actions(int s) const override {
    return s == kStateA ? 2 : (s == kStateB ? n_b_actions_ : 1);
  }
  int reset(Rng& rng) override;
  StepResult step(int a, Rng& rng) override;
  int state() const override { return state_; }

 private:
  int n_b_actions_;
  double mean_, std_;
  int state_ = kStateA;
};

// 5-state chain from the worked value-function example: three interior
// states with an absorbing state above and the goal below; moving into the
// goal pays 1, everything else pays 0.
TabularMDP make_gridworld_1d();
constexpr int kGridTop = 0;      // absorbing
constexpr int kGridS1 = 1;
constexpr int kGridS2 = 2;
constexpr int kGridS3 = 3;
constexpr int kGridGoal = 4;     // absorbing, reward 1 on entry
constexpr int kGridUp = 0;
constexpr int kGridDown = 1;

// 7-state counterexample where off-policy linear TD diverges.
struct BairdProblem {
  TabularMDP mdp;                  // 7 states, actions {dashed=0, solid=1}, all rewards 0
  std::vector<double> features;    // 7 x 8 row-major; V(s) = features(s) . w
  PolicyTable behavior;            // dashed 6/7, solid 1/7
  PolicyTable target;              // always solid
  int n_features = 8;
};
BairdProblem make_baird();
constexpr int kBairdDashed = 0;
constexpr int kBairdSolid = 1;

std::unique_ptr<MaxBiasEnv> make_maxbias(int n_b_actions, double mean = -0.1, double std = 1.0);

// Row-stochastic random MDP with rewards in [0,1]; same seed gives a
// bit-identical MDP.  Optional terminal state count carves absorbing states
// out of the tail indices.  With next_state_rewards the reward tensor
// depends only on s' (the convention the successor representation prices).
struct RandomMdpOptions {
  int n_terminal = 0;
  bool next_state_rewards = false;
};
TabularMDP make_random_mdp(int n_states, int n_actions, std::uint64_t seed,
                           const RandomMdpOptions& opt = {});

// Deterministic chain with a goal at each end, used for multi-task
// (successor-feature) experiments: actions {left=0, right=1}, entering an
// end state terminates.  Rewards are supplied per next-state.
TabularMDP make_two_goal_chain(int n_interior, std::span<const double> next_state_reward);

// Potential-based shaping: R'(s,a,s') = R(s,a,s') + gamma*phi(s') - phi(s).
// Unless allow_terminal_potential is set, phi must be 0 on terminal states so
// the shaped MDP keeps the terminal-reward-0 invariant.
TabularMDP shape_rewards(const TabularMDP& mdp, std::span<const double> phi, double gamma,
                         bool allow_terminal_potential = false);

// Policy callback: action distribution over n_actions for a state.
using PolicyFn = std::function<std::vector<double>(int state)>;

// Roll out a policy for at most `horizon` steps, truncating at the first
// done transition.  record_probs stores the behavior probability of each
// taken action in the trajectory.
Trajectory rollout(Env& env, const PolicyFn& policy, int horizon, Rng& rng,
                   bool record_probs = false);
Trajectory rollout(Env& env, const PolicyTable& policy, int horizon, Rng& rng,
                   bool record_probs = false);

}  // namespace rlkit
