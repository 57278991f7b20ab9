#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rlkit/env.hpp"
#include "rlkit/mdp.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

// eta_t(s,a) = base / N(s,a)^power; power 0 gives a constant rate.
// The default 1/N^0.8 satisfies the Robbins-Monro conditions.
struct EtaSchedule {
  double base = 1.0;
  double power = 0.8;
  static EtaSchedule constant(double eta) { return EtaSchedule{eta, 0.0}; }
  double operator()(long n_visits) const;
};

// Tabular state-action values with terminal rows pinned at 0.
struct QTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;
  std::vector<long> visits;
  std::vector<std::uint8_t> terminal;

  QTable(int n_states, int n_actions, std::span<const std::uint8_t> terminal_mask = {});
  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
  double& ref(int s, int a) { return q[static_cast<std::size_t>(s) * n_actions + a]; }
  std::span<const double> row(int s) const {
    return std::span<const double>(q.data() + static_cast<std::size_t>(s) * n_actions, n_actions);
  }
  long visit(int s, int a) const { return visits[static_cast<std::size_t>(s) * n_actions + a]; }
  long bump_visit(int s, int a) { return ++visits[static_cast<std::size_t>(s) * n_actions + a]; }
  double max_at(int s) const;
  int greedy_at(int s) const;  // lowest-index ties
};

struct VTableTD {
  std::vector<double> v;
  std::vector<long> visits;
  std::vector<std::uint8_t> terminal;
  explicit VTableTD(int n_states, std::span<const std::uint8_t> terminal_mask = {});
};

// Per-state accumulating trace; reset to 0 at the start of each episode.
struct EligibilityTrace {
  std::vector<double> z;
  explicit EligibilityTrace(int n_states) : z(n_states, 0.0) {}
  void reset() { z.assign(z.size(), 0.0); }
};

// First-visit Monte Carlo: V(s_t) += eta (G_t - V(s_t)) over a terminated
// episode.
void mc_update(VTableTD& v, const Trajectory& episode, const EtaSchedule& eta, double gamma);

// delta = r + gamma (1-done) V(s') - V(s); V(s) += eta delta
double td0_update(VTableTD& v, const Transition& t, const EtaSchedule& eta, double gamma);

// G_{t:t+n} = sum_{k<n} gamma^k r_k + gamma^n (1-done) bootstrap, truncated at
// episode end.  rewards/dones are the n available steps from time t.
double nstep_return(std::span<const double> rewards, std::span<const std::uint8_t> dones,
                    double bootstrap_value, int n, double gamma);

// Backward recursion G_t = r_t + gamma (1-done)[(1-lambda) V(s_{t+1}) +
// lambda G_{t+1}] over an episodic trajectory.
std::vector<double> lambda_return(const Trajectory& episode, std::span<const double> v,
                                  double lambda, double gamma);

// z <- gamma lambda z + e_s;  V += eta delta z
void td_lambda_step(VTableTD& v, EligibilityTrace& trace, const Transition& t,
                    const EtaSchedule& eta, double gamma, double lambda);

void sarsa_step(QTable& q, const Transition& t, int a_next, const EtaSchedule& eta, double gamma);

void q_learning_step(QTable& q, const Transition& t, const EtaSchedule& eta, double gamma);

// Coin flip picks which table learns; the other evaluates the argmax.
void double_q_step(QTable& q1, QTable& q2, const Transition& t, const EtaSchedule& eta,
                   double gamma, Rng& rng);

// Deterministic tabular model learned from visited (s,a) pairs.
struct DeterministicModel {
  struct Entry {
    int s_next = 0;
    double r = 0.0;
    bool done = false;
    bool seen = false;
  };
  int n_states = 0, n_actions = 0;
  std::vector<Entry> table;
  std::vector<std::pair<int, int>> visited;  // insertion-ordered unique (s,a)

  DeterministicModel(int n_states, int n_actions);
  void observe(const Transition& t);
  const Entry& at(int s, int a) const { return table[static_cast<std::size_t>(s) * n_actions + a]; }
};

struct ControlConfig {
  double gamma = 0.9;
  double epsilon = 0.1;
  bool glie = false;         // anneal epsilon_k = s/(s+k) over episodes k
  double glie_scale = 100.0; // harmonic tail keeps the visit sums divergent
  EtaSchedule eta;
  long max_steps = 100000;
  int episode_horizon = 200;
  int dyna_planning_steps = 0;  // imagined updates per real step (N)
  long eval_every = 0;          // 0 disables the periodic hook
  std::function<void(long step, const QTable& q)> eval_hook;
};

struct ControlResult {
  QTable q;
  long steps = 0;
  long episodes = 0;
  std::vector<double> episode_returns;
};

// eps-greedy Q-learning control loop; with cfg.dyna_planning_steps > 0 this
// is tabular Dyna-Q (one real update + N replayed model updates per step).
// Streams: master -> "act" for action draws, "env" for transitions,
// "search" for Dyna search control, so N=0 reproduces plain Q-learning
// trajectory for trajectory.
ControlResult q_learning_control(Env& env, const ControlConfig& cfg, std::uint64_t seed);

ControlResult sarsa_control(Env& env, const ControlConfig& cfg, std::uint64_t seed);

struct DoubleQResult {
  QTable q1, q2;
  // per-episode: 1 if the first action taken in the episode's start state
  // was `tracked_action`, else 0
  std::vector<std::uint8_t> start_action_taken;
};

// Runs either plain Q-learning (use_double=false) or double Q-learning on an
// episodic env, tracking the start-state action choice per episode.
DoubleQResult maxbias_control(Env& env, int episodes, bool use_double, int tracked_action,
                              const ControlConfig& cfg, std::uint64_t seed);

}  // namespace rlkit
