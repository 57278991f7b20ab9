#include "rlkit/env.hpp"

#include <cmath>
#include <stdexcept>

namespace rlkit {

TabularEnv::TabularEnv(TabularMDP mdp, int horizon) : mdp_(std::move(mdp)), horizon_(horizon) {
  mdp_.validate();
}

int TabularEnv::reset(Rng& rng) {
  state_ = rng.categorical(mdp_.init_dist);
  t_ = 0;
  return state_;
}

StepResult TabularEnv::step(int a, Rng& rng) {
  if (a < 0 || a >= mdp_.n_actions) throw std::out_of_range("TabularEnv: action out of range");
  const std::size_t base = (static_cast<std::size_t>(state_) * mdp_.n_actions + a) * mdp_.n_states;
  const int s2 = rng.categorical(std::span<const double>(mdp_.trans.data() + base, mdp_.n_states));
  StepResult out;
  out.s_next = s2;
  out.r = mdp_.reward[base + s2];
  out.done = mdp_.is_terminal(s2);
  state_ = s2;
  ++t_;
  if (!out.done && horizon_ > 0 && t_ >= horizon_) out.truncated = true;
  return out;
}

MaxBiasEnv::MaxBiasEnv(int n_b_actions, double mean, double std)
    : n_b_actions_(n_b_actions), mean_(mean), std_(std) {
  if (n_b_actions < 1) throw std::invalid_argument("MaxBiasEnv: need at least one B action");
  if (std < 0.0) throw std::invalid_argument("MaxBiasEnv: std must be nonnegative");
}

int MaxBiasEnv::reset(Rng&) {
  state_ = kStateA;
  return state_;
}

StepResult MaxBiasEnv::step(int a, Rng& rng) {
  StepResult out;
  if (state_ == kStateA) {
    if (a == kRight) {
      out = {kTerminal, 0.0, true, false};
    } else if (a == kLeft) {
      out = {kStateB, 0.0, false, false};
    } else {
      throw std::out_of_range("MaxBiasEnv: invalid action in A");
    }
  } else if (state_ == kStateB) {
    if (a < 0 || a >= n_b_actions_) throw std::out_of_range("MaxBiasEnv: invalid action in B");
    out = {kTerminal, std_ == 0.0 ? mean_ : rng.normal(mean_, std_), true, false};
  } else {
    out = {kTerminal, 0.0, true, false};
  }
  state_ = out.s_next;
  return out;
}

TabularMDP make_gridworld_1d() {
  TabularMDP m = TabularMDP::zeros(5, 2);
  m.terminal[kGridTop] = 1;
  m.terminal[kGridGoal] = 1;
  auto deterministic = [&m](int s, int a, int s2, double r) {
    m.trans_at(s, a, s2) = 1.0;
    m.reward_at(s, a, s2) = r;
  };
  deterministic(kGridS1, kGridUp, kGridTop, 0.0);
  deterministic(kGridS1, kGridDown, kGridS2, 0.0);
  deterministic(kGridS2, kGridUp, kGridS1, 0.0);
  deterministic(kGridS2, kGridDown, kGridS3, 0.0);
  deterministic(kGridS3, kGridUp, kGridS2, 0.0);
  deterministic(kGridS3, kGridDown, kGridGoal, 1.0);  // the only nonzero reward
  for (int a = 0; a < 2; ++a) {
    deterministic(kGridTop, a, kGridTop, 0.0);
    deterministic(kGridGoal, a, kGridGoal, 0.0);
  }
  m.init_dist[kGridS1] = 1.0;
  m.validate();
  return m;
}

BairdProblem make_baird() {
  BairdProblem p;
  const int n = 7;
  p.mdp = TabularMDP::zeros(n, 2);
  for (int s = 0; s < n; ++s) {
    for (int u = 0; u < 6; ++u) p.mdp.trans_at(s, kBairdDashed, u) = 1.0 / 6.0;  // 6 upper states
    p.mdp.trans_at(s, kBairdSolid, 6) = 1.0;                                     // bottom state
  }
  p.mdp.init_dist.assign(n, 1.0 / n);
  p.mdp.validate();

  // Canonical linear layout: upper state i has V = 2 w_i + w_7,
  // bottom state has V = w_6 + 2 w_7 (0-based weight indices).
  // V == 0 is representable by w = 0.
  p.features.assign(7 * 8, 0.0);
  for (int i = 0; i < 6; ++i) {
    p.features[i * 8 + i] = 2.0;
    p.features[i * 8 + 7] = 1.0;
  }
  p.features[6 * 8 + 6] = 1.0;
  p.features[6 * 8 + 7] = 2.0;

  p.behavior = PolicyTable::uniform(n, 2);
  for (int s = 0; s < n; ++s) {
    p.behavior.at(s, kBairdDashed) = 6.0 / 7.0;
    p.behavior.at(s, kBairdSolid) = 1.0 / 7.0;
  }
  std::vector<int> solid(n, kBairdSolid);
  p.target = PolicyTable::deterministic(n, 2, solid);
  return p;
}

std::unique_ptr<MaxBiasEnv> make_maxbias(int n_b_actions, double mean, double std) {
  return std::make_unique<MaxBiasEnv>(n_b_actions, mean, std);
}

TabularMDP make_random_mdp(int n_states, int n_actions, std::uint64_t seed,
                           const RandomMdpOptions& opt) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("make_random_mdp: empty spaces");
  if (opt.n_terminal >= n_states && n_states > 1)
    throw std::invalid_argument("make_random_mdp: too many terminal states");
  Rng rng = Rng::derive(seed, 0, "random_mdp");
  TabularMDP m = TabularMDP::zeros(n_states, n_actions);
  const int first_terminal = n_states - opt.n_terminal;

  std::vector<double> next_state_r(n_states, 0.0);
  if (opt.next_state_rewards)
    for (int s2 = 0; s2 < first_terminal; ++s2) next_state_r[s2] = rng.uniform();

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      if (s >= first_terminal) {
        m.trans_at(s, a, s) = 1.0;
        continue;
      }
      // Dirichlet-like normalized positive weights
      double total = 0.0;
      std::vector<double> w(n_states);
      for (int s2 = 0; s2 < n_states; ++s2) {
        w[s2] = rng.gamma(1.0);
        total += w[s2];
      }
      for (int s2 = 0; s2 < n_states; ++s2) {
        m.trans_at(s, a, s2) = w[s2] / total;
        if (opt.next_state_rewards) {
          m.reward_at(s, a, s2) = next_state_r[s2];
        } else {
          m.reward_at(s, a, s2) = (s2 >= first_terminal) ? 0.0 : rng.uniform();
        }
      }
      // keep the terminal-entry rewards legal (0 on self-loops is implied;
      // rewards on transitions INTO terminals are allowed, not on out-of)
    }
  }
  for (int s = n_states - opt.n_terminal; s < n_states; ++s) m.terminal[s] = 1;
  m.init_dist.assign(n_states, 0.0);
  m.init_dist[0] = 1.0;
  m.validate();
  return m;
}

TabularMDP make_two_goal_chain(int n_interior, std::span<const double> next_state_reward) {
  const int n = n_interior + 2;  // state 0 = left goal, n-1 = right goal
  if (static_cast<int>(next_state_reward.size()) != n)
    throw std::invalid_argument("make_two_goal_chain: reward vector size mismatch");
  TabularMDP m = TabularMDP::zeros(n, 2);
  m.terminal[0] = 1;
  m.terminal[n - 1] = 1;
  for (int s = 1; s < n - 1; ++s) {
    m.trans_at(s, 0, s - 1) = 1.0;  // left
    m.reward_at(s, 0, s - 1) = next_state_reward[s - 1];
    m.trans_at(s, 1, s + 1) = 1.0;  // right
    m.reward_at(s, 1, s + 1) = next_state_reward[s + 1];
  }
  for (int a = 0; a < 2; ++a) {
    m.trans_at(0, a, 0) = 1.0;
    m.trans_at(n - 1, a, n - 1) = 1.0;
  }
  m.init_dist.assign(n, 0.0);
  m.init_dist[n / 2] = 1.0;
  m.validate();
  return m;
}

TabularMDP shape_rewards(const TabularMDP& mdp, std::span<const double> phi, double gamma,
                         bool allow_terminal_potential) {
  if (static_cast<int>(phi.size()) != mdp.n_states)
    throw std::invalid_argument("shape_rewards: potential dimension mismatch");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (!std::isfinite(phi[s])) throw std::invalid_argument("shape_rewards: potential must be finite");
    if (mdp.is_terminal(s) && phi[s] != 0.0 && !allow_terminal_potential)
      throw std::invalid_argument("shape_rewards: nonzero potential on terminal state");
  }
  TabularMDP out = mdp;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s) && !allow_terminal_potential) continue;  // keep absorbing rewards at 0
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        if (mdp.trans_at(s, a, s2) > 0.0)
          out.reward_at(s, a, s2) = mdp.reward_at(s, a, s2) + gamma * phi[s2] - phi[s];
  }
  if (!allow_terminal_potential) out.validate();
  return out;
}

Trajectory rollout(Env& env, const PolicyFn& policy, int horizon, Rng& rng, bool record_probs) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  Trajectory traj;
  int s = env.state();
  for (int t = 0; t < horizon; ++t) {
    const std::vector<double> probs = policy(s);
    const int a = rng.categorical(probs);
    if (a < 0 || a >= env.n_actions()) throw std::out_of_range("rollout: policy action out of range");
    const StepResult res = env.step(a, rng);
    traj.steps.push_back({s, a, res.r, res.s_next, res.done});
    if (record_probs) traj.behavior_prob.push_back(probs[a]);
    s = res.s_next;
    if (res.done || res.truncated) break;
  }
  return traj;
}

Trajectory rollout(Env& env, const PolicyTable& policy, int horizon, Rng& rng, bool record_probs) {
  return rollout(
      env,
      [&policy](int s) {
        std::vector<double> p(policy.n_actions);
        for (int a = 0; a < policy.n_actions; ++a) p[a] = policy.at(s, a);
        return p;
      },
      horizon, rng, record_probs);
}

}  // namespace rlkit
