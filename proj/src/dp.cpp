#include "rlkit/dp.hpp"

#include <cmath>
#include <stdexcept>

#include "rlkit/linalg.hpp"

namespace rlkit {

ValueTable bellman_backup(const ValueTable& v, const TabularMDP& mdp, double gamma) {
  if (static_cast<int>(v.v.size()) != mdp.n_states)
    throw std::invalid_argument("bellman_backup: dimension mismatch");
  ValueTable out;
  out.gamma = gamma;
  out.v.assign(mdp.n_states, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    double best = -1e300;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double q = 0.0;
      const std::size_t base = (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.trans[base + s2];
        if (p > 0.0) q += p * (mdp.reward[base + s2] + gamma * v.v[s2]);
      }
      if (q > best) best = q;
    }
    out.v[s] = best;
  }
  return out;
}

QTableExact q_from_v(const ValueTable& v, const TabularMDP& mdp, double gamma) {
  QTableExact q;
  q.n_states = mdp.n_states;
  q.n_actions = mdp.n_actions;
  q.gamma = gamma;
  q.q.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double val = 0.0;
      const std::size_t base = (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.trans[base + s2];
        if (p > 0.0) val += p * (mdp.reward[base + s2] + gamma * v.v[s2]);
      }
      q.at(s, a) = val;
    }
  }
  return q;
}

PolicyTable greedy_from_q(const QTableExact& q) {
  PolicyTable p;
  p.n_states = q.n_states;
  p.n_actions = q.n_actions;
  p.probs.assign(static_cast<std::size_t>(q.n_states) * q.n_actions, 0.0);
  for (int s = 0; s < q.n_states; ++s) {
    const std::span<const double> row(q.q.data() + static_cast<std::size_t>(s) * q.n_actions,
                                      q.n_actions);
    p.at(s, argmax(row)) = 1.0;
  }
  return p;
}

SolveResult value_iteration(const TabularMDP& mdp, double gamma, double tol, int max_sweeps) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("value_iteration: gamma out of range");
  ValueTable v;
  v.gamma = gamma;
  v.v.assign(mdp.n_states, 0.0);
  int sweeps = 0;
  for (; sweeps < max_sweeps; ++sweeps) {
    ValueTable next = bellman_backup(v, mdp, gamma);
    const double delta = sup_norm_diff(next.v, v.v);
    v = std::move(next);
    if (delta <= tol) break;
  }
  if (sweeps >= max_sweeps)
    throw std::runtime_error("value_iteration: no convergence (gamma = 1 without reachable terminal?)");
  SolveResult out;
  out.v = v;
  out.q = q_from_v(v, mdp, gamma);
  out.greedy = greedy_from_q(out.q);
  out.sweeps = sweeps + 1;
  return out;
}

ValueTable policy_evaluation_exact(const TabularMDP& mdp, const PolicyTable& policy, double gamma,
                                   int direct_solve_max) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("policy_evaluation_exact: gamma must be in [0,1)");
  const int n = mdp.n_states;
  // Policy-induced chain and rewards; terminal rows are zeroed so absorbing
  // states hold value 0.
  std::vector<double> tpi(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> rpi(n, 0.0);
  for (int s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy.at(s, a);
      if (pa == 0.0) continue;
      rpi[s] += pa * mdp.expected_reward(s, a);
      for (int s2 = 0; s2 < n; ++s2) tpi[static_cast<std::size_t>(s) * n + s2] += pa * mdp.trans_at(s, a, s2);
    }
  }
  // zero columns into terminal states contribute gamma * V(term) = 0 anyway

  std::vector<double> v;
  if (n <= direct_solve_max) {
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        a[static_cast<std::size_t>(i) * n + j] = (i == j ? 1.0 : 0.0) - gamma * tpi[static_cast<std::size_t>(i) * n + j];
    }
    v = solve_linear(std::move(a), rpi);
  } else {
    v.assign(n, 0.0);
    for (int it = 0; it < 2000000; ++it) {
      double delta = 0.0;
      std::vector<double> next(n, 0.0);
      for (int s = 0; s < n; ++s) {
        double x = rpi[s];
        for (int s2 = 0; s2 < n; ++s2) x += gamma * tpi[static_cast<std::size_t>(s) * n + s2] * v[s2];
        next[s] = x;
        delta = std::max(delta, std::fabs(x - v[s]));
      }
      v = std::move(next);
      if (delta <= 1e-13) break;
    }
  }
  for (int s = 0; s < n; ++s)
    if (mdp.is_terminal(s)) v[s] = 0.0;

  // residual check: v must satisfy v = r + gamma T v
  double resid = 0.0;
  for (int s = 0; s < n; ++s) {
    double x = rpi[s];
    for (int s2 = 0; s2 < n; ++s2) x += gamma * tpi[static_cast<std::size_t>(s) * n + s2] * v[s2];
    resid = std::max(resid, std::fabs(x - v[s]));
  }
  if (resid > 1e-10) throw std::runtime_error("policy_evaluation_exact: residual too large");

  return ValueTable{std::move(v), gamma};
}

PolicyIterResult policy_iteration(const TabularMDP& mdp, double gamma, int max_iters) {
  std::vector<int> zero(mdp.n_states, 0);
  PolicyTable policy = PolicyTable::deterministic(mdp.n_states, mdp.n_actions, zero);
  ValueTable v;
  int it = 0;
  for (; it < max_iters; ++it) {
    v = policy_evaluation_exact(mdp, policy, gamma);       // E step
    const QTableExact q = q_from_v(v, mdp, gamma);
    PolicyTable improved = greedy_from_q(q);               // I step
    if (improved.probs == policy.probs) break;             // greedy wrt own value: optimal
    policy = std::move(improved);
  }
  if (it >= max_iters) throw std::runtime_error("policy_iteration: improvement cycle guard tripped");
  return PolicyIterResult{std::move(v), std::move(policy), it + 1};
}

ValueTable rtdp(const TabularMDP& mdp, int start, int episodes, double gamma, double epsilon,
                Rng& rng, int max_episode_len) {
  ValueTable v;
  v.gamma = gamma;
  v.v.assign(mdp.n_states, 0.0);
  for (int ep = 0; ep < episodes; ++ep) {
    int s = start;
    for (int t = 0; t < max_episode_len && !mdp.is_terminal(s); ++t) {
      // full backup at the current state
      double best = -1e300;
      int best_a = 0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = 0.0;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          const double p = mdp.trans_at(s, a, s2);
          if (p > 0.0) q += p * (mdp.reward_at(s, a, s2) + gamma * v.v[s2]);
        }
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      v.v[s] = best;
      const int a = rng.bernoulli(epsilon) ? rng.uniform_int(mdp.n_actions) : best_a;
      const std::size_t base = (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states;
      s = rng.categorical(std::span<const double>(mdp.trans.data() + base, mdp.n_states));
    }
  }
  return v;
}

}  // namespace rlkit
