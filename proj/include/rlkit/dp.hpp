#pragma once

#include <span>
#include <vector>

#include "rlkit/mdp.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

// State values paired with the discount they were computed under.
// Terminal states always hold V = 0 (and Q(.,a) = 0).
struct ValueTable {
  std::vector<double> v;
  double gamma = 0.0;
};

struct QTableExact {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;  // n_states * n_actions
  double gamma = 0.0;
  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
  double& at(int s, int a) { return q[static_cast<std::size_t>(s) * n_actions + a]; }
};

struct SolveResult {
  ValueTable v;
  QTableExact q;
  PolicyTable greedy;  // lowest-index tie-breaking
  int sweeps = 0;
};

// One optimality backup: V'(s) = max_a [R(s,a) + gamma * sum_s' T V(s')],
// with terminal rows forced to 0.
ValueTable bellman_backup(const ValueTable& v, const TabularMDP& mdp, double gamma);

// Q(s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) V(s'); terminal rows 0.
QTableExact q_from_v(const ValueTable& v, const TabularMDP& mdp, double gamma);

PolicyTable greedy_from_q(const QTableExact& q);

// Sweeps bellman_backup until the sup-norm change is <= tol.  gamma = 1 is
// permitted only for proper episodic problems; non-convergence within
// max_sweeps throws.
SolveResult value_iteration(const TabularMDP& mdp, double gamma, double tol = 1e-10,
                            int max_sweeps = 1000000);

// v = (I - gamma T^pi)^{-1} r^pi by direct solve for |S| <= direct_solve_max,
// Richardson iteration beyond.  Residual is checked to 1e-10.
ValueTable policy_evaluation_exact(const TabularMDP& mdp, const PolicyTable& policy, double gamma,
                                   int direct_solve_max = 512);

struct PolicyIterResult {
  ValueTable v;
  PolicyTable policy;
  int iterations = 0;
};
PolicyIterResult policy_iteration(const TabularMDP& mdp, double gamma, int max_iters = 10000);

// Trajectory-driven asynchronous value iteration: full Bellman backups along
// states visited from `start` under the greedy-with-epsilon-exploration
// policy.  States never visited keep their initial value.
ValueTable rtdp(const TabularMDP& mdp, int start, int episodes, double gamma, double epsilon,
                Rng& rng, int max_episode_len = 200);

}  // namespace rlkit
