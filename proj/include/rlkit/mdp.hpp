#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rlkit {

// Finite MDP stored as dense row-major tensors:
//   trans[s][a][s']  transition probabilities, every (s,a) row sums to 1
//   reward[s][a][s'] expected reward on the transition
// Terminal states self-transition with probability 1 and reward 0.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> trans;      // n_states * n_actions * n_states
  std::vector<double> reward;     // same layout
  std::vector<std::uint8_t> terminal;
  std::vector<double> init_dist;  // over states, sums to 1

  double trans_at(int s, int a, int s2) const {
    return trans[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& trans_at(int s, int a, int s2) {
    return trans[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double reward_at(int s, int a, int s2) const {
    return reward[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& reward_at(int s, int a, int s2) {
    return reward[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }

  // R(s,a) = sum_s' T(s'|s,a) R(s,a,s')
  double expected_reward(int s, int a) const;

  bool is_terminal(int s) const { return terminal[s] != 0; }

  static TabularMDP zeros(int n_states, int n_actions);

  // Throws std::runtime_error when a structural invariant is violated
  // (row sums, negative probabilities, terminal self-loops, init dist).
  void validate(double tol = 1e-12) const;

  std::string to_json_string() const;
  static TabularMDP from_json_string(const std::string& text);
  void save_json(const std::string& path) const;
  static TabularMDP load_json(const std::string& path);
};

// One environment step.  done marks true termination; bootstrapped values of
// s_next are treated as 0 when done is set.  Horizon truncation does not set
// done (truncation is not termination).
struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  // Optional per-step behavior-policy probabilities of the taken action,
  // recorded for off-policy corrections.  Empty when unused.
  std::vector<double> behavior_prob;

  std::size_t size() const { return steps.size(); }
  bool terminated() const { return !steps.empty() && steps.back().done; }

  double discounted_return(double gamma) const;

  // s_next of step t equals s of step t+1; nothing follows a done step.
  void validate() const;

  void save_csv(const std::string& path) const;  // step,s,a,r,s_next,done
};

// Per-state action distribution; deterministic policies are point masses.
struct PolicyTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;  // n_states * n_actions, rows sum to 1

  double at(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
  double& at(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }

  static PolicyTable uniform(int n_states, int n_actions);
  static PolicyTable deterministic(int n_states, int n_actions, std::span<const int> actions);
  void validate(double tol = 1e-12) const;
};

}  // namespace rlkit
