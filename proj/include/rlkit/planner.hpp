#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlkit/env.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

// ---------------------------------------------------------------------------
// Discrete-action planning

struct ModelStep {
  int s_next = 0;
  double r = 0.0;
  bool done = false;
};
using DiscreteModel = std::function<ModelStep(int s, int a, Rng&)>;

struct DiscretePlanProblem {
  DiscreteModel model;
  int n_actions = 0;
  int horizon = 1;
  double gamma = 1.0;
  std::function<double(int)> terminal_value;  // V-hat; nullptr means 0

  double tail_value(int s) const { return terminal_value ? terminal_value(s) : 0.0; }
};

DiscretePlanProblem problem_from_mdp(const TabularMDP& mdp, int horizon, double gamma,
                                     std::function<double(int)> terminal_value = nullptr);

// Score of a fixed action sequence under one sampled model rollout.
double rollout_score(const DiscretePlanProblem& p, int s0, std::span<const int> actions, Rng& rng);

// Best-of-n uniformly sampled action sequences; returns the head action.
int random_shooting(const DiscretePlanProblem& p, int s0, int n_samples, Rng& rng);

// Exact argmax over all |A|^H sequences (deterministic models).
int exhaustive_plan(const DiscretePlanProblem& p, int s0);

// ---------------------------------------------------------------------------
// Monte Carlo tree search (deterministic model, tree-structured expansion)

struct MctsResult {
  std::vector<double> policy;  // normalized N(s0,.)^(1/tau)
  std::vector<long> visit_counts;
  std::vector<double> root_q;
};

using PriorFn = std::function<std::vector<double>(int s)>;

// n_sim simulations of select (argmax Q + c_uct P sqrt(sum N)/(1+N)) ->
// expand -> evaluate leaf with V-hat -> back up discounted returns.
// Zero-prior actions are never selected.
MctsResult mcts_search(const DiscretePlanProblem& p, int s0, const PriorFn& prior, int n_sim,
                       double c_uct, double tau, Rng& rng);

// ---------------------------------------------------------------------------
// SMC planning over a stochastic model with a policy proposal

struct SmcConfig {
  int n_particles = 64;
  int horizon = 8;
};

struct SmcStats {
  int degeneracy_resets = 0;  // rounds where all weights collapsed to 0
};

// Particles propose a ~ pi, advance through the model, reweight by
// exp(A(s,a,s')) with A = r - log pi(a|s) + V(s') - V(s_tilde) where s_tilde
// is a one-sample estimate of the current-state normalizer, then resample
// multinomially.  Returns the head action of a uniformly drawn survivor.
int smc_mpc(const DiscretePlanProblem& p, int s0, const PolicyFn& proposal,
            const std::function<double(int)>& value, const SmcConfig& cfg, Rng& rng,
            SmcStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Continuous-action planning (box action spaces)

struct BoxModelStep {
  std::vector<double> s_next;
  double r = 0.0;
  bool done = false;
};
using BoxModel =
    std::function<BoxModelStep(std::span<const double> s, std::span<const double> a, Rng&)>;

struct BoxPlanProblem {
  BoxModel model;
  int action_dim = 1;
  std::vector<double> a_lo, a_hi;
  int horizon = 1;
  double gamma = 1.0;
  std::function<double(std::span<const double>)> terminal_value;

  double tail_value(std::span<const double> s) const {
    return terminal_value ? terminal_value(s) : 0.0;
  }
};

double rollout_score(const BoxPlanProblem& p, std::span<const double> s0,
                     std::span<const double> actions, Rng& rng);

struct BoxPlan {
  std::vector<double> sequence;  // horizon * action_dim, row-major
  std::vector<double> first_action;
  double score = 0.0;
};

BoxPlan random_shooting(const BoxPlanProblem& p, std::span<const double> s0, int n_samples,
                        std::span<const double> proposal_mean, std::span<const double> proposal_std,
                        Rng& rng);

struct CemConfig {
  int iterations = 10;
  int population = 64;
  double elite_frac = 0.125;
  double std_floor = 1e-3;
};

struct CemResult {
  std::vector<double> mean;  // converged mean sequence
  std::vector<double> stddev;
  std::vector<double> first_action;
  double mean_score = 0.0;  // score of the mean sequence
  int iterations_used = 0;
};

// Iteratively sample Gaussian sequences, refit mean/std to the top-K elites.
CemResult cem_plan(const BoxPlanProblem& p, std::span<const double> s0, const CemConfig& cfg,
                   std::span<const double> init_mean, std::span<const double> init_std, Rng& rng);

struct MppiConfig {
  int population = 64;
  double temperature = 1.0;
  double noise_std = 0.5;
};

// Warm-started path-integral update: shift the previous solution forward one
// step (zero-filling the tail), perturb with Gaussian noise, and
// exponentially weight by return / temperature.
struct MppiState {
  std::vector<double> mean;  // horizon * action_dim; empty before first call
};

BoxPlan mppi_plan(const BoxPlanProblem& p, std::span<const double> s0, const MppiConfig& cfg,
                  MppiState& state, Rng& rng);

// ---------------------------------------------------------------------------
// Receding-horizon control loop

using DiscretePlanner = std::function<int(int s, Rng&)>;

// Executes head actions from the planner, observing and replanning each
// `replan_every` steps (intermediate actions replay the last plan).
Trajectory mpc_controller(Env& env, const DiscretePlanner& planner, int max_steps, Rng& rng,
                          int replan_every = 1);

// Per-replan decision record exported by the CLI plan surface.
struct PlanTraceEntry {
  int step = 0;
  int chosen_action = 0;
  std::vector<double> scores;  // candidate scores or root visit shares
};
void save_plan_trace_json(const std::string& path, std::span<const PlanTraceEntry> entries);

}  // namespace rlkit
