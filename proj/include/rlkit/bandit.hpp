#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlkit/rng.hpp"

namespace rlkit {

// Conjugate Beta posterior per arm for Bernoulli rewards.
// alpha counts observed successes (r = 1), beta counts failures.
struct BetaBelief {
  std::vector<double> alpha;
  std::vector<double> beta;

  static BetaBelief uniform_prior(int n_arms) {
    return BetaBelief{std::vector<double>(n_arms, 1.0), std::vector<double>(n_arms, 1.0)};
  }
  int n_arms() const { return static_cast<int>(alpha.size()); }
  double posterior_mean(int arm) const { return alpha[arm] / (alpha[arm] + beta[arm]); }
};

void update_beta(BetaBelief& belief, int arm, int reward);  // reward in {0,1}

// Running count/mean/sum-of-squares per arm; the posterior over the mean is
// approximated by (empirical mean, standard error) with a count >= 2 guard.
struct GaussBelief {
  std::vector<long> count;
  std::vector<double> mean;
  std::vector<double> m2;  // sum of squared deviations

  static GaussBelief empty(int n_arms) {
    return GaussBelief{std::vector<long>(n_arms, 0), std::vector<double>(n_arms, 0.0),
                       std::vector<double>(n_arms, 0.0)};
  }
  int n_arms() const { return static_cast<int>(count.size()); }
  double std_err(int arm) const;  // empirical std / sqrt(count); needs count >= 2
};

void update_gauss(GaussBelief& belief, int arm, double reward);  // Welford

// p(a) proportional to exp(score(a)/tau), max-subtracted for overflow safety.
std::vector<double> boltzmann_policy(std::span<const double> scores, double tau);

// Argmax with probability 1 - eps, uniform over all actions otherwise.
int epsilon_greedy(std::span<const double> scores, double epsilon, Rng& rng);

// State for the action-repeat variant of epsilon-greedy: while the counter is
// positive the stored action is replayed regardless of scores.
struct RepeatState {
  int action = 0;
  int remaining = 0;
};
using DurationDist = std::function<int(Rng&)>;  // distribution over positive ints

int epsilon_z_greedy(std::span<const double> scores, double epsilon, const DurationDist& z,
                     RepeatState& state, Rng& rng);

DurationDist fixed_duration(int n);
// Heavy-tailed z(n) proportional to n^-mu, truncated at n_max.
DurationDist zeta_duration(double mu, int n_max);

// Count mode: argmax of mean + c / sqrt(N); posterior mode (stds given):
// argmax of mean + c * std.  Arms never pulled are selected first, round-robin.
int ucb_action(std::span<const long> counts, std::span<const double> means, double c,
               std::span<const double> stds = {});

int thompson_action(const BetaBelief& belief, Rng& rng);
int thompson_action(const GaussBelief& belief, Rng& rng);

// Simulation-only regret bookkeeping against known arm means.
struct RegretLedger {
  std::vector<double> arm_means;
  std::vector<int> chosen;
  std::vector<double> per_step;  // l_t = max_a mu(a) - mu(chosen)
  std::vector<double> cumulative;

  explicit RegretLedger(std::vector<double> means) : arm_means(std::move(means)) {}
  void record(int arm);
  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

// One seeded Bernoulli-bandit run; rows are (step, arm, reward,
// per_step_regret, cum_regret) for the CSV surface.
struct BanditRunRow {
  long step;
  int arm;
  double reward;
  double per_step_regret;
  double cum_regret;
};

enum class BanditAlgo { EpsilonGreedy, Boltzmann, Ucb, Thompson };
BanditAlgo bandit_algo_from_string(const std::string& name);

struct BanditConfig {
  BanditAlgo algo = BanditAlgo::Thompson;
  double epsilon = 0.1;
  double tau = 1.0;
  double ucb_c = 1.0;  // exploration scale; overridable from the CLI
};

std::vector<BanditRunRow> run_bernoulli_bandit(std::span<const double> arm_means, long horizon,
                                               const BanditConfig& cfg, Rng& rng);

void save_bandit_csv(const std::string& path, std::span<const BanditRunRow> rows);

}  // namespace rlkit
