#include "rlkit/bandit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "rlkit/linalg.hpp"

namespace rlkit {

void update_beta(BetaBelief& belief, int arm, int reward) {
  if (arm < 0 || arm >= belief.n_arms()) throw std::out_of_range("update_beta: unknown arm");
  if (reward != 0 && reward != 1) throw std::invalid_argument("update_beta: reward must be 0 or 1");
  if (reward == 1)
    belief.alpha[arm] += 1.0;
  else
    belief.beta[arm] += 1.0;
}

double GaussBelief::std_err(int arm) const {
  if (count[arm] < 2) throw std::logic_error("GaussBelief: std undefined for count < 2");
  const double var = m2[arm] / static_cast<double>(count[arm] - 1);
  return std::sqrt(var / static_cast<double>(count[arm]));
}

void update_gauss(GaussBelief& belief, int arm, double reward) {
  if (arm < 0 || arm >= belief.n_arms()) throw std::out_of_range("update_gauss: unknown arm");
  long& n = belief.count[arm];
  ++n;
  const double delta = reward - belief.mean[arm];
  belief.mean[arm] += delta / static_cast<double>(n);
  belief.m2[arm] += delta * (reward - belief.mean[arm]);
}

std::vector<double> boltzmann_policy(std::span<const double> scores, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("boltzmann_policy: tau must be positive");
  double top = scores[argmax(scores)];
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    p[a] = std::exp((scores[a] - top) / tau);
    total += p[a];
  }
  for (double& x : p) x /= total;
  return p;
}

int epsilon_greedy(std::span<const double> scores, double epsilon, Rng& rng) {
  if (scores.empty()) throw std::invalid_argument("epsilon_greedy: empty scores");
  if (rng.bernoulli(epsilon)) return rng.uniform_int(static_cast<int>(scores.size()));
  return argmax(scores);
}

int epsilon_z_greedy(std::span<const double> scores, double epsilon, const DurationDist& z,
                     RepeatState& state, Rng& rng) {
  if (state.remaining > 0) {
    --state.remaining;
    return state.action;
  }
  if (rng.bernoulli(epsilon)) {
    state.action = rng.uniform_int(static_cast<int>(scores.size()));
    const int n = z(rng);
    if (n < 1) throw std::invalid_argument("epsilon_z_greedy: duration must be positive");
    state.remaining = n - 1;  // this call plays the first of the n repeats
    return state.action;
  }
  return argmax(scores);
}

DurationDist fixed_duration(int n) {
  return [n](Rng&) { return n; };
}

DurationDist zeta_duration(double mu, int n_max) {
  std::vector<double> w(n_max);
  for (int n = 1; n <= n_max; ++n) w[n - 1] = std::pow(static_cast<double>(n), -mu);
  return [w = std::move(w)](Rng& rng) { return rng.categorical(w) + 1; };
}

int ucb_action(std::span<const long> counts, std::span<const double> means, double c,
               std::span<const double> stds) {
  // round-robin initialization: the bonus is undefined at N = 0
  for (std::size_t a = 0; a < counts.size(); ++a)
    if (counts[a] == 0) return static_cast<int>(a);
  std::vector<double> optimistic(counts.size());
  for (std::size_t a = 0; a < counts.size(); ++a) {
    const double bonus =
        stds.empty() ? c / std::sqrt(static_cast<double>(counts[a])) : c * stds[a];
    optimistic[a] = means[a] + bonus;
  }
  return argmax(optimistic);
}

int thompson_action(const BetaBelief& belief, Rng& rng) {
  std::vector<double> draw(belief.n_arms());
  for (int a = 0; a < belief.n_arms(); ++a) draw[a] = rng.beta(belief.alpha[a], belief.beta[a]);
  return argmax(draw);
}

int thompson_action(const GaussBelief& belief, Rng& rng) {
  // arms without 2 observations are sampled first, round-robin
  for (int a = 0; a < belief.n_arms(); ++a)
    if (belief.count[a] < 2) return a;
  std::vector<double> draw(belief.n_arms());
  for (int a = 0; a < belief.n_arms(); ++a) draw[a] = rng.normal(belief.mean[a], belief.std_err(a));
  return argmax(draw);
}

void RegretLedger::record(int arm) {
  const double best = arm_means[argmax(arm_means)];
  const double step_regret = best - arm_means[arm];
  chosen.push_back(arm);
  per_step.push_back(step_regret);
  cumulative.push_back(total() + step_regret);
}

BanditAlgo bandit_algo_from_string(const std::string& name) {
  if (name == "eps_greedy") return BanditAlgo::EpsilonGreedy;
  if (name == "boltzmann") return BanditAlgo::Boltzmann;
  if (name == "ucb") return BanditAlgo::Ucb;
  if (name == "thompson") return BanditAlgo::Thompson;
  throw std::invalid_argument("unknown bandit algo: " + name);
}

std::vector<BanditRunRow> run_bernoulli_bandit(std::span<const double> arm_means, long horizon,
                                               const BanditConfig& cfg, Rng& rng) {
  const int k = static_cast<int>(arm_means.size());
  BetaBelief beta = BetaBelief::uniform_prior(k);
  std::vector<long> counts(k, 0);
  std::vector<double> means(k, 0.0);
  RegretLedger ledger(std::vector<double>(arm_means.begin(), arm_means.end()));
  std::vector<BanditRunRow> rows;
  rows.reserve(horizon);

  for (long t = 0; t < horizon; ++t) {
    int arm = 0;
    switch (cfg.algo) {
      case BanditAlgo::EpsilonGreedy:
        arm = epsilon_greedy(means, cfg.epsilon, rng);
        break;
      case BanditAlgo::Boltzmann:
        arm = rng.categorical(boltzmann_policy(means, cfg.tau));
        break;
      case BanditAlgo::Ucb:
        arm = ucb_action(counts, means, cfg.ucb_c);
        break;
      case BanditAlgo::Thompson:
        arm = thompson_action(beta, rng);
        break;
    }
    const int r = rng.bernoulli(arm_means[arm]) ? 1 : 0;
    update_beta(beta, arm, r);
    ++counts[arm];
    means[arm] += (static_cast<double>(r) - means[arm]) / static_cast<double>(counts[arm]);
    ledger.record(arm);
    rows.push_back({t, arm, static_cast<double>(r), ledger.per_step.back(), ledger.total()});
  }
  return rows;
}

void save_bandit_csv(const std::string& path, std::span<const BanditRunRow> rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "step,arm,reward,per_step_regret,cum_regret\n";
  char a[64], b[64], c[64];
  for (const BanditRunRow& row : rows) {
    std::snprintf(a, sizeof(a), "%.17g", row.reward);
    std::snprintf(b, sizeof(b), "%.17g", row.per_step_regret);
    std::snprintf(c, sizeof(c), "%.17g", row.cum_regret);
    f << row.step << "," << row.arm << "," << a << "," << b << "," << c << "\n";
  }
}

}  // namespace rlkit
