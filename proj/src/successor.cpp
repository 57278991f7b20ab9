#include "rlkit/successor.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "rlkit/env.hpp"
#include "rlkit/linalg.hpp"

namespace rlkit {

namespace {

// policy-induced chain with terminal rows zeroed
std::vector<double> policy_chain(const TabularMDP& mdp, const PolicyTable& policy) {
  const int n = mdp.n_states;
  std::vector<double> t(static_cast<std::size_t>(n) * n, 0.0);
  for (int s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy.at(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) t[static_cast<std::size_t>(s) * n + s2] += pa * mdp.trans_at(s, a, s2);
    }
  }
  return t;
}

}  // namespace

SRMatrix sr_closed_form(const TabularMDP& mdp, const PolicyTable& policy, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("sr_closed_form: gamma must be in [0,1)");
  const int n = mdp.n_states;
  const std::vector<double> t = policy_chain(mdp, policy);
  // Solve (I - gamma T) X^T = T^T column by column: M = T (I - gamma T)^{-1}
  // via M^T = (I - gamma T^T)^{-1} T^T.
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a[static_cast<std::size_t>(i) * n + j] =
          (i == j ? 1.0 : 0.0) - gamma * t[static_cast<std::size_t>(j) * n + i];
  SRMatrix m;
  m.n_states = n;
  m.gamma = gamma;
  m.m.assign(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> rhs(n);
  for (int col = 0; col < n; ++col) {
    // column col of M^T (= row col of M) solves (I - gamma T^T) x = T^T e_col
    for (int i = 0; i < n; ++i) rhs[i] = t[static_cast<std::size_t>(col) * n + i];
    const std::vector<double> x = solve_linear(a, rhs);
    for (int i = 0; i < n; ++i) m.at(col, i) = x[i];
  }
  return m;
}

void sr_td_update(SRMatrix& m, const Transition& t, double eta) {
  const int n = m.n_states;
  const double* next_row = m.m.data() + static_cast<std::size_t>(t.s_next) * n;
  double* row = m.m.data() + static_cast<std::size_t>(t.s) * n;
  for (int s2 = 0; s2 < n; ++s2) {
    const double indicator = (s2 == t.s_next) ? 1.0 : 0.0;
    const double bootstrap = t.done ? 0.0 : next_row[s2];
    row[s2] += eta * (indicator + m.gamma * bootstrap - row[s2]);
  }
}

std::vector<double> value_from_sr(const SRMatrix& m, std::span<const double> reward) {
  if (static_cast<int>(reward.size()) != m.n_states)
    throw std::invalid_argument("value_from_sr: reward dimension mismatch");
  std::vector<double> v(m.n_states, 0.0);
  for (int s = 0; s < m.n_states; ++s)
    for (int s2 = 0; s2 < m.n_states; ++s2) v[s] += m.at(s, s2) * reward[s2];
  return v;
}

double sr_bellman_residual(const SRMatrix& m, const TabularMDP& mdp, const PolicyTable& policy) {
  const int n = m.n_states;
  const std::vector<double> t = policy_chain(mdp, policy);
  double worst = 0.0;
  for (int s = 0; s < n; ++s)
    for (int s2 = 0; s2 < n; ++s2) {
      // [T (I + gamma M)](s,s2)
      double x = 0.0;
      for (int k = 0; k < n; ++k)
        x += t[static_cast<std::size_t>(s) * n + k] *
             ((k == s2 ? 1.0 : 0.0) + m.gamma * m.at(k, s2));
      worst = std::max(worst, std::fabs(x - m.at(s, s2)));
    }
  return worst;
}

SRMatrix sr_td_learn(const TabularMDP& mdp, const PolicyTable& policy, double gamma, long steps,
                     std::uint64_t seed, double power) {
  SRMatrix m;
  m.n_states = mdp.n_states;
  m.gamma = gamma;
  m.m.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_states, 0.0);
  std::vector<double> tail_avg(m.m.size(), 0.0);
  long avg_n = 0;

  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_act = Rng::derive(seed, 0, "act");
  std::vector<long> visits(mdp.n_states, 0);
  TabularEnv env(mdp);
  int s = env.reset(rng_env);
  for (long t = 0; t < steps; ++t) {
    std::vector<double> probs(mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) probs[a] = policy.at(s, a);
    const int a = rng_act.categorical(probs);
    const StepResult res = env.step(a, rng_env);
    const double eta = 1.0 / std::pow(static_cast<double>(++visits[s]), power);
    sr_td_update(m, {s, a, res.r, res.s_next, res.done}, eta);
    s = res.done ? env.reset(rng_env) : res.s_next;
    if (t >= steps / 2) {
      ++avg_n;
      for (std::size_t i = 0; i < m.m.size(); ++i)
        tail_avg[i] += (m.m[i] - tail_avg[i]) / static_cast<double>(avg_n);
    }
  }
  m.m = std::move(tail_avg);
  return m;
}

SFTable SFTable::zeros(int n_states, int n_actions, int dim, double gamma) {
  SFTable sf;
  sf.n_states = n_states;
  sf.n_actions = n_actions;
  sf.dim = dim;
  sf.gamma = gamma;
  sf.psi.assign(static_cast<std::size_t>(n_states) * n_actions * dim, 0.0);
  return sf;
}

void sf_td_update(SFTable& sf, const Transition& t, int a_next, const CumulantFn& phi, double eta) {
  const std::vector<double> c = phi(t.s_next);
  if (static_cast<int>(c.size()) != sf.dim)
    throw std::invalid_argument("sf_td_update: cumulant dimension mismatch");
  auto row = sf.at(t.s, t.a);
  const auto next = sf.at(t.s_next, a_next);
  for (int k = 0; k < sf.dim; ++k) {
    const double bootstrap = t.done ? 0.0 : next[k];
    row[k] += eta * (c[k] + sf.gamma * bootstrap - row[k]);
  }
}

SFTable sf_closed_form(const TabularMDP& mdp, const PolicyTable& policy, const CumulantFn& phi,
                       int dim, double gamma) {
  const SRMatrix m = sr_closed_form(mdp, policy, gamma);
  const int n = mdp.n_states;
  SFTable sf = SFTable::zeros(n, mdp.n_actions, dim, gamma);
  std::vector<std::vector<double>> phis(n);
  for (int s = 0; s < n; ++s) phis[s] = phi(s);
  for (int s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      auto row = sf.at(s, a);
      for (int s2 = 0; s2 < n; ++s2) {
        const double p = mdp.trans_at(s, a, s2);
        if (p == 0.0) continue;
        for (int k = 0; k < dim; ++k) {
          double tail = phis[s2][k];
          for (int s3 = 0; s3 < n; ++s3) tail += gamma * m.at(s2, s3) * phis[s3][k];
          row[k] += p * tail;
        }
      }
    }
  }
  return sf;
}

double sf_q_value(const SFTable& sf, int s, int a, std::span<const double> w) {
  const auto row = sf.at(s, a);
  double q = 0.0;
  for (int k = 0; k < sf.dim; ++k) q += row[k] * w[k];
  return q;
}

int gpi_action(std::span<const SFTable> library, std::span<const double> w, int state) {
  if (library.empty()) throw std::invalid_argument("gpi_action: empty policy library");
  const int n_actions = library[0].n_actions;
  std::vector<double> best(n_actions, -1e300);
  for (const SFTable& sf : library)
    for (int a = 0; a < n_actions; ++a)
      best[a] = std::max(best[a], sf_q_value(sf, state, a, w));
  return argmax(best);
}

void save_sr_csv(const std::string& path, const SRMatrix& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "s,s_tilde,value\n";
  char buf[64];
  for (int s = 0; s < m.n_states; ++s)
    for (int s2 = 0; s2 < m.n_states; ++s2) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(s, s2));
      f << s << "," << s2 << "," << buf << "\n";
    }
}

}  // namespace rlkit
