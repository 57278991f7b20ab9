#include "rlkit/tabular_td.hpp"

#include <cmath>
#include <stdexcept>

#include "rlkit/linalg.hpp"

namespace rlkit {

double EtaSchedule::operator()(long n_visits) const {
  if (power == 0.0) return base;
  return base / std::pow(static_cast<double>(n_visits < 1 ? 1 : n_visits), power);
}

QTable::QTable(int ns, int na, std::span<const std::uint8_t> terminal_mask)
    : n_states(ns), n_actions(na) {
  q.assign(static_cast<std::size_t>(ns) * na, 0.0);
  visits.assign(q.size(), 0);
  terminal.assign(ns, 0);
  if (!terminal_mask.empty()) terminal.assign(terminal_mask.begin(), terminal_mask.end());
}

double QTable::max_at(int s) const {
  const auto r = row(s);
  return r[argmax(r)];
}

int QTable::greedy_at(int s) const { return argmax(row(s)); }

VTableTD::VTableTD(int n_states, std::span<const std::uint8_t> terminal_mask) {
  v.assign(n_states, 0.0);
  visits.assign(n_states, 0);
  terminal.assign(n_states, 0);
  if (!terminal_mask.empty()) terminal.assign(terminal_mask.begin(), terminal_mask.end());
}

void mc_update(VTableTD& v, const Trajectory& episode, const EtaSchedule& eta, double gamma) {
  if (!episode.terminated()) throw std::invalid_argument("mc_update: trajectory is not terminated");
  const std::size_t n = episode.size();
  // returns-to-go
  std::vector<double> g(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc = episode.steps[i].r + gamma * acc;
    g[i] = acc;
  }
  // first-visit filter
  std::vector<std::uint8_t> seen(v.v.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int s = episode.steps[i].s;
    if (seen[s]) continue;
    seen[s] = 1;
    if (v.terminal[s]) continue;
    const long k = ++v.visits[s];
    v.v[s] += eta(k) * (g[i] - v.v[s]);
  }
}

double td0_update(VTableTD& v, const Transition& t, const EtaSchedule& eta, double gamma) {
  const double bootstrap = t.done ? 0.0 : v.v[t.s_next];
  const double delta = t.r + gamma * bootstrap - v.v[t.s];
  if (!v.terminal[t.s]) {
    const long k = ++v.visits[t.s];
    v.v[t.s] += eta(k) * delta;
  }
  return delta;
}

double nstep_return(std::span<const double> rewards, std::span<const std::uint8_t> dones,
                    double bootstrap_value, int n, double gamma) {
  if (n < 1) throw std::invalid_argument("nstep_return: n must be >= 1");
  if (static_cast<int>(rewards.size()) < n || rewards.size() != dones.size())
    throw std::invalid_argument("nstep_return: not enough transitions for n steps");
  double g = 0.0;
  double w = 1.0;
  for (int k = 0; k < n; ++k) {
    g += w * rewards[k];
    if (dones[k]) return g;  // episode ended inside the window: exact MC return
    w *= gamma;
  }
  return g + w * bootstrap_value;
}

std::vector<double> lambda_return(const Trajectory& episode, std::span<const double> v,
                                  double lambda, double gamma) {
  const std::size_t n = episode.size();
  std::vector<double> g(n, 0.0);
  double next = 0.0;  // G_{t+1}^lambda
  for (std::size_t i = n; i-- > 0;) {
    const Transition& t = episode.steps[i];
    const double mix = t.done ? 0.0 : (1.0 - lambda) * v[t.s_next] + lambda * next;
    g[i] = t.r + gamma * mix;
    next = g[i];
  }
  return g;
}

void td_lambda_step(VTableTD& v, EligibilityTrace& trace, const Transition& t,
                    const EtaSchedule& eta, double gamma, double lambda) {
  const double bootstrap = t.done ? 0.0 : v.v[t.s_next];
  const double delta = t.r + gamma * bootstrap - v.v[t.s];
  for (double& z : trace.z) z *= gamma * lambda;
  trace.z[t.s] += 1.0;  // tabular gradient of V(s) is the indicator of s
  const long k = ++v.visits[t.s];
  const double step = eta(k);
  for (std::size_t s = 0; s < v.v.size(); ++s) {
    if (v.terminal[s]) continue;
    v.v[s] += step * delta * trace.z[s];
  }
}

void sarsa_step(QTable& q, const Transition& t, int a_next, const EtaSchedule& eta, double gamma) {
  if (q.terminal[t.s]) return;
  const double bootstrap = t.done ? 0.0 : q.at(t.s_next, a_next);
  const double target = t.r + gamma * bootstrap;
  const long k = q.bump_visit(t.s, t.a);
  q.ref(t.s, t.a) += eta(k) * (target - q.at(t.s, t.a));
}

void q_learning_step(QTable& q, const Transition& t, const EtaSchedule& eta, double gamma) {
  if (q.terminal[t.s]) return;
  const double bootstrap = t.done ? 0.0 : q.max_at(t.s_next);
  const double target = t.r + gamma * bootstrap;
  const long k = q.bump_visit(t.s, t.a);
  q.ref(t.s, t.a) += eta(k) * (target - q.at(t.s, t.a));
}

void double_q_step(QTable& q1, QTable& q2, const Transition& t, const EtaSchedule& eta,
                   double gamma, Rng& rng) {
  QTable& learner = rng.bernoulli(0.5) ? q1 : q2;
  QTable& evaluator = (&learner == &q1) ? q2 : q1;
  if (learner.terminal[t.s]) return;
  double bootstrap = 0.0;
  if (!t.done) {
    const int a_star = learner.greedy_at(t.s_next);  // learner chooses, the other evaluates
    bootstrap = evaluator.at(t.s_next, a_star);
  }
  const double target = t.r + gamma * bootstrap;
  const long k = learner.bump_visit(t.s, t.a);
  learner.ref(t.s, t.a) += eta(k) * (target - learner.at(t.s, t.a));
}

DeterministicModel::DeterministicModel(int ns, int na) : n_states(ns), n_actions(na) {
  table.assign(static_cast<std::size_t>(ns) * na, Entry{});
}

void DeterministicModel::observe(const Transition& t) {
  Entry& e = table[static_cast<std::size_t>(t.s) * n_actions + t.a];
  if (!e.seen) visited.emplace_back(t.s, t.a);
  e = Entry{t.s_next, t.r, t.done, true};
}

namespace {

std::vector<std::uint8_t> terminal_mask_of(Env& env) {
  if (auto* te = dynamic_cast<TabularEnv*>(&env)) return te->mdp().terminal;
  return std::vector<std::uint8_t>(env.n_states(), 0);
}

int eps_greedy_row(const QTable& q, int s, int n_legal, double epsilon, Rng& rng) {
  if (rng.bernoulli(epsilon)) return rng.uniform_int(n_legal);
  return argmax(std::span<const double>(q.q.data() + static_cast<std::size_t>(s) * q.n_actions,
                                        n_legal));
}

}  // namespace

ControlResult q_learning_control(Env& env, const ControlConfig& cfg, std::uint64_t seed) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_search = Rng::derive(seed, 0, "search");

  const auto terminal = terminal_mask_of(env);
  ControlResult out{QTable(env.n_states(), env.n_actions(), terminal), 0, 0, {}};
  QTable& q = out.q;
  DeterministicModel model(env.n_states(), env.n_actions());

  while (out.steps < cfg.max_steps) {
    int s = env.reset(rng_env);
    double ep_return = 0.0, discount = 1.0;
    const double eps =
        cfg.glie ? cfg.glie_scale / (cfg.glie_scale + static_cast<double>(out.episodes))
                 : cfg.epsilon;
    for (int t = 0; t < cfg.episode_horizon && out.steps < cfg.max_steps; ++t) {
      const int a = eps_greedy_row(q, s, env.n_legal_actions(s), eps, rng_act);
      const StepResult res = env.step(a, rng_env);
      const Transition tr{s, a, res.r, res.s_next, res.done};
      q_learning_step(q, tr, cfg.eta, cfg.gamma);
      ++out.steps;
      if (cfg.eval_every > 0 && cfg.eval_hook && out.steps % cfg.eval_every == 0)
        cfg.eval_hook(out.steps, q);
      ep_return += discount * res.r;
      discount *= cfg.gamma;

      if (cfg.dyna_planning_steps > 0) {
        model.observe(tr);
        for (int k = 0; k < cfg.dyna_planning_steps; ++k) {
          const auto [ms, ma] = model.visited[rng_search.uniform_int(
              static_cast<int>(model.visited.size()))];
          const auto& e = model.at(ms, ma);
          q_learning_step(q, Transition{ms, ma, e.r, e.s_next, e.done}, cfg.eta, cfg.gamma);
        }
      }

      s = res.s_next;
      if (res.done || res.truncated) break;
    }
    out.episode_returns.push_back(ep_return);
    ++out.episodes;
  }
  return out;
}

ControlResult sarsa_control(Env& env, const ControlConfig& cfg, std::uint64_t seed) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");

  const auto terminal = terminal_mask_of(env);
  ControlResult out{QTable(env.n_states(), env.n_actions(), terminal), 0, 0, {}};
  QTable& q = out.q;

  while (out.steps < cfg.max_steps) {
    int s = env.reset(rng_env);
    const double eps =
        cfg.glie ? cfg.glie_scale / (cfg.glie_scale + static_cast<double>(out.episodes))
                 : cfg.epsilon;
    int a = eps_greedy_row(q, s, env.n_legal_actions(s), eps, rng_act);
    double ep_return = 0.0, discount = 1.0;
    for (int t = 0; t < cfg.episode_horizon && out.steps < cfg.max_steps; ++t) {
      const StepResult res = env.step(a, rng_env);
      const int a_next =
          res.done ? 0
                   : eps_greedy_row(q, res.s_next, env.n_legal_actions(res.s_next), eps, rng_act);
      sarsa_step(q, Transition{s, a, res.r, res.s_next, res.done}, a_next, cfg.eta, cfg.gamma);
      ++out.steps;
      if (cfg.eval_every > 0 && cfg.eval_hook && out.steps % cfg.eval_every == 0)
        cfg.eval_hook(out.steps, q);
      ep_return += discount * res.r;
      discount *= cfg.gamma;
      s = res.s_next;
      a = a_next;
      if (res.done || res.truncated) break;
    }
    out.episode_returns.push_back(ep_return);
    ++out.episodes;
  }
  return out;
}

DoubleQResult maxbias_control(Env& env, int episodes, bool use_double, int tracked_action,
                              const ControlConfig& cfg, std::uint64_t seed) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_coin = Rng::derive(seed, 0, "coin");

  const auto terminal = terminal_mask_of(env);
  DoubleQResult out{QTable(env.n_states(), env.n_actions(), terminal),
                    QTable(env.n_states(), env.n_actions(), terminal),
                    {}};

  for (int ep = 0; ep < episodes; ++ep) {
    int s = env.reset(rng_env);
    bool first = true;
    for (int t = 0; t < cfg.episode_horizon; ++t) {
      // behavior scores: mean of the two tables in double mode
      const int legal = env.n_legal_actions(s);
      int a;
      if (rng_act.bernoulli(cfg.epsilon)) {
        a = rng_act.uniform_int(legal);
      } else {
        std::vector<double> scores(legal);
        for (int b = 0; b < legal; ++b)
          scores[b] = use_double ? 0.5 * (out.q1.at(s, b) + out.q2.at(s, b)) : out.q1.at(s, b);
        a = argmax(scores);
      }
      if (first) {
        out.start_action_taken.push_back(a == tracked_action ? 1 : 0);
        first = false;
      }
      const StepResult res = env.step(a, rng_env);
      const Transition tr{s, a, res.r, res.s_next, res.done};
      if (use_double)
        double_q_step(out.q1, out.q2, tr, cfg.eta, cfg.gamma, rng_coin);
      else
        q_learning_step(out.q1, tr, cfg.eta, cfg.gamma);
      s = res.s_next;
      if (res.done || res.truncated) break;
    }
  }
  return out;
}

}  // namespace rlkit
