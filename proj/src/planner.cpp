#include "rlkit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "rlkit/linalg.hpp"

namespace rlkit {

DiscretePlanProblem problem_from_mdp(const TabularMDP& mdp, int horizon, double gamma,
                                     std::function<double(int)> terminal_value) {
  DiscretePlanProblem p;
  p.model = [mdp](int s, int a, Rng& rng) {
    const std::size_t base = (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states;
    const int s2 = rng.categorical(std::span<const double>(mdp.trans.data() + base, mdp.n_states));
    return ModelStep{s2, mdp.reward[base + s2], mdp.is_terminal(s2)};
  };
  p.n_actions = mdp.n_actions;
  p.horizon = horizon;
  p.gamma = gamma;
  p.terminal_value = std::move(terminal_value);
  return p;
}

double rollout_score(const DiscretePlanProblem& p, int s0, std::span<const int> actions, Rng& rng) {
  double score = 0.0, w = 1.0;
  int s = s0;
  for (int h = 0; h < static_cast<int>(actions.size()); ++h) {
    const ModelStep step = p.model(s, actions[h], rng);
    score += w * step.r;
    w *= p.gamma;
    s = step.s_next;
    if (step.done) return score;
  }
  return score + w * p.tail_value(s);
}

int random_shooting(const DiscretePlanProblem& p, int s0, int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("random_shooting: need at least one sample");
  int best_action = 0;
  double best = -1e300;
  std::vector<int> seq(p.horizon);
  for (int n = 0; n < n_samples; ++n) {
    for (int& a : seq) a = rng.uniform_int(p.n_actions);
    const double score = rollout_score(p, s0, seq, rng);
    if (score > best) {
      best = score;
      best_action = seq[0];
    }
  }
  return best_action;
}

int exhaustive_plan(const DiscretePlanProblem& p, int s0) {
  Rng rng(0);  // deterministic model assumed; stream unused by convention
  long total = 1;
  for (int h = 0; h < p.horizon; ++h) {
    total *= p.n_actions;
    if (total > 4000000) throw std::invalid_argument("exhaustive_plan: action tree too large");
  }
  int best_action = 0;
  double best = -1e300;
  std::vector<int> seq(p.horizon);
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int h = 0; h < p.horizon; ++h) {
      seq[h] = static_cast<int>(c % p.n_actions);
      c /= p.n_actions;
    }
    const double score = rollout_score(p, s0, seq, rng);
    if (score > best) {
      best = score;
      best_action = seq[0];
    }
  }
  return best_action;
}

// ---------------------------------------------------------------------------
// MCTS

namespace {

struct MctsNode {
  std::vector<long> n;
  std::vector<double> w;
  std::vector<double> prior;
  std::vector<int> child;       // deterministic successor id per action, -1 unexpanded
  std::vector<double> child_r;  // reward on the edge
  std::vector<std::uint8_t> child_done;
};

}  // namespace

MctsResult mcts_search(const DiscretePlanProblem& p, int s0, const PriorFn& prior, int n_sim,
                       double c_uct, double tau, Rng& rng) {
  if (n_sim < 1) throw std::invalid_argument("mcts_search: n_sim must be >= 1");
  // node store keyed by (env state, depth) pairs lazily created along the
  // deterministic tree
  std::vector<MctsNode> nodes;
  std::vector<int> node_state;
  auto new_node = [&](int s) {
    MctsNode node;
    node.n.assign(p.n_actions, 0);
    node.w.assign(p.n_actions, 0.0);
    node.prior = prior(s);
    node.child.assign(p.n_actions, -1);
    node.child_r.assign(p.n_actions, 0.0);
    node.child_done.assign(p.n_actions, 0);
    nodes.push_back(std::move(node));
    node_state.push_back(s);
    return static_cast<int>(nodes.size()) - 1;
  };
  const int root = new_node(s0);

  for (int sim = 0; sim < n_sim; ++sim) {
    int id = root;
    int depth = 0;
    std::vector<std::pair<int, int>> path;  // (node, action)
    std::vector<double> rewards;
    double leaf_value = 0.0;

    for (;;) {
      MctsNode& node = nodes[id];
      long total_n = 0;
      for (long c : node.n) total_n += c;
      // prior-weighted UCB; zero-prior actions are never selected
      int best_a = -1;
      double best = -1e300;
      for (int a = 0; a < p.n_actions; ++a) {
        if (node.prior[a] <= 0.0) continue;
        const double q = node.n[a] > 0 ? node.w[a] / node.n[a] : 0.0;
        const double u = c_uct * node.prior[a] * std::sqrt(static_cast<double>(total_n)) /
                         (1.0 + static_cast<double>(node.n[a]));
        const double score = q + u;
        if (score > best) {
          best = score;
          best_a = a;
        }
      }
      if (best_a < 0) throw std::runtime_error("mcts_search: no selectable action (all-zero prior)");
      path.emplace_back(id, best_a);

      if (node.child[best_a] == -1) {
        // expand: one model call (deterministic dynamics assumed)
        const ModelStep step = p.model(node_state[id], best_a, rng);
        const int child_id = step.done ? -2 : new_node(step.s_next);
        MctsNode& n2 = nodes[id];  // new_node may have reallocated
        n2.child_r[best_a] = step.r;
        n2.child_done[best_a] = step.done ? 1 : 0;
        n2.child[best_a] = child_id;
        rewards.push_back(step.r);
        leaf_value = step.done ? 0.0 : p.tail_value(step.s_next);
        break;
      }
      rewards.push_back(node.child_r[best_a]);
      if (node.child_done[best_a]) {
        leaf_value = 0.0;  // absorbing edge
        break;
      }
      id = node.child[best_a];
      ++depth;
      if (depth >= p.horizon) {
        leaf_value = p.tail_value(node_state[id]);
        break;
      }
    }

    // back up discounted return along the path
    double g = leaf_value;
    for (std::size_t i = path.size(); i-- > 0;) {
      g = rewards[i] + p.gamma * g;
      MctsNode& node = nodes[path[i].first];
      node.n[path[i].second] += 1;
      node.w[path[i].second] += g;
    }
  }

  MctsResult out;
  const MctsNode& r = nodes[root];
  out.visit_counts.assign(r.n.begin(), r.n.end());
  out.root_q.assign(p.n_actions, 0.0);
  for (int a = 0; a < p.n_actions; ++a)
    out.root_q[a] = r.n[a] > 0 ? r.w[a] / r.n[a] : 0.0;
  out.policy.assign(p.n_actions, 0.0);
  if (tau <= 1e-9) {
    // temperature -> 0: one-hot on the most-visited action
    int best = 0;
    for (int a = 1; a < p.n_actions; ++a)
      if (r.n[a] > r.n[best]) best = a;
    out.policy[best] = 1.0;
  } else {
    double total = 0.0;
    for (int a = 0; a < p.n_actions; ++a) {
      out.policy[a] = std::pow(static_cast<double>(r.n[a]), 1.0 / tau);
      total += out.policy[a];
    }
    for (double& x : out.policy) x /= total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SMC

int smc_mpc(const DiscretePlanProblem& p, int s0, const PolicyFn& proposal,
            const std::function<double(int)>& value, const SmcConfig& cfg, Rng& rng,
            SmcStats* stats) {
  struct Particle {
    int s;
    int head_action = -1;
    bool alive = true;  // false after the model reports done
    int prev_s = -1, prev_a = -1;
  };
  std::vector<Particle> particles(cfg.n_particles, Particle{s0});
  std::vector<double> weights(cfg.n_particles, 1.0);

  const int steps = std::min(cfg.horizon, p.horizon);
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < cfg.n_particles; ++i) {
      Particle& part = particles[i];
      if (!part.alive) continue;  // absorbed particles carry their weight
      const std::vector<double> probs = proposal(part.s);
      const int a = rng.categorical(probs);
      const ModelStep step = p.model(part.s, a, rng);
      // one-sample estimate of the log E[exp V] normalizer over the
      // current-state marginal
      double v_norm = value(part.s);
      if (part.prev_s >= 0) {
        const ModelStep resample = p.model(part.prev_s, part.prev_a, rng);
        v_norm = value(resample.s_next);
      }
      const double v_next = step.done ? 0.0 : value(step.s_next);
      const double advantage = step.r - std::log(std::max(probs[a], 1e-300)) + v_next - v_norm;
      weights[i] *= std::exp(advantage);
      if (part.head_action < 0) part.head_action = a;
      part.prev_s = part.s;
      part.prev_a = a;
      part.s = step.s_next;
      if (step.done) part.alive = false;
    }
    // normalize and multinomially resample
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total)) {
      // weight degeneracy: reset to uniform and report
      if (stats) ++stats->degeneracy_resets;
      weights.assign(cfg.n_particles, 1.0);
      total = cfg.n_particles;
    }
    std::vector<Particle> next;
    next.reserve(cfg.n_particles);
    for (int i = 0; i < cfg.n_particles; ++i) next.push_back(particles[rng.categorical(weights)]);
    particles = std::move(next);
    weights.assign(cfg.n_particles, 1.0);
  }
  const Particle& pick = particles[rng.uniform_int(cfg.n_particles)];
  return pick.head_action < 0 ? 0 : pick.head_action;
}

// ---------------------------------------------------------------------------
// Continuous planners

double rollout_score(const BoxPlanProblem& p, std::span<const double> s0,
                     std::span<const double> actions, Rng& rng) {
  std::vector<double> s(s0.begin(), s0.end());
  double score = 0.0, w = 1.0;
  for (int h = 0; h < p.horizon; ++h) {
    const std::span<const double> a(actions.data() + static_cast<std::size_t>(h) * p.action_dim,
                                    p.action_dim);
    const BoxModelStep step = p.model(s, a, rng);
    score += w * step.r;
    w *= p.gamma;
    s = step.s_next;
    if (step.done) return score;
  }
  return score + w * p.tail_value(s);
}

namespace {

void clamp_to_box(const BoxPlanProblem& p, std::vector<double>& seq) {
  for (int h = 0; h < p.horizon; ++h)
    for (int d = 0; d < p.action_dim; ++d) {
      double& x = seq[static_cast<std::size_t>(h) * p.action_dim + d];
      x = std::clamp(x, p.a_lo[d], p.a_hi[d]);
    }
}

}  // namespace

BoxPlan random_shooting(const BoxPlanProblem& p, std::span<const double> s0, int n_samples,
                        std::span<const double> proposal_mean, std::span<const double> proposal_std,
                        Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("random_shooting: need at least one sample");
  const std::size_t len = static_cast<std::size_t>(p.horizon) * p.action_dim;
  BoxPlan best;
  best.score = -1e300;
  std::vector<double> seq(len);
  for (int n = 0; n < n_samples; ++n) {
    for (std::size_t i = 0; i < len; ++i)
      seq[i] = proposal_mean.empty() ? rng.uniform(p.a_lo[i % p.action_dim], p.a_hi[i % p.action_dim])
                                     : rng.normal(proposal_mean[i], proposal_std[i]);
    clamp_to_box(p, seq);
    const double score = rollout_score(p, s0, seq, rng);
    if (score > best.score) {
      best.score = score;
      best.sequence = seq;
    }
  }
  best.first_action.assign(best.sequence.begin(), best.sequence.begin() + p.action_dim);
  return best;
}

CemResult cem_plan(const BoxPlanProblem& p, std::span<const double> s0, const CemConfig& cfg,
                   std::span<const double> init_mean, std::span<const double> init_std, Rng& rng) {
  const std::size_t len = static_cast<std::size_t>(p.horizon) * p.action_dim;
  const int n_elite = std::max(2, static_cast<int>(cfg.population * cfg.elite_frac));
  CemResult out;
  out.mean.assign(init_mean.begin(), init_mean.end());
  out.stddev.assign(init_std.begin(), init_std.end());

  std::vector<std::vector<double>> samples(cfg.population, std::vector<double>(len));
  std::vector<double> scores(cfg.population);
  std::vector<int> order(cfg.population);

  for (int it = 0; it < cfg.iterations; ++it) {
    out.iterations_used = it + 1;
    for (int n = 0; n < cfg.population; ++n) {
      for (std::size_t i = 0; i < len; ++i)
        samples[n][i] = rng.normal(out.mean[i], out.stddev[i]);
      clamp_to_box(p, samples[n]);
      scores[n] = rollout_score(p, s0, samples[n], rng);
    }
    for (int n = 0; n < cfg.population; ++n) order[n] = n;
    std::stable_sort(order.begin(), order.end(),
                     [&scores](int a, int b) { return scores[a] > scores[b]; });
    // refit to the top K
    for (std::size_t i = 0; i < len; ++i) {
      double m = 0.0;
      for (int e = 0; e < n_elite; ++e) m += samples[order[e]][i];
      m /= n_elite;
      double var = 0.0;
      for (int e = 0; e < n_elite; ++e) {
        const double d = samples[order[e]][i] - m;
        var += d * d;
      }
      out.mean[i] = m;
      out.stddev[i] = std::max(cfg.std_floor, std::sqrt(var / n_elite));
    }
  }
  Rng score_rng = rng;
  out.mean_score = rollout_score(p, s0, out.mean, score_rng);
  out.first_action.assign(out.mean.begin(), out.mean.begin() + p.action_dim);
  return out;
}

BoxPlan mppi_plan(const BoxPlanProblem& p, std::span<const double> s0, const MppiConfig& cfg,
                  MppiState& state, Rng& rng) {
  const std::size_t len = static_cast<std::size_t>(p.horizon) * p.action_dim;
  if (state.mean.empty()) state.mean.assign(len, 0.0);
  if (state.mean.size() != len) throw std::invalid_argument("mppi_plan: warm-start length mismatch");

  // shift the reference forward one step, zero-filling the new tail slot
  std::vector<double> reference(len, 0.0);
  for (std::size_t i = 0; i + p.action_dim < len; ++i) reference[i] = state.mean[i + p.action_dim];

  std::vector<std::vector<double>> samples(cfg.population, std::vector<double>(len));
  std::vector<double> scores(cfg.population);
  for (int n = 0; n < cfg.population; ++n) {
    for (std::size_t i = 0; i < len; ++i)
      samples[n][i] = reference[i] + rng.normal(0.0, cfg.noise_std);
    clamp_to_box(p, samples[n]);
    scores[n] = rollout_score(p, s0, samples[n], rng);
  }
  double top = scores[argmax(scores)];
  if (!std::isfinite(top)) throw std::runtime_error("mppi_plan: invalid model returns");

  // exponential weighting by return / temperature (softmax limit at tau -> 0
  // collapses onto the best sample)
  std::vector<double> w(cfg.population);
  double total = 0.0;
  for (int n = 0; n < cfg.population; ++n) {
    w[n] = std::exp((scores[n] - top) / std::max(cfg.temperature, 1e-12));
    total += w[n];
  }
  BoxPlan out;
  out.sequence.assign(len, 0.0);
  for (int n = 0; n < cfg.population; ++n)
    for (std::size_t i = 0; i < len; ++i) out.sequence[i] += w[n] / total * samples[n][i];
  state.mean = out.sequence;
  Rng score_rng = rng;
  out.score = rollout_score(p, s0, out.sequence, score_rng);
  out.first_action.assign(out.sequence.begin(), out.sequence.begin() + p.action_dim);
  return out;
}

Trajectory mpc_controller(Env& env, const DiscretePlanner& planner, int max_steps, Rng& rng,
                          int replan_every) {
  if (replan_every < 1) throw std::invalid_argument("mpc_controller: replan_every must be >= 1");
  Trajectory traj;
  int s = env.state();
  int last_action = 0;
  for (int t = 0; t < max_steps; ++t) {
    if (t % replan_every == 0) last_action = planner(s, rng);
    const StepResult res = env.step(last_action, rng);
    traj.steps.push_back({s, last_action, res.r, res.s_next, res.done});
    s = res.s_next;
    if (res.done || res.truncated) break;
  }
  return traj;
}

void save_plan_trace_json(const std::string& path, std::span<const PlanTraceEntry> entries) {
  nlohmann::json j = nlohmann::json::array();
  for (const PlanTraceEntry& e : entries) {
    nlohmann::json row;
    row["step"] = e.step;
    row["chosen_action"] = e.chosen_action;
    row["scores"] = e.scores;
    j.push_back(row);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << j.dump(2) << "\n";
}

}  // namespace rlkit
