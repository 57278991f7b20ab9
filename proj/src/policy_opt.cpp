#include "rlkit/policy_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "rlkit/linalg.hpp"
#include "rlkit/stats.hpp"

namespace rlkit {

AdvantageBatch gae(std::span<const double> rewards, std::span<const double> values,
                   std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n)
    throw std::invalid_argument("gae: length mismatch (values needs a bootstrap entry)");
  AdvantageBatch out;
  out.advantage.assign(n, 0.0);
  out.td_target.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double mask = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * mask * values[i + 1] - values[i];
    acc = delta + gamma * lambda * mask * acc;
    out.advantage[i] = acc;
    out.td_target[i] = acc + values[i];
  }
  return out;
}

ActorCritic ActorCritic::separate(Approximator policy, Approximator value) {
  if (policy.arch().head != Head::PerAction)
    throw std::invalid_argument("ActorCritic: policy must emit logits (PerAction head)");
  if (value.arch().head != Head::Scalar)
    throw std::invalid_argument("ActorCritic: critic must be a scalar head");
  const int n_actions = policy.arch().out_dim;
  return ActorCritic(std::move(policy), std::move(value), false, n_actions);
}

ActorCritic ActorCritic::shared(Approximator trunk, int n_actions) {
  if (trunk.arch().head != Head::PerAction || trunk.arch().out_dim != n_actions + 1)
    throw std::invalid_argument("ActorCritic: shared trunk needs |A|+1 raw heads");
  Approximator dummy = Approximator::linear(1, 1, Head::Scalar, false, 0);
  return ActorCritic(std::move(trunk), std::move(dummy), true, n_actions);
}

std::vector<double> ActorCritic::policy_probs(std::span<const double> obs) const {
  std::vector<double> logits = policy_.value(obs);
  logits.resize(n_actions_);  // shared trunk carries the value in the last slot
  double top = logits[argmax(logits)];
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

double ActorCritic::state_value(std::span<const double> obs) const {
  if (shared_) return policy_.value(obs)[n_actions_];
  return value_.value(obs)[0];
}

ActorCritic::Taped ActorCritic::begin(ad::Tape& tape) const {
  Taped t;
  t.tape = &tape;
  t.policy_params = tape.leaves(policy_.params());
  if (!shared_) t.value_params = tape.leaves(value_.params());
  return t;
}

std::vector<ad::Var> ActorCritic::log_probs(const Taped& t, std::span<const double> obs) const {
  std::vector<ad::Var> raw = policy_.forward(*t.tape, t.policy_params, obs);
  raw.resize(n_actions_);
  return ad::log_softmax(raw);
}

ad::Var ActorCritic::value(const Taped& t, std::span<const double> obs) const {
  if (shared_) return policy_.forward(*t.tape, t.policy_params, obs)[n_actions_];
  return value_.forward(*t.tape, t.value_params, obs)[0];
}

void ActorCritic::apply_grads(const Taped& t, const ad::Tape& tape, double eta_policy,
                              double eta_value) {
  sgd_step(policy_.params(), tape.grads(t.policy_params), eta_policy);
  if (!shared_) sgd_step(value_.params(), tape.grads(t.value_params), eta_value);
}

PgSegment collect_segment(Env& env, const FeatureMap& phi, const ActorCritic& ac, int len,
                          int episode_horizon, Rng& rng_act, Rng& rng_env, bool greedy,
                          int* env_state, int* steps_into_episode) {
  PgSegment seg;
  int local_state = -1, local_steps = 0;
  int& s = env_state ? *env_state : local_state;
  int& ep_t = steps_into_episode ? *steps_into_episode : local_steps;
  if (s < 0) {
    s = env.reset(rng_env);
    ep_t = 0;
  }
  for (int i = 0; i < len; ++i) {
    const std::vector<double> obs = phi(s);
    const std::vector<double> probs = ac.policy_probs(obs);
    const int a = greedy ? argmax(probs) : rng_act.categorical(probs);
    const StepResult res = env.step(a, rng_env);
    seg.steps.push_back({obs, a, res.r, res.done, std::log(std::max(probs[a], 1e-300))});
    ++ep_t;
    if (res.done) {
      s = env.reset(rng_env);
      ep_t = 0;
      continue;
    }
    if (res.truncated || ep_t >= episode_horizon) {
      // truncation is not termination: end the segment and bootstrap
      seg.final_obs = phi(res.s_next);
      seg.truncated = true;
      s = env.reset(rng_env);
      ep_t = 0;
      return seg;
    }
    s = res.s_next;
  }
  if (!seg.steps.empty() && !seg.steps.back().done) {
    seg.final_obs = phi(s);
    seg.truncated = true;
  }
  return seg;
}

std::vector<double> reinforce_update(Approximator& policy, const PgSegment& episode,
                                     const Approximator* baseline, double eta, double gamma,
                                     bool gamma_t_weighting) {
  if (episode.steps.empty() || !episode.steps.back().done)
    throw std::invalid_argument("reinforce_update: needs a terminated episode");
  const std::size_t n = episode.steps.size();
  std::vector<double> returns(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc = episode.steps[i].reward + gamma * acc;
    returns[i] = acc;
  }
  ad::Tape tape;
  const auto p = tape.leaves(policy.params());
  ad::Var objective = ad::constant(tape, 0.0);
  double w = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = episode.steps[i];
    std::vector<ad::Var> logits = policy.forward(tape, p, st.obs);
    const auto logp = ad::log_softmax(logits);
    const double b = baseline ? baseline->value(st.obs)[0] : 0.0;
    objective = objective + (w * (returns[i] - b)) * logp[st.action];
    if (gamma_t_weighting) w *= gamma;
  }
  tape.backward(objective);
  std::vector<double> grad = tape.grads(p);
  // ascent
  for (std::size_t i = 0; i < grad.size(); ++i) policy.params()[i] += eta * grad[i];
  return grad;
}

namespace {

struct SegTargets {
  std::vector<double> values;  // per step + bootstrap
  AdvantageBatch adv;
};

SegTargets segment_targets(const ActorCritic& ac, const PgSegment& seg, double gamma,
                           double lambda) {
  const std::size_t n = seg.steps.size();
  SegTargets t;
  t.values.resize(n + 1);
  std::vector<double> rewards(n);
  std::vector<std::uint8_t> dones(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.values[i] = ac.state_value(seg.steps[i].obs);
    rewards[i] = seg.steps[i].reward;
    dones[i] = seg.steps[i].done ? 1 : 0;
  }
  t.values[n] = (seg.truncated && !seg.final_obs.empty()) ? ac.state_value(seg.final_obs) : 0.0;
  t.adv = gae(rewards, t.values, dones, gamma, lambda);
  return t;
}

// mean undiscounted return over the episodes completed inside the segment
double segment_mean_return(const PgSegment& seg) {
  double total = 0.0, episode = 0.0;
  int completed = 0;
  for (const PgStep& st : seg.steps) {
    episode += st.reward;
    if (st.done) {
      total += episode;
      episode = 0.0;
      ++completed;
    }
  }
  if (completed == 0) return episode;
  return total / completed;
}

void normalize(std::vector<double>& xs) {
  if (xs.size() < 2) return;
  const double m = mean(xs);
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  const double sd = std::sqrt(var / static_cast<double>(xs.size()));
  for (double& x : xs) x = (x - m) / (sd + 1e-8);
}

}  // namespace

AcUpdateStats a2c_update(ActorCritic& ac, const PgSegment& seg, const ACConfig& cfg, double eta) {
  const std::size_t n = seg.steps.size();
  if (n == 0) throw std::invalid_argument("a2c_update: empty segment");
  SegTargets tg = segment_targets(ac, seg, cfg.gamma, cfg.gae_lambda);

  AcUpdateStats stats;
  ad::Tape tape;
  ActorCritic::Taped t = ac.begin(tape);
  ad::Var loss = ad::constant(tape, 0.0);
  double w = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = seg.steps[i];
    const auto logp = ac.log_probs(t, st.obs);
    const ad::Var v = ac.value(t, st.obs);
    ad::Var entropy = ad::constant(tape, 0.0);
    for (int a = 0; a < ac.n_actions(); ++a) entropy = entropy - ad::exp(logp[a]) * logp[a];
    const double q = tg.adv.td_target[i];
    const double adv = tg.adv.advantage[i];
    const ad::Var td_term = ad::square(v - q);
    loss = loss + cfg.lambda_td * td_term - (cfg.lambda_pg * w * adv) * logp[st.action] -
           cfg.lambda_ent * entropy;
    if (cfg.gamma_t_weighting) w = st.done ? 1.0 : w * cfg.gamma;
    stats.entropy += tape.value(entropy) / static_cast<double>(n);
    stats.value_loss += tape.value(td_term) / static_cast<double>(n);
  }
  stats.mean_return = segment_mean_return(seg);
  loss = loss / static_cast<double>(n);
  stats.policy_loss = tape.value(loss);
  tape.backward(loss);
  ac.apply_grads(t, tape, eta, eta);
  return stats;
}

AcUpdateStats ppo_update(ActorCritic& ac, const PgSegment& seg, const ACConfig& cfg, double eta) {
  const std::size_t n = seg.steps.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty segment");
  // advantages computed once and frozen across the epochs
  SegTargets tg = segment_targets(ac, seg, cfg.gamma, cfg.gae_lambda);
  std::vector<double> adv = tg.adv.advantage;
  if (cfg.normalize_adv) normalize(adv);

  AcUpdateStats stats;
  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    ad::Tape tape;
    ActorCritic::Taped t = ac.begin(tape);
    ad::Var loss = ad::constant(tape, 0.0);
    double clipped = 0.0;
    double ent_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& st = seg.steps[i];
      const auto logp = ac.log_probs(t, st.obs);
      const ad::Var v = ac.value(t, st.obs);
      const ad::Var ratio = ad::exp(logp[st.action] - st.behavior_logp);
      const ad::Var clipped_ratio = ad::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      const ad::Var surrogate = ad::vmin(adv[i] * ratio, adv[i] * clipped_ratio);
      ad::Var entropy = ad::constant(tape, 0.0);
      for (int a = 0; a < ac.n_actions(); ++a) entropy = entropy - ad::exp(logp[a]) * logp[a];
      const ad::Var td_term = ad::square(v - tg.adv.td_target[i]);
      loss = loss + cfg.lambda_td * td_term - cfg.lambda_pg * surrogate -
             cfg.lambda_ent * entropy;
      if (std::fabs(tape.value(ratio) - 1.0) > cfg.clip_eps) clipped += 1.0;
      ent_total += tape.value(entropy);
      if (epoch == cfg.ppo_epochs - 1) stats.value_loss += tape.value(td_term) / static_cast<double>(n);
    }
    loss = loss / static_cast<double>(n);
    tape.backward(loss);
    ac.apply_grads(t, tape, eta, eta);
    if (epoch == cfg.ppo_epochs - 1) {
      stats.policy_loss = tape.value(loss);
      stats.clip_fraction = clipped / static_cast<double>(n);
      stats.entropy = ent_total / static_cast<double>(n);
    }
  }
  stats.mean_return = segment_mean_return(seg);
  return stats;
}

std::vector<double> vtrace_targets(const PgSegment& seg, std::span<const double> values,
                                   std::span<const double> target_logp, double gamma, double cbar,
                                   double rhobar) {
  const std::size_t n = seg.steps.size();
  if (values.size() != n + 1 || target_logp.size() != n)
    throw std::invalid_argument("vtrace_targets: length mismatch");
  std::vector<double> v(n + 1);
  v[n] = values[n];
  for (std::size_t i = n; i-- > 0;) {
    const auto& st = seg.steps[i];
    if (!std::isfinite(st.behavior_logp) || st.behavior_logp == -std::numeric_limits<double>::infinity())
      throw std::invalid_argument("vtrace_targets: zero behavior probability on a taken action");
    const double is_ratio = std::exp(target_logp[i] - st.behavior_logp);
    const double c = std::min(cbar, is_ratio);
    const double rho = std::min(rhobar, is_ratio);
    const double mask = st.done ? 0.0 : 1.0;
    const double delta = rho * (st.reward + gamma * mask * values[i + 1] - values[i]);
    v[i] = values[i] + delta + gamma * mask * c * (v[i + 1] - values[i + 1]);
  }
  return v;
}

std::vector<double> offpolicy_pg_grad(const PgSegment& seg, const Approximator& policy,
                                      std::span<const double> values,
                                      std::span<const double> vtrace, double gamma, double rhobar) {
  const std::size_t n = seg.steps.size();
  ad::Tape tape;
  const auto p = tape.leaves(policy.params());
  ad::Var objective = ad::constant(tape, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = seg.steps[i];
    std::vector<ad::Var> logits = policy.forward(tape, p, st.obs);
    const auto logp = ad::log_softmax(logits);
    const double is_ratio = std::exp(tape.value(logp[st.action]) - st.behavior_logp);
    const double rho = std::min(rhobar, is_ratio);
    const double mask = st.done ? 0.0 : 1.0;
    const double q = st.reward + gamma * mask * vtrace[i + 1];
    objective = objective + (rho * (q - values[i])) * logp[st.action];
  }
  objective = objective / static_cast<double>(n);
  tape.backward(objective);
  return tape.grads(p);
}

// ---------------------------------------------------------------------------
// SAC (discrete)

double sac_soft_value(std::span<const double> probs, std::span<const std::vector<double>> qs,
                      double alpha) {
  double v = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    double qmin = qs[0][a];
    for (const auto& q : qs) qmin = std::min(qmin, q[a]);
    v += probs[a] * (qmin - alpha * std::log(probs[a]));
  }
  return v;
}

SacDiscreteResult sac_discrete_train(Env& env, const FeatureMap& phi, int feature_dim,
                                     const SacDiscreteConfig& cfg, std::uint64_t seed) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_buf = Rng::derive(seed, 0, "buffer");

  if (cfg.subset_m < 1 || cfg.subset_m > cfg.n_nets)
    throw std::invalid_argument("sac_discrete_train: M must be in [1, N]");
  const int n_actions = env.n_actions();
  Approximator policy = Approximator::linear(feature_dim, n_actions, Head::PerAction, false,
                                             Rng::derive(seed, 1, "init").next_u64());
  std::vector<Approximator> critics;
  std::vector<TargetCopy> targets;
  for (int i = 0; i < cfg.n_nets; ++i) {
    critics.push_back(Approximator::linear(feature_dim, n_actions, Head::PerAction, false,
                                           Rng::derive(seed, 100 + i, "init").next_u64()));
    targets.emplace_back(critics[i].params(), cfg.rho);
  }
  double alpha = cfg.alpha;

  ReplayBuffer<FeatTransition> buffer(cfg.buffer_capacity);
  auto policy_probs = [&](std::span<const double> obs) {
    std::vector<double> logits = policy.value(obs);
    const double top = logits[argmax(logits)];
    double total = 0.0;
    for (double& l : logits) {
      l = std::exp(l - top);
      total += l;
    }
    for (double& l : logits) l /= total;
    return logits;
  };

  long steps = 0;
  int s = env.reset(rng_env);
  int ep_t = 0;
  while (steps < cfg.max_steps) {
    const std::vector<double> obs = phi(s);
    const int a = rng_act.categorical(policy_probs(obs));
    const StepResult res = env.step(a, rng_env);
    buffer.push(FeatTransition{obs, a, res.r, phi(res.s_next), res.done, 1});
    ++steps;
    ++ep_t;
    if (res.done || res.truncated || ep_t >= cfg.episode_horizon) {
      s = env.reset(rng_env);
      ep_t = 0;
    } else {
      s = res.s_next;
    }
    if (static_cast<long>(buffer.size()) < cfg.warmup) continue;

    const auto idx = buffer.sample_uniform(cfg.batch_size, rng_buf);

    // critic regression toward the exact-expectation soft target
    std::vector<double> ys(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const FeatTransition& tr = buffer.at(idx[j]);
      if (tr.done) {
        ys[j] = tr.r;
        continue;
      }
      const auto probs = policy_probs(tr.s_next);
      std::vector<std::vector<double>> tq;
      for (int i = 0; i < cfg.n_nets && i < cfg.subset_m; ++i)
        tq.push_back(critics[i].value_with(targets[i].params, tr.s_next));
      ys[j] = tr.r + cfg.gamma * sac_soft_value(probs, tq, alpha);
    }
    for (int i = 0; i < cfg.n_nets; ++i) {
      ad::Tape tape;
      const auto p = tape.leaves(critics[i].params());
      ad::Var loss = ad::constant(tape, 0.0);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const FeatTransition& tr = buffer.at(idx[j]);
        const auto q = critics[i].forward(tape, p, tr.s);
        loss = loss + 0.5 * ad::square(q[tr.a] - ys[j]);
      }
      loss = loss / static_cast<double>(idx.size());
      tape.backward(loss);
      sgd_step(critics[i].params(), tape.grads(p), cfg.eta_critic);
      ema_update(targets[i], critics[i].params());
    }

    // actor: minimize E_s sum_a pi(a|s)[alpha log pi(a|s) - min_i Q_i(s,a)]
    {
      ad::Tape tape;
      const auto p = tape.leaves(policy.params());
      ad::Var loss = ad::constant(tape, 0.0);
      double entropy_acc = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const FeatTransition& tr = buffer.at(idx[j]);
        std::vector<ad::Var> logits = policy.forward(tape, p, tr.s);
        const auto logp = ad::log_softmax(logits);
        std::vector<std::vector<double>> qs;
        for (int i = 0; i < cfg.n_nets; ++i) qs.push_back(critics[i].value(tr.s));
        for (int a2 = 0; a2 < n_actions; ++a2) {
          double qmin = qs[0][a2];
          for (const auto& q : qs) qmin = std::min(qmin, q[a2]);
          loss = loss + ad::exp(logp[a2]) * (alpha * logp[a2] - qmin);
          entropy_acc -= std::exp(tape.value(logp[a2])) * tape.value(logp[a2]);
        }
      }
      loss = loss / static_cast<double>(idx.size());
      tape.backward(loss);
      sgd_step(policy.params(), tape.grads(p), cfg.eta_actor);

      if (cfg.learn_alpha) {
        const double mean_entropy = entropy_acc / static_cast<double>(idx.size());
        const double target = cfg.target_entropy > 0.0
                                  ? cfg.target_entropy
                                  : 0.5 * std::log(static_cast<double>(n_actions));
        // dJ/dalpha = H(pi) - target entropy
        alpha -= cfg.eta_alpha * (mean_entropy - target);
        alpha = std::max(alpha, 1e-8);
        if (!std::isfinite(alpha)) throw std::runtime_error("sac: temperature diverged");
      }
    }
  }

  // final policy entropy over a buffer sample
  double ent = 0.0;
  const int n_eval = static_cast<int>(std::min<std::size_t>(buffer.size(), 256));
  for (int j = 0; j < n_eval; ++j) {
    const auto probs = policy_probs(buffer.at(j).s);
    for (double p : probs)
      if (p > 0.0) ent -= p * std::log(p);
  }
  SacDiscreteResult out{std::move(policy), std::move(critics), alpha,
                        ent / std::max(1, n_eval)};
  return out;
}

// ---------------------------------------------------------------------------
// Continuous-action SAC

SacContinuousState::SacContinuousState(int state_dim, int action_dim, std::uint64_t seed,
                                       double rho)
    : policy(Approximator::mlp(state_dim, {16}, action_dim, Head::Gaussian, Nonlin::Tanh,
                               Rng::derive(seed, 0, "sacc_pi").next_u64())) {
  for (int i = 0; i < 2; ++i) {
    critics.push_back(Approximator::mlp(state_dim + action_dim, {32}, 1, Head::Scalar,
                                        Nonlin::Tanh,
                                        Rng::derive(seed, 10 + i, "sacc_q").next_u64()));
    critic_targets.emplace_back(critics[i].params(), rho);
    critic_opts.emplace_back();
  }
}

GaussianAction gaussian_policy_params(const Approximator& policy, std::span<const double> s) {
  const int k = policy.arch().out_dim;
  const std::vector<double> out = policy.value(s);
  GaussianAction g;
  g.mean.assign(out.begin(), out.begin() + k);
  g.std.resize(k);
  for (int i = 0; i < k; ++i) g.std[i] = std::exp(out[k + i]);
  return g;
}

double gaussian_log_prob(const GaussianAction& g, std::span<const double> a) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double lp = 0.0;
  for (std::size_t i = 0; i < g.mean.size(); ++i) {
    const double z = (a[i] - g.mean[i]) / g.std[i];
    lp += -0.5 * (z * z + kLog2Pi) - std::log(g.std[i]);
  }
  return lp;
}

void sac_continuous_update(SacContinuousState& st, std::span<const BoxTransition> batch,
                           const SacContinuousConfig& cfg, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("sac_continuous_update: empty batch");
  const int adim = st.policy.arch().out_dim;

  // critic targets through a single sampled next action
  std::vector<double> ys(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const BoxTransition& tr = batch[j];
    if (tr.done) {
      ys[j] = tr.r;
      continue;
    }
    const GaussianAction g = gaussian_policy_params(st.policy, tr.s_next);
    std::vector<double> a_next(adim);
    for (int i = 0; i < adim; ++i) a_next[i] = g.mean[i] + g.std[i] * rng.normal();
    std::vector<double> sa(tr.s_next.begin(), tr.s_next.end());
    sa.insert(sa.end(), a_next.begin(), a_next.end());
    double qmin = 1e300;
    for (int i = 0; i < 2; ++i)
      qmin = std::min(qmin, st.critics[i].value_with(st.critic_targets[i].params, sa)[0]);
    ys[j] = tr.r + cfg.gamma * (qmin - cfg.alpha * gaussian_log_prob(g, a_next));
  }

  for (int i = 0; i < 2; ++i) {
    ad::Tape tape;
    const auto p = tape.leaves(st.critics[i].params());
    ad::Var loss = ad::constant(tape, 0.0);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const BoxTransition& tr = batch[j];
      std::vector<double> sa(tr.s.begin(), tr.s.end());
      sa.insert(sa.end(), tr.a.begin(), tr.a.end());
      loss = loss + 0.5 * ad::square(st.critics[i].forward(tape, p, sa)[0] - ys[j]);
    }
    loss = loss / static_cast<double>(batch.size());
    tape.backward(loss);
    std::vector<double> grad = tape.grads(p);
    if (cfg.rms_scaling) st.critic_opts[i].apply(grad);
    clip_grad_norm(grad, 10.0);
    sgd_step(st.critics[i].params(), grad, cfg.eta_critic);
    ema_update(st.critic_targets[i], st.critics[i].params());
  }

  // actor: reparameterized a~ = mu + sigma * eps; gradient flows through both
  // the log density and the critic input
  {
    ad::Tape tape;
    const auto pa = tape.leaves(st.policy.params());
    const auto pc0 = tape.leaves(st.critics[0].params());
    const auto pc1 = tape.leaves(st.critics[1].params());
    ad::Var loss = ad::constant(tape, 0.0);
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    for (const BoxTransition& tr : batch) {
      const auto out = st.policy.forward(tape, pa, tr.s);  // [mean..., log_std...]
      std::vector<ad::Var> a_tilde(adim);
      ad::Var logp = ad::constant(tape, 0.0);
      for (int i = 0; i < adim; ++i) {
        const double eps = rng.normal();
        const ad::Var sigma = ad::exp(out[adim + i]);
        a_tilde[i] = out[i] + eps * sigma;
        // log N(a~; mu, sigma) with a~ on the sample path: z = eps exactly
        logp = logp - 0.5 * (eps * eps + kLog2Pi) - out[adim + i];
      }
      // min of the two critics at (s, a~), through the action vars
      auto critic_at = [&](int idx, std::span<const ad::Var> params) {
        const Approximator& critic = st.critics[idx];
        std::vector<ad::Var> cur;
        for (double sv : tr.s) cur.push_back(ad::constant(tape, sv));
        for (int i = 0; i < adim; ++i) cur.push_back(a_tilde[i]);
        std::size_t si = 0;
        const auto& slices = critic.slices();
        const auto& arch = critic.arch();
        for (std::size_t l = 0; l <= arch.hidden.size(); ++l) {
          const ParamSlice w = slices[si++];
          const ParamSlice* bias = arch.bias ? &slices[si++] : nullptr;
          std::vector<ad::Var> next;
          for (int r = 0; r < w.rows; ++r) {
            ad::Var acc = params[w.offset + static_cast<std::size_t>(r) * w.cols] * cur[0];
            for (int c2 = 1; c2 < w.cols; ++c2)
              acc = acc + params[w.offset + static_cast<std::size_t>(r) * w.cols + c2] * cur[c2];
            if (bias) acc = acc + params[bias->offset + r];
            if (l < arch.hidden.size())
              acc = arch.nonlin == Nonlin::ReLU ? ad::relu(acc) : ad::tanh(acc);
            next.push_back(acc);
          }
          cur = std::move(next);
        }
        return cur[0];
      };
      const ad::Var q = ad::vmin(critic_at(0, pc0), critic_at(1, pc1));
      loss = loss + cfg.alpha * logp - q;
    }
    loss = loss / static_cast<double>(batch.size());
    tape.backward(loss);
    std::vector<double> grad = tape.grads(pa);
    if (cfg.rms_scaling) st.actor_opt.apply(grad);
    clip_grad_norm(grad, 10.0);
    sgd_step(st.policy.params(), grad, cfg.eta_actor);
  }
}

// ---------------------------------------------------------------------------
// Continuous control

std::vector<double> Lqr1dEnv::reset(Rng& rng) {
  s_ = rng.uniform(-1.0, 1.0);
  t_ = 0;
  return {s_};
}

BoxStep Lqr1dEnv::step(std::span<const double> a, Rng&) {
  const double act = std::clamp(a[0], action_low(), action_high());
  const double r = -(s_ * s_ + 0.1 * act * act);
  s_ = std::clamp(s_ + act, -4.0, 4.0);
  ++t_;
  BoxStep out;
  out.s_next = {s_};
  out.r = r;
  out.done = false;
  out.truncated = t_ >= horizon_;
  return out;
}

namespace {

// actor output squashed into the action box
double actor_action_value(const Approximator& actor, std::span<const double> params,
                          std::span<const double> s, double lo, double hi) {
  const double raw = actor.value_with(params, s)[0];
  return 0.5 * (hi + lo) + 0.5 * (hi - lo) * std::tanh(raw);
}

ad::Var actor_action_var(const Approximator& actor, ad::Tape& tape, std::span<const ad::Var> params,
                         std::span<const double> s, double lo, double hi) {
  const ad::Var raw = actor.forward(tape, params, s)[0];
  return 0.5 * (hi + lo) + (0.5 * (hi - lo)) * ad::tanh(raw);
}

}  // namespace

void td3_update(Td3Bundle& b, std::span<const BoxTransition> batch, const Td3Config& cfg,
                long update_index, double lo, double hi, Rng& rng) {
  const int n_critics = cfg.ddpg_mode ? 1 : 2;

  // smoothed target action and clipped-double target value
  std::vector<double> ys(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const BoxTransition& tr = batch[j];
    if (tr.done) {
      ys[j] = tr.r;
      continue;
    }
    double a_tilde = actor_action_value(b.actor, b.actor_target.params, tr.s_next, lo, hi);
    if (!cfg.ddpg_mode && cfg.target_noise > 0.0) {
      const double noise =
          std::clamp(rng.normal(0.0, cfg.target_noise), -cfg.noise_clip, cfg.noise_clip);
      a_tilde = std::clamp(a_tilde + noise, lo, hi);
    }
    std::vector<double> sa(tr.s_next.begin(), tr.s_next.end());
    sa.push_back(a_tilde);
    double q = 1e300;
    for (int i = 0; i < n_critics; ++i)
      q = std::min(q, b.critics[i].value_with(b.critic_targets[i].params, sa)[0]);
    ys[j] = std::clamp(tr.r + cfg.gamma * q, cfg.target_clip_lo, cfg.target_clip_hi);
  }

  for (int i = 0; i < n_critics; ++i) {
    ad::Tape tape;
    const auto p = tape.leaves(b.critics[i].params());
    ad::Var loss = ad::constant(tape, 0.0);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const BoxTransition& tr = batch[j];
      std::vector<double> sa(tr.s.begin(), tr.s.end());
      sa.insert(sa.end(), tr.a.begin(), tr.a.end());
      loss = loss + 0.5 * ad::square(b.critics[i].forward(tape, p, sa)[0] - ys[j]);
    }
    loss = loss / static_cast<double>(batch.size());
    tape.backward(loss);
    std::vector<double> grad = tape.grads(p);
    if (cfg.rms_scaling) b.critic_opts[i].apply(grad);
    clip_grad_norm(grad, 10.0);
    sgd_step(b.critics[i].params(), grad, cfg.eta_critic);
    ema_update(b.critic_targets[i], b.critics[i].params());
  }

  // delayed actor update: ascend Q_1(s, mu(s)) through the action
  if (update_index >= cfg.actor_start &&
      update_index % (cfg.ddpg_mode ? 1 : cfg.policy_delay) == 0) {
    ad::Tape tape;
    const auto pa = tape.leaves(b.actor.params());
    const auto pc = tape.leaves(b.critics[0].params());  // read-only in this step
    ad::Var objective = ad::constant(tape, 0.0);
    for (const BoxTransition& tr : batch) {
      const ad::Var a = actor_action_var(b.actor, tape, pa, tr.s, lo, hi);
      // critic forward with the action as a tape node: splice manually
      std::vector<ad::Var> sa;
      for (double sv : tr.s) sa.push_back(ad::constant(tape, sv));
      sa.push_back(a);
      // inline critic forward over Var inputs
      const Approximator& critic = b.critics[0];
      std::vector<ad::Var> cur = sa;
      std::size_t si = 0;
      const auto& slices = critic.slices();
      const auto& arch = critic.arch();
      for (std::size_t l = 0; l <= arch.hidden.size(); ++l) {
        const ParamSlice w = slices[si++];
        const ParamSlice* bias = arch.bias ? &slices[si++] : nullptr;
        std::vector<ad::Var> next;
        for (int r = 0; r < w.rows; ++r) {
          ad::Var acc = pc[w.offset + static_cast<std::size_t>(r) * w.cols] * cur[0];
          for (int c = 1; c < w.cols; ++c)
            acc = acc + pc[w.offset + static_cast<std::size_t>(r) * w.cols + c] * cur[c];
          if (bias) acc = acc + pc[bias->offset + r];
          if (l < arch.hidden.size())
            acc = arch.nonlin == Nonlin::ReLU ? ad::relu(acc) : ad::tanh(acc);
          next.push_back(acc);
        }
        cur = std::move(next);
      }
      objective = objective + cur[0];
    }
    objective = objective / static_cast<double>(batch.size());
    tape.backward(objective);
    std::vector<double> grad = tape.grads(pa);
    for (double& g : grad) g = -g;  // ascend
    if (cfg.rms_scaling) b.actor_opt.apply(grad);
    clip_grad_norm(grad, 10.0);
    sgd_step(b.actor.params(), grad, cfg.eta_actor);
    ema_update(b.actor_target, b.actor.params());
  }
}

double box_policy_cost(BoxEnv& env,
                       const std::function<std::vector<double>(std::span<const double>)>& pi,
                       int episodes, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0, "eval");
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> s = env.reset(rng);
    double cost = 0.0;
    for (;;) {
      const BoxStep res = env.step(pi(s), rng);
      cost -= res.r;
      if (res.done || res.truncated) break;
      s = res.s_next;
    }
    total += cost;
  }
  return total / episodes;
}

Td3Result td3_train(BoxEnv& env, const Td3Config& cfg, std::uint64_t seed) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_upd = Rng::derive(seed, 0, "update");

  const double lo = env.action_low(), hi = env.action_high();
  const int sdim = env.state_dim();
  Td3Bundle b{Approximator::mlp(sdim, {16}, 1, Head::Scalar, Nonlin::Tanh,
                                Rng::derive(seed, 2, "init").next_u64()),
              TargetCopy(),
              {},
              {},
              RmsScaler{},
              {}};
  b.actor_target = TargetCopy(b.actor.params(), cfg.rho);
  for (int i = 0; i < 2; ++i) {
    b.critics.push_back(Approximator::mlp(sdim + 1, {32}, 1, Head::Scalar, Nonlin::Tanh,
                                          Rng::derive(seed, 10 + i, "init").next_u64()));
    b.critic_targets.emplace_back(b.critics[i].params(), cfg.rho);
    b.critic_opts.emplace_back();
  }

  ReplayBuffer<BoxTransition> buffer(cfg.buffer_capacity);
  long steps = 0, updates = 0;
  std::vector<double> s = env.reset(rng_env);
  while (steps < cfg.max_steps) {
    std::vector<double> a(1);
    if (steps < cfg.warmup) {
      a[0] = rng_act.uniform(lo, hi);
    } else {
      a[0] = std::clamp(actor_action_value(b.actor, b.actor.params(), s, lo, hi) +
                            rng_act.normal(0.0, cfg.explore_noise),
                        lo, hi);
    }
    const BoxStep res = env.step(a, rng_env);
    buffer.push(BoxTransition{s, a, res.r, res.s_next, res.done});
    ++steps;
    s = (res.done || res.truncated) ? env.reset(rng_env) : res.s_next;

    if (steps >= cfg.warmup) {
      const auto idx = buffer.sample_uniform(cfg.batch_size, rng_upd);
      std::vector<BoxTransition> batch;
      batch.reserve(idx.size());
      for (std::size_t i : idx) batch.push_back(buffer.at(i));
      td3_update(b, batch, cfg, updates++, lo, hi, rng_upd);
    }
  }

  Td3Result out{std::move(b), 0.0};
  auto pi = [&out, lo, hi](std::span<const double> state) {
    return std::vector<double>{
        actor_action_value(out.bundle.actor, out.bundle.actor.params(), state, lo, hi)};
  };
  out.final_avg_cost = box_policy_cost(env, pi, 64, seed + 1000003);
  return out;
}

LqrOracle lqr_grid_search(int horizon, double k_lo, double k_hi, int points) {
  LqrOracle best{0.0, 1e300};
  Lqr1dEnv env(horizon);
  for (int i = 0; i < points; ++i) {
    const double k = k_lo + (k_hi - k_lo) * i / (points - 1);
    auto pi = [k, &env](std::span<const double> s) {
      return std::vector<double>{std::clamp(-k * s[0], env.action_low(), env.action_high())};
    };
    const double cost = box_policy_cost(env, pi, 64, 1234567);
    if (cost < best.best_cost) {
      best.best_cost = cost;
      best.best_k = k;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Training drivers

namespace {

double greedy_eval(Env& env, const FeatureMap& phi, const ActorCritic& ac, double gamma,
                   int episodes, int horizon, Rng& rng) {
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    int s = env.reset(rng);
    double g = 0.0, w = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const auto probs = ac.policy_probs(phi(s));
      const StepResult res = env.step(argmax(std::span<const double>(probs)), rng);
      g += w * res.r;
      w *= gamma;
      if (res.done || res.truncated) break;
      s = res.s_next;
    }
    total += g;
  }
  return total / episodes;
}

PgTrainResult pg_train_impl(Env& env, const FeatureMap& phi, int feature_dim,
                            const PgTrainConfig& cfg, std::uint64_t seed, bool use_ppo) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_eval = Rng::derive(seed, 0, "eval");

  ActorCritic ac = ActorCritic::separate(
      Approximator::linear(feature_dim, env.n_actions(), Head::PerAction, false,
                           Rng::derive(seed, 3, "init").next_u64()),
      Approximator::linear(feature_dim, 1, Head::Scalar, false,
                           Rng::derive(seed, 4, "init").next_u64()));

  PgTrainResult out;
  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    csv << "update,policy_loss,value_loss,entropy,clip_fraction,mean_return\n";
  }
  long steps = 0, updates = 0;
  long next_eval = cfg.eval_every;
  int env_state = -1, ep_steps = 0;
  const int seg_len = use_ppo ? cfg.ac.rollout_len : cfg.episode_horizon;
  while (steps < cfg.max_steps) {
    PgSegment seg = collect_segment(env, phi, ac, seg_len, cfg.episode_horizon, rng_act, rng_env,
                                    false, &env_state, &ep_steps);
    if (seg.steps.empty()) continue;
    steps += static_cast<long>(seg.steps.size());
    const AcUpdateStats st =
        use_ppo ? ppo_update(ac, seg, cfg.ac, cfg.eta) : a2c_update(ac, seg, cfg.ac, cfg.eta);
    if (csv.is_open()) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g", updates, st.policy_loss,
                    st.value_loss, st.entropy, st.clip_fraction, st.mean_return);
      csv << buf << "\n";
    }
    ++updates;
    if (steps >= next_eval) {
      next_eval += cfg.eval_every;
      const double ret = greedy_eval(env, phi, ac, cfg.ac.gamma, cfg.eval_episodes,
                                     cfg.episode_horizon, rng_eval);
      out.eval_returns.emplace_back(steps, ret);
    }
  }
  out.final_greedy_return =
      greedy_eval(env, phi, ac, cfg.ac.gamma, cfg.eval_episodes, cfg.episode_horizon, rng_eval);
  return out;
}

}  // namespace

PgTrainResult a2c_train(Env& env, const FeatureMap& phi, int feature_dim, const PgTrainConfig& cfg,
                        std::uint64_t seed) {
  return pg_train_impl(env, phi, feature_dim, cfg, seed, false);
}

PgTrainResult ppo_train(Env& env, const FeatureMap& phi, int feature_dim, const PgTrainConfig& cfg,
                        std::uint64_t seed) {
  return pg_train_impl(env, phi, feature_dim, cfg, seed, true);
}

}  // namespace rlkit
