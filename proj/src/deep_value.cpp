#include "rlkit/deep_value.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "rlkit/linalg.hpp"

namespace rlkit {

QNetworkBundle::QNetworkBundle(Approximator proto, int n_nets, double gamma_, double rho,
                               int subset_m_)
    : gamma(gamma_), subset_m(subset_m_) {
  if (n_nets < 1) throw std::invalid_argument("QNetworkBundle: need at least one net");
  if (subset_m < 1 || subset_m > n_nets) throw std::invalid_argument("QNetworkBundle: M must be in [1, N]");
  for (int i = 0; i < n_nets; ++i) {
    Approximator net = proto;
    if (i > 0) {
      // decorrelate ensemble members
      Rng rng = Rng::derive(0x51ed, i, "bundle_init");
      for (double& p : net.params()) p += rng.uniform(-0.01, 0.01);
    }
    targets.emplace_back(net.params(), rho);
    online.push_back(std::move(net));
  }
}

double dqn_target(const FeatTransition& t, const QNetworkBundle& bundle, TargetVariant variant,
                  std::span<const int> redq_subset) {
  if (t.done) return t.r;  // every bootstrap term is masked
  const double discount = std::pow(bundle.gamma, t.n);
  const int n_actions = bundle.n_actions();

  switch (variant) {
    case TargetVariant::Vanilla: {
      const auto q = bundle.online[0].value_with(bundle.targets[0].params, t.s_next);
      return t.r + discount * q[argmax(q)];
    }
    case TargetVariant::Double: {
      // online net proposes, target net evaluates
      const auto q_online = bundle.online[0].value(t.s_next);
      const int a_star = argmax(q_online);
      const auto q_target = bundle.online[0].value_with(bundle.targets[0].params, t.s_next);
      return t.r + discount * q_target[a_star];
    }
    case TargetVariant::Clipped: {
      if (bundle.n_nets() < 2) throw std::invalid_argument("clipped target needs >= 2 nets");
      double best = 1e300;
      for (int i = 0; i < 2; ++i) {
        const auto q_online = bundle.online[i].value(t.s_next);
        const int a_star = argmax(q_online);
        const auto q_target = bundle.online[i].value_with(bundle.targets[i].params, t.s_next);
        best = std::min(best, q_target[a_star]);
      }
      return t.r + discount * best;
    }
    case TargetVariant::Redq: {
      std::vector<int> def;
      if (redq_subset.empty()) {
        for (int i = 0; i < bundle.subset_m; ++i) def.push_back(i);
        redq_subset = def;
      }
      if (static_cast<int>(redq_subset.size()) > bundle.n_nets())
        throw std::invalid_argument("redq target: M exceeds N");
      // y = r + gamma^n max_a' min_{i in M} Q_target_i(s', a')
      double best = -1e300;
      for (int a = 0; a < n_actions; ++a) {
        double lo = 1e300;
        for (int i : redq_subset) {
          const auto q = bundle.online[i].value_with(bundle.targets[i].params, t.s_next);
          lo = std::min(lo, q[a]);
        }
        best = std::max(best, lo);
      }
      return t.r + discount * best;
    }
  }
  throw std::logic_error("dqn_target: unknown variant");
}

std::vector<double> dueling_combine(double v, std::span<const double> advantages) {
  double mean_adv = 0.0;
  for (double a : advantages) mean_adv += a;
  mean_adv /= static_cast<double>(advantages.size());
  std::vector<double> q(advantages.size());
  for (std::size_t a = 0; a < advantages.size(); ++a) q[a] = v + advantages[a] - mean_adv;
  return q;
}

DqnUpdateStats dqn_update(QNetworkBundle& bundle, std::span<const FeatTransition> batch, double eta,
                          TargetVariant variant, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("dqn_update: empty batch");
  DqnUpdateStats stats;

  // one shared subset draw per update in redq mode
  std::vector<int> subset;
  if (variant == TargetVariant::Redq) {
    std::vector<int> pool(bundle.n_nets());
    for (int i = 0; i < bundle.n_nets(); ++i) pool[i] = i;
    for (int i = 0; i < bundle.subset_m; ++i) {
      const int j = i + rng.uniform_int(bundle.n_nets() - i);
      std::swap(pool[i], pool[j]);
      subset.push_back(pool[i]);
    }
  }

  std::vector<double> targets(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j)
    targets[j] = dqn_target(batch[j], bundle, variant, subset);

  for (int i = 0; i < bundle.n_nets(); ++i) {
    ad::Tape tape;
    const auto p = tape.leaves(bundle.online[i].params());
    ad::Var loss = ad::constant(tape, 0.0);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto q = bundle.online[i].forward(tape, p, batch[j].s);
      stats.mean_q += tape.value(q[batch[j].a]) / static_cast<double>(batch.size() * bundle.n_nets());
      // half-MSE toward the detached target
      loss = loss + 0.5 * ad::square(q[batch[j].a] - targets[j]);
    }
    loss = loss / static_cast<double>(batch.size());
    stats.loss += tape.value(loss) / bundle.n_nets();
    tape.backward(loss);
    std::vector<double> grad = tape.grads(p);
    clip_grad_norm(grad, bundle.grad_clip);
    if (!sgd_step(bundle.online[i].params(), grad, eta)) {
      stats.skipped = true;
      continue;
    }
    if (bundle.target_period > 0) {
      if ((bundle.updates_done + 1) % bundle.target_period == 0)
        bundle.targets[i].params = bundle.online[i].params();
    } else {
      ema_update(bundle.targets[i], bundle.online[i].params());
    }
  }
  ++bundle.updates_done;
  return stats;
}

FeatureMap one_hot_features(int n_states) {
  return [n_states](int s) {
    std::vector<double> phi(n_states, 0.0);
    phi[s] = 1.0;
    return phi;
  };
}

DqnRunResult dqn_control(Env& env, const FeatureMap& phi, int feature_dim, const DqnConfig& cfg,
                         std::uint64_t seed) {
  Rng rng_act = Rng::derive(seed, 0, "act");
  Rng rng_env = Rng::derive(seed, 0, "env");
  Rng rng_buf = Rng::derive(seed, 0, "buffer");

  Approximator proto = Approximator::linear(feature_dim, env.n_actions(), Head::PerAction, false,
                                            Rng::derive(seed, 0, "init").next_u64());
  QNetworkBundle bundle(std::move(proto), cfg.n_nets, cfg.gamma, cfg.rho, cfg.subset_m);
  bundle.target_period = cfg.target_period;
  ReplayBuffer<FeatTransition> buffer(cfg.buffer_capacity);
  DqnRunResult out{std::move(bundle), {}, 0};
  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    csv << "step,loss,mean_q,epsilon,return_on_eval\n";
  }
  double last_return = 0.0;

  while (out.steps < cfg.max_steps) {
    int s = env.reset(rng_env);
    double ep_return = 0.0, discount = 1.0;
    for (int t = 0; t < cfg.episode_horizon && out.steps < cfg.max_steps; ++t) {
      const std::vector<double> feat = phi(s);
      int a;
      if (rng_act.bernoulli(cfg.epsilon)) {
        a = rng_act.uniform_int(env.n_actions());
      } else {
        const auto q = out.bundle.online[0].value(feat);
        a = argmax(q);
      }
      const StepResult res = env.step(a, rng_env);
      buffer.push(FeatTransition{feat, a, res.r, phi(res.s_next), res.done, 1});
      ++out.steps;
      ep_return += discount * res.r;
      discount *= cfg.gamma;

      if (static_cast<long>(buffer.size()) >= cfg.warmup) {
        const auto idx = buffer.sample_uniform(cfg.batch_size, rng_buf);
        std::vector<FeatTransition> batch;
        batch.reserve(idx.size());
        for (std::size_t i : idx) batch.push_back(buffer.at(i));
        const DqnUpdateStats st = dqn_update(out.bundle, batch, cfg.eta, cfg.variant, rng_buf);
        if (csv.is_open()) {
          char buf[192];
          std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g", out.steps, st.loss,
                        st.mean_q, cfg.epsilon, last_return);
          csv << buf << "\n";
        }
      }
      s = res.s_next;
      if (res.done || res.truncated) break;
    }
    out.episode_returns.push_back(ep_return);
    last_return = ep_return;
  }
  return out;
}

BairdRunResult baird_td0_run(const BairdProblem& problem, const PolicyTable& behavior,
                             const PolicyTable& target, double eta, int sweeps, double gamma) {
  const TabularMDP& mdp = problem.mdp;
  const int n = mdp.n_states;
  const int d = problem.n_features;

  // stationary distribution of the behavior chain by power iteration
  std::vector<double> mu(n, 1.0 / n);
  for (int it = 0; it < 5000; ++it) {
    std::vector<double> next(n, 0.0);
    for (int s = 0; s < n; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double pa = behavior.at(s, a);
        if (pa == 0.0) continue;
        for (int s2 = 0; s2 < n; ++s2) next[s2] += mu[s] * pa * mdp.trans_at(s, a, s2);
      }
    double delta = 0.0;
    for (int s = 0; s < n; ++s) delta = std::max(delta, std::fabs(next[s] - mu[s]));
    mu = std::move(next);
    if (delta < 1e-14) break;
  }

  // classic divergence initialization: large weight on the bottom state's
  // own component
  BairdRunResult out;
  out.w.assign(d, 1.0);
  out.w[6] = 10.0;

  auto v_of = [&](std::span<const double> w, int s) {
    double v = 0.0;
    for (int k = 0; k < d; ++k) v += problem.features[s * d + k] * w[k];
    return v;
  };
  auto expected_td = [&](std::span<const double> w, int s) {
    // expectation under the target policy (equals the importance-corrected
    // behavior expectation since rho * b = pi)
    double delta = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = target.at(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) {
        const double p = mdp.trans_at(s, a, s2);
        if (p > 0.0) delta += pa * p * (mdp.reward_at(s, a, s2) + gamma * v_of(w, s2) - v_of(w, s));
      }
    }
    return delta;
  };

  // One sweep = n expected TD(0) updates, allocated across states by the
  // behavior visitation (uniform behavior makes this one update per state).
  out.w_norm_trace.reserve(sweeps);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    std::vector<double> grad(d, 0.0);
    for (int s = 0; s < n; ++s) {
      const double weight = mu[s] * static_cast<double>(n);
      if (weight == 0.0) continue;
      const double delta = expected_td(out.w, s);
      for (int k = 0; k < d; ++k) grad[k] += weight * delta * problem.features[s * d + k];
    }
    for (int k = 0; k < d; ++k) out.w[k] += eta * grad[k];
    out.w_norm_trace.push_back(sup_norm(out.w));
    if (!std::isfinite(out.w_norm_trace.back())) break;
  }

  double td_err = 0.0;
  for (int s = 0; s < n; ++s)
    if (mu[s] > 1e-12) td_err = std::max(td_err, std::fabs(expected_td(out.w, s)));
  out.final_td_error = td_err;
  return out;
}

}  // namespace rlkit
