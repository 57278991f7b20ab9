#include "rlkit/selftest.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "rlkit/bandit.hpp"
#include "rlkit/deep_value.hpp"
#include "rlkit/dp.hpp"
#include "rlkit/env.hpp"
#include "rlkit/harness.hpp"
#include "rlkit/linalg.hpp"
#include "rlkit/planner.hpp"
#include "rlkit/policy_opt.hpp"
#include "rlkit/stats.hpp"
#include "rlkit/successor.hpp"
#include "rlkit/tabular_td.hpp"

namespace rlkit::selftest {

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << "FAILED: " << what << "; ";
    }
  }
  void note(const std::string& s) { detail << s << "; "; }
};

int worker_count(int workers) {
  return workers > 0 ? workers : std::max(1u, std::thread::hardware_concurrency());
}

// run fn(seed) for seeds [0, n) across threads, collecting results in order
std::vector<double> seed_fan(int n, int workers, const std::function<double(int)>& fn) {
  std::vector<double> out(n, 0.0);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(worker_count(workers), n); ++w)
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        out[i] = fn(i);
      }
    });
  for (auto& t : pool) t.join();
  return out;
}

// --------------------------------------------------------------------------

Check criterion_gridworld_qstar() {
  Check c;
  const TabularMDP grid = make_gridworld_1d();
  const auto t0 = std::chrono::steady_clock::now();
  const SolveResult s09 = value_iteration(grid, 0.9, 1e-12);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  c.expect(std::fabs(s09.q.at(kGridS3, kGridDown) - 1.0) < 1e-6, "Q*(s3,down) = 1.0");
  c.expect(std::fabs(s09.q.at(kGridS2, kGridDown) - 0.9) < 1e-6, "Q*(s2,down) = 0.9");
  c.expect(std::fabs(s09.q.at(kGridS1, kGridDown) - 0.81) < 1e-6, "Q*(s1,down) = 0.81");
  c.expect(ms < 10.0, "value iteration under 10 ms");

  const SolveResult s0 = value_iteration(grid, 0.0, 1e-12);
  for (int st : {kGridS1, kGridS2, kGridS3})
    for (int a = 0; a < 2; ++a) {
      const double want = (st == kGridS3 && a == kGridDown) ? 1.0 : 0.0;
      c.expect(std::fabs(s0.q.at(st, a) - want) < 1e-12, "gamma=0 panel");
    }
  const SolveResult s1 = value_iteration(grid, 1.0, 1e-12);
  for (int st : {kGridS1, kGridS2, kGridS3})
    for (int a = 0; a < 2; ++a) {
      // moving up from s1 absorbs without reward; every other pair reaches
      // the goal with certainty at gamma=1
      const double want = (st == kGridS1 && a == kGridUp) ? 0.0 : 1.0;
      c.expect(std::fabs(s1.q.at(st, a) - want) < 1e-9, "gamma=1 panel");
    }
  c.note("VI " + std::to_string(ms) + " ms");
  return c;
}

Check criterion_contraction() {
  Check c;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const TabularMDP m = make_random_mdp(5 + trial % 2, 2 + trial % 2, 9000 + trial);
    const double gamma = 0.9;
    const SolveResult sol = value_iteration(m, gamma, 1e-13);
    Rng rng(100 + trial);
    ValueTable v{std::vector<double>(m.n_states), gamma};
    for (double& x : v.v) x = rng.uniform(-5.0, 5.0);
    for (int sweep = 0; sweep < 10; ++sweep) {
      const ValueTable next = bellman_backup(v, m, gamma);
      const double before = sup_norm_diff(v.v, sol.v.v);
      const double after = sup_norm_diff(next.v, sol.v.v);
      if (before > 1e-9) worst_ratio = std::max(worst_ratio, after / before);
      c.expect(after <= gamma * before + 1e-12, "per-sweep sup-norm contraction");
      v = next;
    }
  }
  c.note("worst ratio " + std::to_string(worst_ratio));
  return c;
}

Check criterion_vi_pi_rtdp() {
  Check c;
  double worst_vi_pi = 0.0, worst_rtdp = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_s = 3 + trial % 4;  // |S| <= 6
    const int n_a = 2 + trial % 2;  // |A| <= 3
    const TabularMDP m = make_random_mdp(n_s, n_a, 11000 + trial);
    const SolveResult vi = value_iteration(m, 0.9, 1e-13);
    const PolicyIterResult pi = policy_iteration(m, 0.9);
    worst_vi_pi = std::max(worst_vi_pi, sup_norm_diff(vi.v.v, pi.v.v));
    Rng rng(trial);
    const ValueTable rt = rtdp(m, 0, 3000, 0.9, 1.0, rng, 40);
    // rows are everywhere-positive: every state is reachable from state 0
    worst_rtdp = std::max(worst_rtdp, sup_norm_diff(rt.v, vi.v.v));
  }
  c.expect(worst_vi_pi < 1e-8, "VI/PI greedy value agreement 1e-8");
  c.expect(worst_rtdp < 1e-3, "RTDP agreement 1e-3 on the reachable set");
  c.note("vi-pi " + std::to_string(worst_vi_pi) + ", rtdp " + std::to_string(worst_rtdp));
  return c;
}

Check criterion_q_learning_trace() {
  Check c;
  const TabularMDP grid = make_gridworld_1d();
  QTable q(5, 2, grid.terminal);
  q_learning_step(q, {kGridS3, kGridDown, 1.0, kGridGoal, true}, EtaSchedule::constant(1.0), 0.9);
  c.expect(q.at(kGridS3, kGridDown) == 1.0, "episode 1 sets Q(S3,down) = 1");
  q_learning_step(q, {kGridS2, kGridDown, 0.0, kGridS3, false}, EtaSchedule::constant(1.0), 0.9);
  c.expect(std::fabs(q.at(kGridS2, kGridDown) - 0.9) < 1e-15, "episode 2 sets Q(S2,down) = 0.9");
  return c;
}

Check criterion_baird() {
  Check c;
  const BairdProblem p = make_baird();
  const BairdRunResult off = baird_td0_run(p, p.behavior, p.target, 0.01, 1000);
  c.expect(off.w_norm_trace.back() > 1e3, "off-policy norm exceeds 1e3 within 1000 sweeps");
  const BairdRunResult on = baird_td0_run(p, p.target, p.target, 0.01, 20000);
  c.expect(std::isfinite(on.w_norm_trace.back()) && on.w_norm_trace.back() < 20.0,
           "on-policy norm stays bounded");
  c.expect(on.final_td_error < 1e-6, "on-policy TD error under 1e-6");
  c.note("off-policy final norm " + std::to_string(off.w_norm_trace.back()));
  return c;
}

Check criterion_maxbias(int workers) {
  Check c;
  const int runs = 1000, episodes = 300;
  std::vector<double> left_q(runs), left_dq(runs), late_dq(runs);
  seed_fan(runs, workers, [&](int run) {
    ControlConfig cfg;
    cfg.gamma = 1.0;
    cfg.epsilon = 0.1;
    cfg.eta = EtaSchedule::constant(0.1);
    MaxBiasEnv e1(10, -0.1, 1.0), e2(10, -0.1, 1.0);
    const DoubleQResult rq = maxbias_control(e1, episodes, false, MaxBiasEnv::kLeft, cfg, 40000 + run);
    const DoubleQResult rdq = maxbias_control(e2, episodes, true, MaxBiasEnv::kLeft, cfg, 40000 + run);
    double a = 0.0, b = 0.0, late = 0.0;
    for (int ep = 100; ep < episodes; ++ep) {
      a += rq.start_action_taken[ep];
      b += rdq.start_action_taken[ep];
    }
    for (int ep = 250; ep < episodes; ++ep) late += rdq.start_action_taken[ep];
    left_q[run] = a / (episodes - 100);
    left_dq[run] = b / (episodes - 100);
    late_dq[run] = late / 50.0;
    return 0.0;
  });
  const double f_q = mean(left_q), f_dq = mean(left_dq), f_late = mean(late_dq);
  c.expect(f_q > f_dq, "Q-learning picks 'left' more than double-Q over episodes 100-300");
  c.expect(std::fabs(f_late - 0.05) <= 0.03, "double-Q near the 5% floor by episode 300");
  c.note("left freq q " + std::to_string(f_q) + ", double " + std::to_string(f_dq) +
         ", double late " + std::to_string(f_late));
  return c;
}

Check criterion_bandits(int workers) {
  Check c;
  const std::vector<double> arms = {0.5, 0.6};
  const long horizon = 10000;
  const int n_seeds = 50;
  std::vector<double> r_eps(n_seeds), r_ts(n_seeds), r_ucb(n_seeds), r_ts_half(n_seeds);
  seed_fan(n_seeds, workers, [&](int seed) {
    BanditConfig cfg;
    cfg.algo = BanditAlgo::EpsilonGreedy;
    cfg.epsilon = 0.1;
    Rng r1 = Rng::derive(seed, 1, "bandit_eps");
    r_eps[seed] = run_bernoulli_bandit(arms, horizon, cfg, r1).back().cum_regret;
    cfg.algo = BanditAlgo::Thompson;
    Rng r2 = Rng::derive(seed, 1, "bandit_ts");
    const auto rows = run_bernoulli_bandit(arms, horizon, cfg, r2);
    r_ts[seed] = rows.back().cum_regret;
    r_ts_half[seed] = rows[horizon / 2 - 1].cum_regret;
    cfg.algo = BanditAlgo::Ucb;
    cfg.ucb_c = 1.0;
    Rng r3 = Rng::derive(seed, 1, "bandit_ucb");
    r_ucb[seed] = run_bernoulli_bandit(arms, horizon, cfg, r3).back().cum_regret;
    return 0.0;
  });
  const double eps_m = mean(r_eps), ts_m = mean(r_ts), ucb_m = mean(r_ucb);
  c.expect(ts_m < eps_m, "Thompson regret below eps-greedy");
  c.expect(ucb_m < eps_m, "UCB regret below eps-greedy");
  const double ratio = std::max(ts_m, ucb_m) / std::max(1e-9, std::min(ts_m, ucb_m));
  c.expect(ratio < 3.0, "Thompson and UCB regret within 3x of each other");
  c.expect(ts_m / std::max(1e-9, mean(r_ts_half)) < 1.9, "Thompson sublinearity L_2T/L_T < 1.9");

  // reference probability rows at eps=0.1 / tau=1, two decimals (with
  // half-ulp slack where the published rounding sits on the boundary)
  const double rows_in[6][2] = {{1.00, 9.00}, {4.00, 6.00}, {4.90, 5.10},
                                {5.05, 4.95}, {7.00, 3.00}, {8.00, 2.00}};
  const double eps_rows[6][2] = {{0.05, 0.95}, {0.05, 0.95}, {0.05, 0.95},
                                 {0.95, 0.05}, {0.95, 0.05}, {0.95, 0.05}};
  const double tau_rows[6][2] = {{0.00, 1.00}, {0.12, 0.88}, {0.45, 0.55},
                                 {0.53, 0.48}, {0.98, 0.02}, {1.00, 0.00}};
  for (int i = 0; i < 6; ++i) {
    const std::vector<double> scores = {rows_in[i][0], rows_in[i][1]};
    const auto boltz = boltzmann_policy(scores, 1.0);
    const int star = argmax(std::span<const double>(scores));
    const double eps_p0 = star == 0 ? 0.95 : 0.05;
    c.expect(std::fabs(eps_p0 - eps_rows[i][0]) < 5e-3, "eps-greedy table row");
    c.expect(std::fabs(boltz[0] - tau_rows[i][0]) < 5.2e-3, "boltzmann table row (a1)");
    c.expect(std::fabs(boltz[1] - tau_rows[i][1]) < 5.2e-3, "boltzmann table row (a2)");
  }
  c.note("regret eps " + std::to_string(eps_m) + ", ts " + std::to_string(ts_m) + ", ucb " +
         std::to_string(ucb_m));
  return c;
}

Check criterion_gae_vtrace() {
  Check c;
  Rng rng(33);
  // recursive GAE vs explicit sums
  for (double lambda : {0.0, 0.3, 0.7, 1.0}) {
    const int n = 20;
    std::vector<double> r(n), v(n + 1);
    std::vector<std::uint8_t> d(n, 0);
    for (double& x : r) x = rng.uniform(-1.0, 1.0);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    d[13] = 1;
    const double gamma = 0.97;
    const AdvantageBatch b = gae(r, v, d, gamma, lambda);
    for (int t = 0; t < n; ++t) {
      double brute = 0.0, w = 1.0;
      for (int l = t; l < n; ++l) {
        const double mask = d[l] ? 0.0 : 1.0;
        brute += w * (r[l] + gamma * mask * v[l + 1] - v[l]);
        if (d[l]) break;
        w *= gamma * lambda;
      }
      c.expect(std::fabs(b.advantage[t] - brute) < 1e-10, "GAE equals the explicit delta sum");
    }
  }
  // lambda extremes
  {
    const std::vector<double> r = {0.5, -0.25, 2.0};
    const std::vector<double> v = {0.1, 0.2, 0.3, 0.4};
    const std::vector<std::uint8_t> d = {0, 0, 0};
    const AdvantageBatch a0 = gae(r, v, d, 0.9, 0.0);
    for (int t = 0; t < 3; ++t)
      c.expect(std::fabs(a0.advantage[t] - (r[t] + 0.9 * v[t + 1] - v[t])) < 1e-12,
               "lambda 0 is the TD(0) advantage");
    const AdvantageBatch a1 = gae(r, v, d, 0.9, 1.0);
    double g0 = r[0] + 0.9 * r[1] + 0.81 * r[2] + 0.729 * v[3];
    c.expect(std::fabs(a1.advantage[0] - (g0 - v[0])) < 1e-12, "lambda 1 is MC minus baseline");
  }
  // on-policy V-trace vs n-step
  {
    const FeatureMap phi = one_hot_features(3);
    PgSegment seg;
    std::vector<double> values = {0.4, -0.2, 0.3, 0.1, 0.25, 0.6};
    std::vector<double> target_logp(5);
    Rng rng2(4);
    for (int t = 0; t < 5; ++t) {
      const double p = rng2.uniform(0.2, 0.8);
      seg.steps.push_back({phi(t % 3), 0, rng2.uniform(-1.0, 1.0), false, std::log(p)});
      target_logp[t] = std::log(p);
    }
    seg.truncated = true;
    const auto v = vtrace_targets(seg, values, target_logp, 0.9, 1.0, 1.0);
    for (int i = 0; i < 5; ++i) {
      double g = 0.0, w = 1.0;
      for (int k = i; k < 5; ++k) {
        g += w * seg.steps[k].reward;
        w *= 0.9;
      }
      g += w * values[5];
      c.expect(std::fabs(v[i] - g) < 1e-10, "on-policy V-trace equals the n-step target");
    }
  }
  return c;
}

Check criterion_pg_correctness() {
  Check c;
  // two non-terminal states; softmax policy over one-hot features
  TabularMDP m = TabularMDP::zeros(3, 2);
  m.terminal[2] = 1;
  m.trans_at(0, 0, 2) = 1.0;
  m.reward_at(0, 0, 2) = 0.1;
  m.trans_at(0, 1, 1) = 1.0;
  m.trans_at(1, 0, 2) = 1.0;
  m.reward_at(1, 0, 2) = 1.0;
  m.trans_at(1, 1, 2) = 1.0;
  m.reward_at(1, 1, 2) = 0.2;
  for (int a = 0; a < 2; ++a) m.trans_at(2, a, 2) = 1.0;
  m.init_dist[0] = 1.0;
  m.validate();
  const double gamma = 0.9;

  Approximator policy = Approximator::linear(3, 2, Head::PerAction, false, 0);
  for (double& p : policy.params()) p = 0.0;
  policy.params()[0] = 0.3;   // logit(a0|s0)
  policy.params()[1] = -0.2;  // logit(a0|s1)
  policy.params()[3] = 0.1;   // logit(a1|s1)

  auto policy_table = [&policy]() {
    PolicyTable pi = PolicyTable::uniform(3, 2);
    const FeatureMap phi = one_hot_features(3);
    for (int s = 0; s < 3; ++s) {
      const auto logits = policy.value(phi(s));
      const double mx = std::max(logits[0], logits[1]);
      const double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
      pi.at(s, 0) = e0 / (e0 + e1);
      pi.at(s, 1) = e1 / (e0 + e1);
    }
    return pi;
  };

  // exact gradient of J = V(s0) by central differences over the logits
  const double h = 1e-5;
  std::vector<double> exact(policy.n_params(), 0.0);
  for (int i = 0; i < policy.n_params(); ++i) {
    const double orig = policy.params()[i];
    policy.params()[i] = orig + h;
    const double hi = policy_evaluation_exact(m, policy_table(), gamma).v[0];
    policy.params()[i] = orig - h;
    const double lo = policy_evaluation_exact(m, policy_table(), gamma).v[0];
    policy.params()[i] = orig;
    exact[i] = (hi - lo) / (2.0 * h);
  }

  // REINFORCE estimator mean over 1e5 episodes (gamma^t weighting on)
  const FeatureMap phi = one_hot_features(3);
  TabularEnv env(m);
  Rng rng_env = Rng::derive(7, 0, "pg_env");
  Rng rng_act = Rng::derive(7, 0, "pg_act");
  const int episodes = 100000;
  std::vector<std::vector<double>> grads(policy.n_params());
  const PolicyTable pi = policy_table();
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng_env);
    const Trajectory tau = rollout(env, pi, 10, rng_env, true);
    PgSegment seg;
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const Transition& t = tau.steps[i];
      seg.steps.push_back({phi(t.s), t.a, t.r, t.done, std::log(tau.behavior_prob[i])});
    }
    (void)rng_act;
    Approximator work = policy;
    const auto g = reinforce_update(work, seg, nullptr, 0.0, gamma, true);
    for (int i = 0; i < policy.n_params(); ++i) grads[i].push_back(g[i]);
  }
  double worst_sigma = 0.0;
  for (int i = 0; i < policy.n_params(); ++i) {
    const double m_i = mean(grads[i]);
    const double se = sample_std(grads[i]) / std::sqrt(static_cast<double>(episodes));
    const double sigmas = std::fabs(m_i - exact[i]) / std::max(se, 1e-12);
    worst_sigma = std::max(worst_sigma, sigmas);
    c.expect(std::fabs(m_i - exact[i]) <= 3.0 * se + 1e-12,
             "REINFORCE mean within 3 standard errors of the exact gradient");
  }

  // autodiff gradients vs central differences on an MLP
  Approximator mlp = Approximator::mlp(4, {16, 16}, 1, Head::Scalar, Nonlin::Tanh, 23);
  Rng rng(9);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    ad::Tape tape;
    const auto p = tape.leaves(mlp.params());
    const auto out = mlp.forward(tape, p, x);
    tape.backward(out[0]);
    const auto analytic = tape.grads(p);
    for (int i = 0; i < mlp.n_params(); ++i) {
      const double orig = mlp.params()[i];
      mlp.params()[i] = orig + 1e-5;
      const double hi2 = mlp.value(x)[0];
      mlp.params()[i] = orig - 1e-5;
      const double lo2 = mlp.value(x)[0];
      mlp.params()[i] = orig;
      const double fd = (hi2 - lo2) / 2e-5;
      const double scale = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
      worst_rel = std::max(worst_rel, std::fabs(fd - analytic[i]) / scale);
    }
  }
  c.expect(worst_rel < 1e-4, "autodiff matches central differences (rel err < 1e-4)");
  c.note("worst sigma " + std::to_string(worst_sigma) + ", worst fd rel " +
         std::to_string(worst_rel));
  return c;
}

Check criterion_control(int workers) {
  Check c;
  const double optimal = 0.81;

  // tabular-softmax A2C and PPO on the gridworld
  for (const bool use_ppo : {false, true}) {
    const auto final_returns = seed_fan(10, workers, [&](int seed) {
      TabularEnv env(make_gridworld_1d());
      PgTrainConfig cfg;
      cfg.ac.gamma = 0.9;
      cfg.ac.gae_lambda = 1.0;
      cfg.ac.lambda_td = 0.5;
      cfg.ac.lambda_ent = 0.01;
      cfg.eta = use_ppo ? 0.1 : 0.2;
      cfg.ac.rollout_len = 128;
      cfg.max_steps = 50000;
      cfg.episode_horizon = 50;
      const PgTrainResult res = use_ppo
                                    ? ppo_train(env, one_hot_features(5), 5, cfg, 500 + seed)
                                    : a2c_train(env, one_hot_features(5), 5, cfg, 500 + seed);
      return res.final_greedy_return;
    });
    int pass = 0;
    for (double r : final_returns)
      if (r >= 0.99 * optimal) ++pass;
    c.expect(pass >= 8, std::string(use_ppo ? "PPO" : "A2C") + " reaches 0.99x optimal on 8/10 seeds");
    c.note(std::string(use_ppo ? "ppo" : "a2c") + " pass " + std::to_string(pass) + "/10");
  }

  // SAC-discrete entropy ordering over the temperature sweep
  {
    TabularMDP m2 = TabularMDP::zeros(2, 2);
    m2.trans_at(0, 0, 0) = 1.0;
    m2.reward_at(0, 0, 0) = 1.0;
    m2.trans_at(0, 1, 1) = 1.0;
    m2.reward_at(0, 1, 1) = 0.2;
    m2.trans_at(1, 0, 0) = 1.0;
    m2.reward_at(1, 0, 0) = 0.6;
    m2.trans_at(1, 1, 1) = 1.0;
    m2.reward_at(1, 1, 1) = 0.1;
    m2.init_dist = {1.0, 0.0};
    m2.validate();
    const double alphas[3] = {0.01, 0.1, 1.0};
    std::vector<double> entropies(3, 0.0);
    for (int k = 0; k < 3; ++k) {
      const auto ents = seed_fan(10, workers, [&](int seed) {
        TabularEnv env(m2, 32);
        SacDiscreteConfig cfg;
        cfg.alpha = alphas[k];
        cfg.gamma = 0.9;
        cfg.max_steps = 6000;
        return sac_discrete_train(env, one_hot_features(2), 2, cfg, 900 + seed).mean_policy_entropy;
      });
      entropies[k] = mean(ents);
    }
    c.expect(entropies[0] < entropies[1] && entropies[1] < entropies[2],
             "SAC entropy increases with alpha over {0.01, 0.1, 1}");
    c.note("sac entropies " + std::to_string(entropies[0]) + " " + std::to_string(entropies[1]) +
           " " + std::to_string(entropies[2]));
  }

  // TD3 vs the proportional-controller oracle
  {
    const LqrOracle oracle = lqr_grid_search();
    const auto costs = seed_fan(10, workers, [&](int seed) {
      Lqr1dEnv env(20);
      Td3Config cfg;
      cfg.target_clip_lo = -400.0;
      cfg.target_clip_hi = 50.0;
      return td3_train(env, cfg, 1300 + seed).final_avg_cost;
    });
    int pass = 0;
    for (double cost : costs)
      if (cost <= 1.5 * oracle.best_cost) ++pass;
    c.expect(pass >= 8, "TD3 within 1.5x of the grid-search controller on 8/10 seeds");
    c.note("td3 pass " + std::to_string(pass) + "/10, oracle " + std::to_string(oracle.best_cost));
  }
  return c;
}

Check criterion_planning() {
  Check c;
  // CEM on the 1-d quadratic
  {
    BoxPlanProblem p;
    p.model = [](std::span<const double> s, std::span<const double> a, Rng&) {
      return BoxModelStep{{s[0]}, -(a[0] - 3.0) * (a[0] - 3.0), true};
    };
    p.action_dim = 1;
    p.a_lo = {-10.0};
    p.a_hi = {10.0};
    p.horizon = 1;
    CemConfig cfg;
    cfg.iterations = 50;
    Rng rng(41);
    const std::vector<double> m0 = {0.0}, s0 = {2.0};
    const CemResult r = cem_plan(p, std::vector<double>{0.0}, cfg, m0, s0, rng);
    c.expect(std::fabs(r.mean[0] - 3.0) < 1e-2, "CEM mean within 1e-2 of the optimum in 50 iters");
  }
  // MCTS on the two-armed tree
  {
    DiscretePlanProblem p;
    p.model = [](int, int a, Rng&) { return ModelStep{1, a == 0 ? 1.0 : 0.0, true}; };
    p.n_actions = 2;
    p.horizon = 1;
    p.gamma = 1.0;
    Rng rng(42);
    const MctsResult r = mcts_search(
        p, 0, [](int) { return std::vector<double>{0.5, 0.5}; }, 100, 1.25, 1.0, rng);
    const double share =
        static_cast<double>(r.visit_counts[0]) / (r.visit_counts[0] + r.visit_counts[1]);
    c.expect(share >= 0.7, "MCTS visit share on the rewarding arm >= 0.7 at 100 sims");
    c.note("mcts share " + std::to_string(share));
  }
  // MPC with the exact model reproduces the DP trajectory
  {
    const TabularMDP grid = make_gridworld_1d();
    const DiscretePlanProblem p = problem_from_mdp(grid, 4, 0.9);
    TabularEnv env(grid);
    Rng rng(43);
    env.reset(rng);
    const Trajectory tau = mpc_controller(
        env, [&p](int s, Rng&) { return exhaustive_plan(p, s); }, 10, rng);
    bool optimal_path = tau.size() == 3;
    for (const Transition& t : tau.steps) optimal_path &= (t.a == kGridDown);
    c.expect(optimal_path, "MPC with a covering horizon follows the DP-optimal trajectory");
  }
  // SMC on the rewarding branch
  {
    DiscretePlanProblem p;
    p.model = [](int s, int a, Rng&) {
      if (s == 99 || a == 1) return ModelStep{99, 0.0, true};
      return ModelStep{s + 1, 1.0, s + 1 >= 3};
    };
    p.n_actions = 2;
    p.horizon = 3;
    p.gamma = 1.0;
    const auto v = [](int s) { return s == 99 ? 0.0 : 3.0 - static_cast<double>(s); };
    SmcConfig cfg;
    cfg.n_particles = 64;
    cfg.horizon = 3;
    Rng rng(44);
    int hits = 0;
    const int trials = 300;
    for (int i = 0; i < trials; ++i)
      hits += smc_mpc(p, 0, [](int) { return std::vector<double>{0.5, 0.5}; }, v, cfg, rng) == 0;
    const double freq = static_cast<double>(hits) / trials;
    c.expect(freq >= 0.9, "SMC picks the rewarding branch at least 90% of the time at N=64");
    c.note("smc freq " + std::to_string(freq));
  }
  return c;
}

Check criterion_successor() {
  Check c;
  // TD-learned SR vs the closed form
  {
    const TabularMDP m = make_random_mdp(5, 2, 77);
    const PolicyTable pi = PolicyTable::uniform(5, 2);
    const double gamma = 0.7;
    const SRMatrix exact = sr_closed_form(m, pi, gamma);
    const SRMatrix learned = sr_td_learn(m, pi, gamma, 64000000, 5);
    const double err = sup_norm_diff(learned.m, exact.m);
    c.expect(err < 1e-3, "TD-learned SR within 1e-3 of the closed form");
    c.note("sr err " + std::to_string(err));
  }
  // value synthesis vs exact evaluation
  {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      RandomMdpOptions opt;
      opt.next_state_rewards = true;
      const TabularMDP m = make_random_mdp(6, 3, 21000 + trial, opt);
      const PolicyTable pi = PolicyTable::uniform(6, 3);
      const SRMatrix sr = sr_closed_form(m, pi, 0.9);
      std::vector<double> r_next(6, 0.0);
      for (int s2 = 0; s2 < 6; ++s2) r_next[s2] = m.reward_at(0, 0, s2);
      const auto v_sr = value_from_sr(sr, r_next);
      const ValueTable v_exact = policy_evaluation_exact(m, pi, 0.9);
      worst = std::max(worst, sup_norm_diff(v_sr, v_exact.v));
    }
    c.expect(worst < 1e-8, "value_from_sr matches exact policy evaluation within 1e-8");
    c.note("value err " + std::to_string(worst));
  }
  // GPI dominance on the two-goal task
  {
    const int n_interior = 5, n = n_interior + 2;
    const CumulantFn one_hot = [n](int s) {
      std::vector<double> out(n, 0.0);
      out[s] = 1.0;
      return out;
    };
    std::vector<double> r_left(n, 0.0), r_right(n, 0.0);
    r_left[0] = 1.0;
    r_right[n - 1] = 1.0;
    const TabularMDP chain = make_two_goal_chain(n_interior, r_left);
    std::vector<int> go_left(n, 0), go_right(n, 1);
    const PolicyTable pi_left = PolicyTable::deterministic(n, 2, go_left);
    const PolicyTable pi_right = PolicyTable::deterministic(n, 2, go_right);
    const double gamma = 0.9;
    std::vector<SFTable> library;
    library.push_back(sf_closed_form(chain, pi_left, one_hot, n, gamma));
    library.push_back(sf_closed_form(chain, pi_right, one_hot, n, gamma));

    std::vector<double> w_mix(n, 0.0);
    w_mix[0] = 0.7;
    w_mix[n - 1] = 0.4;
    std::vector<int> gpi_acts(n, 0);
    for (int s = 0; s < n; ++s) gpi_acts[s] = gpi_action(library, w_mix, s);
    const PolicyTable gpi_pi = PolicyTable::deterministic(n, 2, gpi_acts);
    const TabularMDP task = make_two_goal_chain(n_interior, w_mix);
    const auto v_gpi = policy_evaluation_exact(task, gpi_pi, gamma).v;
    const auto v_l = policy_evaluation_exact(task, pi_left, gamma).v;
    const auto v_r = policy_evaluation_exact(task, pi_right, gamma).v;
    bool dominated = true;
    for (int s = 0; s < n; ++s) dominated &= v_gpi[s] >= std::max(v_l[s], v_r[s]) - 1e-8;
    c.expect(dominated, "GPI value dominates both constituent policies");
  }
  return c;
}

Check criterion_shaping() {
  Check c;
  double worst_shift = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const TabularMDP m = make_random_mdp(5, 3, 31000 + trial);
    Rng rng(600 + trial);
    std::vector<double> phi(5);
    for (double& x : phi) x = rng.uniform(-2.0, 2.0);
    const double gamma = 0.9;
    const TabularMDP shaped = shape_rewards(m, phi, gamma);
    const SolveResult base = value_iteration(m, gamma, 1e-13);
    const SolveResult mod = value_iteration(shaped, gamma, 1e-13);
    for (int s = 0; s < 5; ++s) {
      const int a_base = argmax(std::span<const double>(base.q.q.data() + s * 3, 3));
      const int a_mod = argmax(std::span<const double>(mod.q.q.data() + s * 3, 3));
      c.expect(a_base == a_mod, "greedy policy unchanged by potential shaping");
      for (int a = 0; a < 3; ++a)
        worst_shift = std::max(worst_shift,
                               std::fabs(mod.q.at(s, a) - (base.q.at(s, a) - phi[s])));
    }
  }
  c.expect(worst_shift < 1e-9, "Q* shifts by exactly -phi(s)");
  c.note("worst shift err " + std::to_string(worst_shift));
  return c;
}

Check criterion_harness() {
  Check c;
  // IQM boundary rule
  std::vector<double> xs(100);
  for (int i = 0; i < 100; ++i) xs[i] = i + 1.0;
  c.expect(std::fabs(iqm(xs) - 50.5) < 1e-12, "IQM(1..100) = 50.5");

  // end-to-end byte determinism of report(run(cfg, seed))
  ExperimentConfig cfg;
  cfg.algo = "q_learning";
  cfg.env = "gridworld_1d";
  cfg.algo_params = {{"gamma", 0.9}, {"epsilon", 0.2}, {"eta", 1.0}, {"eta_power", 0.8}};
  cfg.n_seeds = 5;
  cfg.master_seed = 12345;
  cfg.steps = 4000;
  cfg.eval_every = 1000;
  cfg.workers = 2;
  auto read_file = [](const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() / "rlkit_selftest";
  fs::remove_all(tmp);
  cfg.out_dir = (tmp / "a").string();
  const std::string csv_a = run_and_write(cfg);
  const std::string rep_a = cfg.out_dir + "/report.csv";
  cfg.out_dir = (tmp / "b").string();
  const std::string csv_b = run_and_write(cfg);
  const std::string rep_b = cfg.out_dir + "/report.csv";
  c.expect(read_file(csv_a) == read_file(csv_b), "run CSV bytes are identical across reruns");
  c.expect(read_file(rep_a) == read_file(rep_b), "report CSV bytes are identical across reruns");
  fs::remove_all(tmp);
  return c;
}

struct Criterion {
  int id;
  std::string name;
  std::function<Check(int)> fn;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "gridworld Q* panels", [](int) { return criterion_gridworld_qstar(); }},
      {2, "Bellman contraction", [](int) { return criterion_contraction(); }},
      {3, "VI/PI/RTDP agreement", [](int) { return criterion_vi_pi_rtdp(); }},
      {4, "Q-learning worked example", [](int) { return criterion_q_learning_trace(); }},
      {5, "Baird deadly-triad demo", [](int) { return criterion_baird(); }},
      {6, "maximization bias", [](int w) { return criterion_maxbias(w); }},
      {7, "bandit regret ordering", [](int w) { return criterion_bandits(w); }},
      {8, "GAE / lambda-return / V-trace oracles", [](int) { return criterion_gae_vtrace(); }},
      {9, "policy-gradient correctness", [](int) { return criterion_pg_correctness(); }},
      {10, "control at toy scale", [](int w) { return criterion_control(w); }},
      {11, "planning", [](int) { return criterion_planning(); }},
      {12, "successor suite", [](int) { return criterion_successor(); }},
      {13, "shaping invariance", [](int) { return criterion_shaping(); }},
      {14, "harness determinism and IQM", [](int) { return criterion_harness(); }},
  };
  return list;
}

}  // namespace

CriterionResult run_one(int id, int workers) {
  for (const Criterion& cr : criteria()) {
    if (cr.id != id) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Check c = cr.fn(workers);
    CriterionResult res;
    res.id = cr.id;
    res.name = cr.name;
    res.pass = c.ok;
    res.detail = c.detail.str();
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }
  throw std::invalid_argument("unknown criterion id " + std::to_string(id));
}

std::vector<CriterionResult> run_all(int workers) {
  std::vector<CriterionResult> out;
  for (const Criterion& cr : criteria()) out.push_back(run_one(cr.id, workers));
  return out;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const CriterionResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace rlkit::selftest
