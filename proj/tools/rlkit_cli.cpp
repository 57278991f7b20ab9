// Command-line surface: solve (dynamic programming on a tabular env),
// train (an RL algorithm), bandit, plan, report (CSV aggregation) and
// selftest (the oracle suites).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rlkit/bandit.hpp"
#include "rlkit/dp.hpp"
#include "rlkit/env.hpp"
#include "rlkit/harness.hpp"
#include "rlkit/linalg.hpp"
#include "rlkit/planner.hpp"
#include "rlkit/selftest.hpp"

namespace fs = std::filesystem;
using namespace rlkit;

namespace {

TabularMDP env_mdp(const std::string& id, std::uint64_t seed) {
  if (id == "gridworld_1d") return make_gridworld_1d();
  if (id == "random_mdp") return make_random_mdp(6, 3, seed);
  if (id == "two_goal_chain") {
    std::vector<double> r(7, 0.0);
    r.front() = 1.0;
    r.back() = 1.0;
    return make_two_goal_chain(5, r);
  }
  throw CLI::ValidationError("env", "no tabular model for env id '" + id + "'");
}

int cmd_solve(const std::string& env_id, double gamma, std::uint64_t seed,
              const std::string& out_dir) {
  const TabularMDP mdp = env_mdp(env_id, seed);
  const SolveResult vi = value_iteration(mdp, gamma, 1e-12);
  const PolicyIterResult pi = policy_iteration(mdp, gamma);
  std::printf("value iteration: %d sweeps; policy iteration: %d improvement rounds\n", vi.sweeps,
              pi.iterations);
  for (int s = 0; s < mdp.n_states; ++s) {
    int greedy = 0;
    for (int a = 0; a < mdp.n_actions; ++a)
      if (vi.greedy.at(s, a) == 1.0) greedy = a;
    std::printf("V*(%d) = %.6f  greedy a = %d\n", s, vi.v.v[s], greedy);
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    mdp.save_json(out_dir + "/" + env_id + ".json");
    nlohmann::json j;
    j["gamma"] = gamma;
    j["v_star"] = vi.v.v;
    j["q_star"] = vi.q.q;
    std::ofstream f(out_dir + "/" + env_id + "_solution.json");
    f << j.dump(2) << "\n";
    std::printf("wrote %s\n", (out_dir + "/" + env_id + "_solution.json").c_str());
  }
  return 0;
}

int cmd_bandit(const std::string& algo, long steps, int n_seeds, std::uint64_t master_seed,
               const std::string& out_dir, double epsilon, double tau, double ucb_c) {
  BanditConfig cfg;
  cfg.algo = bandit_algo_from_string(algo);
  cfg.epsilon = epsilon;
  cfg.tau = tau;
  cfg.ucb_c = ucb_c;
  const std::vector<double> arms = {0.5, 0.6};
  fs::create_directories(out_dir);
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng = Rng::derive(master_seed, seed, "bandit");
    const auto rows = run_bernoulli_bandit(arms, steps, cfg, rng);
    const std::string path = out_dir + "/bandit_" + algo + "_seed" + std::to_string(seed) + ".csv";
    save_bandit_csv(path, rows);
    std::printf("%s: final cumulative regret %.4f -> %s\n", algo.c_str(),
                rows.back().cum_regret, path.c_str());
  }
  return 0;
}

int cmd_plan(const std::string& planner, const std::string& env_id, std::uint64_t seed,
             const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<PlanTraceEntry> trace;
  Rng rng = Rng::derive(seed, 0, "plan");
  if (planner == "cem" || planner == "mppi" || planner == "random_shooting") {
    // 1-d quadratic objective demo: maximize -(a-3)^2
    BoxPlanProblem p;
    p.model = [](std::span<const double> s, std::span<const double> a, Rng&) {
      return BoxModelStep{{s[0]}, -(a[0] - 3.0) * (a[0] - 3.0), true};
    };
    p.action_dim = 1;
    p.a_lo = {-10.0};
    p.a_hi = {10.0};
    p.horizon = 1;
    const std::vector<double> s0 = {0.0};
    if (planner == "cem") {
      CemConfig cfg;
      const std::vector<double> m0 = {0.0}, sd0 = {2.0};
      const CemResult r = cem_plan(p, s0, cfg, m0, sd0, rng);
      std::printf("cem: mean %.4f score %.6f\n", r.mean[0], r.mean_score);
      trace.push_back({0, 0, {r.mean[0]}});
    } else if (planner == "mppi") {
      MppiConfig cfg;
      MppiState st;
      for (int step = 0; step < 10; ++step) {
        const BoxPlan plan = mppi_plan(p, s0, cfg, st, rng);
        trace.push_back({step, 0, {plan.first_action[0], plan.score}});
      }
      std::printf("mppi: final head action %.4f\n", trace.back().scores[0]);
    } else {
      const BoxPlan plan = random_shooting(p, s0, 256, {}, {}, rng);
      std::printf("random shooting: head action %.4f score %.6f\n", plan.first_action[0],
                  plan.score);
      trace.push_back({0, 0, {plan.first_action[0], plan.score}});
    }
  } else if (planner == "mcts" || planner == "smc") {
    const TabularMDP mdp = env_mdp(env_id, seed);
    const DiscretePlanProblem p = problem_from_mdp(mdp, 6, 0.9);
    TabularEnv env(mdp);
    env.reset(rng);
    int step_idx = 0;
    const Trajectory tau = mpc_controller(
        env,
        [&](int s, Rng& r) {
          if (planner == "mcts") {
            const MctsResult res = mcts_search(
                p, s,
                [&mdp](int) {
                  return std::vector<double>(mdp.n_actions, 1.0 / mdp.n_actions);
                },
                100, 1.25, 1.0, r);
            const int a = argmax(std::span<const double>(res.policy));
            trace.push_back({step_idx++, a, res.policy});
            return a;
          }
          SmcConfig cfg;
          const int a = smc_mpc(
              p, s,
              [&mdp](int) { return std::vector<double>(mdp.n_actions, 1.0 / mdp.n_actions); },
              [](int) { return 0.0; }, cfg, r);
          trace.push_back({step_idx++, a, {}});
          return a;
        },
        20, rng);
    std::printf("%s: executed %zu steps, return %.4f\n", planner.c_str(), tau.size(),
                tau.discounted_return(0.9));
  } else {
    throw CLI::ValidationError("planner", "unknown planner '" + planner + "'");
  }
  const std::string path = out_dir + "/plan_" + planner + ".json";
  save_plan_trace_json(path, trace);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabular and toy-scale reinforcement learning workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", algo, env_id = "gridworld_1d", planner = "cem";
  std::uint64_t seed = 0;
  int n_seeds = 1, workers = 0;
  long steps = 0;
  double gamma = 0.9, epsilon = 0.1, tau = 1.0, ucb_c = 1.0;
  std::vector<std::string> csv_paths;

  auto* solve = app.add_subcommand("solve", "dynamic programming on a tabular env");
  solve->add_option("--env", env_id, "environment id")->capture_default_str();
  solve->add_option("--gamma", gamma, "discount")->capture_default_str();
  solve->add_option("--seed", seed, "master seed")->capture_default_str();
  solve->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "train an RL algorithm");
  train->add_option("--config", config_path, "JSON experiment config");
  train->add_option("--algo", algo, "algorithm id (overrides config)");
  train->add_option("--env", env_id, "environment id (overrides config)");
  train->add_option("--seed", seed, "master seed (overrides config)");
  train->add_option("--seeds", n_seeds, "number of runs (overrides config)");
  train->add_option("--steps", steps, "environment steps (overrides config)");
  train->add_option("--out", out_dir, "output directory (overrides config)");
  train->add_option("--workers", workers, "worker threads (overrides config)");

  auto* bandit = app.add_subcommand("bandit", "bernoulli bandit runs");
  bandit->add_option("--algo", algo, "eps_greedy | boltzmann | ucb | thompson")->required();
  bandit->add_option("--steps", steps, "horizon")->default_val(10000);
  bandit->add_option("--seeds", n_seeds, "number of runs")->capture_default_str();
  bandit->add_option("--seed", seed, "master seed")->capture_default_str();
  bandit->add_option("--out", out_dir, "output directory")->capture_default_str();
  bandit->add_option("--epsilon", epsilon, "eps-greedy rate")->capture_default_str();
  bandit->add_option("--tau", tau, "softmax temperature")->capture_default_str();
  bandit->add_option("--ucb-c", ucb_c, "UCB exploration constant")->capture_default_str();

  auto* plan = app.add_subcommand("plan", "decision-time planning demos");
  plan->add_option("--planner", planner, "cem | mppi | random_shooting | mcts | smc")
      ->capture_default_str();
  plan->add_option("--env", env_id, "environment id for tree planners")->capture_default_str();
  plan->add_option("--seed", seed, "master seed")->capture_default_str();
  plan->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* rep = app.add_subcommand("report", "aggregate train CSVs (IQM with bootstrap CI)");
  rep->add_option("csvs", csv_paths, "input CSV paths")->required();
  rep->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* self = app.add_subcommand("selftest", "run the acceptance criteria");
  self->add_option("--workers", workers, "worker threads")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(env_id, gamma, seed, out_dir);

    if (train->parsed()) {
      ExperimentConfig cfg;
      if (!config_path.empty()) cfg = ExperimentConfig::from_json_file(config_path);
      // flags override file values
      if (!algo.empty()) cfg.algo = algo;
      if (train->count("--env")) cfg.env = env_id;
      if (train->count("--seed")) cfg.master_seed = seed;
      if (train->count("--seeds")) cfg.n_seeds = n_seeds;
      if (train->count("--steps")) cfg.steps = steps;
      if (train->count("--out")) cfg.out_dir = out_dir;
      if (train->count("--workers")) cfg.workers = workers;
      if (cfg.algo.empty() || cfg.env.empty())
        throw CLI::ValidationError("train", "need --config or both --algo and --env");
      const std::string csv = run_and_write(cfg);
      std::printf("wrote %s and %s/report.csv\n", csv.c_str(), cfg.out_dir.c_str());
      return 0;
    }

    if (bandit->parsed())
      return cmd_bandit(algo, steps, n_seeds, seed, out_dir, epsilon, tau, ucb_c);

    if (plan->parsed()) return cmd_plan(planner, env_id, seed, out_dir);

    if (rep->parsed()) {
      const Report r = report(csv_paths);
      fs::create_directories(out_dir);
      const std::string path = out_dir + "/report.csv";
      write_report_csv(path, r);
      std::printf("wrote %s (%zu aggregate rows)\n", path.c_str(), r.rows.size());
      return 0;
    }

    if (self->parsed()) {
      const auto results = selftest::run_all(workers);
      for (const auto& r : results)
        std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.empty() ? "" : " -- ",
                    r.detail.c_str());
      return selftest::all_passed(results) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
