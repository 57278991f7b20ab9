#include "rlkit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "rlkit/dp.hpp"
#include "rlkit/env.hpp"
#include "rlkit/linalg.hpp"
#include "rlkit/policy_opt.hpp"
#include "rlkit/tabular_td.hpp"

namespace rlkit {

using nlohmann::json;

namespace {

const std::vector<std::string> kAlgos = {"q_learning", "sarsa", "double_q", "dyna_q", "a2c", "ppo"};
const std::vector<std::string> kEnvs = {"gridworld_1d", "random_mdp", "maxbias", "two_goal_chain"};

void require_known_keys(const json& j, const std::vector<std::string>& known,
                        const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

std::map<std::string, double> param_map(const json& j, const std::string& where) {
  std::map<std::string, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number())
      throw std::invalid_argument("config: parameter '" + it.key() + "' in " + where +
                                  " must be numeric");
    out[it.key()] = it.value().get<double>();
  }
  return out;
}

double param_or(const std::map<std::string, double>& params, const std::string& key,
                double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::unique_ptr<Env> make_env(const ExperimentConfig& cfg) {
  const auto& p = cfg.env_params;
  if (cfg.env == "gridworld_1d")
    return std::make_unique<TabularEnv>(make_gridworld_1d(),
                                        static_cast<int>(param_or(p, "horizon", 0)));
  if (cfg.env == "random_mdp") {
    RandomMdpOptions opt;
    opt.n_terminal = static_cast<int>(param_or(p, "n_terminal", 0));
    return std::make_unique<TabularEnv>(
        make_random_mdp(static_cast<int>(param_or(p, "n_states", 5)),
                        static_cast<int>(param_or(p, "n_actions", 2)),
                        static_cast<std::uint64_t>(param_or(p, "mdp_seed", 0)), opt),
        static_cast<int>(param_or(p, "horizon", 0)));
  }
  if (cfg.env == "maxbias")
    return make_maxbias(static_cast<int>(param_or(p, "n_b_actions", 10)),
                        param_or(p, "mean", -0.1), param_or(p, "std", 1.0));
  if (cfg.env == "two_goal_chain") {
    const int n_interior = static_cast<int>(param_or(p, "n_interior", 5));
    std::vector<double> r(n_interior + 2, 0.0);
    r.front() = param_or(p, "r_left", 1.0);
    r.back() = param_or(p, "r_right", 1.0);
    return std::make_unique<TabularEnv>(make_two_goal_chain(n_interior, r),
                                        static_cast<int>(param_or(p, "horizon", 0)));
  }
  throw std::invalid_argument("unknown env id: " + cfg.env);
}

// greedy rollout return used as the periodic evaluation metric
double greedy_return(Env& env, const QTable& q, double gamma, int episodes, int horizon, Rng& rng) {
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    int s = env.reset(rng);
    double g = 0.0, w = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const int legal = env.n_legal_actions(s);
      const StepResult res =
          env.step(argmax(std::span<const double>(q.row(s).data(), legal)), rng);
      g += w * res.r;
      w *= gamma;
      if (res.done || res.truncated) break;
      s = res.s_next;
    }
    total += g;
  }
  return total / episodes;
}

RunRecord run_one(const ExperimentConfig& cfg, int run_id) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.run_id = run_id;
  rec.seed = Rng::derive(cfg.master_seed, {static_cast<std::uint64_t>(run_id)}).next_u64();

  const auto& ap = cfg.algo_params;
  const double gamma = param_or(ap, "gamma", 0.9);

  // Q* oracle for tabular envs, for the qerr metric
  std::unique_ptr<Env> env = make_env(cfg);
  std::vector<double> q_star;
  if (auto* te = dynamic_cast<TabularEnv*>(env.get())) {
    if (te->mdp().n_states <= 64 && gamma < 1.0) {
      const SolveResult vi = value_iteration(te->mdp(), gamma, 1e-12);
      q_star = vi.q.q;
    }
  }

  if (cfg.algo == "q_learning" || cfg.algo == "sarsa" || cfg.algo == "dyna_q" ||
      cfg.algo == "double_q") {
    ControlConfig cc;
    cc.gamma = gamma;
    cc.epsilon = param_or(ap, "epsilon", 0.1);
    cc.glie = param_or(ap, "glie", 0.0) != 0.0;
    cc.eta = EtaSchedule{param_or(ap, "eta", 1.0), param_or(ap, "eta_power", 0.8)};
    cc.max_steps = cfg.steps;
    cc.episode_horizon = static_cast<int>(param_or(ap, "episode_horizon", 200));
    if (cfg.algo == "dyna_q")
      cc.dyna_planning_steps = static_cast<int>(param_or(ap, "planning_steps", 10));
    cc.eval_every = cfg.eval_every;

    std::unique_ptr<Env> eval_env = make_env(cfg);
    Rng rng_eval = Rng::derive(rec.seed, 0, "harness_eval");
    cc.eval_hook = [&](long step, const QTable& q) {
      const double ret = greedy_return(*eval_env, q, gamma, 8, cc.episode_horizon, rng_eval);
      rec.rows.push_back({step, 0, "eval_return", ret});
      if (!q_star.empty()) {
        double err = 0.0;
        for (std::size_t i = 0; i < q_star.size(); ++i)
          err = std::max(err, std::fabs(q.q[i] - q_star[i]));
        rec.rows.push_back({step, 0, "qerr", err});
      }
    };
    if (cfg.algo == "double_q") {
      // double-Q runs are episode-driven; emit the final table metrics
      MaxBiasEnv* mb = dynamic_cast<MaxBiasEnv*>(env.get());
      const int episodes = static_cast<int>(param_or(ap, "episodes", 300));
      const DoubleQResult res = maxbias_control(*env, episodes, true,
                                                mb ? MaxBiasEnv::kLeft : 0, cc, rec.seed);
      double freq = 0.0;
      for (auto b : res.start_action_taken) freq += b;
      rec.rows.push_back({cfg.steps, episodes, "start_action_freq",
                          freq / std::max<std::size_t>(1, res.start_action_taken.size())});
    } else if (cfg.algo == "sarsa") {
      sarsa_control(*env, cc, rec.seed);
    } else {
      q_learning_control(*env, cc, rec.seed);
    }
  } else if (cfg.algo == "a2c" || cfg.algo == "ppo") {
    PgTrainConfig pc;
    pc.ac.gamma = gamma;
    pc.ac.gae_lambda = param_or(ap, "gae_lambda", 1.0);
    pc.ac.lambda_td = param_or(ap, "lambda_td", 0.5);
    pc.ac.lambda_ent = param_or(ap, "lambda_ent", 0.01);
    pc.ac.clip_eps = param_or(ap, "clip_eps", 0.2);
    pc.ac.ppo_epochs = static_cast<int>(param_or(ap, "ppo_epochs", 4));
    pc.ac.rollout_len = static_cast<int>(param_or(ap, "rollout_len", 128));
    pc.eta = param_or(ap, "eta", 0.2);
    pc.max_steps = cfg.steps;
    pc.episode_horizon = static_cast<int>(param_or(ap, "episode_horizon", 100));
    pc.eval_every = cfg.eval_every;
    const int n_states = env->n_states();
    const PgTrainResult res = cfg.algo == "a2c"
                                  ? a2c_train(*env, one_hot_features(n_states), n_states, pc, rec.seed)
                                  : ppo_train(*env, one_hot_features(n_states), n_states, pc, rec.seed);
    for (const auto& [step, ret] : res.eval_returns)
      rec.rows.push_back({step, 0, "eval_return", ret});
  } else {
    throw std::invalid_argument("unknown algo id: " + cfg.algo);
  }

  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

const std::vector<std::string>& known_algos() { return kAlgos; }
const std::vector<std::string>& known_envs() { return kEnvs; }

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  require_known_keys(j,
                     {"version", "algo", "env", "algo_params", "env_params", "seeds",
                      "master_seed", "steps", "eval_every", "out", "workers"},
                     "top level");
  ExperimentConfig cfg;
  cfg.version = j.value("version", 1);
  if (cfg.version != 1) throw std::invalid_argument("config: unsupported version");
  if (!j.contains("algo") || !j.contains("env"))
    throw std::invalid_argument("config: algo and env are required");
  cfg.algo = j.at("algo").get<std::string>();
  cfg.env = j.at("env").get<std::string>();
  if (std::find(kAlgos.begin(), kAlgos.end(), cfg.algo) == kAlgos.end())
    throw std::invalid_argument("config: unknown algo id '" + cfg.algo + "'");
  if (std::find(kEnvs.begin(), kEnvs.end(), cfg.env) == kEnvs.end())
    throw std::invalid_argument("config: unknown env id '" + cfg.env + "'");
  if (j.contains("algo_params")) cfg.algo_params = param_map(j.at("algo_params"), "algo_params");
  if (j.contains("env_params")) cfg.env_params = param_map(j.at("env_params"), "env_params");
  cfg.n_seeds = j.value("seeds", 1);
  if (cfg.n_seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
  cfg.master_seed = j.value("master_seed", 0ull);
  cfg.steps = j.value("steps", 10000l);
  if (cfg.steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  cfg.eval_every = j.value("eval_every", 1000l);
  cfg.out_dir = j.value("out", std::string("results"));
  cfg.workers = j.value("workers", 0);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["version"] = version;
  j["algo"] = algo;
  j["env"] = env;
  j["algo_params"] = algo_params;
  j["env_params"] = env_params;
  j["seeds"] = n_seeds;
  j["master_seed"] = master_seed;
  j["steps"] = steps;
  j["eval_every"] = eval_every;
  j["out"] = out_dir;
  j["workers"] = workers;
  return j.dump(2);
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  if (std::find(kAlgos.begin(), kAlgos.end(), cfg.algo) == kAlgos.end())
    throw std::invalid_argument("unknown algo id: " + cfg.algo);
  if (std::find(kEnvs.begin(), kEnvs.end(), cfg.env) == kEnvs.end())
    throw std::invalid_argument("unknown env id: " + cfg.env);
  if (cfg.n_seeds < 1) throw std::invalid_argument("run_experiment: seeds must be >= 1");
  std::vector<RunRecord> records(cfg.n_seeds);
  const int workers = cfg.workers > 0
                          ? cfg.workers
                          : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < std::min(workers, cfg.n_seeds); ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int id = next.fetch_add(1);
        if (id >= cfg.n_seeds) return;
        records[id] = run_one(cfg, id);
      }
    });
  }
  for (auto& t : pool) t.join();
  return records;
}

void write_train_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "run_id,seed,step,episode,metric,value\n";
  char buf[64];
  for (const RunRecord& rec : records) {
    for (const MetricRow& row : rec.rows) {
      std::snprintf(buf, sizeof(buf), "%.17g", row.value);
      f << rec.run_id << "," << rec.seed << "," << row.step << "," << row.episode << ","
        << row.metric << "," << buf << "\n";
    }
  }
}

std::vector<RunRecord> read_train_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "run_id,seed,step,episode,metric,value")
    throw std::runtime_error(path + ":1: bad header for train csv");
  std::map<int, RunRecord> by_run;
  long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    try {
      const int run_id = std::stoi(fields[0]);
      RunRecord& rec = by_run[run_id];
      rec.run_id = run_id;
      rec.seed = std::stoull(fields[1]);
      rec.rows.push_back({std::stol(fields[2]), std::stol(fields[3]), fields[4],
                          std::stod(fields[5])});
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row");
    }
  }
  std::vector<RunRecord> out;
  for (auto& [id, rec] : by_run) out.push_back(std::move(rec));
  return out;
}

Report report(const std::vector<std::string>& csv_paths, int n_resamples, double level) {
  // (metric, step) -> per-run values, keyed deterministically
  std::map<std::pair<std::string, long>, std::vector<double>> cells;
  for (const std::string& path : csv_paths) {
    for (const RunRecord& rec : read_train_csv(path))
      for (const MetricRow& row : rec.rows)
        cells[{row.metric, row.step}].push_back(row.value);
  }
  Report rep;
  for (auto& [key, values] : cells) {
    std::sort(values.begin(), values.end());  // order-free aggregation
    AggregateRow row;
    row.metric = key.first;
    row.step = key.second;
    row.n = static_cast<int>(values.size());
    row.center = values.size() >= 4 ? iqm(values) : mean(values);
    Rng rng = Rng::derive(Rng::hash_tag(key.first), static_cast<std::uint64_t>(key.second),
                          "bootstrap");
    const auto [lo, hi] = bootstrap_ci(values, n_resamples, level, rng);
    row.lo = lo;
    row.hi = hi;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

void write_report_csv(const std::string& path, const Report& rep) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "metric,step,n,iqm,ci_lo,ci_hi\n";
  char a[64], b[64], c[64];
  for (const AggregateRow& row : rep.rows) {
    std::snprintf(a, sizeof(a), "%.17g", row.center);
    std::snprintf(b, sizeof(b), "%.17g", row.lo);
    std::snprintf(c, sizeof(c), "%.17g", row.hi);
    f << row.metric << "," << row.step << "," << row.n << "," << a << "," << b << "," << c << "\n";
  }
}

std::string run_and_write(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto records = run_experiment(cfg);
  const std::string csv = cfg.out_dir + "/" + cfg.algo + "_" + cfg.env + ".csv";
  write_train_csv(csv, records);
  const Report rep = report({csv});
  write_report_csv(cfg.out_dir + "/report.csv", rep);
  return csv;
}

}  // namespace rlkit
