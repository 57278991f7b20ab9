#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlkit/harness.hpp"
#include "rlkit/stats.hpp"

using namespace rlkit;
namespace fs = std::filesystem;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("iqm") {
  SUBCASE("constant vector") {
    const std::vector<double> xs(8, 3.25);
    CHECK(iqm(xs) == 3.25);
  }
  SUBCASE("1..100 under the boundary rule") {
    std::vector<double> xs(100);
    for (int i = 0; i < 100; ++i) xs[i] = i + 1.0;
    CHECK(iqm(xs) == doctest::Approx(50.5).epsilon(1e-14));
  }
  SUBCASE("an extreme outlier among 20 points is trimmed") {
    std::vector<double> xs(20);
    for (int i = 0; i < 20; ++i) xs[i] = i + 1.0;
    const double base = iqm(xs);
    xs[19] = 1e9;
    CHECK(iqm(xs) == doctest::Approx(base).epsilon(1e-14));
  }
  SUBCASE("bounded by min and max, permutation invariant") {
    Rng rng(3);
    std::vector<double> xs(17);
    for (double& x : xs) x = rng.uniform(-10.0, 10.0);
    const double val = iqm(xs);
    double lo = xs[0], hi = xs[0];
    for (double x : xs) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    CHECK(val >= lo);
    CHECK(val <= hi);
    std::reverse(xs.begin(), xs.end());
    CHECK(iqm(xs) == val);
  }
  SUBCASE("too few samples throws") {
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    CHECK_THROWS(iqm(xs));
  }
}

TEST_CASE("bootstrap ci") {
  SUBCASE("constant samples give a zero-width interval") {
    const std::vector<double> xs(10, 4.0);
    Rng rng(1);
    const auto [lo, hi] = bootstrap_ci(xs, 500, 0.95, rng);
    CHECK(lo == 4.0);
    CHECK(hi == 4.0);
  }
  SUBCASE("interval contains the point estimate on gaussian data") {
    Rng data_rng(7);
    std::vector<double> xs(40);
    for (double& x : xs) x = data_rng.normal(2.0, 1.0);
    Rng rng(2);
    const auto [lo, hi] = bootstrap_ci(xs, 2000, 0.95, rng);
    const double point = iqm(xs);
    CHECK(lo <= point);
    CHECK(point <= hi);
  }
  SUBCASE("widths shrink like one over sqrt n") {
    Rng data_rng(9);
    std::vector<double> small(50), big(200);
    for (double& x : small) x = data_rng.normal(0.0, 1.0);
    for (double& x : big) x = data_rng.normal(0.0, 1.0);
    Rng r1(3), r2(4);
    const auto [lo1, hi1] = bootstrap_ci(small, 4000, 0.95, r1);
    const auto [lo2, hi2] = bootstrap_ci(big, 4000, 0.95, r2);
    const double ratio = (hi1 - lo1) / (hi2 - lo2);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.25));
  }
}

TEST_CASE("config parsing") {
  SUBCASE("round trip") {
    const std::string text = R"({"version":1,"algo":"q_learning","env":"gridworld_1d",
      "algo_params":{"gamma":0.9},"seeds":3,"master_seed":7,"steps":500,"eval_every":100,
      "out":"tmp_out"})";
    const ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
    CHECK(cfg.algo == "q_learning");
    CHECK(cfg.n_seeds == 3);
    CHECK(cfg.master_seed == 7);
    const ExperimentConfig back = ExperimentConfig::from_json_text(cfg.to_json_text());
    CHECK(back.algo_params.at("gamma") == 0.9);
  }
  SUBCASE("unknown keys rejected") {
    CHECK_THROWS(ExperimentConfig::from_json_text(
        R"({"algo":"q_learning","env":"gridworld_1d","typo_key":1})"));
  }
  SUBCASE("unknown ids rejected") {
    CHECK_THROWS(ExperimentConfig::from_json_text(R"({"algo":"nope","env":"gridworld_1d"})"));
    CHECK_THROWS(ExperimentConfig::from_json_text(R"({"algo":"q_learning","env":"nope"})"));
  }
  SUBCASE("zero seeds rejected") {
    CHECK_THROWS(ExperimentConfig::from_json_text(
        R"({"algo":"q_learning","env":"gridworld_1d","seeds":0})"));
  }
}

TEST_CASE("run experiment") {
  ExperimentConfig cfg;
  cfg.algo = "q_learning";
  cfg.env = "gridworld_1d";
  cfg.algo_params = {{"gamma", 0.9}, {"epsilon", 0.2}, {"eta", 1.0}, {"eta_power", 0.8}};
  cfg.n_seeds = 4;
  cfg.master_seed = 99;
  cfg.steps = 3000;
  cfg.eval_every = 500;
  cfg.workers = 2;

  SUBCASE("deterministic across repeats and worker counts") {
    const auto a = run_experiment(cfg);
    cfg.workers = 1;
    const auto b = run_experiment(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].rows.size() == b[i].rows.size());
      for (std::size_t j = 0; j < a[i].rows.size(); ++j) {
        CHECK(a[i].rows[j].metric == b[i].rows[j].metric);
        CHECK(a[i].rows[j].value == b[i].rows[j].value);
      }
    }
  }
  SUBCASE("csv round trip") {
    const fs::path tmp = fs::temp_directory_path() / "rlkit_harness_test";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const auto records = run_experiment(cfg);
    const std::string csv = (tmp / "run.csv").string();
    write_train_csv(csv, records);
    const auto back = read_train_csv(csv);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].seed == records[i].seed);
      REQUIRE(back[i].rows.size() == records[i].rows.size());
      for (std::size_t j = 0; j < back[i].rows.size(); ++j) {
        CHECK(back[i].rows[j].metric == records[i].rows[j].metric);
        CHECK(back[i].rows[j].value == doctest::Approx(records[i].rows[j].value).epsilon(1e-15));
      }
    }
    fs::remove_all(tmp);
  }
  SUBCASE("q-learning reaches a near-optimal table on every seed") {
    cfg.steps = 40000;
    cfg.n_seeds = 10;
    const auto records = run_experiment(cfg);
    for (const RunRecord& rec : records) {
      double final_qerr = 1e9;
      for (const MetricRow& row : rec.rows)
        if (row.metric == "qerr") final_qerr = row.value;
      CHECK(final_qerr < 1e-2);
    }
  }
}

TEST_CASE("report aggregation") {
  const fs::path tmp = fs::temp_directory_path() / "rlkit_report_test";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  // hand-written CSV with a known aggregate
  const std::string csv = (tmp / "in.csv").string();
  {
    std::ofstream f(csv);
    f << "run_id,seed,step,episode,metric,value\n";
    for (int run = 0; run < 8; ++run)
      f << run << "," << run << ",100,0,score," << (run + 1.0) << "\n";
  }
  SUBCASE("single metric cell aggregates across runs") {
    const Report rep = report({csv});
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].metric == "score");
    CHECK(rep.rows[0].step == 100);
    CHECK(rep.rows[0].n == 8);
    // iqm of 1..8 keeps indices [2, 6): 3,4,5,6
    CHECK(rep.rows[0].center == doctest::Approx(4.5));
    CHECK(rep.rows[0].lo <= rep.rows[0].center);
    CHECK(rep.rows[0].hi >= rep.rows[0].center);
  }
  SUBCASE("row order does not matter") {
    const std::string csv2 = (tmp / "shuffled.csv").string();
    {
      std::ofstream f(csv2);
      f << "run_id,seed,step,episode,metric,value\n";
      for (int run = 7; run >= 0; --run)
        f << run << "," << run << ",100,0,score," << (run + 1.0) << "\n";
    }
    const Report a = report({csv});
    const Report b = report({csv2});
    REQUIRE(a.rows.size() == b.rows.size());
    CHECK(a.rows[0].center == b.rows[0].center);
    CHECK(a.rows[0].lo == b.rows[0].lo);
    CHECK(a.rows[0].hi == b.rows[0].hi);
  }
  SUBCASE("schema violations carry line diagnostics") {
    const std::string bad = (tmp / "bad.csv").string();
    {
      std::ofstream f(bad);
      f << "run_id,seed,step,episode,metric,value\n";
      f << "0,0,100,0,score\n";  // five columns
    }
    try {
      report({bad});
      CHECK(false);
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  fs::remove_all(tmp);
}

TEST_CASE("end to end byte determinism") {
  ExperimentConfig cfg;
  cfg.algo = "q_learning";
  cfg.env = "gridworld_1d";
  cfg.n_seeds = 3;
  cfg.master_seed = 5;
  cfg.steps = 2000;
  cfg.eval_every = 500;
  cfg.workers = 2;

  const fs::path tmp = fs::temp_directory_path() / "rlkit_det_test";
  fs::remove_all(tmp);
  cfg.out_dir = (tmp / "a").string();
  const std::string csv_a = run_and_write(cfg);
  cfg.out_dir = (tmp / "b").string();
  const std::string csv_b = run_and_write(cfg);
  CHECK(slurp(csv_a) == slurp(csv_b));
  CHECK(slurp((tmp / "a" / "report.csv").string()) == slurp((tmp / "b" / "report.csv").string()));
  fs::remove_all(tmp);
}
