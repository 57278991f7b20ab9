#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "rlkit/bandit.hpp"
#include "rlkit/stats.hpp"

using namespace rlkit;

TEST_CASE("beta posterior updates") {
  BetaBelief b = BetaBelief::uniform_prior(2);
  update_beta(b, 0, 1);
  CHECK(b.alpha[0] == 2.0);
  CHECK(b.beta[0] == 1.0);
  b.alpha[1] = 2.0;
  b.beta[1] = 2.0;
  update_beta(b, 1, 0);
  CHECK(b.alpha[1] == 2.0);
  CHECK(b.beta[1] == 3.0);

  // k successes from a uniform prior: mean (k+1)/(k+2)
  BetaBelief c = BetaBelief::uniform_prior(1);
  for (int k = 1; k <= 5; ++k) {
    update_beta(c, 0, 1);
    CHECK(c.posterior_mean(0) == doctest::Approx((k + 1.0) / (k + 2.0)));
  }
  CHECK_THROWS(update_beta(b, 5, 1));
  CHECK_THROWS(update_beta(b, 0, 2));
}

TEST_CASE("boltzmann policy") {
  SUBCASE("textbook probability rows at tau 1") {
    auto p = boltzmann_policy(std::vector<double>{4.90, 5.10}, 1.0);
    CHECK(std::round(p[0] * 100) / 100 == doctest::Approx(0.45));
    CHECK(std::round(p[1] * 100) / 100 == doctest::Approx(0.55));
    p = boltzmann_policy(std::vector<double>{1.0, 9.0}, 1.0);
    CHECK(std::round(p[0] * 100) / 100 == doctest::Approx(0.0));
    CHECK(std::round(p[1] * 100) / 100 == doctest::Approx(1.0));
    p = boltzmann_policy(std::vector<double>{4.0, 6.0}, 1.0);
    CHECK(std::round(p[0] * 100) / 100 == doctest::Approx(0.12));
    CHECK(std::round(p[1] * 100) / 100 == doctest::Approx(0.88));
  }
  SUBCASE("high temperature approaches uniform") {
    const auto p = boltzmann_policy(std::vector<double>{1.0, 2.0, 3.0}, 1e9);
    for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }
  SUBCASE("low temperature approaches the greedy point mass") {
    const auto p = boltzmann_policy(std::vector<double>{1.0, 2.0}, 1e-3);
    CHECK(p[1] > 1.0 - 1e-9);
  }
  SUBCASE("raising a score raises its probability") {
    const auto p0 = boltzmann_policy(std::vector<double>{1.0, 2.0, 0.5}, 1.0);
    const auto p1 = boltzmann_policy(std::vector<double>{1.4, 2.0, 0.5}, 1.0);
    CHECK(p1[0] > p0[0]);
  }
  SUBCASE("overflow safety") {
    const auto p = boltzmann_policy(std::vector<double>{1e6, 1e6 - 1.0}, 1.0);
    CHECK(std::isfinite(p[0]));
    CHECK(p[0] + p[1] == doctest::Approx(1.0));
  }
  CHECK_THROWS(boltzmann_policy(std::vector<double>{1.0}, 0.0));
}

TEST_CASE("epsilon greedy") {
  const std::vector<double> scores = {5.05, 4.95};
  SUBCASE("induced probabilities 0.95 / 0.05 at eps 0.1") {
    Rng rng(17);
    int counts[2] = {0, 0};
    const int n = 400000;
    for (int i = 0; i < n; ++i) ++counts[epsilon_greedy(scores, 0.1, rng)];
    CHECK(static_cast<double>(counts[0]) / n == doctest::Approx(0.95).epsilon(0.01));
    CHECK(static_cast<double>(counts[1]) / n == doctest::Approx(0.05).epsilon(0.05));
    // floor: every action keeps probability >= eps/|A|
    CHECK(static_cast<double>(counts[1]) / n >= 0.05 * 0.9);
  }
  SUBCASE("eps 0 is pure argmax, eps 1 is uniform") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) CHECK(epsilon_greedy(scores, 0.0, rng) == 0);
    int c1 = 0;
    for (int i = 0; i < 100000; ++i) c1 += epsilon_greedy(scores, 1.0, rng);
    CHECK(static_cast<double>(c1) / 100000 == doctest::Approx(0.5).epsilon(0.02));
  }
}

TEST_CASE("epsilon z greedy") {
  const std::vector<double> scores = {1.0, 0.0};
  SUBCASE("repeat counter replays the stored action") {
    RepeatState st{1, 3};
    Rng rng(0);
    CHECK(epsilon_z_greedy(scores, 0.0, fixed_duration(1), st, rng) == 1);
    CHECK(st.remaining == 2);
    CHECK(epsilon_z_greedy(scores, 0.0, fixed_duration(1), st, rng) == 1);
    CHECK(epsilon_z_greedy(scores, 0.0, fixed_duration(1), st, rng) == 1);
    CHECK(st.remaining == 0);
    // counter exhausted: back to the greedy arm
    CHECK(epsilon_z_greedy(scores, 0.0, fixed_duration(1), st, rng) == 0);
  }
  SUBCASE("point mass duration 1 matches eps-greedy in distribution") {
    RepeatState st;
    Rng rng(5);
    int counts[2] = {0, 0};
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++counts[epsilon_z_greedy(scores, 0.2, fixed_duration(1), st, rng)];
    CHECK(static_cast<double>(counts[0]) / n == doctest::Approx(0.9).epsilon(0.01));
  }
  SUBCASE("eps 0 never enters repeat mode") {
    RepeatState st;
    Rng rng(5);
    for (int i = 0; i < 1000; ++i)
      CHECK(epsilon_z_greedy(scores, 0.0, fixed_duration(50), st, rng) == 0);
    CHECK(st.remaining == 0);
  }
}

TEST_CASE("ucb action") {
  SUBCASE("bonus dominance at equal means") {
    const std::vector<long> counts = {1, 100};
    const std::vector<double> means = {0.5, 0.5};
    CHECK(ucb_action(counts, means, 1.0) == 0);
  }
  SUBCASE("c 0 is greedy") {
    const std::vector<long> counts = {5, 5};
    const std::vector<double> means = {0.2, 0.7};
    CHECK(ucb_action(counts, means, 0.0) == 1);
  }
  SUBCASE("undersampled arm wins on its bonus") {
    const std::vector<long> counts = {100, 1};
    const std::vector<double> means = {0.5, 0.4};
    CHECK(ucb_action(counts, means, 1.0) == 1);  // 0.4 + 1 > 0.5 + 0.1
  }
  SUBCASE("unpulled arms first, round robin") {
    const std::vector<long> counts = {3, 0, 0};
    const std::vector<double> means = {10.0, 0.0, 0.0};
    CHECK(ucb_action(counts, means, 1.0) == 1);
  }
  SUBCASE("posterior mode uses c * std") {
    const std::vector<long> counts = {10, 10};
    const std::vector<double> means = {0.5, 0.4};
    const std::vector<double> stds = {0.01, 0.5};
    CHECK(ucb_action(counts, means, 1.0, stds) == 1);
  }
}

TEST_CASE("thompson sampling") {
  SUBCASE("symmetric posteriors are picked evenly") {
    BetaBelief b{{5.0, 5.0}, {5.0, 5.0}};
    Rng rng(9);
    int c0 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
      if (thompson_action(b, rng) == 0) ++c0;
    CHECK(static_cast<double>(c0) / n == doctest::Approx(0.5).epsilon(0.04));
  }
  SUBCASE("confident posteriors dominate") {
    BetaBelief b{{100.0, 1.0}, {1.0, 100.0}};
    Rng rng(10);
    int c0 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
      if (thompson_action(b, rng) == 0) ++c0;
    CHECK(static_cast<double>(c0) / n >= 0.99);
  }
  SUBCASE("frequency matching against an independent estimate") {
    const BetaBelief b{{8.0, 3.0}, {4.0, 2.0}};
    // oracle: P(arm 0 optimal) from a separate high-resolution stream
    Rng oracle_rng(777);
    int oracle0 = 0;
    const int m = 1000000;
    for (int i = 0; i < m; ++i) {
      const double x = oracle_rng.beta(b.alpha[0], b.beta[0]);
      const double y = oracle_rng.beta(b.alpha[1], b.beta[1]);
      if (x >= y) ++oracle0;
    }
    const double p0 = static_cast<double>(oracle0) / m;

    Rng rng(123);
    const int n = 100000;
    int c0 = 0;
    for (int i = 0; i < n; ++i)
      if (thompson_action(b, rng) == 0) ++c0;
    // chi-squared on 2 cells, dof 1, critical value at p = 0.01 is 6.635
    const double e0 = n * p0, e1 = n * (1.0 - p0);
    const double o0 = c0, o1 = n - c0;
    const double chi2 = (o0 - e0) * (o0 - e0) / e0 + (o1 - e1) * (o1 - e1) / e1;
    CHECK(chi2 < 6.635);
  }
  SUBCASE("gaussian belief path") {
    GaussBelief g = GaussBelief::empty(2);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
      update_gauss(g, 0, rng.normal(1.0, 0.1));
      update_gauss(g, 1, rng.normal(0.0, 0.1));
    }
    int c0 = 0;
    for (int i = 0; i < 1000; ++i)
      if (thompson_action(g, rng) == 0) ++c0;
    CHECK(c0 > 990);
  }
}

TEST_CASE("regret ledger") {
  RegretLedger ledger({0.5, 0.6});
  SUBCASE("always the best arm gives zero regret") {
    for (int i = 0; i < 10; ++i) ledger.record(1);
    CHECK(ledger.total() == 0.0);
  }
  SUBCASE("always the worse arm gives linear regret") {
    for (int i = 0; i < 100; ++i) ledger.record(0);
    CHECK(ledger.total() == doctest::Approx(0.1 * 100));
    // cumulative regret is nondecreasing
    for (std::size_t i = 1; i < ledger.cumulative.size(); ++i)
      CHECK(ledger.cumulative[i] >= ledger.cumulative[i - 1]);
  }
}

TEST_CASE("bandit testbed orderings") {
  const std::vector<double> arms = {0.5, 0.6};
  const long horizon = 10000;
  const int n_seeds = 12;
  std::vector<double> regret_eps, regret_ts, regret_ucb, regret_ts_half;
  for (int seed = 0; seed < n_seeds; ++seed) {
    BanditConfig cfg;
    cfg.algo = BanditAlgo::EpsilonGreedy;
    cfg.epsilon = 0.1;
    Rng r1 = Rng::derive(seed, 0, "eps");
    regret_eps.push_back(run_bernoulli_bandit(arms, horizon, cfg, r1).back().cum_regret);

    cfg.algo = BanditAlgo::Thompson;
    Rng r2 = Rng::derive(seed, 0, "ts");
    const auto rows = run_bernoulli_bandit(arms, horizon, cfg, r2);
    regret_ts.push_back(rows.back().cum_regret);
    regret_ts_half.push_back(rows[horizon / 2 - 1].cum_regret);

    cfg.algo = BanditAlgo::Ucb;
    cfg.ucb_c = 1.0;
    Rng r3 = Rng::derive(seed, 0, "ucb");
    regret_ucb.push_back(run_bernoulli_bandit(arms, horizon, cfg, r3).back().cum_regret);
  }
  const double eps_mean = mean(regret_eps);
  const double ts_mean = mean(regret_ts);
  const double ucb_mean = mean(regret_ucb);
  CHECK(ts_mean < eps_mean);
  CHECK(ucb_mean < eps_mean);
  // sublinearity: regret growth slows in the second half
  CHECK(ts_mean / mean(regret_ts_half) < 1.9);
}

TEST_CASE("bandit csv") {
  BanditConfig cfg;
  Rng rng(1);
  const auto rows = run_bernoulli_bandit(std::vector<double>{0.3, 0.7}, 50, cfg, rng);
  save_bandit_csv("bandit_test.csv", rows);
  std::ifstream f("bandit_test.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "step,arm,reward,per_step_regret,cum_regret");
  std::remove("bandit_test.csv");
}

TEST_CASE("zeta duration distribution") {
  const DurationDist z = zeta_duration(2.0, 8);
  Rng rng(12);
  double total = 0.0;
  const int n = 20000;
  int in_range = 0;
  for (int i = 0; i < n; ++i) {
    const int d = z(rng);
    if (d >= 1 && d <= 8) ++in_range;
    total += d;
  }
  CHECK(in_range == n);
  // heavy-tailed but mostly short repeats: mean around sum n^-1 / sum n^-2
  CHECK(total / n > 1.0);
  CHECK(total / n < 3.0);
}
