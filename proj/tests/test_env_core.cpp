#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "rlkit/dp.hpp"
#include "rlkit/env.hpp"
#include "rlkit/linalg.hpp"
#include "rlkit/mdp.hpp"

using namespace rlkit;

TEST_CASE("gridworld_1d layout") {
  const TabularMDP m = make_gridworld_1d();
  CHECK(m.n_states == 5);
  CHECK(m.n_actions == 2);
  // reward 1 only on entering the goal
  CHECK(m.reward_at(kGridS3, kGridDown, kGridGoal) == 1.0);
  double other = 0.0;
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a)
      for (int s2 = 0; s2 < 5; ++s2)
        if (!(s == kGridS3 && a == kGridDown && s2 == kGridGoal))
          other += std::fabs(m.reward_at(s, a, s2));
  CHECK(other == 0.0);
  CHECK(m.trans_at(kGridS2, kGridUp, kGridS1) == 1.0);
  for (int a = 0; a < 2; ++a) {
    CHECK(m.trans_at(kGridGoal, a, kGridGoal) == 1.0);
    CHECK(m.reward_at(kGridGoal, a, kGridGoal) == 0.0);
    CHECK(m.trans_at(kGridTop, a, kGridTop) == 1.0);
  }
}

TEST_CASE("baird construction") {
  const BairdProblem p = make_baird();
  for (int s = 0; s < 7; ++s) {
    for (int u = 0; u < 6; ++u) CHECK(p.mdp.trans_at(s, kBairdDashed, u) == doctest::Approx(1.0 / 6.0));
    CHECK(p.mdp.trans_at(s, kBairdSolid, 6) == 1.0);
    CHECK(p.behavior.at(s, kBairdDashed) == doctest::Approx(6.0 / 7.0));
    CHECK(p.target.at(s, kBairdSolid) == 1.0);
  }
  for (double r : p.mdp.reward) CHECK(r == 0.0);
  // true value function is 0 and is representable by w = 0
  const ValueTable v = policy_evaluation_exact(p.mdp, p.target, 0.99);
  for (double x : v.v) CHECK(x == doctest::Approx(0.0).epsilon(1e-12));
  for (int s = 0; s < 7; ++s) {
    double pred = 0.0;  // features . 0
    (void)pred;
    CHECK(p.features[s * 8 + (s < 6 ? s : 6)] > 0.0);
  }
}

TEST_CASE("maxbias env") {
  SUBCASE("right from A terminates with 0") {
    auto env = make_maxbias(4, -0.1, 1.0);
    Rng rng(1);
    env->reset(rng);
    const StepResult r = env->step(MaxBiasEnv::kRight, rng);
    CHECK(r.done);
    CHECK(r.r == 0.0);
  }
  SUBCASE("expected return of left-then-B equals the B-reward mean") {
    auto env = make_maxbias(4, -0.1, 1.0);
    Rng rng(7);
    double total = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      env->reset(rng);
      const StepResult r1 = env->step(MaxBiasEnv::kLeft, rng);
      CHECK(!r1.done);
      CHECK(r1.r == 0.0);
      const StepResult r2 = env->step(rng.uniform_int(4), rng);
      CHECK(r2.done);
      total += r1.r + r2.r;
    }
    CHECK(total / n == doctest::Approx(-0.1).epsilon(0.1));
  }
  SUBCASE("std 0 degenerates to the mean") {
    auto env = make_maxbias(3, -0.1, 0.0);
    Rng rng(3);
    env->reset(rng);
    env->step(MaxBiasEnv::kLeft, rng);
    CHECK(env->step(2, rng).r == -0.1);
  }
  CHECK_THROWS(MaxBiasEnv(2, 0.0, -1.0));
}

TEST_CASE("random mdp determinism and normalization") {
  const TabularMDP a = make_random_mdp(6, 3, 42);
  const TabularMDP b = make_random_mdp(6, 3, 42);
  CHECK(a.trans == b.trans);
  CHECK(a.reward == b.reward);
  const TabularMDP c = make_random_mdp(6, 3, 43);
  CHECK(a.trans != c.trans);
  for (int s = 0; s < 6; ++s)
    for (int ac = 0; ac < 3; ++ac) {
      double row = 0.0;
      for (int s2 = 0; s2 < 6; ++s2) row += a.trans_at(s, ac, s2);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }

  // single state: V = r / (1 - gamma) under any policy
  const TabularMDP loop = make_random_mdp(1, 2, 5);
  const PolicyTable pi = PolicyTable::uniform(1, 2);
  const ValueTable v = policy_evaluation_exact(loop, pi, 0.9);
  const double r = 0.5 * (loop.expected_reward(0, 0) + loop.expected_reward(0, 1));
  CHECK(v.v[0] == doctest::Approx(r / 0.1).epsilon(1e-9));
}

TEST_CASE("potential shaping") {
  const TabularMDP grid = make_gridworld_1d();
  SUBCASE("zero potential is the identity") {
    std::vector<double> phi(5, 0.0);
    const TabularMDP shaped = shape_rewards(grid, phi, 0.9);
    CHECK(shaped.reward == grid.reward);
  }
  SUBCASE("gridworld: Q* shifts by -phi(s) and the greedy policy is unchanged") {
    std::vector<double> phi = {0.0, 0.3, -0.7, 1.5, 0.0};  // zero on terminals
    const double gamma = 0.9;
    const TabularMDP shaped = shape_rewards(grid, phi, gamma);
    const SolveResult base = value_iteration(grid, gamma, 1e-12);
    const SolveResult mod = value_iteration(shaped, gamma, 1e-12);
    for (int s = 1; s <= 3; ++s) {
      for (int a = 0; a < 2; ++a)
        CHECK(mod.q.at(s, a) == doctest::Approx(base.q.at(s, a) - phi[s]).epsilon(1e-8));
      CHECK(argmax(std::span<const double>(mod.q.q.data() + s * 2, 2)) ==
            argmax(std::span<const double>(base.q.q.data() + s * 2, 2)));
    }
  }
  SUBCASE("argmax invariance on random MDPs") {
    for (int trial = 0; trial < 25; ++trial) {
      const TabularMDP m = make_random_mdp(5, 3, 100 + trial);
      Rng rng(900 + trial);
      std::vector<double> phi(5);
      for (double& x : phi) x = rng.uniform(-2.0, 2.0);
      const TabularMDP shaped = shape_rewards(m, phi, 0.9);
      const SolveResult base = value_iteration(m, 0.9, 1e-12);
      const SolveResult mod = value_iteration(shaped, 0.9, 1e-12);
      for (int s = 0; s < 5; ++s)
        CHECK(mod.greedy.probs[s * 3 + 0] + 2 * mod.greedy.probs[s * 3 + 1] + 3 * mod.greedy.probs[s * 3 + 2] ==
              base.greedy.probs[s * 3 + 0] + 2 * base.greedy.probs[s * 3 + 1] + 3 * base.greedy.probs[s * 3 + 2]);
    }
  }
  SUBCASE("nonzero terminal potential rejected unless flagged") {
    std::vector<double> phi = {1.0, 0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS(shape_rewards(grid, phi, 0.9));
    CHECK_NOTHROW(shape_rewards(grid, phi, 0.9, true));
  }
  SUBCASE("dimension mismatch") {
    std::vector<double> phi(3, 0.0);
    CHECK_THROWS(shape_rewards(grid, phi, 0.9));
  }
}

TEST_CASE("rollout") {
  const TabularMDP grid = make_gridworld_1d();
  std::vector<int> down(5, kGridDown);
  const PolicyTable always_down = PolicyTable::deterministic(5, 2, down);

  SUBCASE("always-down from s1 returns 0.81 at gamma 0.9") {
    TabularEnv env(grid);
    Rng rng(0);
    env.reset(rng);
    const Trajectory tau = rollout(env, always_down, 100, rng);
    tau.validate();
    CHECK(tau.size() == 3);
    CHECK(tau.terminated());
    CHECK(tau.discounted_return(0.9) == doctest::Approx(0.81));
  }
  SUBCASE("deterministic policy and env give identical trajectories per seed") {
    TabularEnv e1(grid), e2(grid);
    Rng r1(11), r2(11);
    e1.reset(r1);
    e2.reset(r2);
    const Trajectory t1 = rollout(e1, always_down, 10, r1);
    const Trajectory t2 = rollout(e2, always_down, 10, r2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
      CHECK(t1.steps[i].s == t2.steps[i].s);
      CHECK(t1.steps[i].a == t2.steps[i].a);
    }
  }
  SUBCASE("truncation stops at the horizon without done") {
    TabularMDP loop = make_random_mdp(3, 2, 9);
    TabularEnv env(loop, 4);
    Rng rng(5);
    env.reset(rng);
    const Trajectory tau = rollout(env, PolicyTable::uniform(3, 2), 100, rng);
    CHECK(tau.size() == 4);
    CHECK(!tau.terminated());
  }
  SUBCASE("out-of-range policy action throws") {
    TabularEnv env(grid);
    Rng rng(0);
    env.reset(rng);
    PolicyFn bad = [](int) { return std::vector<double>{0.0, 0.0, 1.0}; };
    CHECK_THROWS(rollout(env, bad, 10, rng));
  }
}

TEST_CASE("mdp json round trip and csv export") {
  const TabularMDP m = make_gridworld_1d();
  const std::string text = m.to_json_string();
  const TabularMDP back = TabularMDP::from_json_string(text);
  CHECK(back.trans == m.trans);
  CHECK(back.reward == m.reward);
  CHECK(back.init_dist == m.init_dist);

  TabularEnv env(m);
  Rng rng(2);
  env.reset(rng);
  std::vector<int> down(5, kGridDown);
  const Trajectory tau = rollout(env, PolicyTable::deterministic(5, 2, down), 10, rng);
  const char* path = "traj_test.csv";
  tau.save_csv(path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "step,s,a,r,s_next,done");
  int lines = 0;
  for (std::string line; std::getline(f, line);) ++lines;
  CHECK(lines == static_cast<int>(tau.size()));
  std::remove(path);
}

TEST_CASE("mdp validation catches broken invariants") {
  TabularMDP m = make_gridworld_1d();
  m.trans_at(kGridS1, kGridUp, kGridTop) = 0.5;  // row no longer sums to 1
  CHECK_THROWS(m.validate());
  m = make_gridworld_1d();
  m.reward_at(kGridGoal, 0, kGridGoal) = 1.0;  // absorbing reward must be 0
  CHECK_THROWS(m.validate());
}
