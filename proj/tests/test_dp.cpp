#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rlkit/dp.hpp"
#include "rlkit/env.hpp"
#include "rlkit/linalg.hpp"

using namespace rlkit;

TEST_CASE("bellman backup on the gridworld") {
  const TabularMDP grid = make_gridworld_1d();
  ValueTable v{std::vector<double>(5, 0.0), 0.9};
  const ValueTable v1 = bellman_backup(v, grid, 0.9);
  CHECK(v1.v[kGridS3] == 1.0);
  CHECK(v1.v[kGridS1] == 0.0);
  CHECK(v1.v[kGridS2] == 0.0);
  CHECK(v1.v[kGridTop] == 0.0);
  CHECK(v1.v[kGridGoal] == 0.0);

  // fixed point
  const SolveResult sol = value_iteration(grid, 0.9, 1e-12);
  const ValueTable again = bellman_backup(sol.v, grid, 0.9);
  CHECK(sup_norm_diff(again.v, sol.v.v) < 1e-10);
}

TEST_CASE("bellman contraction on random MDPs") {
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMDP m = make_random_mdp(5, 3, 500 + trial);
    const double gamma = 0.9;
    const SolveResult sol = value_iteration(m, gamma, 1e-13);
    Rng rng(42 + trial);
    ValueTable v{std::vector<double>(5), gamma};
    for (double& x : v.v) x = rng.uniform(-5.0, 5.0);
    for (int sweep = 0; sweep < 30; ++sweep) {
      const ValueTable next = bellman_backup(v, m, gamma);
      const double before = sup_norm_diff(v.v, sol.v.v);
      const double after = sup_norm_diff(next.v, sol.v.v);
      CHECK(after <= gamma * before + 1e-12);
      v = next;
    }
  }
}

TEST_CASE("value iteration gridworld across discounts") {
  const TabularMDP grid = make_gridworld_1d();
  SUBCASE("gamma 0.9") {
    const SolveResult s = value_iteration(grid, 0.9, 1e-12);
    CHECK(s.q.at(kGridS3, kGridDown) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.q.at(kGridS2, kGridDown) == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(s.q.at(kGridS1, kGridDown) == doctest::Approx(0.81).epsilon(1e-9));
  }
  SUBCASE("gamma 1: all non-absorbing pairs are worth 1") {
    const SolveResult s = value_iteration(grid, 1.0, 1e-12);
    for (int st : {kGridS1, kGridS2, kGridS3})
      for (int a = 0; a < 2; ++a) {
        // moving up from s1 absorbs with no reward; every other pair
        // eventually reaches the goal
        if (st == kGridS1 && a == kGridUp)
          CHECK(s.q.at(st, a) == doctest::Approx(0.0));
        else
          CHECK(s.q.at(st, a) == doctest::Approx(1.0).epsilon(1e-9));
      }
  }
  SUBCASE("gamma 0: myopic") {
    const SolveResult s = value_iteration(grid, 0.0, 1e-12);
    for (int st : {kGridS1, kGridS2, kGridS3})
      for (int a = 0; a < 2; ++a)
        CHECK(s.q.at(st, a) == doctest::Approx(st == kGridS3 && a == kGridDown ? 1.0 : 0.0));
  }
}

TEST_CASE("policy evaluation exact") {
  SUBCASE("self-loop geometric series") {
    TabularMDP m = TabularMDP::zeros(1, 1);
    m.trans_at(0, 0, 0) = 1.0;
    m.reward_at(0, 0, 0) = 1.0;
    m.init_dist[0] = 1.0;
    m.validate();
    std::vector<int> acts = {0};
    const ValueTable v = policy_evaluation_exact(m, PolicyTable::deterministic(1, 1, acts), 0.9);
    CHECK(v.v[0] == doctest::Approx(10.0).epsilon(1e-10));
  }
  SUBCASE("matches iterative evaluation on random MDPs") {
    for (int trial = 0; trial < 50; ++trial) {
      const TabularMDP m = make_random_mdp(6, 2, 700 + trial);
      Rng rng(31 + trial);
      PolicyTable pi = PolicyTable::uniform(6, 2);
      for (int s = 0; s < 6; ++s) {
        const double p = rng.uniform(0.05, 0.95);
        pi.at(s, 0) = p;
        pi.at(s, 1) = 1.0 - p;
      }
      const ValueTable direct = policy_evaluation_exact(m, pi, 0.9);
      // iterative oracle: v <- r + gamma T v
      std::vector<double> v(6, 0.0);
      for (int it = 0; it < 4000; ++it) {
        std::vector<double> next(6, 0.0);
        for (int s = 0; s < 6; ++s) {
          double x = 0.0;
          for (int a = 0; a < 2; ++a) {
            double q = 0.0;
            for (int s2 = 0; s2 < 6; ++s2)
              q += m.trans_at(s, a, s2) * (m.reward_at(s, a, s2) + 0.9 * v[s2]);
            x += pi.at(s, a) * q;
          }
          next[s] = x;
        }
        v = next;
      }
      CHECK(sup_norm_diff(direct.v, v) < 1e-8);
    }
  }
}

TEST_CASE("policy iteration") {
  SUBCASE("gridworld gives the always-down policy") {
    const TabularMDP grid = make_gridworld_1d();
    const PolicyIterResult pi = policy_iteration(grid, 0.9);
    for (int s : {kGridS1, kGridS2, kGridS3}) CHECK(pi.policy.at(s, kGridDown) == 1.0);
    const SolveResult vi = value_iteration(grid, 0.9, 1e-12);
    CHECK(sup_norm_diff(pi.v.v, vi.v.v) < 1e-8);
  }
  SUBCASE("monotone improvement and VI agreement on random MDPs") {
    for (int trial = 0; trial < 30; ++trial) {
      const TabularMDP m = make_random_mdp(6, 3, 900 + trial);
      const PolicyIterResult pi = policy_iteration(m, 0.9);
      const SolveResult vi = value_iteration(m, 0.9, 1e-13);
      CHECK(sup_norm_diff(pi.v.v, vi.v.v) < 1e-8);

      // V_{pi_{k+1}} >= V_{pi_k} componentwise
      std::vector<int> zero(m.n_states, 0);
      PolicyTable cur = PolicyTable::deterministic(m.n_states, m.n_actions, zero);
      ValueTable v_prev = policy_evaluation_exact(m, cur, 0.9);
      for (int k = 0; k < 10; ++k) {
        const QTableExact q = q_from_v(v_prev, m, 0.9);
        PolicyTable next = greedy_from_q(q);
        if (next.probs == cur.probs) break;
        cur = next;
        const ValueTable v_next = policy_evaluation_exact(m, cur, 0.9);
        for (int s = 0; s < m.n_states; ++s) CHECK(v_next.v[s] >= v_prev.v[s] - 1e-10);
        v_prev = v_next;
      }
    }
  }
  SUBCASE("already optimal policy stops after one evaluation") {
    const TabularMDP grid = make_gridworld_1d();
    const PolicyIterResult r = policy_iteration(grid, 0.9);
    // running again from the optimal policy: one improvement step confirms it
    const ValueTable v = policy_evaluation_exact(grid, r.policy, 0.9);
    const PolicyTable again = greedy_from_q(q_from_v(v, grid, 0.9));
    CHECK(again.probs == r.policy.probs);
  }
}

TEST_CASE("rtdp") {
  const TabularMDP grid = make_gridworld_1d();
  SUBCASE("gridworld from s1") {
    Rng rng(4);
    const ValueTable v = rtdp(grid, kGridS1, 200, 0.9, 0.3, rng);
    CHECK(v.v[kGridS1] == doctest::Approx(0.81).epsilon(1e-6));
  }
  SUBCASE("unreachable states keep their initial value") {
    Rng rng(4);
    const ValueTable v = rtdp(grid, kGridS3, 100, 0.9, 0.0, rng);
    // greedy from s3 goes straight down; s1 is unreachable and never backed up
    CHECK(v.v[kGridS1] == 0.0);
    CHECK(v.v[kGridS3] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("uniform exploration matches VI on the reachable set") {
    for (int trial = 0; trial < 5; ++trial) {
      const TabularMDP m = make_random_mdp(5, 2, 40 + trial);
      Rng rng(trial);
      const ValueTable v = rtdp(m, 0, 3000, 0.9, 1.0, rng, 40);
      const SolveResult vi = value_iteration(m, 0.9, 1e-13);
      // random MDPs here are fully connected from state 0
      CHECK(sup_norm_diff(v.v, vi.v.v) < 1e-3);
    }
  }
}

TEST_CASE("greedy extraction consistency") {
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMDP m = make_random_mdp(6, 3, 60 + trial);
    const SolveResult s = value_iteration(m, 0.9, 1e-13);
    for (int st = 0; st < 6; ++st) {
      const int from_q = argmax(std::span<const double>(s.q.q.data() + st * 3, 3));
      int from_policy = 0;
      for (int a = 0; a < 3; ++a)
        if (s.greedy.at(st, a) == 1.0) from_policy = a;
      CHECK(from_q == from_policy);
    }
  }
}
