#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlkit/dp.hpp"
#include "rlkit/mdp.hpp"
#include "rlkit/rng.hpp"

namespace rlkit {

// Discounted expected future state occupancy under a fixed policy, crediting
// the next state: M(s, s~) = E[sum_t gamma^t 1{s_{t+1} = s~}].  Terminal rows
// of the policy chain are zeroed so absorbing self-loops collect no credit
// after entry.
struct SRMatrix {
  int n_states = 0;
  double gamma = 0.0;
  std::vector<double> m;  // n_states * n_states, row-major

  double at(int s, int s2) const { return m[static_cast<std::size_t>(s) * n_states + s2]; }
  double& at(int s, int s2) { return m[static_cast<std::size_t>(s) * n_states + s2]; }
};

// M = T~ (I - gamma T~)^{-1} with T~ the policy chain, terminal rows zeroed.
SRMatrix sr_closed_form(const TabularMDP& mdp, const PolicyTable& policy, double gamma);

// TD rule M(s,.) += eta [e_{s'} + gamma (1-done) M(s',.) - M(s,.)]
void sr_td_update(SRMatrix& m, const Transition& t, double eta);

// V(s) = sum_s~ M(s,s~) R(s~) for next-state rewards R.
std::vector<double> value_from_sr(const SRMatrix& m, std::span<const double> reward);

// Residual of the Bellman identity M = T~ (I + gamma M); 0 at the SR.
double sr_bellman_residual(const SRMatrix& m, const TabularMDP& mdp, const PolicyTable& policy);

// On-policy TD(0) SR learner: per-state polynomial step sizes
// (1/N(s)^power) with tail iterate averaging over the second half of
// training, which removes the stationary sampling noise.
SRMatrix sr_td_learn(const TabularMDP& mdp, const PolicyTable& policy, double gamma, long steps,
                     std::uint64_t seed, double power = 0.65);

// Action-conditioned successor features: psi(s,a) in R^dim with cumulants
// phi(s~) credited on arrival.
struct SFTable {
  int n_states = 0;
  int n_actions = 0;
  int dim = 0;
  double gamma = 0.0;
  std::vector<double> psi;  // [s][a][k]

  std::span<double> at(int s, int a) {
    return std::span<double>(
        psi.data() + (static_cast<std::size_t>(s) * n_actions + a) * dim, dim);
  }
  std::span<const double> at(int s, int a) const {
    return std::span<const double>(
        psi.data() + (static_cast<std::size_t>(s) * n_actions + a) * dim, dim);
  }

  static SFTable zeros(int n_states, int n_actions, int dim, double gamma);
};

using CumulantFn = std::function<std::vector<double>(int state)>;

// psi(s,a) += eta [phi(s') + gamma (1-done) psi(s',a') - psi(s,a)]
void sf_td_update(SFTable& sf, const Transition& t, int a_next, const CumulantFn& phi, double eta);

// Exact SF from the closed-form (s,a)-conditioned SR:
// psi(s,a) = sum_s' T(s'|s,a)[phi(s') + gamma sum_s~ M(s',s~) phi(s~)].
SFTable sf_closed_form(const TabularMDP& mdp, const PolicyTable& policy, const CumulantFn& phi,
                       int dim, double gamma);

// Q synthesized for task w: Q(s,a) = psi(s,a) . w
double sf_q_value(const SFTable& sf, int s, int a, std::span<const double> w);

// Generalized policy improvement: argmax_a max_i psi_i(s,a) . w, lowest-index
// tie-breaking over actions.
int gpi_action(std::span<const SFTable> library, std::span<const double> w, int state);

// CSV heatmap rows (s, s_tilde, value).
void save_sr_csv(const std::string& path, const SRMatrix& m);

}  // namespace rlkit
