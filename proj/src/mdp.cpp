#include "rlkit/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rlkit {

using nlohmann::json;

double TabularMDP::expected_reward(int s, int a) const {
  double r = 0.0;
  const std::size_t base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
  for (int s2 = 0; s2 < n_states; ++s2) r += trans[base + s2] * reward[base + s2];
  return r;
}

TabularMDP TabularMDP::zeros(int n_states, int n_actions) {
  TabularMDP m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  const std::size_t sz = static_cast<std::size_t>(n_states) * n_actions * n_states;
  m.trans.assign(sz, 0.0);
  m.reward.assign(sz, 0.0);
  m.terminal.assign(n_states, 0);
  m.init_dist.assign(n_states, 0.0);
  return m;
}

void TabularMDP::validate(double tol) const {
  if (n_states <= 0 || n_actions <= 0) throw std::runtime_error("TabularMDP: empty state or action set");
  const std::size_t sz = static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (trans.size() != sz || reward.size() != sz)
    throw std::runtime_error("TabularMDP: tensor size mismatch");
  if (terminal.size() != static_cast<std::size_t>(n_states) ||
      init_dist.size() != static_cast<std::size_t>(n_states))
    throw std::runtime_error("TabularMDP: vector size mismatch");

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double row = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double p = trans_at(s, a, s2);
        if (p < 0.0) throw std::runtime_error("TabularMDP: negative transition probability");
        row += p;
      }
      if (std::fabs(row - 1.0) > tol) throw std::runtime_error("TabularMDP: transition row does not sum to 1");
      if (terminal[s]) {
        if (std::fabs(trans_at(s, a, s) - 1.0) > tol)
          throw std::runtime_error("TabularMDP: terminal state must self-transition");
        if (std::fabs(reward_at(s, a, s)) != 0.0)
          throw std::runtime_error("TabularMDP: terminal self-transition must have 0 reward");
      }
    }
  }
  double init = 0.0;
  for (double p : init_dist) {
    if (p < 0.0) throw std::runtime_error("TabularMDP: negative initial probability");
    init += p;
  }
  if (std::fabs(init - 1.0) > tol) throw std::runtime_error("TabularMDP: init_dist does not sum to 1");
}

std::string TabularMDP::to_json_string() const {
  json j;
  j["schema"] = "rlkit.tabular_mdp.v1";
  j["n_states"] = n_states;
  j["n_actions"] = n_actions;
  j["trans"] = trans;    // flattened row-major [s][a][s']
  j["reward"] = reward;  // flattened row-major [s][a][s']
  j["terminal"] = std::vector<int>(terminal.begin(), terminal.end());
  j["init_dist"] = init_dist;
  return j.dump();
}

TabularMDP TabularMDP::from_json_string(const std::string& text) {
  const json j = json::parse(text);
  if (!j.contains("schema") || j.at("schema").get<std::string>() != "rlkit.tabular_mdp.v1")
    throw std::runtime_error("TabularMDP: unknown schema");
  TabularMDP m;
  m.n_states = j.at("n_states").get<int>();
  m.n_actions = j.at("n_actions").get<int>();
  m.trans = j.at("trans").get<std::vector<double>>();
  m.reward = j.at("reward").get<std::vector<double>>();
  const auto term = j.at("terminal").get<std::vector<int>>();
  m.terminal.assign(term.begin(), term.end());
  m.init_dist = j.at("init_dist").get<std::vector<double>>();
  m.validate();
  return m;
}

void TabularMDP::save_json(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << to_json_string() << "\n";
}

TabularMDP TabularMDP::load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_string(ss.str());
}

double Trajectory::discounted_return(double gamma) const {
  double g = 0.0;
  double w = 1.0;
  for (const Transition& t : steps) {
    g += w * t.r;
    w *= gamma;
  }
  return g;
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    if (steps[i].done) throw std::runtime_error("Trajectory: step follows a terminal transition");
    if (steps[i].s_next != steps[i + 1].s)
      throw std::runtime_error("Trajectory: s_next does not chain to next s");
  }
  if (!behavior_prob.empty() && behavior_prob.size() != steps.size())
    throw std::runtime_error("Trajectory: behavior_prob length mismatch");
}

void Trajectory::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "step,s,a,r,s_next,done\n";
  char buf[64];
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Transition& t = steps[i];
    std::snprintf(buf, sizeof(buf), "%.17g", t.r);
    f << i << "," << t.s << "," << t.a << "," << buf << "," << t.s_next << "," << (t.done ? 1 : 0)
      << "\n";
  }
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
  PolicyTable p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
  return p;
}

PolicyTable PolicyTable::deterministic(int n_states, int n_actions, std::span<const int> actions) {
  PolicyTable p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  for (int s = 0; s < n_states; ++s) p.at(s, actions[s]) = 1.0;
  return p;
}

void PolicyTable::validate(double tol) const {
  for (int s = 0; s < n_states; ++s) {
    double row = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (at(s, a) < 0.0) throw std::runtime_error("PolicyTable: negative probability");
      row += at(s, a);
    }
    if (std::fabs(row - 1.0) > tol) throw std::runtime_error("PolicyTable: row does not sum to 1");
  }
}

}  // namespace rlkit
