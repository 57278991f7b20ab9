#pragma once

#include <string>
#include <vector>

namespace rlkit::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs the whole acceptance suite (criteria 1-14).  `workers` parallelizes
// the seed fans inside the slow criteria; 0 picks the hardware count.
std::vector<CriterionResult> run_all(int workers = 0);

// Run a single criterion by id (1-14).
CriterionResult run_one(int id, int workers = 0);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace rlkit::selftest
