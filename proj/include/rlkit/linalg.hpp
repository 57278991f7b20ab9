#pragma once

#include <span>
#include <vector>

namespace rlkit {

// Solve A x = b for dense row-major A (n x n) by LU with partial pivoting.
// Throws std::runtime_error on a (numerically) singular system.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b);

// max_i |x_i - y_i|
double sup_norm_diff(std::span<const double> x, std::span<const double> y);
double sup_norm(std::span<const double> x);

// Lowest-index argmax, the tie-breaking rule used repo-wide.
int argmax(std::span<const double> x);

}  // namespace rlkit
