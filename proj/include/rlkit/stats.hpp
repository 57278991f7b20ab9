#pragma once

#include <span>
#include <utility>
#include <vector>

#include "rlkit/rng.hpp"

namespace rlkit {

// Interquartile mean: sort ascending and average the samples with index in
// [floor(0.25 n), ceil(0.75 n)).  Requires at least 4 samples.
double iqm(std::span<const double> samples);

// Percentile bootstrap interval of the IQM statistic.
std::pair<double, double> bootstrap_ci(std::span<const double> samples, int n_resamples,
                                       double level, Rng& rng);

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);  // divisor n-1; needs n >= 2

}  // namespace rlkit
