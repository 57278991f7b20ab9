#include "rlkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlkit {

double iqm(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 4) throw std::invalid_argument("iqm: need at least 4 samples");
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  const std::size_t lo = static_cast<std::size_t>(std::floor(0.25 * static_cast<double>(n)));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(n)));
  double total = 0.0;
  for (std::size_t i = lo; i < hi; ++i) total += xs[i];
  return total / static_cast<double>(hi - lo);
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples, int n_resamples,
                                       double level, Rng& rng) {
  if (samples.empty()) throw std::invalid_argument("bootstrap_ci: empty sample");
  const int n = static_cast<int>(samples.size());
  // IQM needs 4 samples; tiny inputs degrade to the plain mean statistic.
  auto statistic = [](std::span<const double> xs) { return xs.size() >= 4 ? iqm(xs) : mean(xs); };
  std::vector<double> stats(n_resamples);
  std::vector<double> resample(n);
  for (int b = 0; b < n_resamples; ++b) {
    for (int i = 0; i < n; ++i) resample[i] = samples[rng.uniform_int(n)];
    stats[b] = statistic(resample);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&stats](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= stats.size()) return stats.back();
    return stats[i] * (1.0 - frac) + stats[i + 1] * frac;
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_std: need n >= 2");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace rlkit
