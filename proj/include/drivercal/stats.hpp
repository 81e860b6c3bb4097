#pragma once

#include <cstddef>
#include <span>

namespace drivercal::stats {

double mean(std::span<const double> xs);

// Sample variance / std with the n-1 denominator; 0 for fewer than 2 values.
double sample_variance(std::span<const double> xs);
double sample_std(std::span<const double> xs);

// Standard error of the mean: sample_std / sqrt(n).
double standard_error(std::span<const double> xs);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Welch's unequal-variance t-test.  Requires at least 2 values per side and a
// nonzero pooled variance term; throws std::invalid_argument otherwise.
WelchResult welch_t_test(std::span<const double> xs, std::span<const double> ys);

}  // namespace drivercal::stats
