#include "drivercal/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>

namespace drivercal::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(n - 1);
}

double sample_std(std::span<const double> xs) {
  return std::sqrt(sample_variance(xs));
}

double standard_error(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return sample_std(xs) / std::sqrt(static_cast<double>(xs.size()));
}

WelchResult welch_t_test(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n1 = xs.size();
  const std::size_t n2 = ys.size();
  if (n1 < 2 || n2 < 2)
    throw std::invalid_argument("welch_t_test: need at least 2 values per sample");

  const double v1 = sample_variance(xs) / static_cast<double>(n1);
  const double v2 = sample_variance(ys) / static_cast<double>(n2);
  const double pooled = v1 + v2;
  if (pooled <= 0.0)
    throw std::invalid_argument("welch_t_test: zero variance in both samples");

  WelchResult r;
  r.n1 = n1;
  r.n2 = n2;
  r.t = (mean(xs) - mean(ys)) / std::sqrt(pooled);
  // Welch-Satterthwaite degrees of freedom.
  const double d1 = v1 * v1 / static_cast<double>(n1 - 1);
  const double d2 = v2 * v2 / static_cast<double>(n2 - 1);
  r.df = pooled * pooled / (d1 + d2);
  boost::math::students_t dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(dist, -std::abs(r.t));
  return r;
}

}  // namespace drivercal::stats
