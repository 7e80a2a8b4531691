#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pcrl/errors.hpp"

namespace pcrl {

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractViolation("sample_variance: need >= 2 values");
  const double mu = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return s / static_cast<double>(xs.size() - 1);
}

// Least-squares slope of y against x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ContractViolation("ols_slope: need two same-length lists");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw MetricError("ols_slope: zero x variance");
  return sxy / sxx;
}

// Two-sided 95% t-interval for the mean. Critical values tabulated for the
// seed counts used here; larger df falls back to the normal value.
inline std::pair<double, double> mean_confidence_interval95(std::span<const double> xs) {
  static constexpr double kT975[] = {0,     12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                     2.365, 2.306,  2.262, 2.228, 2.201, 2.179, 2.160,
                                     2.145, 2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
  const std::size_t n = xs.size();
  if (n < 2) throw ContractViolation("mean_confidence_interval95: need >= 2 values");
  const double mu = mean(xs);
  const double se = std::sqrt(sample_variance(xs) / static_cast<double>(n));
  const std::size_t df = n - 1;
  const double t = df <= 20 ? kT975[df] : 1.96;
  return {mu - t * se, mu + t * se};
}

// P(X >= k) for X ~ Binomial(n, 1/2): one-sided sign-test p-value.
inline double sign_test_p_value(int successes, int trials) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw ContractViolation("sign_test_p_value: bad counts");
  double tail = 0.0;
  for (int i = successes; i <= trials; ++i) {
    double log_c = 0.0;
    for (int j = 0; j < i; ++j) {
      log_c += std::log(static_cast<double>(trials - j)) - std::log(static_cast<double>(j + 1));
    }
    tail += std::exp(log_c - trials * std::log(2.0));
  }
  return tail;
}

}  // namespace pcrl
