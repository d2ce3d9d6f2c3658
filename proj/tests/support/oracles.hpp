#pragma once

// Closed forms computed independently of the library, for use as test
// oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

inline double toy_m(double t) { return 10.0 * std::sin(std::numbers::pi * t / 14.0); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Laplace(0, 1) quantile.
inline double laplace_quantile(double q) {
  return q < 0.5 ? std::log(2.0 * q) : -std::log(2.0 * (1.0 - q));
}

inline double laplace_cdf(double x, double mean = 0.0, double b = 1.0) {
  const double z = (x - mean) / b;
  return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

// Increasing transport of N(0,1) onto Laplace(m(x), 1).
inline double toy_transport(double x, double e) { return toy_m(x) + laplace_quantile(normal_cdf(e)); }

// Increasing transport of U(0,1) onto Laplace(m(x), 1).
inline double toy_quantile(double x, double u) { return toy_m(x) + laplace_quantile(u); }

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Biased squared MMD with a Gaussian kernel, written out directly.
inline double mmd_sq(const std::vector<double>& x, const std::vector<double>& y, double gamma) {
  auto k = [gamma](double a, double b) { return std::exp(-(a - b) * (a - b) / (2.0 * gamma * gamma)); };
  auto avg = [&](const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (double a : p)
      for (double b : q) s += k(a, b);
    return s / (static_cast<double>(p.size()) * static_cast<double>(q.size()));
  };
  return avg(x, x) + avg(y, y) - 2.0 * avg(x, y);
}

}  // namespace oracle
