#include "ctfkit/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctfkit/error.hpp"

namespace ctfkit {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

void require_probability(double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    fail(ErrorCode::QuantileOutOfDomain, "quantile level " + std::to_string(q) + " outside [0,1]");
  }
}

void require_open_probability(double q, const char* what) {
  if (!(q > 0.0 && q < 1.0)) {
    fail(ErrorCode::QuantileOutOfDomain, std::string(what) + " quantile needs q in (0,1), got " +
                                             std::to_string(q));
  }
}

}  // namespace

Dist1D make_normal(double mean, double sd) {
  Dist1D d = Normal{mean, sd};
  validate(d);
  return d;
}

Dist1D make_laplace(double mean, double scale) {
  Dist1D d = Laplace{mean, scale};
  validate(d);
  return d;
}

Dist1D make_uniform(double lo, double hi) {
  Dist1D d = Uniform{lo, hi};
  validate(d);
  return d;
}

Dist1D make_empirical(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  Dist1D d = EmpiricalSorted{std::move(values)};
  validate(d);
  return d;
}

void validate(const Dist1D& dist) {
  std::visit(Overloaded{
                 [](const Normal& d) {
                   if (!std::isfinite(d.mean) || !(d.sd > 0.0) || !std::isfinite(d.sd)) {
                     fail(ErrorCode::InvalidArgument, "normal needs finite mean and sd > 0");
                   }
                 },
                 [](const Laplace& d) {
                   if (!std::isfinite(d.mean) || !(d.scale > 0.0) || !std::isfinite(d.scale)) {
                     fail(ErrorCode::InvalidArgument, "laplace needs finite mean and scale > 0");
                   }
                 },
                 [](const Uniform& d) {
                   if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || !(d.lo < d.hi)) {
                     fail(ErrorCode::InvalidArgument, "uniform needs finite lo < hi");
                   }
                 },
                 [](const EmpiricalSorted& d) {
                   if (d.values.empty()) fail(ErrorCode::EmptySample, "empirical law is empty");
                   if (!std::is_sorted(d.values.begin(), d.values.end())) {
                     fail(ErrorCode::InvalidArgument, "empirical values must be sorted");
                   }
                 },
             },
             dist);
}

std::string dist_kind(const Dist1D& dist) {
  return std::visit(Overloaded{
                        [](const Normal&) { return std::string("normal"); },
                        [](const Laplace&) { return std::string("laplace"); },
                        [](const Uniform&) { return std::string("uniform"); },
                        [](const EmpiricalSorted&) { return std::string("empirical"); },
                    },
                    dist);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double standard_normal_quantile(double p) {
  require_open_probability(p, "normal");
  double x = acklam(p);
  // Halley step on F(x) - p. In the upper tail work with the complement to
  // avoid cancellation.
  double e;
  if (p > 0.5) {
    e = (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  } else {
    e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  }
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double cdf(const Dist1D& dist, double x) {
  return std::visit(Overloaded{
                        [x](const Normal& d) { return standard_normal_cdf((x - d.mean) / d.sd); },
                        [x](const Laplace& d) {
                          const double z = (x - d.mean) / d.scale;
                          return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
                        },
                        [x](const Uniform& d) {
                          if (x <= d.lo) return 0.0;
                          if (x >= d.hi) return 1.0;
                          return (x - d.lo) / (d.hi - d.lo);
                        },
                        [x](const EmpiricalSorted& d) {
                          const auto it = std::upper_bound(d.values.begin(), d.values.end(), x);
                          return static_cast<double>(it - d.values.begin()) /
                                 static_cast<double>(d.values.size());
                        },
                    },
                    dist);
}

double quantile(const Dist1D& dist, double q) {
  require_probability(q);
  return std::visit(Overloaded{
                        [q](const Normal& d) {
                          require_open_probability(q, "normal");
                          return d.mean + d.sd * standard_normal_quantile(q);
                        },
                        [q](const Laplace& d) {
                          require_open_probability(q, "laplace");
                          return q < 0.5 ? d.mean + d.scale * std::log(2.0 * q)
                                         : d.mean - d.scale * std::log(2.0 - 2.0 * q);
                        },
                        [q](const Uniform& d) { return d.lo + q * (d.hi - d.lo); },
                        [q](const EmpiricalSorted& d) {
                          const std::size_t n = d.values.size();
                          if (q <= 0.0) return d.values.front();
                          auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
                          k = std::clamp<std::size_t>(k, 1, n);
                          return d.values[k - 1];
                        },
                    },
                    dist);
}

double sample_one(const Dist1D& dist, Rng& rng) { return quantile(dist, rng.uniform_open()); }

std::vector<double> sample(const Dist1D& dist, Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = sample_one(dist, rng);
  return out;
}

double pinball_loss(std::span<const double> preds, std::span<const double> targets, double q) {
  if (preds.size() != targets.size()) {
    fail(ErrorCode::LengthMismatch, "pinball loss needs equally long predictions and targets");
  }
  if (preds.empty()) fail(ErrorCode::EmptySample, "pinball loss of an empty sample");
  require_probability(q);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double diff = targets[i] - preds[i];
    total += diff > 0.0 ? q * diff : (q - 1.0) * diff;
  }
  return total / static_cast<double>(preds.size());
}

}  // namespace ctfkit
