#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ctfkit/rng.hpp"

namespace ctfkit {

struct Normal {
  double mean = 0.0;
  double sd = 1.0;
};

struct Laplace {
  double mean = 0.0;
  double scale = 1.0;
};

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};

struct EmpiricalSorted {
  std::vector<double> values;
};

using Dist1D = std::variant<Normal, Laplace, Uniform, EmpiricalSorted>;

// Validating constructors; each throws InvalidArgument on a bad parameter.
Dist1D make_normal(double mean, double sd);
Dist1D make_laplace(double mean, double scale);
Dist1D make_uniform(double lo, double hi);
/// Sorts `values`; throws EmptySample when empty.
Dist1D make_empirical(std::vector<double> values);

void validate(const Dist1D& dist);

/// Human-readable tag ("normal", "laplace", "uniform", "empirical").
std::string dist_kind(const Dist1D& dist);

double standard_normal_cdf(double x);

/// Inverse of the standard normal CDF on (0, 1). Acklam's rational
/// approximation polished by one Halley step; relative error below 1e-14.
double standard_normal_quantile(double p);

double cdf(const Dist1D& dist, double x);

/// Left-continuous generalized inverse inf{x : cdf(x) >= q}. Unbounded
/// supports reject q in {0, 1} with QuantileOutOfDomain.
double quantile(const Dist1D& dist, double q);

/// Inverse-CDF sampling; consumes one uniform per draw.
std::vector<double> sample(const Dist1D& dist, Rng& rng, std::size_t n);
double sample_one(const Dist1D& dist, Rng& rng);

/// Mean of q*max(y-p,0) + (1-q)*max(p-y,0).
double pinball_loss(std::span<const double> preds, std::span<const double> targets, double q);

}  // namespace ctfkit
