#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ctfkit/rng.hpp"

namespace ctfkit {

// Counterfactual conceptions. Each one is a zero-mean, unit-variance
// Gaussian process over parent-value indices, described by its correlation
// kernel.

/// Rank-preserving across all worlds: k(p, p') = 1.
struct Comonotonic {};
/// Rank-reversing between two distinct indices; not representable for more.
struct Countermonotonic {};
/// White noise: correlation 1 only for identical indices.
struct Independent {};
/// k(p, p') = exp(-|p - p'|^2 / (2 sigma^2)).
struct GaussianKernel {
  double sigma;
};
/// Explicit W x W correlation over the worlds of one fixed WorldSet.
struct CorrMatrix {
  Eigen::MatrixXd matrix;
};

using NormalizationSpec =
    std::variant<Comonotonic, Countermonotonic, Independent, GaussianKernel, CorrMatrix>;

NormalizationSpec make_gaussian(double sigma);
/// Checks symmetry, unit diagonal and PSD (smallest eigenvalue >= -1e-8).
NormalizationSpec make_corr(Eigen::MatrixXd matrix);

/// Short text form used in logs and CSV metadata, e.g. "gaussian:2".
std::string describe(const NormalizationSpec& spec);

/// Kernel value between two index vectors. Not defined for CorrMatrix.
double kernel_eval(const NormalizationSpec& spec, std::span<const double> p,
                   std::span<const double> p_other);

/// Worlds whose index vectors are bitwise equal share one group. Groups are
/// numbered by first appearance.
struct IndexGroup {
  std::vector<std::size_t> group_of;
  std::vector<std::vector<double>> representatives;
  std::vector<std::size_t> first_world;  // world that introduced each group

  std::size_t group_count() const noexcept { return representatives.size(); }
};

IndexGroup group_indices(std::span<const std::vector<double>> indices);

struct LatentCovariance {
  IndexGroup groups;
  Eigen::MatrixXd cov;  // G x G, unit diagonal
};

LatentCovariance build_covariance(const NormalizationSpec& spec,
                                  std::span<const std::vector<double>> indices);

/// Reusable factorization of one latent law; `sample_latent` is
/// `prepare_latent` followed by one `draw`.
class LatentFactor {
 public:
  enum class Mode { Shared, Antithetic, Gaussian };

  Mode mode() const noexcept { return mode_; }
  const IndexGroup& groups() const noexcept { return groups_; }
  std::size_t worlds() const noexcept { return groups_.group_of.size(); }

  /// One joint draw; writes `worlds()` values into `out`.
  void draw(Rng& rng, std::span<double> out) const;
  std::vector<double> draw(Rng& rng) const;

 private:
  friend LatentFactor prepare_latent(const NormalizationSpec&, std::span<const std::vector<double>>);

  Mode mode_ = Mode::Shared;
  IndexGroup groups_;
  Eigen::MatrixXd lower_;  // rows normalized so that each group has unit variance
};

/// Builds the covariance and factors it. Gaussian factorization uses
/// Cholesky with jitter 1e-12 * I, growing tenfold up to 1e-6 * I, before
/// giving up with CholeskyFailed.
LatentFactor prepare_latent(const NormalizationSpec& spec,
                            std::span<const std::vector<double>> indices);

std::vector<double> sample_latent(const NormalizationSpec& spec,
                                  std::span<const std::vector<double>> indices, Rng& rng);

}  // namespace ctfkit
