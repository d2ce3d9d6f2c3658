#include "ctfkit/normalization.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "ctfkit/distributions.hpp"
#include "ctfkit/error.hpp"

namespace ctfkit {
namespace {

constexpr double kPsdTolerance = 1e-8;
constexpr double kJitterStart = 1e-12;
constexpr double kJitterMax = 1e-6;

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

void require_same_length(std::span<const std::vector<double>> indices) {
  for (const auto& v : indices) {
    if (v.size() != indices.front().size()) {
      fail(ErrorCode::DimensionMismatch, "index vectors differ in length");
    }
  }
}

}  // namespace

NormalizationSpec make_gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::InvalidArgument, "gaussian normalization needs a finite sigma > 0");
  }
  return GaussianKernel{sigma};
}

NormalizationSpec make_corr(Eigen::MatrixXd matrix) {
  if (matrix.rows() == 0 || matrix.rows() != matrix.cols()) {
    fail(ErrorCode::DimensionMismatch, "correlation matrix must be square and non-empty");
  }
  if (!matrix.allFinite()) fail(ErrorCode::InvalidArgument, "correlation matrix is not finite");
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    if (matrix(i, i) != 1.0) fail(ErrorCode::InvalidArgument, "correlation diagonal must be 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (matrix(i, j) != matrix(j, i)) {
        fail(ErrorCode::InvalidArgument, "correlation matrix must be symmetric");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kPsdTolerance) {
    fail(ErrorCode::NotPSD, "correlation matrix is not positive semidefinite");
  }
  return CorrMatrix{std::move(matrix)};
}

std::string describe(const NormalizationSpec& spec) {
  std::ostringstream out;
  if (std::holds_alternative<Comonotonic>(spec)) {
    out << "comonotonic";
  } else if (std::holds_alternative<Countermonotonic>(spec)) {
    out << "countermonotonic";
  } else if (std::holds_alternative<Independent>(spec)) {
    out << "independent";
  } else if (const auto* g = std::get_if<GaussianKernel>(&spec)) {
    out << "gaussian:" << g->sigma;
  } else {
    out << "corr:" << std::get<CorrMatrix>(spec).matrix.rows() << "x"
        << std::get<CorrMatrix>(spec).matrix.cols();
  }
  return out.str();
}

double kernel_eval(const NormalizationSpec& spec, std::span<const double> p,
                   std::span<const double> p_other) {
  if (p.size() != p_other.size()) {
    fail(ErrorCode::DimensionMismatch, "kernel arguments differ in length");
  }
  const bool equal =
      p.empty() || std::memcmp(p.data(), p_other.data(), p.size() * sizeof(double)) == 0;
  if (std::holds_alternative<Comonotonic>(spec)) return 1.0;
  if (std::holds_alternative<Countermonotonic>(spec)) return equal ? 1.0 : -1.0;
  if (std::holds_alternative<Independent>(spec)) return equal ? 1.0 : 0.0;
  if (const auto* g = std::get_if<GaussianKernel>(&spec)) {
    double sq = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = p[k] - p_other[k];
      sq += d * d;
    }
    return std::exp(-sq / (2.0 * g->sigma * g->sigma));
  }
  fail(ErrorCode::InvalidArgument, "a correlation matrix has no kernel; use build_covariance");
}

IndexGroup group_indices(std::span<const std::vector<double>> indices) {
  IndexGroup groups;
  groups.group_of.reserve(indices.size());
  for (std::size_t w = 0; w < indices.size(); ++w) {
    std::size_t g = 0;
    while (g < groups.representatives.size() &&
           !bitwise_equal(groups.representatives[g], indices[w])) {
      ++g;
    }
    if (g == groups.representatives.size()) {
      groups.representatives.push_back(indices[w]);
      groups.first_world.push_back(w);
    }
    groups.group_of.push_back(g);
  }
  return groups;
}

LatentCovariance build_covariance(const NormalizationSpec& spec,
                                  std::span<const std::vector<double>> indices) {
  if (indices.empty()) fail(ErrorCode::InvalidArgument, "need at least one world");
  require_same_length(indices);

  LatentCovariance out{group_indices(indices), {}};
  const auto& groups = out.groups;
  const auto n_groups = static_cast<Eigen::Index>(groups.group_count());
  out.cov.resize(n_groups, n_groups);

  if (const auto* corr = std::get_if<CorrMatrix>(&spec)) {
    const auto w_count = static_cast<Eigen::Index>(indices.size());
    if (corr->matrix.rows() != w_count) {
      fail(ErrorCode::DimensionMismatch,
           "correlation matrix is " + std::to_string(corr->matrix.rows()) + "x" +
               std::to_string(corr->matrix.cols()) + " but there are " +
               std::to_string(w_count) + " worlds");
    }
    for (Eigen::Index a = 0; a < w_count; ++a) {
      for (Eigen::Index b = 0; b < w_count; ++b) {
        if (groups.group_of[a] == groups.group_of[b] && corr->matrix(a, b) != 1.0) {
          fail(ErrorCode::CorrMatrixInconsistent,
               "worlds " + std::to_string(a) + " and " + std::to_string(b) +
                   " share parent values but have correlation " +
                   std::to_string(corr->matrix(a, b)));
        }
      }
    }
    for (Eigen::Index g = 0; g < n_groups; ++g) {
      for (Eigen::Index h = 0; h < n_groups; ++h) {
        out.cov(g, h) = corr->matrix(static_cast<Eigen::Index>(groups.first_world[g]),
                                     static_cast<Eigen::Index>(groups.first_world[h]));
      }
    }
    return out;
  }

  if (std::holds_alternative<Countermonotonic>(spec) && n_groups > 2) {
    fail(ErrorCode::NotRepresentable,
         "countermonotonic normalization over " + std::to_string(n_groups) +
             " distinct parent configurations: an all -1 off-diagonal is not PSD");
  }
  for (Eigen::Index g = 0; g < n_groups; ++g) {
    out.cov(g, g) = 1.0;
    for (Eigen::Index h = 0; h < g; ++h) {
      const double k = kernel_eval(spec, groups.representatives[g], groups.representatives[h]);
      out.cov(g, h) = k;
      out.cov(h, g) = k;
    }
  }
  return out;
}

LatentFactor prepare_latent(const NormalizationSpec& spec,
                            std::span<const std::vector<double>> indices) {
  LatentCovariance cov = build_covariance(spec, indices);
  LatentFactor factor;
  factor.groups_ = std::move(cov.groups);
  const Eigen::Index n_groups = cov.cov.rows();

  if (n_groups == 1 || std::holds_alternative<Comonotonic>(spec)) {
    factor.mode_ = LatentFactor::Mode::Shared;
    return factor;
  }
  if (std::holds_alternative<Countermonotonic>(spec)) {
    factor.mode_ = LatentFactor::Mode::Antithetic;
    return factor;
  }

  factor.mode_ = LatentFactor::Mode::Gaussian;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n_groups, n_groups);
  Eigen::LLT<Eigen::MatrixXd> llt(cov.cov);
  double jitter = kJitterStart;
  while (llt.info() != Eigen::Success && jitter <= kJitterMax * (1.0 + 1e-9)) {
    llt.compute(cov.cov + jitter * identity);
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::CholeskyFailed, "latent covariance stayed indefinite after jitter " +
                                        std::to_string(kJitterMax));
  }
  factor.lower_ = llt.matrixL();
  // Jitter inflates the diagonal; renormalizing rows restores unit variance.
  for (Eigen::Index g = 0; g < n_groups; ++g) factor.lower_.row(g).normalize();
  return factor;
}

void LatentFactor::draw(Rng& rng, std::span<double> out) const {
  if (out.size() != worlds()) fail(ErrorCode::LengthMismatch, "latent output has wrong length");
  switch (mode_) {
    case Mode::Shared: {
      const double e = standard_normal_quantile(rng.uniform_open());
      for (auto& v : out) v = e;
      return;
    }
    case Mode::Antithetic: {
      const double e = standard_normal_quantile(rng.uniform_open());
      for (std::size_t w = 0; w < out.size(); ++w) out[w] = groups_.group_of[w] == 0 ? e : -e;
      return;
    }
    case Mode::Gaussian: {
      const Eigen::Index n_groups = lower_.rows();
      Eigen::VectorXd z(n_groups);
      for (Eigen::Index g = 0; g < n_groups; ++g) z(g) = standard_normal_quantile(rng.uniform_open());
      const Eigen::VectorXd values = lower_.triangularView<Eigen::Lower>() * z;
      for (std::size_t w = 0; w < out.size(); ++w) {
        out[w] = values(static_cast<Eigen::Index>(groups_.group_of[w]));
      }
      return;
    }
  }
}

std::vector<double> LatentFactor::draw(Rng& rng) const {
  std::vector<double> out(worlds());
  draw(rng, out);
  return out;
}

std::vector<double> sample_latent(const NormalizationSpec& spec,
                                  std::span<const std::vector<double>> indices, Rng& rng) {
  return prepare_latent(spec, indices).draw(rng);
}

}  // namespace ctfkit
