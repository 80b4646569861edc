#pragma once

// Diagonal-covariance multivariate normal representations and the
// KL-divergence family of relevance scores built on them.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvnr {

/// Raised when a caller breaks a documented precondition (dimension
/// mismatch, non-finite input, non-positive variance, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Default number of random variables per distribution (768 / 2 - 1).
inline constexpr std::size_t kDefaultDimension = 381;

/// Ingested variance entries below this are rejected rather than clamped.
inline constexpr double kMinIngestVariance = 1e-12;

/// A k-variate normal with diagonal covariance: an identifier, a mean
/// vector and the diagonal of the covariance matrix.
///
/// Construction validates the invariants (k >= 1, equal lengths, finite
/// means, strictly positive finite variances), so every instance in the
/// program is well formed. The sum of log-variances is cached because
/// every score needs it.
class GaussianEmbedding {
 public:
  GaussianEmbedding(std::string id, std::vector<double> mean,
                    std::vector<double> variance);

  const std::string& id() const noexcept { return id_; }
  std::span<const double> mean() const noexcept { return mean_; }
  std::span<const double> variance() const noexcept { return variance_; }
  std::size_t dim() const noexcept { return mean_.size(); }

  /// log det(Sigma) = sum_i log sigma_i^2, never materialized as a product.
  double log_det() const noexcept { return log_det_; }

  bool operator==(const GaussianEmbedding& other) const = default;

 private:
  std::string id_;
  std::vector<double> mean_;
  std::vector<double> variance_;
  double log_det_ = 0.0;
};

/// Stricter check applied to embeddings read from external files: every
/// variance must be at least kMinIngestVariance.
void validate_ingested(const GaussianEmbedding& g);

/// Log density of x under g.
double log_pdf(std::span<const double> x, const GaussianEmbedding& g);

/// Density of x under g, evaluated as exp(log_pdf) so large k does not
/// underflow the intermediate normalizer.
double pdf(std::span<const double> x, const GaussianEmbedding& g);

/// Exact KL(Q || D) for diagonal Gaussians.
double kl_divergence(const GaussianEmbedding& q, const GaussianEmbedding& d);

/// Rank-equivalent negative KL score:
///   -[ sum log sd^2 + prod(sq^2)/prod(sd^2) + sum (mq - md)^2 / sd^2 ]
/// The product ratio is exp(log_det(q) - log_det(d)). No 1/2 factor, so the
/// value matches the augmented inner product of transform.hpp exactly.
double rank_score(const GaussianEmbedding& q, const GaussianEmbedding& d);

}  // namespace mvnr
