#include "mvnr/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mvnr {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ContractViolation(std::string(what) + ": dimension mismatch (" +
                            std::to_string(a) + " vs " + std::to_string(b) +
                            ")");
  }
}

}  // namespace

GaussianEmbedding::GaussianEmbedding(std::string id, std::vector<double> mean,
                                     std::vector<double> variance)
    : id_(std::move(id)), mean_(std::move(mean)), variance_(std::move(variance)) {
  if (mean_.empty()) {
    throw ContractViolation("embedding '" + id_ + "': dimension must be >= 1");
  }
  if (mean_.size() != variance_.size()) {
    throw ContractViolation("embedding '" + id_ + "': mean has " +
                            std::to_string(mean_.size()) +
                            " entries but variance has " +
                            std::to_string(variance_.size()));
  }
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    if (!std::isfinite(mean_[i])) {
      throw ContractViolation("embedding '" + id_ + "': non-finite mean at " +
                              std::to_string(i));
    }
    if (!std::isfinite(variance_[i]) || !(variance_[i] > 0.0)) {
      throw ContractViolation("embedding '" + id_ +
                              "': variance must be positive and finite at " +
                              std::to_string(i));
    }
    log_det_ += std::log(variance_[i]);
  }
}

void validate_ingested(const GaussianEmbedding& g) {
  const auto var = g.variance();
  for (std::size_t i = 0; i < var.size(); ++i) {
    if (var[i] < kMinIngestVariance) {
      throw ContractViolation("embedding '" + g.id() + "': variance " +
                              std::to_string(var[i]) + " at " +
                              std::to_string(i) + " is below the floor 1e-12");
    }
  }
}

double log_pdf(std::span<const double> x, const GaussianEmbedding& g) {
  require_same_dim(x.size(), g.dim(), "pdf");
  const auto mu = g.mean();
  const auto var = g.variance();
  double quad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw ContractViolation("pdf: non-finite input at " + std::to_string(i));
    }
    const double diff = x[i] - mu[i];
    quad += diff * diff / var[i];
  }
  const double k = static_cast<double>(g.dim());
  return -0.5 * k * std::log(2.0 * std::numbers::pi) - 0.5 * g.log_det() -
         0.5 * quad;
}

double pdf(std::span<const double> x, const GaussianEmbedding& g) {
  return std::exp(log_pdf(x, g));
}

double kl_divergence(const GaussianEmbedding& q, const GaussianEmbedding& d) {
  require_same_dim(q.dim(), d.dim(), "kl_divergence");
  const auto mq = q.mean();
  const auto vq = q.variance();
  const auto md = d.mean();
  const auto vd = d.variance();
  // Per-dimension terms keep q == d at exactly zero: log(1) - 1 + 1 + 0.
  double sum = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double diff = mq[i] - md[i];
    sum += std::log(vd[i] / vq[i]) - 1.0 + vq[i] / vd[i] + diff * diff / vd[i];
  }
  return 0.5 * sum;
}

double rank_score(const GaussianEmbedding& q, const GaussianEmbedding& d) {
  require_same_dim(q.dim(), d.dim(), "rank_score");
  const auto mq = q.mean();
  const auto md = d.mean();
  const auto vd = d.variance();
  double mahalanobis = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double diff = mq[i] - md[i];
    mahalanobis += diff * diff / vd[i];
  }
  const double ratio = std::exp(q.log_det() - d.log_det());
  return -(d.log_det() + ratio + mahalanobis);
}

}  // namespace mvnr
