#include "mvnr/transform.hpp"

#include <cmath>
#include <string>

namespace mvnr {

namespace {

void guard_log_product(double log_product, const std::string& who) {
  if (std::abs(log_product) > kLogProductGuard) {
    throw RangeError(who + ": variance log-sum " + std::to_string(log_product) +
                     " exceeds the representable guard band of +/-" +
                     std::to_string(kLogProductGuard));
  }
}

}  // namespace

double document_prior(const GaussianEmbedding& d) {
  const auto mu = d.mean();
  const auto var = d.variance();
  double quad = 0.0;
  for (std::size_t i = 0; i < d.dim(); ++i) quad += mu[i] * mu[i] / var[i];
  return -(d.log_det() + quad);
}

TransformedQuery transform_query(const GaussianEmbedding& q) {
  guard_log_product(q.log_det(), "transform_query('" + q.id() + "')");
  const std::size_t k = q.dim();
  const auto mu = q.mean();
  TransformedQuery out;
  out.vec.resize(augmented_size(k));
  out.vec[0] = 1.0;
  out.vec[1] = std::exp(q.log_det());
  for (std::size_t i = 0; i < k; ++i) {
    out.vec[2 + i] = mu[i] * mu[i];
    out.vec[2 + k + i] = mu[i];
  }
  return out;
}

TransformedDoc transform_doc(const GaussianEmbedding& d) {
  guard_log_product(d.log_det(), "transform_doc('" + d.id() + "')");
  const std::size_t k = d.dim();
  const auto mu = d.mean();
  const auto var = d.variance();
  TransformedDoc out;
  out.id = d.id();
  out.prior = document_prior(d);
  out.vec.resize(augmented_size(k));
  out.vec[0] = out.prior;
  out.vec[1] = -std::exp(-d.log_det());
  for (std::size_t i = 0; i < k; ++i) {
    out.vec[2 + i] = -1.0 / var[i];
    out.vec[2 + k + i] = 2.0 * mu[i] / var[i];
  }
  return out;
}

double inner_product(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double dot_score(const TransformedQuery& tq, const TransformedDoc& td) {
  if (tq.vec.size() != td.vec.size()) {
    throw ContractViolation("dot_score: augmented length mismatch (" +
                            std::to_string(tq.vec.size()) + " vs " +
                            std::to_string(td.vec.size()) + ")");
  }
  return inner_product(tq.vec, td.vec);
}

}  // namespace mvnr
