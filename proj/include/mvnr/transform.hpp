#pragma once

// Reduction of the negative-KL rank score to a plain inner product over
// (2k + 2)-dimensional augmented vectors, so any inner-product index can
// retrieve by it.
//
//   query: [1,   Pi_q,    mq_1^2,    ..., mq_k^2,    mq_1,          ..., mq_k]
//   doc:   [g_d, -1/Pi_d, -1/sd_1^2, ..., -1/sd_k^2, 2 md_1/sd_1^2, ..., 2 md_k/sd_k^2]
//
// with Pi = prod sigma_i^2 and the document prior
//   g_d = -sum_i (log sd_i^2 + md_i^2 / sd_i^2).

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvnr/gaussian.hpp"

namespace mvnr {

/// |sum_i log sigma_i^2| above which Pi (or 1/Pi) is refused.
inline constexpr double kLogProductGuard = 600.0;

/// Raised when a variance product would leave the guarded double range.
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

inline constexpr std::size_t augmented_size(std::size_t k) noexcept {
  return 2 * k + 2;
}

struct TransformedQuery {
  std::vector<double> vec;

  std::size_t dim() const noexcept { return (vec.size() - 2) / 2; }
};

struct TransformedDoc {
  std::string id;
  std::vector<double> vec;
  double prior = 0.0;  // g_d, equal to vec[0]

  std::size_t dim() const noexcept { return (vec.size() - 2) / 2; }
  bool operator==(const TransformedDoc&) const = default;
};

TransformedQuery transform_query(const GaussianEmbedding& q);
TransformedDoc transform_doc(const GaussianEmbedding& d);

/// The query-independent prior g_d of a document.
double document_prior(const GaussianEmbedding& d);

double inner_product(std::span<const double> a, std::span<const double> b);

/// Inner product of the augmented vectors; equals rank_score(q, d).
double dot_score(const TransformedQuery& tq, const TransformedDoc& td);

}  // namespace mvnr
