#pragma once

// TREC-style ranking metrics and the pre-retrieval query performance
// prediction study (variance-based predictor vs per-query effectiveness).

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvnr/gaussian.hpp"

namespace mvnr {

/// query_id -> doc_id -> relevance grade (>= 0).
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct RunRecord {
  std::string query_id;
  std::string doc_id;
  std::size_t rank = 0;
  double score = 0.0;
};

/// query_id -> records ordered by rank (1..n).
using Run = std::map<std::string, std::vector<RunRecord>>;

/// Checks the RunRecord invariants: ranks 1..n without gaps, scores
/// non-increasing. Throws ContractViolation.
void validate_run(const Run& run);

/// Per-query metric values plus their mean over the run's queries.
struct MetricReport {
  std::map<std::string, double> per_query;
  double mean = 0.0;
};

MetricReport mrr_at_10(const Run& run, const Qrels& qrels);
MetricReport ndcg_at_10(const Run& run, const Qrels& qrels);

/// Average precision over the top 1000, counting grade >= relevance_threshold
/// as relevant.
MetricReport map_at_1000(const Run& run, const Qrels& qrels,
                         int relevance_threshold = 1);

/// Raised when a statistic is undefined for the given input.
class UndefinedResult : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double pearson(std::span<const double> xs, std::span<const double> ys);

/// Kendall tau-b (tie corrected), O(n log n).
double kendall_tau(std::span<const double> xs, std::span<const double> ys);

/// Two-sided p-value of H0: rho = 0, from t = r sqrt(n-2) / sqrt(1-r^2)
/// with n-2 degrees of freedom.
double pearson_p_value(double r, std::size_t n);

enum class QppReduction {
  L2Norm,        // ||(s_1^2, ..., s_k^2)||_2
  LogDeterminant,  // sum_i log s_i^2 = log det(Sigma)
  Trace,         // sum_i s_i^2
};

QppReduction parse_qpp_reduction(const std::string& name);
std::string to_string(QppReduction reduction);

double qpp_predictor(const GaussianEmbedding& q,
                     QppReduction reduction = QppReduction::L2Norm);

struct QppRecord {
  std::string query_id;
  double predictor = 0.0;
  double effectiveness = 0.0;
};

struct QppSummary {
  double pearson = 0.0;
  double kendall = 0.0;
  double p_value = 1.0;
};

QppSummary correlate(std::span<const QppRecord> records);

}  // namespace mvnr
