#include "mvnr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace mvnr {

namespace {

const std::map<std::string, int>& judgments_for(const Qrels& qrels,
                                                const std::string& qid) {
  const auto it = qrels.find(qid);
  if (it == qrels.end()) {
    throw ContractViolation("run query '" + qid + "' has no relevance judgments");
  }
  return it->second;
}

int grade_of(const std::map<std::string, int>& judged, const std::string& doc) {
  const auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}

template <class PerQuery>
MetricReport evaluate(const Run& run, const Qrels& qrels, PerQuery&& fn) {
  MetricReport report;
  double total = 0.0;
  for (const auto& [qid, records] : run) {
    const double value = fn(records, judgments_for(qrels, qid));
    report.per_query.emplace(qid, value);
    total += value;
  }
  if (!run.empty()) report.mean = total / static_cast<double>(run.size());
  return report;
}

}  // namespace

void validate_run(const Run& run) {
  for (const auto& [qid, records] : run) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].rank != i + 1) {
        throw ContractViolation("run query '" + qid + "': expected rank " +
                                std::to_string(i + 1) + ", found " +
                                std::to_string(records[i].rank));
      }
      if (i > 0 && records[i].score > records[i - 1].score) {
        throw ContractViolation("run query '" + qid +
                                "': scores increase at rank " +
                                std::to_string(i + 1));
      }
    }
  }
}

MetricReport mrr_at_10(const Run& run, const Qrels& qrels) {
  return evaluate(run, qrels, [](const auto& records, const auto& judged) {
    const std::size_t depth = std::min<std::size_t>(10, records.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (grade_of(judged, records[i].doc_id) > 0) {
        return 1.0 / static_cast<double>(i + 1);
      }
    }
    return 0.0;
  });
}

MetricReport ndcg_at_10(const Run& run, const Qrels& qrels) {
  return evaluate(run, qrels, [](const auto& records, const auto& judged) {
    auto gain = [](int grade) { return std::exp2(grade) - 1.0; };
    auto discount = [](std::size_t pos) {
      return 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    };
    double dcg = 0.0;
    const std::size_t depth = std::min<std::size_t>(10, records.size());
    for (std::size_t i = 0; i < depth; ++i) {
      dcg += gain(grade_of(judged, records[i].doc_id)) * discount(i);
    }
    std::vector<int> grades;
    grades.reserve(judged.size());
    for (const auto& [doc, grade] : judged) grades.push_back(grade);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(10, grades.size()); ++i) {
      ideal += gain(grades[i]) * discount(i);
    }
    return ideal > 0.0 ? dcg / ideal : 0.0;
  });
}

MetricReport map_at_1000(const Run& run, const Qrels& qrels,
                         int relevance_threshold) {
  return evaluate(run, qrels, [relevance_threshold](const auto& records,
                                                    const auto& judged) {
    const auto relevant = static_cast<std::size_t>(std::count_if(
        judged.begin(), judged.end(),
        [&](const auto& kv) { return kv.second >= relevance_threshold; }));
    if (relevant == 0) return 0.0;
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t depth = std::min<std::size_t>(1000, records.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (grade_of(judged, records[i].doc_id) >= relevance_threshold) {
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
    }
    return sum / static_cast<double>(relevant);
  });
}

// ---------------------------------------------------------------------------
// Correlation

namespace {

void check_pair(std::span<const double> xs, std::span<const double> ys,
                const char* who) {
  if (xs.size() != ys.size()) {
    throw ContractViolation(std::string(who) + ": length mismatch");
  }
  if (xs.size() < 2) {
    throw ContractViolation(std::string(who) + ": need at least two points");
  }
}

// Merge sort that counts inversions (pairs out of order).
std::uint64_t sort_counting_swaps(std::vector<double>& v, std::vector<double>& buf,
                                  std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_counting_swaps(v, buf, lo, mid) +
                        sort_counting_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, out = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[out++] = v[j++];
    } else {
      buf[out++] = v[i++];
    }
  }
  while (i < mid) buf[out++] = v[i++];
  while (j < hi) buf[out++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Number of pairs tied within runs of equal values of a sorted sequence.
template <class Eq>
std::uint64_t tied_pairs(std::size_t n, Eq&& equal) {
  std::uint64_t ties = 0;
  std::uint64_t run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties + run * (run - 1) / 2;
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys, "pearson");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedResult("pearson: correlation undefined for constant input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Knight's algorithm: sort by (x, y), count joint ties and x ties, then
// count discordant pairs as the inversions of y.
double kendall_tau(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys, "kendall_tau");
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (xs[a] != xs[b]) return xs[a] < xs[b];
    return ys[a] < ys[b];
  });

  const std::uint64_t x_ties = tied_pairs(
      n, [&](std::size_t i, std::size_t j) { return xs[order[i]] == xs[order[j]]; });
  const std::uint64_t joint_ties = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return xs[order[i]] == xs[order[j]] && ys[order[i]] == ys[order[j]];
  });

  std::vector<double> y_sorted(n);
  for (std::size_t i = 0; i < n; ++i) y_sorted[i] = ys[order[i]];
  std::vector<double> buf(n);
  const std::uint64_t discordant = sort_counting_swaps(y_sorted, buf, 0, n);
  const std::uint64_t y_ties = tied_pairs(
      n, [&](std::size_t i, std::size_t j) { return y_sorted[i] == y_sorted[j]; });

  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const double n1 = static_cast<double>(total - x_ties);
  const double n2 = static_cast<double>(total - y_ties);
  if (n1 == 0.0 || n2 == 0.0) {
    throw UndefinedResult("kendall_tau: undefined when one input is constant");
  }
  // concordant - discordant = total - x_ties - y_ties + joint_ties - 2 * discordant
  const double numer = static_cast<double>(total) - static_cast<double>(x_ties) -
                       static_cast<double>(y_ties) +
                       static_cast<double>(joint_ties) -
                       2.0 * static_cast<double>(discordant);
  return std::clamp(numer / std::sqrt(n1 * n2), -1.0, 1.0);
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw ContractViolation("pearson_p_value: need n >= 3");
  if (std::abs(r) >= 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = r * std::sqrt(dof / (1.0 - r * r));
  const boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// ---------------------------------------------------------------------------
// QPP

QppReduction parse_qpp_reduction(const std::string& name) {
  if (name == "l2") return QppReduction::L2Norm;
  if (name == "logdet") return QppReduction::LogDeterminant;
  if (name == "trace") return QppReduction::Trace;
  throw ContractViolation("unknown qpp reduction '" + name +
                          "' (expected l2, logdet or trace)");
}

std::string to_string(QppReduction reduction) {
  switch (reduction) {
    case QppReduction::L2Norm: return "l2";
    case QppReduction::LogDeterminant: return "logdet";
    case QppReduction::Trace: return "trace";
  }
  return "l2";
}

double qpp_predictor(const GaussianEmbedding& q, QppReduction reduction) {
  const auto var = q.variance();
  switch (reduction) {
    case QppReduction::L2Norm: {
      double sq = 0.0;
      for (const double v : var) sq += v * v;
      return std::sqrt(sq);
    }
    case QppReduction::LogDeterminant:
      return q.log_det();
    case QppReduction::Trace:
      return std::accumulate(var.begin(), var.end(), 0.0);
  }
  return 0.0;
}

QppSummary correlate(std::span<const QppRecord> records) {
  std::vector<double> xs, ys;
  xs.reserve(records.size());
  ys.reserve(records.size());
  for (const auto& r : records) {
    if (!std::isfinite(r.predictor) || !std::isfinite(r.effectiveness)) {
      throw ContractViolation("qpp record '" + r.query_id + "' is not finite");
    }
    xs.push_back(r.predictor);
    ys.push_back(r.effectiveness);
  }
  QppSummary s;
  s.pearson = pearson(xs, ys);
  s.kendall = kendall_tau(xs, ys);
  s.p_value = records.size() >= 3 ? pearson_p_value(s.pearson, records.size()) : 1.0;
  return s;
}

}  // namespace mvnr
