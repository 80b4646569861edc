#pragma once

// Reference implementations used only by tests. They follow the textbook
// formulas directly (plain loops, product of variances, no caching) and
// share no code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "mvnr/trainer.hpp"

namespace mvnr::oracle {

inline double softplus(double t, double beta) {
  // Accurate for the moderate activations seen in tests.
  return std::log1p(std::exp(beta * t)) / beta;
}

struct Dist {
  std::vector<double> mean;
  std::vector<double> var;
};

inline Dist encode(const EncoderParams& p, const std::vector<double>& x) {
  Dist d{std::vector<double>(p.dim, 0.0), std::vector<double>(p.dim, 0.0)};
  for (std::size_t c = 0; c < p.dim; ++c) {
    double m = 0.0, s = 0.0;
    for (std::size_t r = 0; r < p.input_dim; ++r) {
      m += x[r] * p.mean_proj[r * p.dim + c];
      s += x[r] * p.var_proj[r * p.dim + c];
    }
    d.mean[c] = m;
    d.var[c] = softplus(s, p.beta);
  }
  return d;
}

// -[sum log vd + prod vq / prod vd + sum (mq - md)^2 / vd]
inline double score(const Dist& q, const Dist& d) {
  double sum_log = 0.0, pq = 1.0, pd = 1.0, maha = 0.0;
  for (std::size_t c = 0; c < q.mean.size(); ++c) {
    sum_log += std::log(d.var[c]);
    pq *= q.var[c];
    pd *= d.var[c];
    maha += (q.mean[c] - d.mean[c]) * (q.mean[c] - d.mean[c]) / d.var[c];
  }
  return -(sum_log + pq / pd + maha);
}

struct Entry {
  const std::vector<double>* features;
  double teacher;
};

// Candidate list of instance i, with other instances' positives appended as
// -inf-teacher negatives when requested.
inline std::vector<Entry> candidate_list(const std::vector<TrainingInstance>& batch,
                                         std::size_t i, bool in_batch) {
  std::vector<Entry> list;
  std::set<std::string> seen(batch[i].relevant_ids.begin(), batch[i].relevant_ids.end());
  for (const auto& c : batch[i].candidates) {
    list.push_back({&c.features, c.teacher_score});
    seen.insert(c.doc_id);
  }
  if (!in_batch) return list;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (j == i) continue;
    for (const auto& c : batch[j].candidates) {
      if (c.is_positive && seen.insert(c.doc_id).second) {
        list.push_back({&c.features, -std::numeric_limits<double>::infinity()});
      }
    }
  }
  return list;
}

inline std::vector<double> scores_of(const EncoderParams& p,
                                     const std::vector<TrainingInstance>& batch,
                                     std::size_t i, bool in_batch) {
  const Dist q = encode(p, batch[i].query_features);
  std::vector<double> s;
  for (const auto& e : candidate_list(batch, i, in_batch)) s.push_back(score(q, encode(p, *e.features)));
  return s;
}

// 1-based ranks by descending score, earlier candidate first on ties.
inline std::vector<std::size_t> ranks(const std::vector<double>& s) {
  std::vector<std::size_t> out(s.size());
  for (std::size_t a = 0; a < s.size(); ++a) {
    std::size_t above = 0;
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (s[b] > s[a] || (s[b] == s[a] && b < a)) ++above;
    }
    out[a] = above + 1;
  }
  return out;
}

inline double list_loss(const std::vector<double>& student, const std::vector<double>& teacher,
                        const std::vector<std::size_t>& rank) {
  double loss = 0.0;
  for (std::size_t a = 0; a < student.size(); ++a) {
    for (std::size_t b = 0; b < student.size(); ++b) {
      if (!(teacher[a] > teacher[b])) continue;
      const double w = std::abs(1.0 / static_cast<double>(rank[a]) - 1.0 / static_cast<double>(rank[b]));
      const double z = student[b] - student[a];
      loss += w * (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    }
  }
  return loss;
}

// Mean per-instance loss with the given ranks frozen.
inline double batch_loss(const EncoderParams& p, const std::vector<TrainingInstance>& batch,
                         bool in_batch, const std::vector<std::vector<std::size_t>>& frozen) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<double> teacher;
    for (const auto& e : candidate_list(batch, i, in_batch)) teacher.push_back(e.teacher);
    total += list_loss(scores_of(p, batch, i, in_batch), teacher, frozen[i]);
  }
  return total / static_cast<double>(batch.size());
}

inline std::vector<std::vector<std::size_t>> batch_ranks(const EncoderParams& p,
                                                         const std::vector<TrainingInstance>& batch,
                                                         bool in_batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(ranks(scores_of(p, batch, i, in_batch)));
  return out;
}

struct FdResult {
  double max_rel_error = 0.0;
  double loss_gap = 0.0;  // relative |oracle loss - library loss| at the base point
  std::size_t checked = 0;
};

// Central differences of the oracle loss against the library's analytic
// gradient, ranks frozen at the base point.
inline FdResult finite_difference_check(const EncoderParams& params,
                                        const std::vector<TrainingInstance>& batch,
                                        bool in_batch, double h = 1e-5) {
  const auto frozen = batch_ranks(params, batch, in_batch);
  Gradient grad;
  const LossOptions opts{in_batch};
  const double lib_loss = mvnr::batch_loss(params, batch, opts, mvnr::batch_ranks(params, batch, opts), &grad);
  FdResult r;
  const double ref_loss = batch_loss(params, batch, in_batch, frozen);
  r.loss_gap = std::abs(lib_loss - ref_loss) / std::max(1.0, std::abs(ref_loss));
  EncoderParams probe = params;
  auto sweep = [&](std::vector<double>& w, const std::vector<double>& analytic) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = batch_loss(probe, batch, in_batch, frozen);
      w[i] = saved - h;
      const double down = batch_loss(probe, batch, in_batch, frozen);
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      const double err = std::abs(numeric - analytic[i]) / denom;
      r.max_rel_error = std::isfinite(err) ? std::max(r.max_rel_error, err) : INFINITY;
      ++r.checked;
    }
  };
  sweep(probe.mean_proj, grad.mean_proj);
  sweep(probe.var_proj, grad.var_proj);
  return r;
}

}  // namespace mvnr::oracle
