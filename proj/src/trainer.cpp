#include "mvnr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "mvnr/transform.hpp"

namespace mvnr {

double softplus(double t, double beta) {
  const double bt = beta * t;
  if (bt > 0.0) return t + std::log1p(std::exp(-bt)) / beta;
  return std::log1p(std::exp(bt)) / beta;
}

double softplus_derivative(double t, double beta) {
  const double bt = beta * t;
  if (bt >= 0.0) return 1.0 / (1.0 + std::exp(-bt));
  const double e = std::exp(bt);
  return e / (1.0 + e);
}

EncoderParams EncoderParams::random(std::size_t input_dim, std::size_t dim,
                                    double beta, double scale,
                                    std::uint64_t seed) {
  if (input_dim == 0 || dim == 0) {
    throw ContractViolation("encoder: input_dim and dim must be >= 1");
  }
  EncoderParams p;
  p.input_dim = input_dim;
  p.dim = dim;
  p.beta = beta;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(
      0.0, scale / std::sqrt(static_cast<double>(input_dim)));
  p.mean_proj.resize(input_dim * dim);
  p.var_proj.resize(input_dim * dim);
  for (auto& w : p.mean_proj) w = normal(rng);
  for (auto& w : p.var_proj) w = normal(rng);
  p.validate();
  return p;
}

void EncoderParams::validate() const {
  if (input_dim == 0 || dim == 0) {
    throw ContractViolation("encoder: input_dim and dim must be >= 1");
  }
  if (mean_proj.size() != input_dim * dim || var_proj.size() != input_dim * dim) {
    throw ContractViolation("encoder: projection sizes do not match input_dim x dim");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ContractViolation("encoder: beta must be positive and finite");
  }
  auto finite = [](double w) { return std::isfinite(w); };
  if (!std::all_of(mean_proj.begin(), mean_proj.end(), finite) ||
      !std::all_of(var_proj.begin(), var_proj.end(), finite)) {
    throw ContractViolation("encoder: non-finite weight");
  }
}

namespace {

struct Activations {
  std::vector<double> mean;
  std::vector<double> var_act;  // pre-softplus
};

Activations project(const EncoderParams& p, std::span<const double> x) {
  if (x.size() != p.input_dim) {
    throw ContractViolation("encode: feature length " + std::to_string(x.size()) +
                            " does not match encoder input_dim " +
                            std::to_string(p.input_dim));
  }
  Activations a{std::vector<double>(p.dim, 0.0), std::vector<double>(p.dim, 0.0)};
  for (std::size_t r = 0; r < p.input_dim; ++r) {
    const double xr = x[r];
    if (!std::isfinite(xr)) {
      throw ContractViolation("encode: non-finite feature at " + std::to_string(r));
    }
    const double* wm = p.mean_proj.data() + r * p.dim;
    const double* ws = p.var_proj.data() + r * p.dim;
    for (std::size_t c = 0; c < p.dim; ++c) {
      a.mean[c] += xr * wm[c];
      a.var_act[c] += xr * ws[c];
    }
  }
  for (std::size_t c = 0; c < p.dim; ++c) {
    if (!std::isfinite(a.mean[c]) || !std::isfinite(a.var_act[c])) {
      throw ContractViolation("encode: non-finite activation at " + std::to_string(c));
    }
  }
  return a;
}

GaussianEmbedding to_embedding(const EncoderParams& p, const Activations& a,
                               std::string id) {
  std::vector<double> var(p.dim);
  for (std::size_t c = 0; c < p.dim; ++c) var[c] = softplus(a.var_act[c], p.beta);
  return GaussianEmbedding(std::move(id), a.mean, std::move(var));
}

}  // namespace

GaussianEmbedding encode(const EncoderParams& params, std::span<const double> x,
                         std::string id) {
  return to_embedding(params, project(params, x), std::move(id));
}

std::vector<GaussianEmbedding> encode_all(const EncoderParams& params,
                                          const FeatureTable& table) {
  std::vector<GaussianEmbedding> out;
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.push_back(encode(params, table.features(i), table.id(i)));
  }
  return out;
}

std::vector<std::size_t> ranks_from_scores(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
  return ranks;
}

namespace {

void check_ranks(std::span<const std::size_t> ranks) {
  std::vector<bool> seen(ranks.size(), false);
  for (const std::size_t r : ranks) {
    if (r == 0 || r > ranks.size() || seen[r - 1]) {
      throw ContractViolation("distill_loss: ranks are not a permutation of 1..n");
    }
    seen[r - 1] = true;
  }
}

// Loss of one candidate list plus d loss / d score_j into `dscore`.
double listwise(std::span<const double> student, std::span<const double> teacher,
                std::span<const std::size_t> ranks, std::vector<double>* dscore) {
  const std::size_t n = student.size();
  if (dscore) dscore->assign(n, 0.0);
  double loss = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (!(teacher[a] > teacher[b])) continue;
      const double weight = std::abs(1.0 / static_cast<double>(ranks[a]) -
                                     1.0 / static_cast<double>(ranks[b]));
      const double z = student[b] - student[a];
      loss += weight * softplus(z, 1.0);
      if (dscore) {
        const double g = weight * softplus_derivative(z, 1.0);
        (*dscore)[a] -= g;
        (*dscore)[b] += g;
      }
    }
  }
  return loss;
}

}  // namespace

double distill_loss(std::span<const double> student_scores,
                    std::span<const double> teacher_scores,
                    std::span<const std::size_t> student_ranks) {
  if (student_scores.size() != teacher_scores.size() ||
      student_scores.size() != student_ranks.size()) {
    throw ContractViolation("distill_loss: length mismatch");
  }
  if (student_scores.size() < 2) {
    throw ContractViolation("distill_loss: need at least two candidates");
  }
  check_ranks(student_ranks);
  return listwise(student_scores, teacher_scores, student_ranks, nullptr);
}

// ---------------------------------------------------------------------------
// Batch forward/backward

namespace {

struct Encoded {
  const std::vector<double>* features = nullptr;
  Activations act;
  std::vector<double> var;
  double log_det = 0.0;
  std::vector<double> grad_mean;
  std::vector<double> grad_var;
};

struct Slot {
  std::size_t doc = 0;  // index into Prepared::docs
  double teacher = 0.0;
};

struct Prepared {
  std::vector<Encoded> queries;
  std::vector<Encoded> docs;
  std::vector<std::vector<Slot>> lists;
  std::vector<std::vector<double>> scores;
};

Encoded encode_row(const EncoderParams& p, const std::vector<double>& x) {
  Encoded e;
  e.features = &x;
  e.act = project(p, x);
  e.var.resize(p.dim);
  for (std::size_t c = 0; c < p.dim; ++c) {
    e.var[c] = softplus(e.act.var_act[c], p.beta);
    if (!(e.var[c] > 0.0)) {
      throw ContractViolation("encode: variance underflowed to zero at " +
                              std::to_string(c));
    }
    e.log_det += std::log(e.var[c]);
  }
  e.grad_mean.assign(p.dim, 0.0);
  e.grad_var.assign(p.dim, 0.0);
  return e;
}

// Same arithmetic as rank_score, on cached encodings.
double score_of(const Encoded& q, const Encoded& d) {
  double mahalanobis = 0.0;
  for (std::size_t c = 0; c < q.var.size(); ++c) {
    const double diff = q.act.mean[c] - d.act.mean[c];
    mahalanobis += diff * diff / d.var[c];
  }
  return -(d.log_det + std::exp(q.log_det - d.log_det) + mahalanobis);
}

Prepared prepare(const EncoderParams& params,
                 std::span<const TrainingInstance> batch,
                 const LossOptions& options) {
  params.validate();
  Prepared prep;
  std::unordered_map<std::string, std::size_t> doc_slot;
  auto slot_for = [&](const Candidate& c) {
    const auto [it, inserted] = doc_slot.try_emplace(c.doc_id, prep.docs.size());
    if (inserted) prep.docs.push_back(encode_row(params, c.features));
    return it->second;
  };

  prep.lists.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& inst = batch[i];
    if (inst.candidates.size() < 2) {
      throw ContractViolation("training instance '" + inst.query_id +
                              "' needs at least two candidates");
    }
    prep.queries.push_back(encode_row(params, inst.query_features));
    for (const auto& c : inst.candidates) {
      if (!std::isfinite(c.teacher_score)) {
        throw ContractViolation("training instance '" + inst.query_id +
                                "' has a non-finite teacher score");
      }
      prep.lists[i].push_back({slot_for(c), c.teacher_score});
    }
  }

  if (options.in_batch_negatives) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::unordered_set<std::string> excluded(batch[i].relevant_ids.begin(),
                                               batch[i].relevant_ids.end());
      for (const auto& c : batch[i].candidates) excluded.insert(c.doc_id);
      for (std::size_t j = 0; j < batch.size(); ++j) {
        if (j == i) continue;
        for (const auto& c : batch[j].candidates) {
          if (!c.is_positive || !excluded.insert(c.doc_id).second) continue;
          prep.lists[i].push_back(
              {slot_for(c), -std::numeric_limits<double>::infinity()});
        }
      }
    }
  }

  prep.scores.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& slot : prep.lists[i]) {
      prep.scores[i].push_back(score_of(prep.queries[i], prep.docs[slot.doc]));
    }
  }
  return prep;
}

void backprop(const EncoderParams& p, const Encoded& e, double scale,
              Gradient& grad) {
  const auto& x = *e.features;
  for (std::size_t r = 0; r < p.input_dim; ++r) {
    const double xr = x[r] * scale;
    if (xr == 0.0) continue;
    double* gm = grad.mean_proj.data() + r * p.dim;
    double* gs = grad.var_proj.data() + r * p.dim;
    for (std::size_t c = 0; c < p.dim; ++c) {
      gm[c] += xr * e.grad_mean[c];
      gs[c] += xr * e.grad_var[c] * softplus_derivative(e.act.var_act[c], p.beta);
    }
  }
}

}  // namespace

BatchRanks batch_ranks(const EncoderParams& params,
                       std::span<const TrainingInstance> batch,
                       const LossOptions& options) {
  const Prepared prep = prepare(params, batch, options);
  BatchRanks ranks;
  ranks.reserve(batch.size());
  for (const auto& s : prep.scores) ranks.push_back(ranks_from_scores(s));
  return ranks;
}

double batch_loss(const EncoderParams& params,
                  std::span<const TrainingInstance> batch,
                  const LossOptions& options, const BatchRanks& ranks,
                  Gradient* grad) {
  if (batch.empty()) throw ContractViolation("batch_loss: empty batch");
  Prepared prep = prepare(params, batch, options);
  if (ranks.size() != batch.size()) {
    throw ContractViolation("batch_loss: rank table does not match batch");
  }

  double total = 0.0;
  std::vector<double> teacher;
  std::vector<double> dscore;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& list = prep.lists[i];
    if (ranks[i].size() != list.size()) {
      throw ContractViolation("batch_loss: rank table does not match batch");
    }
    teacher.clear();
    for (const auto& slot : list) teacher.push_back(slot.teacher);
    total += listwise(prep.scores[i], teacher, ranks[i], grad ? &dscore : nullptr);
    if (!grad) continue;

    Encoded& q = prep.queries[i];
    for (std::size_t j = 0; j < list.size(); ++j) {
      const double g = dscore[j];
      if (g == 0.0) continue;
      Encoded& d = prep.docs[list[j].doc];
      const double ratio = std::exp(q.log_det - d.log_det);
      for (std::size_t c = 0; c < params.dim; ++c) {
        const double diff = q.act.mean[c] - d.act.mean[c];
        const double inv = 1.0 / d.var[c];
        q.grad_mean[c] += g * (-2.0 * diff * inv);
        d.grad_mean[c] += g * (2.0 * diff * inv);
        q.grad_var[c] += g * (-ratio / q.var[c]);
        d.grad_var[c] += g * -(inv - ratio * inv - diff * diff * inv * inv);
      }
    }
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  if (grad) {
    grad->mean_proj.assign(params.mean_proj.size(), 0.0);
    grad->var_proj.assign(params.var_proj.size(), 0.0);
    for (const auto& q : prep.queries) backprop(params, q, scale, *grad);
    for (const auto& d : prep.docs) backprop(params, d, scale, *grad);
  }
  return total * scale;
}

StepResult train_step(EncoderParams& params,
                      std::span<const TrainingInstance> batch, double lr,
                      const LossOptions& options, double max_grad_norm) {
  const BatchRanks ranks = batch_ranks(params, batch, options);
  Gradient grad;
  StepResult result;
  result.loss = batch_loss(params, batch, options, ranks, &grad);
  double sq = 0.0;
  for (const double g : grad.mean_proj) sq += g * g;
  for (const double g : grad.var_proj) sq += g * g;
  result.grad_norm = std::sqrt(sq);
  if (!std::isfinite(result.loss) || !std::isfinite(result.grad_norm)) {
    throw TrainingError("train_step: non-finite loss (" +
                        std::to_string(result.loss) + ") or gradient norm (" +
                        std::to_string(result.grad_norm) + ")");
  }
  const double scale = max_grad_norm > 0.0 && result.grad_norm > max_grad_norm
                           ? max_grad_norm / result.grad_norm
                           : 1.0;
  if (lr != 0.0) {
    for (std::size_t i = 0; i < grad.mean_proj.size(); ++i) {
      params.mean_proj[i] -= lr * scale * grad.mean_proj[i];
      params.var_proj[i] -= lr * scale * grad.var_proj[i];
    }
  }
  return result;
}

GradCheckResult gradient_check(const EncoderParams& params,
                               std::span<const TrainingInstance> batch,
                               const LossOptions& options, double h) {
  const BatchRanks ranks = batch_ranks(params, batch, options);
  Gradient grad;
  batch_loss(params, batch, options, ranks, &grad);
  GradCheckResult result;
  EncoderParams probe = params;
  auto check = [&](std::vector<double>& weights, const std::vector<double>& analytic) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double saved = weights[i];
      weights[i] = saved + h;
      const double up = batch_loss(probe, batch, options, ranks);
      weights[i] = saved - h;
      const double down = batch_loss(probe, batch, options, ranks);
      weights[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      result.max_rel_error =
          std::max(result.max_rel_error, std::abs(numeric - analytic[i]) / denom);
      ++result.checked;
    }
  };
  check(probe.mean_proj, grad.mean_proj);
  check(probe.var_proj, grad.var_proj);
  return result;
}

// ---------------------------------------------------------------------------
// Feature tables and pools

void FeatureTable::add(std::string id, std::vector<double> features) {
  if (!rows_.empty() && features.size() != rows_.front().size()) {
    throw ContractViolation("feature table: '" + id + "' has " +
                            std::to_string(features.size()) +
                            " features, expected " +
                            std::to_string(rows_.front().size()));
  }
  if (!lookup_.try_emplace(id, ids_.size()).second) {
    throw ContractViolation("feature table: duplicate id '" + id + "'");
  }
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(features));
}

std::size_t FeatureTable::width() const noexcept {
  return rows_.empty() ? 0 : rows_.front().size();
}

const std::vector<double>* FeatureTable::find(const std::string& id) const {
  const auto it = lookup_.find(id);
  return it == lookup_.end() ? nullptr : &rows_[it->second];
}

CandidatePool::CandidatePool(const Qrels& qrels, const RankedPools& lexical,
                             std::size_t m_lexical, std::size_t m_hard,
                             std::size_t depth)
    : m_lexical_(m_lexical), m_hard_(m_hard), depth_(depth) {
  for (const auto& [qid, judged] : qrels) {
    auto& pos = positives_[qid];
    for (const auto& [doc, grade] : judged) {
      if (grade > 0) pos.push_back(doc);
    }
  }
  for (const auto& [qid, ranked] : lexical) {
    const auto& pos = positives(qid);
    auto& out = lexical_[qid];
    for (const auto& doc : ranked) {
      if (out.size() >= depth_) break;
      if (std::find(pos.begin(), pos.end(), doc) == pos.end() &&
          std::find(out.begin(), out.end(), doc) == out.end()) {
        out.push_back(doc);
      }
    }
  }
}

namespace {
const std::vector<std::string> kNoDocs;
}

const std::vector<std::string>& CandidatePool::positives(const std::string& qid) const {
  const auto it = positives_.find(qid);
  return it == positives_.end() ? kNoDocs : it->second;
}

const std::vector<std::string>& CandidatePool::lexical(const std::string& qid) const {
  const auto it = lexical_.find(qid);
  return it == lexical_.end() ? kNoDocs : it->second;
}

const std::vector<std::string>& CandidatePool::hard(const std::string& qid) const {
  const auto it = hard_.find(qid);
  return it == hard_.end() ? kNoDocs : it->second;
}

bool CandidatePool::refresh_hard_negatives(const EncoderParams& params,
                                           const FlatIndex& student_index,
                                           const FeatureTable& queries,
                                           std::size_t step,
                                           std::size_t every_n_steps) {
  if (every_n_steps == 0 || step % every_n_steps != 0) return false;
  if (student_index.size() == 0) {
    throw ContractViolation("refresh_hard_negatives: empty corpus");
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::string& qid = queries.id(i);
    const auto& pos = positives(qid);
    const auto tq = transform_query(encode(params, queries.features(i), qid));
    const auto results = student_index.search(tq, depth_ + pos.size());
    auto& out = hard_[qid];
    out.clear();
    for (const auto& r : results) {
      if (out.size() >= depth_) break;
      if (std::find(pos.begin(), pos.end(), r.doc_id) == pos.end()) {
        out.push_back(r.doc_id);
      }
    }
  }
  ++refreshes_;
  return true;
}

FlatIndex build_student_index(const EncoderParams& params,
                              const FeatureTable& corpus) {
  if (corpus.empty()) throw ContractViolation("student index: empty corpus");
  std::vector<TransformedDoc> docs;
  docs.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    docs.push_back(transform_doc(encode(params, corpus.features(i), corpus.id(i))));
  }
  return FlatIndex::build(std::move(docs));
}

// ---------------------------------------------------------------------------
// Trainer

void TrainerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractViolation("config: lr must be >= 0");
  if (batch_size == 0) throw ContractViolation("config: batch_size must be >= 1");
  if (n_positives == 0) throw ContractViolation("config: n_positives must be >= 1");
  if (pool_depth == 0) throw ContractViolation("config: pool_depth must be >= 1");
  if (!(beta > 0.0)) throw ContractViolation("config: beta must be > 0");
  if (!(init_scale >= 0.0)) throw ContractViolation("config: init_scale must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw ContractViolation("config: max_grad_norm must be >= 0");
}

double scheduled_lr(const TrainerConfig& config, std::size_t step) {
  if (step < config.warmup_steps) {
    return config.lr * static_cast<double>(step + 1) /
           static_cast<double>(config.warmup_steps);
  }
  if (!config.linear_decay || config.steps <= config.warmup_steps) return config.lr;
  if (step >= config.steps) return 0.0;
  return config.lr * static_cast<double>(config.steps - step) /
         static_cast<double>(config.steps - config.warmup_steps);
}

Trainer::Trainer(TrainerConfig config, const TrainingData& data, EncoderParams init)
    : config_(config),
      data_(data),
      params_(std::move(init)),
      pool_(data.qrels, data.lexical_pools, config.m_lexical, config.m_hard,
            config.pool_depth),
      rng_(config.seed) {
  config_.validate();
  params_.validate();
  if (!data_.teacher) throw ContractViolation("trainer: no teacher scores");
  if (data_.docs.empty()) throw ContractViolation("trainer: empty corpus");
  if (data_.docs.width() != params_.input_dim ||
      (!data_.queries.empty() && data_.queries.width() != params_.input_dim)) {
    throw ContractViolation("trainer: feature width does not match encoder input_dim");
  }
  for (std::size_t i = 0; i < data_.queries.size(); ++i) {
    const auto& qid = data_.queries.id(i);
    const auto& pos = pool_.positives(qid);
    if (std::any_of(pos.begin(), pos.end(),
                    [&](const std::string& d) { return data_.docs.find(d) != nullptr; })) {
      train_queries_.push_back(qid);
    }
  }
  if (train_queries_.empty()) {
    throw ContractViolation("trainer: no training query has a judged positive in the corpus");
  }
  order_.resize(train_queries_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::optional<TrainingInstance> Trainer::make_instance(const std::string& qid) {
  const auto* qx = data_.queries.find(qid);
  if (!qx) return std::nullopt;
  TrainingInstance inst;
  inst.query_id = qid;
  inst.query_features = *qx;
  inst.relevant_ids = pool_.positives(qid);

  std::vector<std::string> chosen;
  auto draw = [&](const std::vector<std::string>& source, std::size_t count) {
    std::vector<std::string> eligible;
    for (const auto& d : source) {
      if (data_.docs.find(d) &&
          std::find(chosen.begin(), chosen.end(), d) == chosen.end()) {
        eligible.push_back(d);
      }
    }
    std::vector<std::string> picked;
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(picked),
                count, rng_);
    return picked;
  };

  auto add = [&](const std::vector<std::string>& docs, bool positive) {
    for (const auto& d : docs) {
      chosen.push_back(d);
      const auto teacher = data_.teacher(qid, d);
      if (!teacher || !std::isfinite(*teacher)) continue;
      inst.candidates.push_back({d, *data_.docs.find(d), *teacher, positive});
    }
  };
  add(draw(pool_.positives(qid), config_.n_positives), true);
  add(draw(pool_.lexical(qid), config_.m_lexical), false);
  add(draw(pool_.hard(qid), config_.m_hard), false);
  if (inst.candidates.size() < 2) return std::nullopt;
  return inst;
}

TrainLogEntry Trainer::step() {
  TrainLogEntry entry;
  entry.step = step_;
  if (config_.m_hard > 0 && config_.refresh_every > 0 &&
      step_ % config_.refresh_every == 0) {
    const FlatIndex index = build_student_index(params_, data_.docs);
    entry.refreshed = pool_.refresh_hard_negatives(params_, index, data_.queries,
                                                   step_, config_.refresh_every);
  }

  std::vector<TrainingInstance> batch;
  const std::size_t want = std::min(config_.batch_size, train_queries_.size());
  std::size_t attempts = 0;
  while (batch.size() < want && attempts < train_queries_.size()) {
    if (cursor_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    ++attempts;
    if (auto inst = make_instance(train_queries_[order_[cursor_++]])) {
      batch.push_back(std::move(*inst));
    }
  }
  if (batch.empty()) {
    throw TrainingError("trainer: no query yielded two or more scored candidates");
  }

  entry.lr = scheduled_lr(config_, step_);
  LossOptions options;
  options.in_batch_negatives = config_.in_batch_negatives;
  entry.loss = train_step(params_, batch, entry.lr, options, config_.max_grad_norm).loss;
  ++step_;
  return entry;
}

}  // namespace mvnr
