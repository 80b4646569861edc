#pragma once

// Desk-scale student training: a linear encoder with a mean head and a
// softplus variance head, optimised with the rank-weighted listwise
// distillation loss over candidate sets built from qrels positives,
// lexical-pool negatives and self-mined hard negatives.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvnr/gaussian.hpp"
#include "mvnr/index.hpp"
#include "mvnr/metrics.hpp"

namespace mvnr {

/// (1/beta) log(1 + exp(beta t)), stable for large |t|.
double softplus(double t, double beta);

/// d softplus / dt = sigmoid(beta t).
double softplus_derivative(double t, double beta);

/// Projection weights shared by the query and document encoders.
/// Both matrices are input_dim x dim, row-major.
struct EncoderParams {
  std::size_t input_dim = 0;
  std::size_t dim = 0;
  std::vector<double> mean_proj;
  std::vector<double> var_proj;
  double beta = 1.0;

  /// Gaussian init with standard deviation scale / sqrt(input_dim).
  static EncoderParams random(std::size_t input_dim, std::size_t dim,
                              double beta, double scale, std::uint64_t seed);

  void validate() const;
  bool operator==(const EncoderParams&) const = default;
};

/// mean = x W_M, variance = softplus_beta(x W_S).
GaussianEmbedding encode(const EncoderParams& params, std::span<const double> x,
                         std::string id = {});

/// Ranks 1..n by descending score; equal scores keep candidate order.
std::vector<std::size_t> ranks_from_scores(std::span<const double> scores);

/// sum over pairs with teacher(d) > teacher(d') of
///   |1/rank(d) - 1/rank(d')| * log(1 + exp(student(d') - student(d))).
double distill_loss(std::span<const double> student_scores,
                    std::span<const double> teacher_scores,
                    std::span<const std::size_t> student_ranks);

struct Candidate {
  std::string doc_id;
  std::vector<double> features;
  double teacher_score = 0.0;
  bool is_positive = false;
};

struct TrainingInstance {
  std::string query_id;
  std::vector<double> query_features;
  std::vector<Candidate> candidates;
  /// Documents judged relevant for this query; never used as in-batch
  /// negatives for it.
  std::vector<std::string> relevant_ids;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossOptions {
  /// Append the other instances' positives as negatives. They carry a
  /// teacher score of -inf, so they only ever sit on the losing side of a
  /// pair.
  bool in_batch_negatives = false;
};

/// Per-instance student ranks, i.e. the pair weights of one step.
using BatchRanks = std::vector<std::vector<std::size_t>>;

struct Gradient {
  std::vector<double> mean_proj;
  std::vector<double> var_proj;
};

/// Student ranks for every instance (including in-batch negatives).
BatchRanks batch_ranks(const EncoderParams& params,
                       std::span<const TrainingInstance> batch,
                       const LossOptions& options);

/// Mean per-instance loss with the given ranks held fixed. When `grad` is
/// non-null it receives the analytic gradient of that loss.
double batch_loss(const EncoderParams& params,
                  std::span<const TrainingInstance> batch,
                  const LossOptions& options, const BatchRanks& ranks,
                  Gradient* grad = nullptr);

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// One SGD update. Rank weights are recomputed from the current params and
/// treated as constants for the gradient. A positive `max_grad_norm`
/// rescales the gradient to at most that global L2 norm. Throws
/// TrainingError on a non-finite loss or gradient, leaving params untouched.
StepResult train_step(EncoderParams& params,
                      std::span<const TrainingInstance> batch, double lr,
                      const LossOptions& options = {},
                      double max_grad_norm = 0.0);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences of batch_loss against its analytic gradient.
GradCheckResult gradient_check(const EncoderParams& params,
                               std::span<const TrainingInstance> batch,
                               const LossOptions& options, double h = 1e-5);

// ---------------------------------------------------------------------------
// Data and candidate pools

/// Feature vectors keyed by id, in insertion order.
class FeatureTable {
 public:
  void add(std::string id, std::vector<double> features);
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t width() const noexcept;
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::span<const double> features(std::size_t i) const { return rows_.at(i); }
  const std::vector<double>* find(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> rows_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Teacher score for (query_id, doc_id), or nullopt when not available.
using TeacherFn =
    std::function<std::optional<double>(const std::string&, const std::string&)>;

/// Doc ids ranked per query (top of a lexical run, for instance).
using RankedPools = std::map<std::string, std::vector<std::string>>;

/// Per-query candidate sources. Lexical and hard pools never contain the
/// query's positives.
class CandidatePool {
 public:
  CandidatePool(const Qrels& qrels, const RankedPools& lexical,
                std::size_t m_lexical, std::size_t m_hard,
                std::size_t depth = 100);

  const std::vector<std::string>& positives(const std::string& qid) const;
  const std::vector<std::string>& lexical(const std::string& qid) const;
  const std::vector<std::string>& hard(const std::string& qid) const;
  std::size_t m_lexical() const noexcept { return m_lexical_; }
  std::size_t m_hard() const noexcept { return m_hard_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t refreshes() const noexcept { return refreshes_; }

  /// Replaces every query's hard pool with the student's top `depth`
  /// non-positive documents from `student_index`, but only when `step` is
  /// a multiple of `every_n_steps`. Returns whether a refresh happened.
  bool refresh_hard_negatives(const EncoderParams& params,
                              const FlatIndex& student_index,
                              const FeatureTable& queries, std::size_t step,
                              std::size_t every_n_steps);

 private:
  std::map<std::string, std::vector<std::string>> positives_;
  std::map<std::string, std::vector<std::string>> lexical_;
  std::map<std::string, std::vector<std::string>> hard_;
  std::size_t m_lexical_;
  std::size_t m_hard_;
  std::size_t depth_;
  std::size_t refreshes_ = 0;
};

/// Flat index over the current student's document embeddings.
FlatIndex build_student_index(const EncoderParams& params,
                              const FeatureTable& corpus);

struct TrainerConfig {
  double lr = 1e-2;
  std::size_t warmup_steps = 100;
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  std::size_t n_positives = 4;
  std::size_t m_lexical = 4;
  std::size_t m_hard = 4;
  std::size_t refresh_every = 5000;
  std::size_t pool_depth = 100;
  bool in_batch_negatives = true;
  bool linear_decay = true;
  double max_grad_norm = 1.0;  // 0 disables clipping
  double beta = 1.0;
  double init_scale = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Warmup to `lr` over warmup_steps, then (optionally) linear decay to 0 at
/// `steps`.
double scheduled_lr(const TrainerConfig& config, std::size_t step);

struct TrainingData {
  FeatureTable queries;  // training queries
  FeatureTable docs;
  Qrels qrels;
  RankedPools lexical_pools;
  TeacherFn teacher;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool refreshed = false;
};

class Trainer {
 public:
  Trainer(TrainerConfig config, const TrainingData& data, EncoderParams init);

  /// Refreshes hard negatives when on cadence, samples a batch and applies
  /// one update.
  TrainLogEntry step();

  std::size_t steps_done() const noexcept { return step_; }
  const EncoderParams& params() const noexcept { return params_; }
  const CandidatePool& pool() const noexcept { return pool_; }

  /// Candidate set for one query as sampled for a step (exposed for tests).
  std::optional<TrainingInstance> make_instance(const std::string& qid);

 private:
  TrainerConfig config_;
  const TrainingData& data_;
  EncoderParams params_;
  CandidatePool pool_;
  std::vector<std::string> train_queries_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t step_ = 0;
  std::mt19937_64 rng_;
};

/// Encodes every row of a feature table.
std::vector<GaussianEmbedding> encode_all(const EncoderParams& params,
                                          const FeatureTable& table);

}  // namespace mvnr
