#pragma once

// Seeded synthetic retrieval task: hidden Gaussian topics, documents and
// queries drawn around them, same-topic relevance, a noisy lexical pool and
// teacher scores from the exact negative KL between ground-truth
// distributions.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mvnr/gaussian.hpp"
#include "mvnr/metrics.hpp"
#include "mvnr/trainer.hpp"

namespace mvnr {

struct SynthConfig {
  std::size_t topics = 8;
  std::size_t dim = 8;
  std::size_t docs = 2000;
  std::size_t train_queries = 200;
  std::size_t test_queries = 50;
  std::size_t nuisance_dims = 64;  // feature columns carrying no signal
  double topic_scale = 2.0;        // topic means ~ N(0, topic_scale^2)
  double doc_spread = 0.5;         // item mean = topic mean + N(0, spread^2)
  double query_spread = 0.5;
  double variance_min = 0.5;       // ground-truth variances ~ U(min, max)
  double variance_max = 1.5;
  double feature_noise = 0.05;
  double nuisance_scale = 8.0;
  double teacher_noise = 0.0;
  double lexical_noise = 4.0;      // noise on the lexical-pool proxy score
  std::size_t pool_depth = 100;
  /// Per-query difficulty u ~ U(0, 1) displaces the query mean by
  /// N(0, (coupling * u * topic_scale)^2) and scales its variance by
  /// (1 + 4 * coupling * u). Zero disables it.
  double difficulty_coupling = 0.0;
  std::uint64_t seed = 42;

  std::size_t feature_dim() const noexcept { return 2 * dim + nuisance_dims; }
  void validate() const;
};

struct SynthItem {
  std::string id;
  std::size_t topic = 0;
  GaussianEmbedding truth;
  std::vector<double> features;
  double difficulty = 0.0;
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<std::vector<double>> topic_means;
  std::vector<SynthItem> docs;
  std::vector<SynthItem> train_queries;
  std::vector<SynthItem> test_queries;
  Qrels qrels;                // train and test queries, grade 1 = same topic
  RankedPools lexical_pools;  // train queries only

  /// -KL(truth(query) || truth(doc)) plus the configured noise, which is a
  /// deterministic function of (seed, query, doc).
  double teacher_score(const SynthItem& query, const SynthItem& doc) const;

  FeatureTable doc_features() const;
  FeatureTable train_query_features() const;
  FeatureTable test_query_features() const;

  /// Training inputs with an in-process teacher over the train queries.
  /// The teacher refers back to this corpus, which must outlive it.
  TrainingData training_data() const;
};

SynthCorpus generate_synthetic(const SynthConfig& config);

}  // namespace mvnr
