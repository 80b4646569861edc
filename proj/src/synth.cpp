#include "mvnr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <unordered_map>

namespace mvnr {

namespace {

// Portable standard normal draws (Box-Muller on 53-bit uniforms), so a
// seed reproduces the same corpus regardless of the standard library.
class Gauss {
 public:
  explicit Gauss(std::uint64_t seed) : rng_(seed) {}

  double uniform() {  // (0, 1]
    return static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;
  }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string padded(const char* prefix, std::size_t i, std::size_t count) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

SynthItem make_item(const SynthConfig& cfg, Gauss& g, std::string id,
                    std::size_t topic, const std::vector<double>& topic_mean,
                    double spread, double difficulty) {
  const double coupling = cfg.difficulty_coupling;
  const double displacement = coupling * difficulty * cfg.topic_scale;
  const double var_scale = 1.0 + 4.0 * coupling * difficulty;
  std::vector<double> mean(cfg.dim), var(cfg.dim);
  for (std::size_t c = 0; c < cfg.dim; ++c) {
    mean[c] = topic_mean[c] + spread * g.normal() + displacement * g.normal();
    var[c] = (cfg.variance_min +
              (cfg.variance_max - cfg.variance_min) * g.uniform()) *
             var_scale;
  }
  std::vector<double> features;
  features.reserve(cfg.feature_dim());
  for (std::size_t c = 0; c < cfg.dim; ++c) {
    features.push_back(mean[c] + cfg.feature_noise * g.normal());
  }
  for (std::size_t c = 0; c < cfg.dim; ++c) {
    features.push_back(std::log(var[c]) + cfg.feature_noise * g.normal());
  }
  for (std::size_t c = 0; c < cfg.nuisance_dims; ++c) {
    features.push_back(cfg.nuisance_scale * g.normal());
  }
  auto truth = GaussianEmbedding(id, std::move(mean), std::move(var));
  return SynthItem{std::move(id), topic, std::move(truth), std::move(features),
                   difficulty};
}

}  // namespace

void SynthConfig::validate() const {
  if (topics == 0 || dim == 0 || docs == 0) {
    throw ContractViolation("synth: topics, dim and docs must be >= 1");
  }
  if (!(variance_min > 0.0) || variance_max < variance_min) {
    throw ContractViolation("synth: need 0 < variance_min <= variance_max");
  }
  if (topic_scale < 0 || doc_spread < 0 || query_spread < 0 || feature_noise < 0 ||
      nuisance_scale < 0 || teacher_noise < 0 || lexical_noise < 0 ||
      difficulty_coupling < 0) {
    throw ContractViolation("synth: scales and noise levels must be >= 0");
  }
}

SynthCorpus generate_synthetic(const SynthConfig& config) {
  config.validate();
  SynthCorpus corpus;
  corpus.config = config;
  Gauss g(config.seed);

  corpus.topic_means.resize(config.topics, std::vector<double>(config.dim));
  for (auto& mean : corpus.topic_means) {
    for (auto& m : mean) m = config.topic_scale * g.normal();
  }

  for (std::size_t i = 0; i < config.docs; ++i) {
    const std::size_t topic = i % config.topics;
    corpus.docs.push_back(make_item(config, g, padded("d", i, config.docs), topic,
                                    corpus.topic_means[topic], config.doc_spread, 0.0));
  }
  auto make_queries = [&](const char* prefix, std::size_t count) {
    std::vector<SynthItem> out;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t topic = i % config.topics;
      const double difficulty = config.difficulty_coupling > 0.0 ? g.uniform() : 0.0;
      out.push_back(make_item(config, g, padded(prefix, i, count), topic,
                              corpus.topic_means[topic], config.query_spread,
                              difficulty));
    }
    return out;
  };
  corpus.train_queries = make_queries("q", config.train_queries);
  corpus.test_queries = make_queries("t", config.test_queries);

  for (const auto* queries : {&corpus.train_queries, &corpus.test_queries}) {
    for (const auto& q : *queries) {
      auto& judged = corpus.qrels[q.id];
      for (const auto& d : corpus.docs) {
        if (d.topic == q.topic) judged.emplace(d.id, 1);
      }
    }
  }

  // Lexical proxy: negative distance between true means plus heavy noise,
  // giving a pool that mixes same-topic and off-topic documents.
  for (const auto& q : corpus.train_queries) {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(corpus.docs.size());
    for (std::size_t j = 0; j < corpus.docs.size(); ++j) {
      double dist = 0.0;
      const auto qm = q.truth.mean();
      const auto dm = corpus.docs[j].truth.mean();
      for (std::size_t c = 0; c < config.dim; ++c) dist += (qm[c] - dm[c]) * (qm[c] - dm[c]);
      scored.emplace_back(-std::sqrt(dist) + config.lexical_noise * g.normal(), j);
    }
    const std::size_t depth = std::min(config.pool_depth, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(depth),
                      scored.end(), [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    auto& pool = corpus.lexical_pools[q.id];
    for (std::size_t r = 0; r < depth; ++r) pool.push_back(corpus.docs[scored[r].second].id);
  }
  return corpus;
}

double SynthCorpus::teacher_score(const SynthItem& query, const SynthItem& doc) const {
  double score = -kl_divergence(query.truth, doc.truth);
  if (config.teacher_noise > 0.0) {
    const std::uint64_t h =
        fnv1a(doc.id, fnv1a(query.id, 0xcbf29ce484222325ULL ^ config.seed));
    Gauss g(h);
    score += config.teacher_noise * g.normal();
  }
  return score;
}

namespace {

FeatureTable table_of(const std::vector<SynthItem>& items) {
  FeatureTable t;
  for (const auto& item : items) t.add(item.id, item.features);
  return t;
}

}  // namespace

FeatureTable SynthCorpus::doc_features() const { return table_of(docs); }
FeatureTable SynthCorpus::train_query_features() const { return table_of(train_queries); }
FeatureTable SynthCorpus::test_query_features() const { return table_of(test_queries); }

TrainingData SynthCorpus::training_data() const {
  TrainingData data;
  data.queries = train_query_features();
  data.docs = doc_features();
  for (const auto& q : train_queries) data.qrels[q.id] = qrels.at(q.id);
  data.lexical_pools = lexical_pools;

  auto lookup = std::make_shared<std::unordered_map<std::string, const SynthItem*>>();
  for (const auto& d : docs) lookup->emplace(d.id, &d);
  for (const auto& q : train_queries) lookup->emplace(q.id, &q);
  data.teacher = [this, lookup](const std::string& qid,
                                const std::string& did) -> std::optional<double> {
    const auto q = lookup->find(qid);
    const auto d = lookup->find(did);
    if (q == lookup->end() || d == lookup->end()) return std::nullopt;
    return teacher_score(*q->second, *d->second);
  };
  return data;
}

}  // namespace mvnr
