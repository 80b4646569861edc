#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "mvnr/synth.hpp"
#include "mvnr/trainer.hpp"
#include "oracles.hpp"

using namespace mvnr;

namespace {

const std::vector<double> kBetaGrid{0.5, 1.0, 2.5, 5.0, 7.5, 10.0};

std::vector<double> normals(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

std::vector<TrainingInstance> random_batch(std::mt19937_64& rng, std::size_t m,
                                           std::size_t queries, std::size_t candidates) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<TrainingInstance> batch;
  for (std::size_t q = 0; q < queries; ++q) {
    TrainingInstance inst;
    inst.query_id = "q" + std::to_string(q);
    inst.query_features = normals(rng, m);
    for (std::size_t c = 0; c < candidates; ++c) {
      inst.candidates.push_back(
          {inst.query_id + "d" + std::to_string(c), normals(rng, m), g(rng), c == 0});
    }
    inst.relevant_ids = {inst.candidates[0].doc_id};
    batch.push_back(std::move(inst));
  }
  return batch;
}

}  // namespace

TEST(Softplus, WorkedValues) {
  EXPECT_NEAR(softplus(0.0, 1.0), 0.6931471805599453, 1e-16);
  for (double beta : kBetaGrid) EXPECT_NEAR(softplus(0.0, beta), std::log(2.0) / beta, 1e-15);
  EXPECT_LT(std::abs(softplus(50.0, 1.0) - 50.0), 1e-20);
  EXPECT_GT(softplus(-100.0, 1.0), 0.0);
  EXPECT_NEAR(softplus(-100.0, 1.0) / std::exp(-100.0), 1.0, 1e-12);
  EXPECT_NEAR(softplus(3.0, 2.0), oracle::softplus(3.0, 2.0), 1e-14);
}

TEST(Softplus, StableAtExtremes) {
  for (double beta : kBetaGrid) {
    EXPECT_EQ(softplus(1e6, beta), 1e6);
    EXPECT_GE(softplus(-700.0 / beta, beta), 0.0);
    EXPECT_TRUE(std::isfinite(softplus(1e300, beta)));
  }
}

TEST(Softplus, MonotoneAndAboveIdentity) {
  for (double beta : kBetaGrid) {
    double prev = softplus(-30.0, beta);
    for (double t = -29.9; t <= 30.0; t += 0.1) {
      const double v = softplus(t, beta);
      EXPECT_GT(v, prev) << "beta=" << beta << " t=" << t;
      EXPECT_GT(v, std::max(t, 0.0) - 1e-12);
      prev = v;
    }
  }
}

TEST(Softplus, GapToIdentityShrinksWithBeta) {
  for (double t : {-1.0, 0.0, 0.5, 2.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double beta : kBetaGrid) {
      const double gap = softplus(t, beta) - std::max(t, 0.0);
      EXPECT_LT(gap, prev);
      prev = gap;
    }
  }
}

TEST(Softplus, DerivativeMatchesDifferences) {
  for (double beta : kBetaGrid) {
    for (double t : {-5.0, -0.3, 0.0, 0.7, 4.0}) {
      const double h = 1e-6;
      const double fd = (softplus(t + h, beta) - softplus(t - h, beta)) / (2 * h);
      EXPECT_NEAR(softplus_derivative(t, beta), fd, 1e-7);
    }
  }
}

TEST(EncoderParams, Validation) {
  auto p = EncoderParams::random(3, 2, 1.0, 0.1, 1);
  EXPECT_NO_THROW(p.validate());
  auto bad = p;
  bad.beta = 0.0;
  EXPECT_THROW(bad.validate(), ContractViolation);
  bad = p;
  bad.mean_proj[0] = std::nan("");
  EXPECT_THROW(bad.validate(), ContractViolation);
  bad = p;
  bad.var_proj.pop_back();
  EXPECT_THROW(bad.validate(), ContractViolation);
  EXPECT_THROW(EncoderParams::random(0, 2, 1.0, 0.1, 1), ContractViolation);
  EXPECT_EQ(EncoderParams::random(3, 2, 1.0, 0.1, 7), EncoderParams::random(3, 2, 1.0, 0.1, 7));
}

TEST(Encode, MatchesOracle) {
  std::mt19937_64 rng(41);
  for (double beta : kBetaGrid) {
    const auto p = EncoderParams::random(5, 3, beta, 1.0, 41);
    const auto x = normals(rng, 5);
    const auto g = encode(p, x, "z");
    const auto want = oracle::encode(p, x);
    EXPECT_EQ(g.id(), "z");
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(g.mean()[c], want.mean[c], 1e-14);
      EXPECT_NEAR(g.variance()[c], want.var[c], 1e-14);
      EXPECT_GT(g.variance()[c], 0.0);
    }
  }
}

TEST(Encode, Errors) {
  const auto p = EncoderParams::random(3, 2, 1.0, 0.1, 1);
  EXPECT_THROW(encode(p, std::vector<double>{1.0, 2.0}), ContractViolation);
  EXPECT_THROW(encode(p, std::vector<double>{1.0, std::nan(""), 0.0}), ContractViolation);
}

TEST(Ranks, TiesKeepCandidateOrder) {
  const std::vector<double> s{1.0, 3.0, 1.0, 2.0};
  EXPECT_EQ(ranks_from_scores(s), (std::vector<std::size_t>{3, 1, 4, 2}));
  EXPECT_EQ(ranks_from_scores(s), oracle::ranks(s));
}

TEST(DistillLoss, WorkedValues) {
  const std::vector<double> teacher{1.0, 0.0};
  const std::vector<double> agree{2.0, 1.0}, disagree{1.0, 2.0};
  const std::vector<std::size_t> r12{1, 2}, r21{2, 1};
  EXPECT_NEAR(distill_loss(agree, teacher, r12), 0.15663084375911143, 1e-15);
  EXPECT_NEAR(distill_loss(disagree, teacher, r21), 0.6566308437591114, 1e-15);
  EXPECT_NEAR(distill_loss(agree, teacher, r12), 0.5 * std::log1p(std::exp(-1.0)), 1e-15);
}

TEST(DistillLoss, TeacherTiesGiveZero) {
  const std::vector<double> teacher{0.3, 0.3, 0.3};
  const std::vector<double> student{5.0, -1.0, 2.0};
  const std::vector<std::size_t> r{1, 3, 2};
  EXPECT_EQ(distill_loss(student, teacher, r), 0.0);
}

TEST(DistillLoss, Errors) {
  const std::vector<double> two{1.0, 2.0}, three{1.0, 2.0, 3.0}, one{1.0};
  const std::vector<std::size_t> r2{1, 2}, dup{1, 1}, gap{1, 3}, r1{1};
  EXPECT_THROW(distill_loss(two, three, r2), ContractViolation);
  EXPECT_THROW(distill_loss(two, two, dup), ContractViolation);
  EXPECT_THROW(distill_loss(two, two, gap), ContractViolation);
  EXPECT_THROW(distill_loss(one, one, r1), ContractViolation);
}

TEST(DistillLoss, NonNegativeAndMatchesOracle) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> grade(0, 3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + t % 9;
    const auto student = normals(rng, n);
    std::vector<double> teacher(n);
    for (auto& v : teacher) v = grade(rng);  // ties on purpose
    const auto r = ranks_from_scores(student);
    const double loss = distill_loss(student, teacher, r);
    EXPECT_GE(loss, 0.0);
    EXPECT_NEAR(loss, oracle::list_loss(student, teacher, r), 1e-12);
    bool any_pair = false;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) any_pair |= teacher[a] > teacher[b];
    EXPECT_EQ(loss > 0.0, any_pair);
  }
}

TEST(BatchLoss, RanksAndValueMatchOracle) {
  std::mt19937_64 rng(43);
  for (bool in_batch : {false, true}) {
    const auto batch = random_batch(rng, 4, 3, 4);
    const auto p = EncoderParams::random(4, 3, 1.0, 0.5, 43);
    const LossOptions opts{in_batch};
    const auto ranks = batch_ranks(p, batch, opts);
    EXPECT_EQ(ranks, oracle::batch_ranks(p, batch, in_batch));
    EXPECT_NEAR(batch_loss(p, batch, opts, ranks), oracle::batch_loss(p, batch, in_batch, ranks),
                1e-10);
    if (in_batch) {
      EXPECT_EQ(ranks[0].size(), 4u + 2u);
    }
  }
}

TEST(BatchLoss, InBatchNegativesSkipOwnRelevantDocs) {
  std::mt19937_64 rng(44);
  auto batch = random_batch(rng, 3, 2, 3);
  // Instance 1's positive is also judged relevant for instance 0.
  batch[0].relevant_ids.push_back(batch[1].candidates[0].doc_id);
  const auto p = EncoderParams::random(3, 2, 1.0, 0.5, 44);
  const auto ranks = batch_ranks(p, batch, LossOptions{true});
  EXPECT_EQ(ranks[0].size(), 3u);
  EXPECT_EQ(ranks[1].size(), 4u);
}

TEST(GradientCheck, TwoCandidateInstance) {
  std::mt19937_64 rng(45);
  const auto batch = random_batch(rng, 3, 1, 2);
  const auto p = EncoderParams::random(3, 2, 1.0, 0.5, 45);
  const auto lib = gradient_check(p, batch, LossOptions{false}, 1e-5);
  EXPECT_LT(lib.max_rel_error, 1e-4);
  EXPECT_EQ(lib.checked, 12u);
  const auto ref = oracle::finite_difference_check(p, batch, false);
  EXPECT_LT(ref.max_rel_error, 1e-4);
  EXPECT_LT(ref.loss_gap, 1e-12);
}

TEST(GradientCheck, RandomSeedsAgainstOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t m = 2 + seed % 4, k = 1 + seed % 3;
    for (double beta : {1.0, 2.5}) {
      const auto batch = random_batch(rng, m, 2, 3);
      const auto p = EncoderParams::random(m, k, beta, 0.8, seed * 31);
      const auto ref = oracle::finite_difference_check(p, batch, seed % 2 == 0);
      EXPECT_LT(ref.max_rel_error, 1e-4) << "seed=" << seed << " beta=" << beta;
    }
  }
}

TEST(TrainStep, ZeroLearningRateLeavesParams) {
  std::mt19937_64 rng(46);
  const auto batch = random_batch(rng, 3, 2, 3);
  auto p = EncoderParams::random(3, 2, 1.0, 0.5, 46);
  const auto before = p;
  const auto r = train_step(p, batch, 0.0);
  EXPECT_EQ(p, before);
  EXPECT_GT(r.loss, 0.0);
  EXPECT_GT(r.grad_norm, 0.0);
}

TEST(TrainStep, ClippingBoundsTheUpdate) {
  std::mt19937_64 rng(47);
  const auto batch = random_batch(rng, 3, 2, 3);
  auto p = EncoderParams::random(3, 2, 1.0, 2.0, 47);
  const auto before = p;
  const auto r = train_step(p, batch, 0.1, {}, 1e-3);
  double sq = 0.0;
  for (std::size_t i = 0; i < p.mean_proj.size(); ++i) {
    sq += std::pow(p.mean_proj[i] - before.mean_proj[i], 2) +
          std::pow(p.var_proj[i] - before.var_proj[i], 2);
  }
  ASSERT_GT(r.grad_norm, 1e-3);
  EXPECT_NEAR(std::sqrt(sq), 0.1 * 1e-3, 1e-12);
}

TEST(TrainStep, NonFiniteAbortsWithoutTouchingParams) {
  std::mt19937_64 rng(48);
  const auto batch = random_batch(rng, 3, 1, 2);
  auto p = EncoderParams::random(3, 2, 1.0, 0.5, 48);
  for (auto& w : p.mean_proj) w = 1e200;
  p.mean_proj[0] = -1e200;
  const auto before = p;
  EXPECT_THROW(train_step(p, batch, 0.1), TrainingError);
  EXPECT_EQ(p, before);
}

TEST(TrainStep, LossDecreasesOnFixedSyntheticBatch) {
  SynthConfig sc;
  sc.docs = 400;
  sc.train_queries = 32;
  sc.test_queries = 0;
  const auto corpus = generate_synthetic(sc);
  const auto data = corpus.training_data();
  TrainerConfig tc;
  tc.m_hard = 0;
  Trainer trainer(tc, data, EncoderParams::random(sc.feature_dim(), sc.dim, 1.0, 0.1, 42));
  std::vector<TrainingInstance> batch;
  for (const auto& q : corpus.train_queries) {
    if (auto inst = trainer.make_instance(q.id)) batch.push_back(std::move(*inst));
  }
  ASSERT_EQ(batch.size(), 32u);

  auto p = trainer.params();
  const LossOptions opts{true};
  double prev = batch_loss(p, batch, opts, batch_ranks(p, batch, opts));
  for (int step = 0; step < 50; ++step) {
    train_step(p, batch, 1e-2, opts, tc.max_grad_norm);
    const double now = batch_loss(p, batch, opts, batch_ranks(p, batch, opts));
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

// ---------------------------------------------------------------------------

TEST(FeatureTable, Basics) {
  FeatureTable t;
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(t.width(), 0u);
  t.add("a", {1, 2});
  t.add("b", {3, 4});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.width(), 2u);
  EXPECT_EQ(t.id(1), "b");
  ASSERT_NE(t.find("a"), nullptr);
  EXPECT_EQ((*t.find("a"))[1], 2.0);
  EXPECT_EQ(t.find("zz"), nullptr);
  EXPECT_THROW(t.add("c", {1}), ContractViolation);
  EXPECT_THROW(t.add("a", {1, 1}), ContractViolation);
}

class PoolTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthConfig sc;
    sc.docs = 300;
    sc.train_queries = 16;
    sc.test_queries = 0;
    corpus_ = generate_synthetic(sc);
    data_ = corpus_.training_data();
  }
  SynthCorpus corpus_;
  TrainingData data_;
};

TEST_F(PoolTest, PoolsExcludePositives) {
  CandidatePool pool(data_.qrels, data_.lexical_pools, 4, 4, 50);
  auto params = EncoderParams::random(corpus_.config.feature_dim(), 8, 1.0, 0.1, 5);
  const auto index = build_student_index(params, data_.docs);
  ASSERT_TRUE(pool.refresh_hard_negatives(params, index, data_.queries, 0, 10));
  for (std::size_t i = 0; i < data_.queries.size(); ++i) {
    const auto& qid = data_.queries.id(i);
    const auto& pos = pool.positives(qid);
    EXPECT_FALSE(pos.empty());
    EXPECT_LE(pool.lexical(qid).size(), 50u);
    EXPECT_EQ(pool.hard(qid).size(), 50u);
    for (const auto* src : {&pool.lexical(qid), &pool.hard(qid)}) {
      for (const auto& d : *src) EXPECT_EQ(std::find(pos.begin(), pos.end(), d), pos.end());
    }
  }
}

TEST_F(PoolTest, RefreshOnlyOnCadence) {
  CandidatePool pool(data_.qrels, data_.lexical_pools, 4, 4);
  auto params = EncoderParams::random(corpus_.config.feature_dim(), 8, 1.0, 0.1, 5);
  const auto index = build_student_index(params, data_.docs);
  EXPECT_FALSE(pool.refresh_hard_negatives(params, index, data_.queries, 3, 5));
  EXPECT_TRUE(pool.hard(data_.queries.id(0)).empty());
  EXPECT_EQ(pool.refreshes(), 0u);
  EXPECT_TRUE(pool.refresh_hard_negatives(params, index, data_.queries, 10, 5));
  const auto snapshot = pool.hard(data_.queries.id(0));
  EXPECT_FALSE(pool.refresh_hard_negatives(params, index, data_.queries, 11, 5));
  EXPECT_EQ(pool.hard(data_.queries.id(0)), snapshot);
  EXPECT_EQ(pool.refreshes(), 1u);
}

TEST_F(PoolTest, ImprovedStudentChangesPools) {
  TrainerConfig tc;
  tc.steps = 60;
  tc.warmup_steps = 5;
  tc.batch_size = 8;
  tc.refresh_every = 30;
  const auto init = EncoderParams::random(corpus_.config.feature_dim(), 8, 1.0, 0.1, 42);
  Trainer trainer(tc, data_, init);
  std::vector<std::vector<std::string>> snapshots;
  for (int s = 0; s < 60; ++s) {
    const auto e = trainer.step();
    if (e.refreshed) snapshots.push_back(trainer.pool().hard(data_.queries.id(0)));
  }
  ASSERT_EQ(snapshots.size(), 2u);
  EXPECT_NE(snapshots[0], snapshots[1]);
  EXPECT_NE(trainer.params(), init);
}

TEST(CandidatePool, EmptyCorpusIsRejected) {
  FeatureTable empty;
  EXPECT_THROW(build_student_index(EncoderParams::random(2, 2, 1.0, 0.1, 1), empty),
               ContractViolation);
  CandidatePool pool({}, {}, 1, 1);
  EXPECT_THROW(pool.refresh_hard_negatives(EncoderParams::random(2, 2, 1.0, 0.1, 1), FlatIndex{},
                                           empty, 0, 1),
               ContractViolation);
}

TEST(Schedule, WarmupThenLinearDecay) {
  TrainerConfig c;
  c.lr = 1.0;
  c.warmup_steps = 4;
  c.steps = 12;
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 0), 0.25);
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 3), 1.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 4), 1.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 8), 0.5);
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 12), 0.0);
  c.linear_decay = false;
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 11), 1.0);
}

TEST(TrainerConfig, Validation) {
  TrainerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.beta = -1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.lr = std::nan("");
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST_F(PoolTest, InstancesHaveTheConfiguredMix) {
  TrainerConfig tc;
  tc.n_positives = 3;
  tc.m_lexical = 2;
  tc.m_hard = 0;
  Trainer trainer(tc, data_, EncoderParams::random(corpus_.config.feature_dim(), 8, 1.0, 0.1, 1));
  const auto inst = trainer.make_instance(data_.queries.id(0));
  ASSERT_TRUE(inst.has_value());
  std::size_t positives = 0;
  std::set<std::string> ids;
  const auto& judged = data_.qrels.at(inst->query_id);
  for (const auto& c : inst->candidates) {
    positives += c.is_positive;
    ids.insert(c.doc_id);
    EXPECT_EQ(c.is_positive, judged.count(c.doc_id) > 0 && judged.at(c.doc_id) > 0);
    EXPECT_DOUBLE_EQ(c.teacher_score, *data_.teacher(inst->query_id, c.doc_id));
  }
  EXPECT_EQ(positives, 3u);
  EXPECT_EQ(inst->candidates.size(), 5u);
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_FALSE(trainer.make_instance("nope").has_value());
}

TEST_F(PoolTest, TrainingIsDeterministic) {
  TrainerConfig tc;
  tc.steps = 20;
  tc.batch_size = 4;
  tc.refresh_every = 10;
  const auto init = EncoderParams::random(corpus_.config.feature_dim(), 8, 1.0, 0.1, 3);
  Trainer a(tc, data_, init), b(tc, data_, init);
  for (int s = 0; s < 20; ++s) EXPECT_EQ(a.step().loss, b.step().loss);
  EXPECT_EQ(a.params(), b.params());
  // Every embedding the trained encoder produces is a valid distribution.
  EXPECT_NO_THROW(encode_all(a.params(), data_.docs));
}
