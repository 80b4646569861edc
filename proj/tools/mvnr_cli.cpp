// mvnr: ingest, search, eval, qpp, synth, train, gradcheck, encode.
//
// Errors go to stderr as one line, "E_CODE: message", with a nonzero exit.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mvnr/gaussian.hpp"
#include "mvnr/index.hpp"
#include "mvnr/io.hpp"
#include "mvnr/metrics.hpp"
#include "mvnr/synth.hpp"
#include "mvnr/trainer.hpp"
#include "mvnr/transform.hpp"

namespace fs = std::filesystem;
using namespace mvnr;

namespace {

constexpr const char* kRunTag = "mvn-retrieve";

// Non-error failures that still need a code (gradcheck over tolerance).
struct Failure {
  std::string code;
  std::string message;
};

// ---------------------------------------------------------------------------

struct IngestArgs {
  fs::path embeddings;
  fs::path out;
  bool flat = false;
  bool graph = false;
  GraphParams graph_params;
};

void run_ingest(const IngestArgs& a, std::uint64_t seed) {
  const auto docs = read_embeddings(a.embeddings);
  if (docs.empty()) throw InputError(a.embeddings.string() + ": empty corpus");
  Index index;
  if (a.graph) {
    GraphParams params = a.graph_params;
    params.seed = seed;
    index = GraphIndex::build(docs, params);
  } else {
    index = FlatIndex::build(docs);
  }
  persist(index, a.out);
  std::cout << "indexed " << index_size(index) << " documents, k=" << index_dim(index)
            << ", " << (a.graph ? "graph" : "flat") << "\n";
}

struct SearchArgs {
  fs::path index;
  fs::path queries;
  fs::path out;
  std::size_t top_k = 10;
  std::size_t threads = 0;
  std::size_t ef_search = 0;
};

void run_search(const SearchArgs& a) {
  const Index index = load(a.index);
  const auto queries = read_embeddings(a.queries);
  std::vector<TransformedQuery> tqs;
  tqs.reserve(queries.size());
  for (const auto& q : queries) {
    if (q.dim() != index_dim(index)) {
      throw InputError(a.queries.string() + ": query '" + q.id() + "' has k=" +
                       std::to_string(q.dim()) + " but the index has k=" +
                       std::to_string(index_dim(index)));
    }
    tqs.push_back(transform_query(q));
  }
  const std::size_t threads =
      a.threads > 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto results = search_batch(index, tqs, a.top_k, threads, a.ef_search);

  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + a.out.string() + "' for writing");
  // Queries keep file order; write_run would reorder them by id.
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::size_t rank = 1;
    for (const auto& r : results[i]) {
      out << queries[i].id() << " Q0 " << r.doc_id << ' ' << rank++ << ' '
          << format_double(r.score) << ' ' << kRunTag << '\n';
    }
  }
  std::cout << "searched " << queries.size() << " queries, top_k=" << a.top_k << "\n";
}

struct EvalArgs {
  fs::path run;
  fs::path qrels;
  bool per_query = false;
  int map_threshold = 1;
  fs::path per_query_file;
  std::string per_query_metric = "ndcg@10";
};

void run_eval(const EvalArgs& a) {
  const Run run = read_run(a.run);
  const Qrels qrels = read_qrels(a.qrels);
  const std::vector<std::pair<std::string, MetricReport>> reports = {
      {"mrr@10", mrr_at_10(run, qrels)},
      {"ndcg@10", ndcg_at_10(run, qrels)},
      {"map@1000", map_at_1000(run, qrels, a.map_threshold)},
  };
  for (const auto& [name, report] : reports) {
    if (a.per_query) {
      for (const auto& [qid, v] : report.per_query) {
        std::cout << name << '\t' << qid << '\t' << format_double(v) << '\n';
      }
    }
    std::cout << name << "\tall\t" << format_double(report.mean) << '\n';
  }
  if (!a.per_query_file.empty()) {
    const auto it = std::find_if(reports.begin(), reports.end(), [&](const auto& r) {
      return r.first == a.per_query_metric;
    });
    if (it == reports.end()) {
      throw ContractViolation("unknown metric '" + a.per_query_metric +
                              "' (expected mrr@10, ndcg@10 or map@1000)");
    }
    std::ofstream out(a.per_query_file, std::ios::trunc);
    if (!out) throw InputError("cannot open '" + a.per_query_file.string() + "' for writing");
    for (const auto& [qid, v] : it->second.per_query) out << qid << ' ' << format_double(v) << '\n';
  }
}

struct QppArgs {
  fs::path queries;
  fs::path metric;
  std::string reduction = "l2";
};

void run_qpp(const QppArgs& a) {
  const auto reduction = parse_qpp_reduction(a.reduction);
  const auto queries = read_embeddings(a.queries);
  const auto values = read_metric_file(a.metric);
  std::vector<QppRecord> records;
  for (const auto& q : queries) {
    const auto it = values.find(q.id());
    if (it == values.end()) {
      throw InputError(a.metric.string() + ": no value for query '" + q.id() + "'");
    }
    records.push_back({q.id(), qpp_predictor(q, reduction), it->second});
  }
  for (const auto& r : records) {
    std::cout << "predictor\t" << r.query_id << '\t' << format_double(r.predictor) << '\t'
              << format_double(r.effectiveness) << '\n';
  }
  const auto s = correlate(records);
  std::cout << "reduction\t" << to_string(reduction) << '\n'
            << "n\t" << records.size() << '\n'
            << "pearson\t" << format_double(s.pearson) << '\n'
            << "kendall\t" << format_double(s.kendall) << '\n'
            << "p_value\t" << format_double(s.p_value) << '\n';
}

struct SynthArgs {
  fs::path out_dir;
  SynthConfig config;
};

void write_truth(const fs::path& path, const std::vector<SynthItem>& items) {
  std::vector<GaussianEmbedding> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.truth);
  write_embeddings(path, out);
}

void run_synth(SynthArgs a, std::uint64_t seed) {
  a.config.seed = seed;
  const SynthCorpus c = generate_synthetic(a.config);
  fs::create_directories(a.out_dir);
  write_truth(a.out_dir / "docs.jsonl", c.docs);
  write_truth(a.out_dir / "train_queries.jsonl", c.train_queries);
  write_truth(a.out_dir / "test_queries.jsonl", c.test_queries);
  write_features(a.out_dir / "docs.features.jsonl", c.doc_features());
  write_features(a.out_dir / "train_queries.features.jsonl", c.train_query_features());
  write_features(a.out_dir / "test_queries.features.jsonl", c.test_query_features());
  write_qrels(a.out_dir / "qrels.txt", c.qrels);

  Run pools;
  for (const auto& [qid, ids] : c.lexical_pools) {
    auto& records = pools[qid];
    for (std::size_t r = 0; r < ids.size(); ++r) {
      records.push_back({qid, ids[r], r + 1, static_cast<double>(ids.size() - r)});
    }
  }
  write_run(a.out_dir / "lexical.run", pools, "lexical");

  std::ofstream teacher(a.out_dir / "teacher.tsv", std::ios::trunc);
  if (!teacher) throw InputError("cannot write '" + (a.out_dir / "teacher.tsv").string() + "'");
  for (const auto& q : c.train_queries) {
    for (const auto& d : c.docs) {
      teacher << q.id << '\t' << d.id << '\t' << format_double(c.teacher_score(q, d)) << '\n';
    }
  }
  std::cout << "wrote " << c.docs.size() << " docs, " << c.train_queries.size()
            << " train and " << c.test_queries.size() << " test queries to "
            << a.out_dir.string() << "\n";
}

struct TrainArgs {
  fs::path docs;
  fs::path queries;
  fs::path qrels;
  fs::path pools;
  fs::path teacher;
  fs::path out;
  fs::path log;
  fs::path init;
  fs::path eval_queries;
  fs::path eval_qrels;
  std::size_t dim = kDefaultDimension;
  TrainerConfig config;
  bool no_in_batch = false;
  bool no_decay = false;
};

double student_mrr(const EncoderParams& params, const FeatureTable& docs,
                   const FeatureTable& queries, const Qrels& qrels) {
  const FlatIndex index = build_student_index(params, docs);
  Run run;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto q = encode(params, queries.features(i), queries.id(i));
    std::size_t rank = 1;
    for (const auto& r : index.search(transform_query(q), 10)) {
      run[queries.id(i)].push_back({queries.id(i), r.doc_id, rank++, r.score});
    }
  }
  return mrr_at_10(run, qrels).mean;
}

void run_train(TrainArgs a, std::uint64_t seed) {
  a.config.seed = seed;
  a.config.in_batch_negatives = !a.no_in_batch;
  a.config.linear_decay = !a.no_decay;
  a.config.validate();

  TrainingData data;
  data.docs = read_features(a.docs);
  data.queries = read_features(a.queries);
  data.qrels = read_qrels(a.qrels);
  if (!a.pools.empty()) data.lexical_pools = read_pools(a.pools);
  auto teacher = std::make_shared<TeacherScores>(read_teacher_scores(a.teacher));
  data.teacher = [teacher](const std::string& q, const std::string& d) -> std::optional<double> {
    const auto qi = teacher->find(q);
    if (qi == teacher->end()) return std::nullopt;
    const auto di = qi->second.find(d);
    if (di == qi->second.end()) return std::nullopt;
    return di->second;
  };
  if (data.docs.empty()) throw InputError(a.docs.string() + ": empty corpus");
  if (data.queries.width() != data.docs.width()) {
    throw InputError(a.queries.string() + ": feature width " +
                     std::to_string(data.queries.width()) + " differs from documents (" +
                     std::to_string(data.docs.width()) + ")");
  }

  EncoderParams init = a.init.empty()
                           ? EncoderParams::random(data.docs.width(), a.dim, a.config.beta,
                                                   a.config.init_scale, seed)
                           : read_encoder(a.init);
  if (init.input_dim != data.docs.width()) {
    throw InputError("encoder input width " + std::to_string(init.input_dim) +
                     " differs from feature width " + std::to_string(data.docs.width()));
  }

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log, std::ios::trunc);
    if (!log) throw InputError("cannot open '" + a.log.string() + "' for writing");
    log << "step\tloss\tlr\trefreshed\n";
  }
  Trainer trainer(a.config, data, std::move(init));
  for (std::size_t s = 0; s < a.config.steps; ++s) {
    const auto e = trainer.step();
    if (log.is_open()) {
      log << e.step << '\t' << format_double(e.loss) << '\t' << format_double(e.lr) << '\t'
          << (e.refreshed ? 1 : 0) << '\n';
    }
  }
  write_encoder(a.out, trainer.params());
  std::cout << "trained " << trainer.steps_done() << " steps, hard-negative refreshes "
            << trainer.pool().refreshes() << "\n";
  if (!a.eval_queries.empty()) {
    const Qrels qrels = a.eval_qrels.empty() ? data.qrels : read_qrels(a.eval_qrels);
    const auto eval = read_features(a.eval_queries);
    std::cout << "mrr@10\t" << format_double(student_mrr(trainer.params(), data.docs, eval, qrels))
              << '\n';
  }
}

struct GradcheckArgs {
  std::size_t m = 3;
  std::size_t k = 2;
  std::size_t candidates = 4;
  std::size_t queries = 2;
  double beta = 1.0;
  double h = 1e-5;
  double tolerance = 1e-4;
  bool in_batch = true;
};

void run_gradcheck(const GradcheckArgs& a, std::uint64_t seed) {
  if (a.m == 0 || a.k == 0 || a.candidates < 2 || a.queries == 0) {
    throw ContractViolation("gradcheck: need m, k, queries >= 1 and candidates >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto features = [&] {
    std::vector<double> x(a.m);
    for (auto& v : x) v = normal(rng);
    return x;
  };
  std::vector<TrainingInstance> batch;
  for (std::size_t q = 0; q < a.queries; ++q) {
    TrainingInstance inst;
    inst.query_id = "q" + std::to_string(q);
    inst.query_features = features();
    for (std::size_t c = 0; c < a.candidates; ++c) {
      const std::string id = inst.query_id + "_d" + std::to_string(c);
      inst.candidates.push_back({id, features(), normal(rng), c == 0});
    }
    inst.relevant_ids = {inst.candidates.front().doc_id};
    batch.push_back(std::move(inst));
  }
  const auto params = EncoderParams::random(a.m, a.k, a.beta, 0.5, seed ^ 0x9e3779b97f4a7c15ULL);
  const auto r = gradient_check(params, batch, LossOptions{a.in_batch}, a.h);
  std::cout << "checked\t" << r.checked << "\nmax_rel_error\t" << format_double(r.max_rel_error)
            << '\n';
  if (!(r.max_rel_error < a.tolerance)) {
    throw Failure{"E_GRADCHECK", "max relative error " + format_double(r.max_rel_error) +
                                     " exceeds " + format_double(a.tolerance)};
  }
}

struct EncodeArgs {
  fs::path encoder;
  fs::path features;
  fs::path out;
};

void run_encode(const EncodeArgs& a) {
  const auto params = read_encoder(a.encoder);
  const auto table = read_features(a.features);
  if (!table.empty() && table.width() != params.input_dim) {
    throw InputError(a.features.string() + ": feature width " + std::to_string(table.width()) +
                     " differs from encoder input width " + std::to_string(params.input_dim));
  }
  write_embeddings(a.out, encode_all(params, table));
  std::cout << "encoded " << table.size() << " records, k=" << params.dim << "\n";
}

int fail(const std::string& code, const std::string& message) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << code << ": " << line << '\n';
  return 1;
}

const char* load_error_code(LoadErrorKind kind) {
  switch (kind) {
    case LoadErrorKind::Io: return "E_IO";
    case LoadErrorKind::BadMagic: return "E_INDEX_MAGIC";
    case LoadErrorKind::UnsupportedVersion: return "E_INDEX_VERSION";
    case LoadErrorKind::Truncated: return "E_INDEX_TRUNCATED";
    case LoadErrorKind::Corrupt: return "E_INDEX_CORRUPT";
  }
  return "E_INDEX";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-embedding retrieval: KL scoring via inner-product search"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 42;
  app.add_option("--seed", seed, "Random seed; overrides MVNR_SEED")
      ->envname("MVNR_SEED");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate embeddings and build an index");
  ingest_cmd->add_option("embeddings", ingest.embeddings, "JSONL embeddings")->required();
  ingest_cmd->add_option("index", ingest.out, "Output index file")->required();
  auto* flat_flag = ingest_cmd->add_flag("--flat", ingest.flat, "Exact flat index (default)");
  ingest_cmd->add_flag("--graph", ingest.graph, "Layered proximity-graph index")
      ->excludes(flat_flag);
  ingest_cmd->add_option("--M", ingest.graph_params.max_degree, "Graph max degree")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--ef-construction", ingest.graph_params.ef_construction)
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--ef-search", ingest.graph_params.ef_search, "Stored search beam")
      ->check(CLI::PositiveNumber);

  SearchArgs search_args;
  auto* search_cmd = app.add_subcommand("search", "Retrieve top-k documents per query");
  search_cmd->add_option("index", search_args.index)->required();
  search_cmd->add_option("queries", search_args.queries, "JSONL query embeddings")->required();
  search_cmd->add_option("-o,--out", search_args.out, "Output TREC run")->required();
  search_cmd->add_option("-k,--top-k", search_args.top_k)->check(CLI::PositiveNumber);
  search_cmd->add_option("--threads", search_args.threads, "0 = all cores");
  search_cmd->add_option("--ef-search", search_args.ef_search, "Override graph beam width");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "MRR@10, NDCG@10 and MAP@1000 of a run");
  eval_cmd->add_option("run", eval.run)->required();
  eval_cmd->add_option("qrels", eval.qrels)->required();
  eval_cmd->add_flag("--per-query", eval.per_query, "Also print per-query values");
  eval_cmd->add_option("--map-threshold", eval.map_threshold, "Minimum relevant grade for MAP")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--per-query-file", eval.per_query_file,
                       "Write 'qid value' lines for one metric");
  eval_cmd->add_option("--per-query-metric", eval.per_query_metric)
      ->check(CLI::IsMember({"mrr@10", "ndcg@10", "map@1000"}));

  QppArgs qpp;
  auto* qpp_cmd = app.add_subcommand("qpp", "Correlate the variance predictor with effectiveness");
  qpp_cmd->add_option("queries", qpp.queries, "JSONL query embeddings")->required();
  qpp_cmd->add_option("metric", qpp.metric, "Per-query metric file ('qid value')")->required();
  qpp_cmd->add_option("--reduction", qpp.reduction)
      ->check(CLI::IsMember({"l2", "logdet", "trace"}));

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  synth_cmd->add_option("out_dir", synth.out_dir)->required();
  synth_cmd->add_option("--topics", synth.config.topics)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth.config.dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--docs", synth.config.docs)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--train-queries", synth.config.train_queries);
  synth_cmd->add_option("--test-queries", synth.config.test_queries);
  synth_cmd->add_option("--nuisance-dims", synth.config.nuisance_dims);
  synth_cmd->add_option("--teacher-noise", synth.config.teacher_noise);
  synth_cmd->add_option("--coupling", synth.config.difficulty_coupling,
                        "Query difficulty to variance coupling");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the toy encoder by distillation");
  train_cmd->add_option("--docs", train.docs, "Document features JSONL")->required();
  train_cmd->add_option("--queries", train.queries, "Training query features JSONL")->required();
  train_cmd->add_option("--qrels", train.qrels)->required();
  train_cmd->add_option("--teacher", train.teacher, "query<TAB>doc<TAB>score")->required();
  train_cmd->add_option("--pools", train.pools, "Lexical candidate run (TREC)");
  train_cmd->add_option("-o,--out", train.out, "Output encoder JSON")->required();
  train_cmd->add_option("--log", train.log, "Per-step loss log (TSV)");
  train_cmd->add_option("--init", train.init, "Start from this encoder");
  train_cmd->add_option("--eval-queries", train.eval_queries, "Report MRR@10 on these");
  train_cmd->add_option("--eval-qrels", train.eval_qrels);
  train_cmd->add_option("--dim", train.dim, "Embedding dimension k")->check(CLI::PositiveNumber);
  train_cmd->add_option("--steps", train.config.steps);
  train_cmd->add_option("--lr", train.config.lr);
  train_cmd->add_option("--warmup", train.config.warmup_steps);
  train_cmd->add_option("--batch-size", train.config.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--positives", train.config.n_positives);
  train_cmd->add_option("--m-lexical,--m-bm25", train.config.m_lexical);
  train_cmd->add_option("--m-hard", train.config.m_hard);
  train_cmd->add_option("--refresh-every", train.config.refresh_every)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--pool-depth", train.config.pool_depth);
  train_cmd->add_option("--max-grad-norm", train.config.max_grad_norm, "0 disables clipping");
  train_cmd->add_option("--beta", train.config.beta);
  train_cmd->add_option("--init-scale", train.config.init_scale);
  train_cmd->add_flag("--no-in-batch", train.no_in_batch);
  train_cmd->add_flag("--no-decay", train.no_decay);

  GradcheckArgs gradcheck;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gradcheck_cmd->add_option("--m", gradcheck.m, "Feature width");
  gradcheck_cmd->add_option("--k", gradcheck.k, "Embedding dimension");
  gradcheck_cmd->add_option("--candidates", gradcheck.candidates);
  gradcheck_cmd->add_option("--queries", gradcheck.queries);
  gradcheck_cmd->add_option("--beta", gradcheck.beta);
  gradcheck_cmd->add_option("--step", gradcheck.h, "Finite-difference step");
  gradcheck_cmd->add_option("--tolerance", gradcheck.tolerance);

  EncodeArgs encode_args;
  auto* encode_cmd = app.add_subcommand("encode", "Encode feature vectors into embeddings");
  encode_cmd->add_option("encoder", encode_args.encoder)->required();
  encode_cmd->add_option("features", encode_args.features)->required();
  encode_cmd->add_option("-o,--out", encode_args.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "E_USAGE: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*ingest_cmd) run_ingest(ingest, seed);
    if (*search_cmd) run_search(search_args);
    if (*eval_cmd) run_eval(eval);
    if (*qpp_cmd) run_qpp(qpp);
    if (*synth_cmd) run_synth(synth, seed);
    if (*train_cmd) run_train(train, seed);
    if (*gradcheck_cmd) run_gradcheck(gradcheck, seed);
    if (*encode_cmd) run_encode(encode_args);
  } catch (const Failure& f) {
    return fail(f.code, f.message);
  } catch (const InputError& e) {
    return fail("E_INPUT", e.what());
  } catch (const LoadError& e) {
    return fail(load_error_code(e.kind()), e.what());
  } catch (const RangeError& e) {
    return fail("E_RANGE", e.what());
  } catch (const TrainingError& e) {
    return fail("E_TRAIN", e.what());
  } catch (const UndefinedResult& e) {
    return fail("E_UNDEFINED", e.what());
  } catch (const ContractViolation& e) {
    return fail("E_CONTRACT", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("E_IO", e.what());
  } catch (const std::exception& e) {
    return fail("E_INTERNAL", e.what());
  }
  return 0;
}
