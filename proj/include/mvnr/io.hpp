#pragma once

// Interchange formats: JSONL embeddings and features, TREC qrels and runs,
// tab-separated teacher scores, per-query metric files and encoder weights.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvnr/gaussian.hpp"
#include "mvnr/index.hpp"
#include "mvnr/metrics.hpp"
#include "mvnr/trainer.hpp"

namespace mvnr {

/// Malformed or inconsistent input file. The message names the file and,
/// where it applies, the 1-based line number.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object per line: {"id": str, "mean": [..], "var": [..]}.
/// Every record is validated (including the ingest variance floor) and all
/// records must share k. Blank lines are skipped.
std::vector<GaussianEmbedding> read_embeddings(const std::filesystem::path& path);
std::vector<GaussianEmbedding> parse_embeddings(std::istream& in,
                                                const std::string& source);
void write_embeddings(const std::filesystem::path& path,
                      const std::vector<GaussianEmbedding>& embeddings);

/// One JSON object per line: {"id": str, "features": [..]}.
FeatureTable read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureTable& table);

/// `qid 0 docid grade`, whitespace separated.
Qrels read_qrels(const std::filesystem::path& path);
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);

/// `qid Q0 docid rank score tag`. Records are ordered by rank per query
/// and must satisfy the RunRecord invariants.
Run read_run(const std::filesystem::path& path);
void write_run(std::ostream& out, const Run& run, const std::string& tag);
void write_run(const std::filesystem::path& path, const Run& run,
               const std::string& tag);

/// Doc ids per query in rank order, for candidate pools.
RankedPools read_pools(const std::filesystem::path& path);

/// `query_id<TAB>doc_id<TAB>score`.
using TeacherScores =
    std::unordered_map<std::string, std::unordered_map<std::string, double>>;
TeacherScores read_teacher_scores(const std::filesystem::path& path);

/// `qid value` per line.
std::map<std::string, double> read_metric_file(const std::filesystem::path& path);

EncoderParams read_encoder(const std::filesystem::path& path);
void write_encoder(const std::filesystem::path& path, const EncoderParams& params);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace mvnr
