#pragma once

// Top-k retrieval over augmented document vectors: an exhaustive flat scan
// and a layered proximity graph (HNSW-style) using inner product as the
// similarity. Both are immutable after build/load and safe to search from
// many threads at once.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mvnr/gaussian.hpp"
#include "mvnr/transform.hpp"

namespace mvnr {

/// Sorted by score descending; equal scores by ascending doc_id.
struct SearchResult {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const SearchResult&) const = default;
};

/// Orders results best first with the doc_id tie rule.
bool result_before(const SearchResult& a, const SearchResult& b) noexcept;

struct GraphParams {
  std::uint32_t max_degree = 16;  // M; layer 0 allows 2M
  std::uint32_t ef_construction = 200;
  std::uint32_t ef_search = 100;
  std::uint64_t seed = 42;

  bool operator==(const GraphParams&) const = default;
};

class FlatIndex {
 public:
  static FlatIndex build(std::span<const GaussianEmbedding> docs);
  static FlatIndex build(std::vector<TransformedDoc> docs);

  std::vector<SearchResult> search(const TransformedQuery& tq,
                                   std::size_t top_k) const;

  std::size_t size() const noexcept { return docs_.size(); }
  std::size_t dim() const noexcept { return k_; }
  const std::vector<TransformedDoc>& docs() const noexcept { return docs_; }

  bool operator==(const FlatIndex&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<TransformedDoc> docs_;
};

class GraphIndex {
 public:
  static GraphIndex build(std::span<const GaussianEmbedding> docs,
                          const GraphParams& params = {});
  static GraphIndex build(std::vector<TransformedDoc> docs,
                          const GraphParams& params = {});

  /// Approximate top-k with beam width max(params().ef_search, top_k).
  std::vector<SearchResult> search(const TransformedQuery& tq,
                                   std::size_t top_k) const;
  std::vector<SearchResult> search(const TransformedQuery& tq,
                                   std::size_t top_k, std::size_t ef) const;

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return k_; }
  const GraphParams& params() const noexcept { return params_; }
  std::uint32_t entry_point() const noexcept { return entry_; }
  std::uint32_t max_level() const noexcept { return max_level_; }
  std::uint32_t level(std::uint32_t node) const { return levels_.at(node); }
  const std::string& id(std::uint32_t node) const { return ids_.at(node); }
  std::span<const double> vector(std::uint32_t node) const;
  std::span<const std::uint32_t> neighbors(std::uint32_t node,
                                           std::uint32_t layer) const;

  std::size_t capacity(std::uint32_t layer) const noexcept {
    return layer == 0 ? 2 * params_.max_degree : params_.max_degree;
  }

  bool operator==(const GraphIndex&) const = default;

  /// Raw graph state, as persisted.
  struct Layout {
    std::size_t k = 0;
    GraphParams params;
    std::vector<std::string> ids;
    std::vector<double> data;
    std::vector<std::uint32_t> levels;
    std::vector<std::vector<std::vector<std::uint32_t>>> links;
    std::uint32_t entry = 0;
    std::uint32_t max_level = 0;
  };

  /// Rebuilds an index from persisted state after checking every
  /// structural invariant; throws ContractViolation on any inconsistency.
  static GraphIndex assemble(Layout layout);

 private:
  struct Candidate {
    double sim;
    std::uint32_t node;
  };

  std::vector<Candidate> search_layer(std::span<const double> query,
                                      std::vector<Candidate> entries,
                                      std::size_t ef, std::uint32_t layer,
                                      std::vector<std::uint32_t>& visited,
                                      std::uint32_t& stamp) const;
  void insert(std::uint32_t node, const std::vector<double>& query_forms,
              std::vector<std::uint32_t>& visited, std::uint32_t& stamp);
  std::vector<std::uint32_t> select_neighbors(
      const std::vector<Candidate>& candidates, std::size_t limit,
      const std::vector<double>& query_forms) const;
  void shrink(std::uint32_t node, std::uint32_t layer,
              const std::vector<double>& query_forms);
  void repair_symmetry();
  double sim(std::span<const double> query, std::uint32_t node) const;

  std::size_t k_ = 0;
  GraphParams params_;
  std::vector<std::string> ids_;
  std::vector<double> data_;  // size() x (2k + 2), row-major
  std::vector<std::uint32_t> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // [node][layer]
  std::uint32_t entry_ = 0;
  std::uint32_t max_level_ = 0;
};

using Index = std::variant<FlatIndex, GraphIndex>;

std::size_t index_size(const Index& index);
std::size_t index_dim(const Index& index);
/// A nonzero `ef_search` overrides the graph's stored value; flat indexes
/// ignore it.
std::vector<SearchResult> search(const Index& index, const TransformedQuery& tq,
                                 std::size_t top_k, std::size_t ef_search = 0);

/// Searches every query, splitting the batch over `threads` workers.
/// Output order follows the input order.
std::vector<std::vector<SearchResult>> search_batch(
    const Index& index, std::span<const TransformedQuery> queries,
    std::size_t top_k, std::size_t threads = 1, std::size_t ef_search = 0);

// ---------------------------------------------------------------------------
// Persistence. Little-endian: "MVNR", u16 version, u8 kind, u8 reserved,
// u32 k, u64 count, count * (2k+2) f64 vectors, id table (u32 length +
// bytes), graph section when kind == 1, trailing u64 FNV-1a checksum.

inline constexpr std::uint16_t kIndexFormatVersion = 1;

enum class LoadErrorKind { Io, BadMagic, UnsupportedVersion, Truncated, Corrupt };

class LoadError : public std::runtime_error {
 public:
  LoadError(LoadErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  LoadErrorKind kind() const noexcept { return kind_; }

 private:
  LoadErrorKind kind_;
};

std::string serialize(const Index& index);
Index deserialize(std::string_view bytes);

void persist(const Index& index, const std::filesystem::path& path);
Index load(const std::filesystem::path& path);

}  // namespace mvnr
