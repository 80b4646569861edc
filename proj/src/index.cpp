#include "mvnr/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <queue>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace mvnr {

bool result_before(const SearchResult& a, const SearchResult& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

namespace {

constexpr std::uint32_t kMaxLevel = 16;

std::size_t check_corpus(const std::vector<TransformedDoc>& docs) {
  if (docs.empty()) throw ContractViolation("index build: empty corpus");
  const std::size_t width = docs.front().vec.size();
  if (width < 4 || width % 2 != 0) {
    throw ContractViolation("index build: malformed augmented vector length " +
                            std::to_string(width));
  }
  std::unordered_set<std::string_view> seen;
  seen.reserve(docs.size());
  for (const auto& d : docs) {
    if (d.vec.size() != width) {
      throw ContractViolation("index build: document '" + d.id +
                              "' has dimension " + std::to_string(d.dim()) +
                              ", expected " +
                              std::to_string((width - 2) / 2));
    }
    const std::size_t k = (width - 2) / 2;
    bool valid = d.vec[1] < 0.0 && d.vec[0] == d.prior;
    for (std::size_t i = 0; i < width && valid; ++i) {
      valid = std::isfinite(d.vec[i]) && (i < 2 || i >= 2 + k || d.vec[i] < 0.0);
    }
    if (!valid) {
      throw ContractViolation("index build: document '" + d.id +
                              "' is not a valid augmented document vector");
    }
    if (!seen.insert(d.id).second) {
      throw ContractViolation("index build: duplicate document id '" + d.id +
                              "'");
    }
  }
  return (width - 2) / 2;
}

std::vector<TransformedDoc> transform_all(
    std::span<const GaussianEmbedding> docs) {
  std::vector<TransformedDoc> out;
  out.reserve(docs.size());
  if (!docs.empty()) {
    const std::size_t k = docs.front().dim();
    for (const auto& d : docs) {
      if (d.dim() != k) {
        throw ContractViolation("index build: document '" + d.id() +
                                "' has dimension " + std::to_string(d.dim()) +
                                ", expected " + std::to_string(k));
      }
      out.push_back(transform_doc(d));
    }
  }
  return out;
}

void check_query(const TransformedQuery& tq, std::size_t k, std::size_t top_k) {
  if (tq.vec.size() != augmented_size(k)) {
    throw ContractViolation("search: query dimension " +
                            std::to_string(tq.dim()) +
                            " does not match index dimension " +
                            std::to_string(k));
  }
  if (top_k == 0) throw ContractViolation("search: top_k must be >= 1");
}

// The query-side augmented vector of a stored document, recovered from its
// document-side vector. Graph construction ranks neighbours by
// <query_form(a), doc(b)>, i.e. how well b scores for a query shaped like a.
void query_form(std::span<const double> doc, std::size_t k, double* out) {
  out[0] = 1.0;
  out[1] = -1.0 / doc[1];
  for (std::size_t i = 0; i < k; ++i) {
    const double var = -1.0 / doc[2 + i];
    const double mu = 0.5 * doc[2 + k + i] * var;
    out[2 + i] = mu * mu;
    out[2 + k + i] = mu;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FlatIndex

FlatIndex FlatIndex::build(std::span<const GaussianEmbedding> docs) {
  return build(transform_all(docs));
}

FlatIndex FlatIndex::build(std::vector<TransformedDoc> docs) {
  FlatIndex index;
  index.k_ = check_corpus(docs);
  index.docs_ = std::move(docs);
  return index;
}

std::vector<SearchResult> FlatIndex::search(const TransformedQuery& tq,
                                            std::size_t top_k) const {
  check_query(tq, k_, top_k);
  std::vector<SearchResult> all;
  all.reserve(docs_.size());
  for (const auto& d : docs_) all.push_back({d.id, inner_product(tq.vec, d.vec)});
  const std::size_t n = std::min(top_k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n),
                    all.end(), result_before);
  all.resize(n);
  return all;
}

// ---------------------------------------------------------------------------
// GraphIndex

GraphIndex GraphIndex::build(std::span<const GaussianEmbedding> docs,
                             const GraphParams& params) {
  return build(transform_all(docs), params);
}

GraphIndex GraphIndex::build(std::vector<TransformedDoc> docs,
                             const GraphParams& params) {
  if (params.max_degree < 2 || params.ef_construction == 0 ||
      params.ef_search == 0) {
    throw ContractViolation(
        "graph build: max_degree must be >= 2 and ef values >= 1");
  }
  GraphIndex g;
  g.k_ = check_corpus(docs);
  g.params_ = params;
  const std::size_t n = docs.size();
  const std::size_t width = augmented_size(g.k_);
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw ContractViolation("graph build: corpus too large");
  }

  g.ids_.reserve(n);
  g.data_.reserve(n * width);
  for (auto& d : docs) {
    g.ids_.push_back(std::move(d.id));
    g.data_.insert(g.data_.end(), d.vec.begin(), d.vec.end());
  }
  docs.clear();

  std::vector<double> query_forms(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    query_form(g.vector(static_cast<std::uint32_t>(i)), g.k_,
               query_forms.data() + i * width);
  }

  // Level assignment: floor(-ln(u) / ln(M)) from a seeded 64-bit engine,
  // with u built from the top 53 bits so results do not depend on the
  // standard library's distribution implementations.
  std::mt19937_64 rng(params.seed);
  const double level_mult = 1.0 / std::log(static_cast<double>(params.max_degree));
  g.levels_.resize(n);
  for (auto& level : g.levels_) {
    const double u = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
    const double raw = std::floor(-std::log(u) * level_mult);
    level = static_cast<std::uint32_t>(std::min<double>(raw, kMaxLevel));
  }
  g.links_.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.links_[i].resize(g.levels_[i] + 1);

  std::vector<std::uint32_t> visited(n, 0);
  std::uint32_t stamp = 0;
  for (std::uint32_t i = 0; i < n; ++i) g.insert(i, query_forms, visited, stamp);
  g.repair_symmetry();
  return g;
}

std::span<const double> GraphIndex::vector(std::uint32_t node) const {
  const std::size_t width = augmented_size(k_);
  return std::span<const double>(data_).subspan(node * width, width);
}

std::span<const std::uint32_t> GraphIndex::neighbors(std::uint32_t node,
                                                     std::uint32_t layer) const {
  const auto& per_node = links_.at(node);
  if (layer >= per_node.size()) return {};
  return per_node[layer];
}

double GraphIndex::sim(std::span<const double> query, std::uint32_t node) const {
  return inner_product(query, vector(node));
}

namespace {

struct Better {
  template <class C>
  bool operator()(const C& a, const C& b) const noexcept {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.node < b.node;
  }
};

struct Worse {
  template <class C>
  bool operator()(const C& a, const C& b) const noexcept {
    return Better{}(b, a);
  }
};

}  // namespace

std::vector<GraphIndex::Candidate> GraphIndex::search_layer(
    std::span<const double> query, std::vector<Candidate> entries,
    std::size_t ef, std::uint32_t layer, std::vector<std::uint32_t>& visited,
    std::uint32_t& stamp) const {
  if (++stamp == 0) {
    std::fill(visited.begin(), visited.end(), 0);
    stamp = 1;
  }
  // `frontier` pops the best candidate; `found` keeps the ef best with the
  // worst on top.
  std::priority_queue<Candidate, std::vector<Candidate>, Worse> frontier;
  std::priority_queue<Candidate, std::vector<Candidate>, Better> found;
  for (const auto& e : entries) {
    if (visited[e.node] == stamp) continue;
    visited[e.node] = stamp;
    frontier.push(e);
    found.push(e);
    if (found.size() > ef) found.pop();
  }
  while (!frontier.empty()) {
    const Candidate current = frontier.top();
    if (found.size() >= ef && Better{}(found.top(), current)) break;
    frontier.pop();
    for (const std::uint32_t next : links_[current.node][layer]) {
      if (visited[next] == stamp) continue;
      visited[next] = stamp;
      const Candidate c{sim(query, next), next};
      if (found.size() < ef || Better{}(c, found.top())) {
        frontier.push(c);
        found.push(c);
        if (found.size() > ef) found.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(found.size());
  while (!found.empty()) {
    out.push_back(found.top());
    found.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Diversity heuristic: keep a candidate only if the base node scores it at
// least as well as every neighbour kept so far; fill remaining slots with
// the best discarded candidates.
std::vector<std::uint32_t> GraphIndex::select_neighbors(
    const std::vector<Candidate>& candidates, std::size_t limit,
    const std::vector<double>& query_forms) const {
  const std::size_t width = augmented_size(k_);
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> pruned;
  for (const auto& c : candidates) {
    if (kept.size() >= limit) break;
    bool diverse = true;
    for (const std::uint32_t r : kept) {
      const std::span<const double> r_query(query_forms.data() + r * width, width);
      if (sim(r_query, c.node) > c.sim) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : pruned).push_back(c.node);
  }
  for (std::size_t i = 0; i < pruned.size() && kept.size() < limit; ++i) {
    kept.push_back(pruned[i]);
  }
  return kept;
}

void GraphIndex::shrink(std::uint32_t node, std::uint32_t layer,
                        const std::vector<double>& query_forms) {
  const std::size_t width = augmented_size(k_);
  const std::span<const double> base(query_forms.data() + node * width, width);
  auto& list = links_[node][layer];
  std::vector<Candidate> cands;
  cands.reserve(list.size());
  for (const std::uint32_t n : list) cands.push_back({sim(base, n), n});
  std::sort(cands.begin(), cands.end(), Better{});
  list = select_neighbors(cands, capacity(layer), query_forms);
}

void GraphIndex::insert(std::uint32_t node,
                        const std::vector<double>& query_forms,
                        std::vector<std::uint32_t>& visited,
                        std::uint32_t& stamp) {
  const std::size_t width = augmented_size(k_);
  const std::span<const double> query(query_forms.data() + node * width, width);
  const std::uint32_t node_level = levels_[node];
  if (node == 0) {
    entry_ = 0;
    max_level_ = node_level;
    return;
  }

  Candidate current{sim(query, entry_), entry_};
  for (std::uint32_t layer = max_level_; layer > node_level; --layer) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (const std::uint32_t next : links_[current.node][layer]) {
        const Candidate c{sim(query, next), next};
        if (Better{}(c, current)) {
          current = c;
          moved = true;
        }
      }
    }
  }

  std::vector<Candidate> entries{current};
  for (std::uint32_t layer = std::min(node_level, max_level_) + 1; layer-- > 0;) {
    auto found = search_layer(query, entries, params_.ef_construction, layer,
                              visited, stamp);
    auto chosen = select_neighbors(found, params_.max_degree, query_forms);
    links_[node][layer] = chosen;
    for (const std::uint32_t other : chosen) {
      auto& back = links_[other][layer];
      back.push_back(node);
      if (back.size() > capacity(layer)) shrink(other, layer, query_forms);
    }
    entries = std::move(found);
  }
  if (node_level > max_level_) {
    max_level_ = node_level;
    entry_ = node;
  }
}

// Makes every adjacency list symmetric: a missing back edge is added when
// the target has spare capacity, otherwise the forward edge is dropped.
void GraphIndex::repair_symmetry() {
  for (std::uint32_t a = 0; a < links_.size(); ++a) {
    for (std::uint32_t layer = 0; layer < links_[a].size(); ++layer) {
      auto& out = links_[a][layer];
      std::vector<std::uint32_t> kept;
      kept.reserve(out.size());
      for (const std::uint32_t b : out) {
        auto& back = links_[b][layer];
        if (std::find(back.begin(), back.end(), a) != back.end()) {
          kept.push_back(b);
        } else if (back.size() < capacity(layer)) {
          back.push_back(a);
          kept.push_back(b);
        }
      }
      out = std::move(kept);
    }
  }
}

std::vector<SearchResult> GraphIndex::search(const TransformedQuery& tq,
                                             std::size_t top_k) const {
  return search(tq, top_k, params_.ef_search);
}

std::vector<SearchResult> GraphIndex::search(const TransformedQuery& tq,
                                             std::size_t top_k,
                                             std::size_t ef) const {
  check_query(tq, k_, top_k);
  const std::span<const double> query(tq.vec);
  Candidate current{sim(query, entry_), entry_};
  for (std::uint32_t layer = max_level_; layer > 0; --layer) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (const std::uint32_t next : links_[current.node][layer]) {
        const Candidate c{sim(query, next), next};
        if (Better{}(c, current)) {
          current = c;
          moved = true;
        }
      }
    }
  }
  std::vector<std::uint32_t> visited(ids_.size(), 0);
  std::uint32_t stamp = 0;
  const auto found = search_layer(query, {current}, std::max(ef, top_k), 0,
                                  visited, stamp);
  std::vector<SearchResult> out;
  out.reserve(found.size());
  for (const auto& c : found) out.push_back({ids_[c.node], c.sim});
  std::sort(out.begin(), out.end(), result_before);
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

GraphIndex GraphIndex::assemble(Layout layout) {
  const std::size_t n = layout.ids.size();
  const std::size_t width = augmented_size(layout.k);
  if (layout.k == 0 || n == 0) throw ContractViolation("graph: empty index");
  if (layout.params.max_degree < 2 || layout.params.ef_construction == 0 ||
      layout.params.ef_search == 0) {
    throw ContractViolation("graph: invalid parameters");
  }
  if (layout.data.size() != n * width || layout.levels.size() != n ||
      layout.links.size() != n) {
    throw ContractViolation("graph: section sizes disagree with node count");
  }
  GraphIndex g;
  g.k_ = layout.k;
  g.params_ = layout.params;
  std::uint32_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (layout.links[i].size() != layout.levels[i] + 1) {
      throw ContractViolation("graph: node " + std::to_string(i) +
                              " has inconsistent layer count");
    }
    top = std::max(top, layout.levels[i]);
    for (std::uint32_t layer = 0; layer < layout.links[i].size(); ++layer) {
      const auto& list = layout.links[i][layer];
      if (list.size() > g.capacity(layer)) {
        throw ContractViolation("graph: node " + std::to_string(i) +
                                " exceeds degree bound");
      }
      for (const std::uint32_t other : list) {
        if (other >= n || layout.levels[other] < layer) {
          throw ContractViolation("graph: node " + std::to_string(i) +
                                  " links to an invalid neighbour");
        }
      }
    }
  }
  if (layout.entry >= n || layout.max_level != top ||
      layout.levels[layout.entry] != top) {
    throw ContractViolation("graph: inconsistent entry point");
  }
  std::vector<TransformedDoc> docs(n);
  for (std::size_t i = 0; i < n; ++i) {
    docs[i].id = layout.ids[i];
    docs[i].vec.assign(layout.data.begin() + static_cast<std::ptrdiff_t>(i * width),
                       layout.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
    docs[i].prior = docs[i].vec[0];
  }
  check_corpus(docs);
  g.ids_ = std::move(layout.ids);
  g.data_ = std::move(layout.data);
  g.levels_ = std::move(layout.levels);
  g.links_ = std::move(layout.links);
  g.entry_ = layout.entry;
  g.max_level_ = layout.max_level;
  return g;
}

// ---------------------------------------------------------------------------
// Variant helpers

std::size_t index_size(const Index& index) {
  return std::visit([](const auto& i) { return i.size(); }, index);
}

std::size_t index_dim(const Index& index) {
  return std::visit([](const auto& i) { return i.dim(); }, index);
}

std::vector<SearchResult> search(const Index& index, const TransformedQuery& tq,
                                 std::size_t top_k, std::size_t ef_search) {
  if (const auto* graph = std::get_if<GraphIndex>(&index); graph && ef_search > 0) {
    return graph->search(tq, top_k, ef_search);
  }
  return std::visit([&](const auto& i) { return i.search(tq, top_k); }, index);
}

std::vector<std::vector<SearchResult>> search_batch(
    const Index& index, std::span<const TransformedQuery> queries,
    std::size_t top_k, std::size_t threads, std::size_t ef_search) {
  std::vector<std::vector<SearchResult>> out(queries.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, queries.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      out[i] = search(index, queries[i], top_k, ef_search);
    }
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < queries.size(); i += threads) {
            out[i] = search(index, queries[i], top_k, ef_search);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'M', 'V', 'N', 'R'};
constexpr std::uint8_t kKindFlat = 0;
constexpr std::uint8_t kKindGraph = 1;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
    }
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::string_view s) { out_.append(s); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<std::uint8_t>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }
  double get_f64(const char* what) {
    return std::bit_cast<double>(get<std::uint64_t>(what));
  }
  std::string_view get_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw LoadError(LoadErrorKind::Truncated,
                      std::string("index file truncated while reading ") + what);
    }
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_common(Writer& w, std::uint8_t kind, std::size_t k,
                  std::size_t count) {
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint16_t>(kIndexFormatVersion);
  w.put<std::uint8_t>(kind);
  w.put<std::uint8_t>(0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
  w.put<std::uint64_t>(count);
}

void write_ids(Writer& w, const auto& ids) {
  for (const std::string& id : ids) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id);
  }
}

}  // namespace

std::string serialize(const Index& index) {
  Writer w;
  if (const auto* flat = std::get_if<FlatIndex>(&index)) {
    write_common(w, kKindFlat, flat->dim(), flat->size());
    for (const auto& d : flat->docs()) {
      for (const double v : d.vec) w.put_f64(v);
    }
    std::vector<std::string> ids;
    ids.reserve(flat->size());
    for (const auto& d : flat->docs()) ids.push_back(d.id);
    write_ids(w, ids);
  } else {
    const auto& g = std::get<GraphIndex>(index);
    const auto n = static_cast<std::uint32_t>(g.size());
    write_common(w, kKindGraph, g.dim(), n);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (const double v : g.vector(i)) w.put_f64(v);
    }
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ids.push_back(g.id(i));
    write_ids(w, ids);
    w.put<std::uint32_t>(g.params().max_degree);
    w.put<std::uint32_t>(g.params().ef_construction);
    w.put<std::uint32_t>(g.params().ef_search);
    w.put<std::uint64_t>(g.params().seed);
    w.put<std::uint32_t>(g.entry_point());
    w.put<std::uint32_t>(g.max_level());
    for (std::uint32_t i = 0; i < n; ++i) {
      w.put<std::uint32_t>(g.level(i));
      for (std::uint32_t layer = 0; layer <= g.level(i); ++layer) {
        const auto list = g.neighbors(i, layer);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(list.size()));
        for (const std::uint32_t v : list) w.put<std::uint32_t>(v);
      }
    }
  }
  const std::uint64_t checksum = fnv1a(w.str());
  w.put<std::uint64_t>(checksum);
  return std::move(w.str());
}

Index deserialize(std::string_view bytes) {
  Reader r(bytes);
  const auto magic = r.get_bytes(4, "magic");
  if (magic != std::string_view(kMagic, 4)) {
    throw LoadError(LoadErrorKind::BadMagic, "not an index file (bad magic)");
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kIndexFormatVersion) {
    throw LoadError(LoadErrorKind::UnsupportedVersion,
                    "unsupported index format version " + std::to_string(version));
  }
  const auto kind = r.get<std::uint8_t>("kind");
  const auto reserved = r.get<std::uint8_t>("reserved");
  if ((kind != kKindFlat && kind != kKindGraph) || reserved != 0) {
    throw LoadError(LoadErrorKind::Corrupt, "unknown index kind");
  }
  const std::size_t k = r.get<std::uint32_t>("k");
  const std::uint64_t count = r.get<std::uint64_t>("count");
  if (k == 0 || count == 0) {
    throw LoadError(LoadErrorKind::Corrupt, "index header declares an empty index");
  }
  const std::size_t width = augmented_size(k);
  // Reject impossible sizes before allocating anything.
  if (count > r.remaining() / (width * sizeof(double))) {
    throw LoadError(LoadErrorKind::Truncated, "index file truncated in vector block");
  }
  std::vector<double> data(count * width);
  for (auto& v : data) v = r.get_f64("vectors");
  std::vector<std::string> ids(count);
  for (auto& id : ids) {
    const auto len = r.get<std::uint32_t>("id length");
    id = std::string(r.get_bytes(len, "id"));
  }

  Index result;
  try {
    if (kind == kKindFlat) {
      std::vector<TransformedDoc> docs(count);
      for (std::size_t i = 0; i < count; ++i) {
        docs[i].id = std::move(ids[i]);
        docs[i].vec.assign(data.begin() + static_cast<std::ptrdiff_t>(i * width),
                           data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
        docs[i].prior = docs[i].vec[0];
      }
      result = FlatIndex::build(std::move(docs));
    } else {
      GraphIndex::Layout layout;
      layout.k = k;
      layout.params.max_degree = r.get<std::uint32_t>("max_degree");
      layout.params.ef_construction = r.get<std::uint32_t>("ef_construction");
      layout.params.ef_search = r.get<std::uint32_t>("ef_search");
      layout.params.seed = r.get<std::uint64_t>("seed");
      layout.entry = r.get<std::uint32_t>("entry point");
      layout.max_level = r.get<std::uint32_t>("max level");
      layout.levels.resize(count);
      layout.links.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto level = r.get<std::uint32_t>("node level");
        if (level > kMaxLevel) {
          throw LoadError(LoadErrorKind::Corrupt, "node level out of range");
        }
        layout.levels[i] = level;
        layout.links[i].resize(level + 1);
        for (auto& list : layout.links[i]) {
          const auto degree = r.get<std::uint32_t>("degree");
          if (degree > r.remaining() / sizeof(std::uint32_t)) {
            throw LoadError(LoadErrorKind::Truncated,
                            "index file truncated in adjacency lists");
          }
          list.resize(degree);
          for (auto& v : list) v = r.get<std::uint32_t>("neighbour");
        }
      }
      layout.ids = std::move(ids);
      layout.data = std::move(data);
      result = GraphIndex::assemble(std::move(layout));
    }
  } catch (const ContractViolation& e) {
    throw LoadError(LoadErrorKind::Corrupt, std::string("corrupt index: ") + e.what());
  }

  const std::size_t body = r.pos();
  const auto stored = r.get<std::uint64_t>("checksum");
  if (r.remaining() != 0) {
    throw LoadError(LoadErrorKind::Corrupt, "trailing bytes after checksum");
  }
  if (fnv1a(bytes.substr(0, body)) != stored) {
    throw LoadError(LoadErrorKind::Corrupt, "index checksum mismatch");
  }
  return result;
}

void persist(const Index& index, const std::filesystem::path& path) {
  const std::string bytes = serialize(index);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw LoadError(LoadErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw LoadError(LoadErrorKind::Io, "write failed for '" + path.string() + "'");
  }
}

Index load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(LoadErrorKind::Io, "cannot open '" + path.string() + "'");
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace mvnr
