#include "mvnr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mvnr {

namespace {

using nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<double> number_array(const json& obj, const char* key,
                                 const std::string& at) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) {
    throw InputError(at + ": missing array field '" + key + "'");
  }
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw InputError(at + ": non-numeric entry in '" + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

std::string string_field(const json& obj, const char* key, const std::string& at) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw InputError(at + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

json parse_line(const std::string& line, const std::string& at) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(at + ": malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw InputError(at + ": expected a JSON object");
  return obj;
}

void write_array(std::ostream& out, std::span<const double> values) {
  out << '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << format_double(values[i]);
  }
  out << ']';
}

template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string tok; fields >> tok;) cols.push_back(tok);
    fn(cols, where(path.string(), lineno));
  }
}

double parse_number(const std::string& text, const std::string& at) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw InputError(at + ": invalid number '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& text, const std::string& at) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw InputError(at + ": invalid integer '" + text + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<GaussianEmbedding> parse_embeddings(std::istream& in,
                                                const std::string& source) {
  std::vector<GaussianEmbedding> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t first_k_line = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string at = where(source, lineno);
    const json obj = parse_line(line, at);
    std::string id = string_field(obj, "id", at);
    auto mean = number_array(obj, "mean", at);
    auto var = number_array(obj, "var", at);
    try {
      GaussianEmbedding g(id, std::move(mean), std::move(var));
      validate_ingested(g);
      if (!out.empty() && g.dim() != out.front().dim()) {
        throw InputError(at + ": record '" + id + "' has k=" +
                         std::to_string(g.dim()) + " but line " +
                         std::to_string(first_k_line) + " has k=" +
                         std::to_string(out.front().dim()));
      }
      if (out.empty()) first_k_line = lineno;
      out.push_back(std::move(g));
    } catch (const ContractViolation& e) {
      throw InputError(at + ": invalid record '" + id + "': " + e.what());
    }
  }
  return out;
}

std::vector<GaussianEmbedding> read_embeddings(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_embeddings(in, path.string());
}

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<GaussianEmbedding>& embeddings) {
  auto out = open_out(path);
  for (const auto& g : embeddings) {
    out << "{\"id\":" << json(g.id()).dump() << ",\"mean\":";
    write_array(out, g.mean());
    out << ",\"var\":";
    write_array(out, g.variance());
    out << "}\n";
  }
}

FeatureTable read_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  FeatureTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string at = where(path.string(), lineno);
    const json obj = parse_line(line, at);
    auto id = string_field(obj, "id", at);
    auto features = number_array(obj, "features", at);
    try {
      table.add(std::move(id), std::move(features));
    } catch (const ContractViolation& e) {
      throw InputError(at + ": " + e.what());
    }
  }
  return table;
}

void write_features(const std::filesystem::path& path, const FeatureTable& table) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << "{\"id\":" << json(table.id(i)).dump() << ",\"features\":";
    write_array(out, table.features(i));
    out << "}\n";
  }
}

Qrels read_qrels(const std::filesystem::path& path) {
  Qrels qrels;
  for_each_record(path, [&](const std::vector<std::string>& cols, const std::string& at) {
    if (cols.size() != 4) throw InputError(at + ": expected 'qid 0 docid grade'");
    const long long grade = parse_integer(cols[3], at);
    if (grade < 0) throw InputError(at + ": negative relevance grade");
    qrels[cols[0]][cols[2]] = static_cast<int>(grade);
  });
  return qrels;
}

void write_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  auto out = open_out(path);
  for (const auto& [qid, judged] : qrels) {
    for (const auto& [doc, grade] : judged) out << qid << " 0 " << doc << ' ' << grade << '\n';
  }
}

Run read_run(const std::filesystem::path& path) {
  Run run;
  for_each_record(path, [&](const std::vector<std::string>& cols, const std::string& at) {
    if (cols.size() != 6) {
      throw InputError(at + ": expected 'qid Q0 docid rank score tag'");
    }
    const long long rank = parse_integer(cols[3], at);
    if (rank < 1) throw InputError(at + ": rank must be >= 1");
    run[cols[0]].push_back(
        {cols[0], cols[2], static_cast<std::size_t>(rank), parse_number(cols[4], at)});
  });
  for (auto& [qid, records] : run) {
    std::stable_sort(records.begin(), records.end(),
                     [](const RunRecord& a, const RunRecord& b) { return a.rank < b.rank; });
  }
  try {
    validate_run(run);
  } catch (const ContractViolation& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return run;
}

void write_run(std::ostream& out, const Run& run, const std::string& tag) {
  for (const auto& [qid, records] : run) {
    for (const auto& r : records) {
      out << qid << " Q0 " << r.doc_id << ' ' << r.rank << ' ' << format_double(r.score)
          << ' ' << tag << '\n';
    }
  }
}

void write_run(const std::filesystem::path& path, const Run& run,
               const std::string& tag) {
  auto out = open_out(path);
  write_run(out, run, tag);
}

RankedPools read_pools(const std::filesystem::path& path) {
  const Run run = read_run(path);
  RankedPools pools;
  for (const auto& [qid, records] : run) {
    auto& ids = pools[qid];
    for (const auto& r : records) ids.push_back(r.doc_id);
  }
  return pools;
}

TeacherScores read_teacher_scores(const std::filesystem::path& path) {
  TeacherScores scores;
  for_each_record(path, [&](const std::vector<std::string>& cols, const std::string& at) {
    if (cols.size() != 3) throw InputError(at + ": expected 'query_id doc_id score'");
    scores[cols[0]][cols[1]] = parse_number(cols[2], at);
  });
  return scores;
}

std::map<std::string, double> read_metric_file(const std::filesystem::path& path) {
  std::map<std::string, double> values;
  for_each_record(path, [&](const std::vector<std::string>& cols, const std::string& at) {
    if (cols.size() != 2) throw InputError(at + ": expected 'qid value'");
    if (!values.emplace(cols[0], parse_number(cols[1], at)).second) {
      throw InputError(at + ": duplicate query '" + cols[0] + "'");
    }
  });
  return values;
}

EncoderParams read_encoder(const std::filesystem::path& path) {
  auto in = open_in(path);
  json obj;
  try {
    obj = json::parse(in);
    EncoderParams p;
    p.input_dim = obj.at("input_dim").get<std::size_t>();
    p.dim = obj.at("dim").get<std::size_t>();
    p.beta = obj.at("beta").get<double>();
    p.mean_proj = obj.at("mean_proj").get<std::vector<double>>();
    p.var_proj = obj.at("var_proj").get<std::vector<double>>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed encoder file (" + e.what() + ")");
  } catch (const ContractViolation& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_encoder(const std::filesystem::path& path, const EncoderParams& params) {
  auto out = open_out(path);
  out << "{\"input_dim\":" << params.input_dim << ",\"dim\":" << params.dim
      << ",\"beta\":" << format_double(params.beta) << ",\"mean_proj\":";
  write_array(out, params.mean_proj);
  out << ",\"var_proj\":";
  write_array(out, params.var_proj);
  out << "}\n";
}

}  // namespace mvnr
