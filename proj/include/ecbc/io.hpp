#pragma once

// Serialization: model JSON, numeric CSV input, trace CSV, atomic file writes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecbc/bayes_degrees.hpp"
#include "ecbc/copula_core.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/portfolio.hpp"

namespace ecbc {

using Json = nlohmann::ordered_json;

inline Json model_to_json(const EcbcModel& model) {
  Json j;
  j["n"] = model.n();
  j["d"] = model.d();
  std::vector<int> ranks(model.ranks().values().data().begin(), model.ranks().values().data().end());
  j["ranks"] = ranks;
  j["degrees"] = model.degrees().values();
  return j;
}

inline EcbcModel model_from_json(const Json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    auto ranks = j.at("ranks").get<std::vector<int>>();
    auto degrees = j.at("degrees").get<std::vector<int>>();
    if (ranks.size() != n * d) throw InvalidInput("model: ranks length must equal n * d");
    return EcbcModel(RankMatrix(Matrix<int>(n, d, std::move(ranks))), DegreeVector(std::move(degrees)));
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("model: ") + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline EcbcModel load_model(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

// Shortest text that round-trips the double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  std::ostringstream ss;
  ss << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  std::string s = ss.str();
  // Prefer a shorter representation when it still round-trips.
  for (int p = 1; p < std::numeric_limits<double>::max_digits10; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << x;
    if (std::stod(t.str()) == x) return t.str();
  }
  return s;
}

struct NumericTable {
  std::vector<std::string> header;
  Matrix<double> values;
};

// CSV with a header row and numeric cells only.
inline NumericTable parse_numeric_csv(std::istream& in) {
  NumericTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> cells;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (table.header.empty()) {
      for (const auto& f : fields) table.header.push_back(detail::trim(f));
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                         " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) cells.push_back(detail::parse_number(fields[c], line_no, c + 1));
    ++rows;
  }
  if (table.header.empty()) throw InvalidInput("data file is empty");
  table.values = Matrix<double>(rows, table.header.size(), std::move(cells));
  return table;
}

inline NumericTable load_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  try {
    return parse_numeric_csv(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

inline void write_matrix_csv(std::ostream& out, const Matrix<double>& m, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

// Columns: chain, iteration, m_1..m_d, alpha_1..alpha_d.
inline void write_trace_csv(std::ostream& out, const McmcTrace& trace) {
  const std::size_t d = trace.d();
  out << "chain,iteration";
  for (std::size_t j = 0; j < d; ++j) out << ",m_" << j + 1;
  for (std::size_t j = 0; j < d; ++j) out << ",alpha_" << j + 1;
  out << '\n';
  for (std::size_t s = 0; s < trace.size(); ++s) {
    out << trace.chain_ids[s] << ',' << trace.iterations[s];
    for (std::size_t j = 0; j < d; ++j) out << ',' << trace.m_samples(s, j);
    for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(trace.alpha_samples(s, j));
    out << '\n';
  }
}

inline Json degree_estimate_to_json(const DegreeEstimate& est) {
  auto finite_or_null = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json j;
  j["modes"] = est.modes.values();
  Json tables = Json::array();
  for (const auto& table : est.frequency_tables) {
    Json t = Json::object();
    for (const auto& [value, count] : table) t[std::to_string(value)] = count;
    tables.push_back(t);
  }
  j["frequency_tables"] = tables;
  Json rm = Json::array();
  Json ra = Json::array();
  for (double x : est.rhat_m) rm.push_back(finite_or_null(x));
  for (double x : est.rhat_alpha) ra.push_back(finite_or_null(x));
  j["rhat_m"] = rm;
  j["rhat_alpha"] = ra;
  j["equal_fraction"] = est.equal_fraction;
  return j;
}

// Writes all files or none: each goes to a temporary sibling first and is
// renamed into place only after every write succeeded.
class AtomicWriter {
 public:
  AtomicWriter() = default;
  AtomicWriter(const AtomicWriter&) = delete;
  AtomicWriter& operator=(const AtomicWriter&) = delete;
  ~AtomicWriter() {
    for (const auto& [tmp, dest] : pending_) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
    }
  }

  void add(const std::filesystem::path& dest, const std::string& content) {
    std::filesystem::path tmp = dest;
    tmp += ".tmp" + std::to_string(pending_.size());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
      pending_.emplace_back(tmp, dest);
      out << content;
      out.flush();
      if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
  }

  void commit() {
    for (const auto& [tmp, dest] : pending_) std::filesystem::rename(tmp, dest);
    pending_.clear();
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending_;
};

}  // namespace ecbc
