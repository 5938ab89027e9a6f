#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "awe/common.hpp"

namespace awe {

// Whole-graph vectors of one collection, as exported to CSV/JSON.
struct EmbeddingTable {
  int length = 0;
  std::string mode;  // "exact", "sampled" or "data-driven"
  std::vector<std::vector<double>> rows;
};

inline std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Header "graph_id,0,1,...", one row per graph; values round-trip exactly.
inline void write_embeddings_csv(const EmbeddingTable& table, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  const std::size_t dim = table.rows.empty() ? 0 : table.rows.front().size();
  out << "graph_id";
  for (std::size_t i = 0; i < dim; ++i) out << ',' << i;
  out << '\n';
  char buf[32];
  for (std::size_t g = 0; g < table.rows.size(); ++g) {
    out << g;
    for (double v : table.rows[g]) {
      auto r = std::to_chars(buf, buf + sizeof buf, v);
      out << ',';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
}

// Array of {graph_id, l, mode, values}.
inline void write_embeddings_json(const EmbeddingTable& table, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t g = 0; g < table.rows.size(); ++g)
    doc.push_back({{"graph_id", g}, {"l", table.length}, {"mode", table.mode}, {"values", table.rows[g]}});
  out << doc.dump() << '\n';
}

inline EmbeddingTable read_embeddings_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read embeddings " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ValidationError(file.string() + ": expected an array of embeddings");
  EmbeddingTable table;
  for (std::size_t g = 0; g < doc.size(); ++g) {
    const auto& rec = doc[g];
    if (!rec.contains("values") || rec.value("graph_id", static_cast<std::size_t>(-1)) != g)
      throw ValidationError(file.string() + ": record " + std::to_string(g) + " is malformed or out of order");
    table.length = rec.value("l", 0);
    table.mode = rec.value("mode", "");
    table.rows.push_back(rec["values"].get<std::vector<double>>());
  }
  return table;
}

inline EmbeddingTable read_embeddings_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read embeddings " + file.string());
  EmbeddingTable table;
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      auto r = std::from_chars(field.data(), field.data() + field.size(), v);
      if (r.ec != std::errc{})
        throw ValidationError(file.filename().string() + ":" + std::to_string(lineno) + ": bad value '" + field + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline EmbeddingTable read_embeddings(const std::filesystem::path& file) {
  return file.extension() == ".csv" ? read_embeddings_csv(file) : read_embeddings_json(file);
}

inline void write_labels(const std::vector<int>& labels, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  for (int l : labels) out << l << '\n';
}

inline std::vector<int> read_labels(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("labels file not found: " + file.string());
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    int v = 0;
    auto first = line.find_first_not_of(" \t");
    auto last = line.find_last_not_of(" \t\r");
    auto r = std::from_chars(line.data() + first, line.data() + last + 1, v);
    if (r.ec != std::errc{} || r.ptr != line.data() + last + 1 || v < 0)
      throw ValidationError(file.filename().string() + ":" + std::to_string(lineno) + ": expected a class id");
    labels.push_back(v);
  }
  return labels;
}

}  // namespace awe
