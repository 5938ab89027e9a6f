#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "awe/common.hpp"

namespace awe {

struct Arc {
  NodeId source;
  NodeId target;
  double weight = 1.0;

  friend bool operator==(const Arc&, const Arc&) = default;
};

// Weighted directed multigraph. Undirected graphs are stored as symmetric
// arc pairs of equal weight. Node ids are 0..node_count-1; no self-loops.
class Graph {
 public:
  Graph() = default;

  // Builds a graph from raw edges. Self-loops are dropped (see
  // self_loops_stripped()); for undirected input each unordered pair is kept
  // once with the weight of its first occurrence, then symmetrized.
  static Graph from_edges(std::size_t node_count, std::vector<Arc> edges, bool directed,
                          std::optional<int> label = std::nullopt) {
    if (node_count == 0) throw ValidationError("graph with zero nodes");
    Graph g;
    g.node_count_ = node_count;
    g.directed_ = directed;
    g.label_ = label;
    std::set<std::pair<NodeId, NodeId>> seen;
    for (const auto& e : edges) {
      if (e.source >= node_count || e.target >= node_count)
        throw ValidationError("edge (" + std::to_string(e.source) + ", " +
                              std::to_string(e.target) + ") references a node outside 0.." +
                              std::to_string(node_count - 1));
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        throw ValidationError("edge weight must be positive and finite");
      if (e.source == e.target) {
        ++g.self_loops_;
        continue;
      }
      if (directed) {
        g.arcs_.push_back(e);
      } else {
        auto key = std::minmax(e.source, e.target);
        if (!seen.insert({key.first, key.second}).second) continue;
        g.arcs_.push_back({key.first, key.second, e.weight});
        g.arcs_.push_back({key.second, key.first, e.weight});
      }
    }
    std::stable_sort(g.arcs_.begin(), g.arcs_.end(), [](const Arc& a, const Arc& b) {
      return std::tie(a.source, a.target) < std::tie(b.source, b.target);
    });
    return g;
  }

  std::size_t node_count() const noexcept { return node_count_; }
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }
  bool directed() const noexcept { return directed_; }
  const std::optional<int>& label() const noexcept { return label_; }
  void set_label(std::optional<int> label) { label_ = label; }
  std::size_t self_loops_stripped() const noexcept { return self_loops_; }

  // Undirected edges are counted once.
  std::size_t edge_count() const noexcept { return directed_ ? arcs_.size() : arcs_.size() / 2; }

  std::vector<std::size_t> out_degrees() const {
    std::vector<std::size_t> deg(node_count_, 0);
    for (const auto& a : arcs_) ++deg[a.source];
    return deg;
  }

  std::vector<std::size_t> in_degrees() const {
    std::vector<std::size_t> deg(node_count_, 0);
    for (const auto& a : arcs_) ++deg[a.target];
    return deg;
  }

  // Nodes with no incident arcs in either direction.
  std::vector<NodeId> isolated_nodes() const {
    std::vector<bool> touched(node_count_, false);
    for (const auto& a : arcs_) touched[a.source] = touched[a.target] = true;
    std::vector<NodeId> out;
    for (std::size_t v = 0; v < node_count_; ++v)
      if (!touched[v]) out.push_back(static_cast<NodeId>(v));
    return out;
  }

  // Same structure under the node renaming v -> perm[v].
  Graph relabeled(const std::vector<NodeId>& perm) const {
    std::vector<Arc> edges;
    edges.reserve(arcs_.size());
    for (const auto& a : arcs_) {
      if (!directed_ && a.source > a.target) continue;
      edges.push_back({perm.at(a.source), perm.at(a.target), a.weight});
    }
    return from_edges(node_count_, std::move(edges), directed_, label_);
  }

 private:
  std::size_t node_count_ = 0;
  std::vector<Arc> arcs_;
  bool directed_ = false;
  std::optional<int> label_;
  std::size_t self_loops_ = 0;
};

struct GraphCollection {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<int> labels;  // contiguous class ids from 0, one per graph
  bool has_labels = false;
  std::size_t self_loops_stripped = 0;

  std::size_t size() const noexcept { return graphs.size(); }

  int class_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  double mean_node_count() const {
    double total = 0.0;
    for (const auto& g : graphs) total += static_cast<double>(g.node_count());
    return graphs.empty() ? 0.0 : total / static_cast<double>(graphs.size());
  }
};

enum class CollectionFormat { Benchmark, EdgeListDir };

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || std::isspace(static_cast<unsigned char>(line[i]))))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const std::string& where) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ValidationError(where + ": cannot parse '" + std::string(field) + "'");
  return value;
}

inline bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

inline std::string location(const std::filesystem::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

// Reads one integer per non-blank line.
inline std::vector<long long> read_int_column(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::vector<long long> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto fields = split_fields(line);
    if (fields.size() != 1)
      throw ValidationError(location(file, lineno) + ": expected a single integer");
    values.push_back(parse_number<long long>(fields[0], location(file, lineno)));
  }
  return values;
}

// Maps raw class values onto 0..k-1 preserving their numeric order.
inline std::vector<int> remap_labels(const std::vector<long long>& raw) {
  std::map<long long, int> ids;
  for (auto v : raw) ids.emplace(v, 0);
  int next = 0;
  for (auto& [_, id] : ids) id = next++;
  std::vector<int> out;
  out.reserve(raw.size());
  for (auto v : raw) out.push_back(ids[v]);
  return out;
}

inline std::filesystem::path find_prefixed(const std::filesystem::path& dir,
                                           const std::string& suffix) {
  const auto named = dir / (dir.filename().string() + suffix);
  if (std::filesystem::exists(named)) return named;
  std::vector<std::filesystem::path> hits;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) hits.push_back(entry.path());
  }
  if (hits.size() != 1)
    throw ValidationError("expected exactly one *" + suffix + " in " + dir.string());
  return hits.front();
}

inline GraphCollection load_benchmark(const std::filesystem::path& dir) {
  const auto a_file = find_prefixed(dir, "_A.txt");
  const auto prefix = a_file.filename().string().substr(0, a_file.filename().string().size() - 6);
  const auto indicator_file = dir / (prefix + "_graph_indicator.txt");
  const auto labels_file = dir / (prefix + "_graph_labels.txt");

  const auto indicator = read_int_column(indicator_file);
  if (indicator.empty()) throw ValidationError(indicator_file.string() + " is empty");
  long long graph_total = 0;
  for (std::size_t k = 0; k < indicator.size(); ++k) {
    if (indicator[k] < 1)
      throw ValidationError(location(indicator_file, k + 1) + ": graph ids are 1-based");
    graph_total = std::max(graph_total, indicator[k]);
  }

  const auto g_count = static_cast<std::size_t>(graph_total);
  std::vector<std::size_t> node_counts(g_count, 0);
  std::vector<NodeId> local_id(indicator.size());
  for (std::size_t k = 0; k < indicator.size(); ++k) {
    auto g = static_cast<std::size_t>(indicator[k] - 1);
    local_id[k] = static_cast<NodeId>(node_counts[g]++);
  }
  for (std::size_t g = 0; g < g_count; ++g)
    if (node_counts[g] == 0)
      throw ValidationError("graph " + std::to_string(g + 1) + " has zero nodes in " +
                            indicator_file.filename().string());

  std::vector<std::vector<Arc>> edges(g_count);
  std::ifstream in(a_file);
  if (!in) throw ValidationError("cannot open " + a_file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto fields = split_fields(line);
    const auto where = location(a_file, lineno);
    if (fields.size() != 2) throw ValidationError(where + ": expected 'i, j'");
    auto i = parse_number<long long>(fields[0], where);
    auto j = parse_number<long long>(fields[1], where);
    const auto n = static_cast<long long>(indicator.size());
    if (i < 1 || j < 1 || i > n || j > n)
      throw ValidationError(where + ": node id outside 1.." + std::to_string(n));
    auto gi = indicator[static_cast<std::size_t>(i - 1)];
    auto gj = indicator[static_cast<std::size_t>(j - 1)];
    if (gi != gj) throw ValidationError(where + ": edge joins nodes of different graphs");
    edges[static_cast<std::size_t>(gi - 1)].push_back(
        {local_id[static_cast<std::size_t>(i - 1)], local_id[static_cast<std::size_t>(j - 1)], 1.0});
  }

  GraphCollection out;
  out.name = prefix;
  if (std::filesystem::exists(labels_file)) {
    const auto raw = read_int_column(labels_file);
    if (raw.size() != g_count)
      throw ValidationError(labels_file.filename().string() + " has " +
                            std::to_string(raw.size()) + " labels for " +
                            std::to_string(g_count) + " graphs");
    out.labels = remap_labels(raw);
    out.has_labels = true;
  } else {
    out.labels.assign(g_count, 0);
  }
  out.graphs.reserve(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    out.graphs.push_back(
        Graph::from_edges(node_counts[g], std::move(edges[g]), false, out.labels[g]));
    out.self_loops_stripped += out.graphs.back().self_loops_stripped();
  }
  return out;
}

// One graph per file: lines "u v [w]" with 0-based ids. Optional header
// comments "# nodes: N" (declared node count) and "# directed".
inline Graph read_edge_list(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::optional<std::size_t> declared;
  bool directed = false;
  std::vector<Arc> edges;
  std::vector<std::size_t> edge_lines;
  std::size_t max_id_plus_one = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto where = location(file, lineno);
    std::string_view view(line);
    auto first = view.find_first_not_of(" \t");
    if (view[first] == '#') {
      auto body = view.substr(first + 1);
      auto fields = split_fields(body);
      if (!fields.empty() && (fields[0] == "nodes:" || fields[0] == "nodes")) {
        if (fields.size() != 2) throw ValidationError(where + ": expected '# nodes: N'");
        declared = parse_number<std::size_t>(fields[1], where);
      } else if (!fields.empty() && fields[0] == "directed") {
        directed = true;
      }
      continue;
    }
    auto fields = split_fields(view);
    if (fields.size() != 2 && fields.size() != 3)
      throw ValidationError(where + ": expected 'u v [w]'");
    Arc arc{parse_number<NodeId>(fields[0], where), parse_number<NodeId>(fields[1], where), 1.0};
    if (fields.size() == 3) arc.weight = parse_number<double>(fields[2], where);
    if (!(arc.weight > 0.0) || !std::isfinite(arc.weight))
      throw ValidationError(where + ": weight must be positive");
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::max(arc.source, arc.target) + 1);
    edges.push_back(arc);
    edge_lines.push_back(lineno);
  }
  const std::size_t n = declared.value_or(max_id_plus_one);
  for (std::size_t k = 0; k < edges.size(); ++k)
    if (edges[k].source >= n || edges[k].target >= n)
      throw ValidationError(location(file, edge_lines[k]) + ": node id beyond declared count " +
                            std::to_string(n));
  if (n == 0) throw ValidationError(file.filename().string() + ": graph with zero nodes");
  return Graph::from_edges(n, std::move(edges), directed);
}

inline GraphCollection load_edge_list_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_regular_file() || name == "labels.txt" || name.starts_with('.')) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no graph files in " + dir.string());

  GraphCollection out;
  out.name = dir.filename().string();
  for (const auto& f : files) {
    out.graphs.push_back(read_edge_list(f));
    out.self_loops_stripped += out.graphs.back().self_loops_stripped();
  }
  const auto labels_file = dir / "labels.txt";
  if (std::filesystem::exists(labels_file)) {
    const auto raw = read_int_column(labels_file);
    if (raw.size() != files.size())
      throw ValidationError("labels.txt has " + std::to_string(raw.size()) + " labels for " +
                            std::to_string(files.size()) + " graph files");
    out.labels = remap_labels(raw);
    out.has_labels = true;
  } else {
    out.labels.assign(files.size(), 0);
  }
  for (std::size_t g = 0; g < out.graphs.size(); ++g) out.graphs[g].set_label(out.labels[g]);
  return out;
}

}  // namespace detail

inline GraphCollection load_collection(const std::filesystem::path& path, CollectionFormat format) {
  if (!std::filesystem::is_directory(path))
    throw ValidationError("dataset directory not found: " + path.string());
  return format == CollectionFormat::Benchmark ? detail::load_benchmark(path)
                                               : detail::load_edge_list_dir(path);
}

// Writes the edge-list-dir format; load_collection(dir, EdgeListDir) restores
// the same graphs and labels.
inline void save_collection(const GraphCollection& collection, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int width = static_cast<int>(std::to_string(collection.size()).size());
  for (std::size_t g = 0; g < collection.size(); ++g) {
    const auto& graph = collection.graphs[g];
    std::ostringstream name;
    name << "graph_" << std::setw(width) << std::setfill('0') << g << ".txt";
    std::ofstream out(dir / name.str());
    out << "# nodes: " << graph.node_count() << "\n";
    if (graph.directed()) out << "# directed\n";
    for (const auto& a : graph.arcs()) {
      if (!graph.directed() && a.source > a.target) continue;
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, a.weight);
      out << a.source << ' ' << a.target << ' ' << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
  if (collection.has_labels) {
    std::ofstream labels(dir / "labels.txt");
    for (int l : collection.labels) labels << l << '\n';
  }
}

// G(n, p): each of the n(n-1)/2 pairs is an edge independently with
// probability p. Uses geometric skipping over the pair sequence.
inline Graph generate_erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (n < 1) throw ValidationError("Erdos-Renyi graph needs n >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("edge probability must be in [0, 1]");
  std::vector<Arc> edges;
  if (p > 0.0 && n > 1) {
    Rng rng(seed);
    if (p >= 1.0) {
      for (NodeId v = 1; v < n; ++v)
        for (NodeId w = 0; w < v; ++w) edges.push_back({w, v, 1.0});
    } else {
      const double log_q = std::log1p(-p);
      long long v = 1, w = -1;
      const auto nn = static_cast<long long>(n);
      while (v < nn) {
        const double r = 1.0 - uniform01(rng);  // (0, 1]
        w += 1 + static_cast<long long>(std::floor(std::log(r) / log_q));
        while (w >= v && v < nn) {
          w -= v;
          ++v;
        }
        if (v < nn) edges.push_back({static_cast<NodeId>(w), static_cast<NodeId>(v), 1.0});
      }
    }
  }
  return Graph::from_edges(n, std::move(edges), false);
}

}  // namespace awe
