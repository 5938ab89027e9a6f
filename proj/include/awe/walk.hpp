#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "awe/common.hpp"
#include "awe/graph.hpp"

namespace awe {

// Transition structure of a graph: arc weights normalized per source node,
// stored in CSR form with one alias table per node for O(1) sampling.
class RandomWalkGraph {
 public:
  explicit RandomWalkGraph(const Graph& g) : offsets_(g.node_count() + 1, 0) {
    for (const auto& a : g.arcs()) ++offsets_[a.source + 1];
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    const std::size_t m = g.arcs().size();
    targets_.resize(m);
    prob_.resize(m);
    alias_prob_.resize(m);
    alias_.resize(m);
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    std::vector<double> weights(m);
    for (const auto& a : g.arcs()) {
      const auto slot = cursor[a.source]++;
      targets_[slot] = a.target;
      weights[slot] = a.weight;
    }
    for (std::size_t u = 0; u < g.node_count(); ++u) {
      const auto begin = offsets_[u], end = offsets_[u + 1];
      if (begin == end) continue;
      double total = 0.0;
      for (auto k = begin; k < end; ++k) total += weights[k];
      for (auto k = begin; k < end; ++k) prob_[k] = weights[k] / total;
      build_alias(begin, end);
    }
    in_degree_max_ = out_degree_max_ = 0;
    auto in = g.in_degrees();
    for (auto d : in) in_degree_max_ = std::max(in_degree_max_, d);
    for (std::size_t u = 0; u < g.node_count(); ++u) {
      out_degree_max_ = std::max(out_degree_max_, out_degree(static_cast<NodeId>(u)));
      if (startable(static_cast<NodeId>(u))) startable_.push_back(static_cast<NodeId>(u));
    }
  }

  std::size_t node_count() const noexcept { return offsets_.size() - 1; }
  std::size_t out_degree(NodeId u) const noexcept { return offsets_[u + 1] - offsets_[u]; }
  // Nodes with out-degree 0 cannot start (or continue) a walk.
  bool startable(NodeId u) const noexcept { return out_degree(u) > 0; }
  const std::vector<NodeId>& startable_nodes() const noexcept { return startable_; }
  std::size_t max_in_degree() const noexcept { return in_degree_max_; }
  std::size_t max_out_degree() const noexcept { return out_degree_max_; }

  std::span<const NodeId> neighbors(NodeId u) const noexcept {
    return {targets_.data() + offsets_[u], out_degree(u)};
  }
  std::span<const double> probabilities(NodeId u) const noexcept {
    return {prob_.data() + offsets_[u], out_degree(u)};
  }
  // Alias table of u: column k keeps neighbor k with probability
  // alias_keep(u)[k], otherwise jumps to neighbor alias_target(u)[k].
  std::span<const double> alias_keep(NodeId u) const noexcept {
    return {alias_prob_.data() + offsets_[u], out_degree(u)};
  }
  std::span<const std::uint32_t> alias_target(NodeId u) const noexcept {
    return {alias_.data() + offsets_[u], out_degree(u)};
  }

  NodeId step(NodeId u, Rng& rng) const {
    HalfWords bits(rng);
    return step(u, bits);
  }

  NodeId step(NodeId u, HalfWords& bits) const {
    const auto begin = offsets_[u];
    const auto deg = offsets_[u + 1] - begin;
    if (deg == 1) return targets_[begin];
    if (deg == 0) dead_end(u);
    const auto col = begin + bits.below(static_cast<std::uint32_t>(deg));
    const double keep = alias_prob_[col];
    if (keep >= 1.0) return targets_[col];  // no coin needed (always the case for equal weights)
    return uniform01(bits.engine()) < keep ? targets_[col] : targets_[begin + alias_[col]];
  }

 private:
  [[noreturn, gnu::cold, gnu::noinline]] static void dead_end(NodeId u) {
    throw ComputeError("random walk reached node " + std::to_string(u) + " which has no out-arcs");
  }

  // Vose's alias construction over the arcs [begin, end).
  void build_alias(std::size_t begin, std::size_t end) {
    const auto deg = end - begin;
    std::vector<double> scaled(deg);
    std::vector<std::uint32_t> small, large;
    for (std::size_t k = 0; k < deg; ++k) {
      scaled[k] = prob_[begin + k] * static_cast<double>(deg);
      alias_[begin + k] = static_cast<std::uint32_t>(k);
      (scaled[k] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(k));
    }
    while (!small.empty() && !large.empty()) {
      auto s = small.back();
      small.pop_back();
      auto g = large.back();
      alias_prob_[begin + s] = scaled[s];
      alias_[begin + s] = g;
      scaled[g] = (scaled[g] + scaled[s]) - 1.0;
      if (scaled[g] < 1.0) {
        large.pop_back();
        small.push_back(g);
      }
    }
    for (auto k : large) alias_prob_[begin + k] = 1.0;
    for (auto k : small) alias_prob_[begin + k] = 1.0;  // rounding leftovers
  }

  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<double> prob_;
  std::vector<double> alias_prob_;
  std::vector<std::uint32_t> alias_;
  std::vector<NodeId> startable_;
  std::size_t in_degree_max_ = 0;
  std::size_t out_degree_max_ = 0;
};

inline RandomWalkGraph build_random_walk_graph(const Graph& g) { return RandomWalkGraph(g); }

// Walk of `length` edges (length + 1 nodes) starting at `start`.
inline std::vector<NodeId> sample_walk(const RandomWalkGraph& rwg, NodeId start, int length,
                                       Rng& rng) {
  if (start >= rwg.node_count()) throw ValidationError("start node out of range");
  if (!rwg.startable(start))
    throw ComputeError("node " + std::to_string(start) + " has no out-arcs and cannot start a walk");
  std::vector<NodeId> walk(static_cast<std::size_t>(length) + 1);
  walk[0] = start;
  HalfWords bits(rng);
  for (int i = 1; i <= length; ++i) walk[i] = rwg.step(walk[i - 1], bits);
  return walk;
}

// States of an anonymous walk: first-occurrence ranks, starting at 1.
struct AnonymousWalk {
  std::vector<int> states;

  int length() const noexcept { return static_cast<int>(states.size()) - 1; }
  auto operator<=>(const AnonymousWalk&) const = default;

  friend std::ostream& operator<<(std::ostream& os, const AnonymousWalk& a) {
    for (std::size_t i = 0; i < a.states.size(); ++i) os << (i ? " " : "") << a.states[i];
    return os;
  }
};

template <typename T>
AnonymousWalk anonymize(std::span<const T> walk) {
  AnonymousWalk out;
  out.states.reserve(walk.size());
  std::unordered_map<T, int> first_seen;
  for (const auto& v : walk) {
    auto [it, inserted] = first_seen.try_emplace(v, static_cast<int>(first_seen.size()) + 1);
    out.states.push_back(it->second);
  }
  return out;
}

template <typename T>
AnonymousWalk anonymize(const std::vector<T>& walk) {
  return anonymize(std::span<const T>(walk));
}

inline constexpr int kMaxWalkLength = 16;

// All anonymous walks with `length` edges, without consecutive repeated
// states, in lexicographic order. Walks are ranked and unranked
// combinatorially, so the table never materializes the vocabulary.
class WalkVocabulary {
 public:
  using Index = std::uint64_t;

  explicit WalkVocabulary(int length) : length_(length) {
    if (length < 1 || length > kMaxWalkLength)
      throw ValidationError(
          "walk length must be in 1.." + std::to_string(kMaxWalkLength) +
          "; the number of anonymous walks and the cost of exact embeddings grow "
          "super-exponentially with length (O(n l (d_in d_out)^(l/2)))");
    // completions_[r][m]: suffixes of r more states after a prefix whose
    // maximum state is m. Independent of the last state: m - 1 old states
    // are allowed (all but the last) plus one new state.
    stride_ = static_cast<std::size_t>(length) + 3;
    completions_.assign((static_cast<std::size_t>(length) + 1) * stride_, 0);
    for (std::size_t m = 0; m < stride_; ++m) completions_[m] = 1;
    for (int r = 1; r <= length; ++r)
      for (int m = 1; m <= length + 1; ++m)
        at(r, m) = static_cast<Index>(m - 1) * at(r - 1, m) + at(r - 1, m + 1);
    size_ = at(length, 1);
  }

  int length() const noexcept { return length_; }
  Index size() const noexcept { return size_; }

  // Suffix count after a prefix; `remaining` more states, current max `max_state`.
  Index completions(int remaining, int max_state) const noexcept {
    return at(remaining, max_state);
  }

  bool contains(const AnonymousWalk& a) const noexcept {
    if (a.length() != length_ || a.states[0] != 1) return false;
    int max_state = 1;
    for (int i = 1; i <= length_; ++i) {
      const int v = a.states[i];
      if (v < 1 || v > max_state + 1 || v == a.states[i - 1]) return false;
      max_state = std::max(max_state, v);
    }
    return true;
  }

  Index index(const AnonymousWalk& a) const {
    if (!contains(a)) throw ValidationError("walk is not in the vocabulary of length " +
                                            std::to_string(length_));
    Index rank = 0;
    int max_state = 1;
    for (int i = 1; i <= length_; ++i) rank += step_rank(length_ - i, max_state, a.states[i - 1], a.states[i]);
    return rank;
  }

  // Rank of states[0..length()] without validation; `states` may be longer
  // (the prefix is ranked).
  Index index_unchecked(std::span<const int> states) const noexcept {
    Index rank = 0;
    int max_state = 1;
    for (int i = 1; i <= length_; ++i) rank += step_rank(length_ - i, max_state, states[i - 1], states[i]);
    return rank;
  }

  AnonymousWalk walk(Index index) const {
    if (index >= size_) throw ValidationError("walk index out of range");
    AnonymousWalk a;
    a.states.reserve(static_cast<std::size_t>(length_) + 1);
    a.states.push_back(1);
    int max_state = 1;
    for (int i = 1; i <= length_; ++i) {
      const int last = a.states.back();
      const Index block = at(length_ - i, max_state);
      int chosen = 0;
      for (int v = 1; v <= max_state; ++v) {
        if (v == last) continue;
        if (index < block) {
          chosen = v;
          break;
        }
        index -= block;
      }
      if (chosen == 0) chosen = max_state + 1;
      a.states.push_back(chosen);
      max_state = std::max(max_state, chosen);
    }
    return a;
  }

  // Rank contribution of choosing `next` after `last` with `remaining` states
  // still to come; updates max_state.
  Index step_rank(int remaining, int& max_state, int last, int next) const noexcept {
    const Index block = at(remaining, max_state);
    if (next == max_state + 1) {
      ++max_state;
      return static_cast<Index>(max_state - 2) * block;
    }
    return static_cast<Index>(next - 1 - (last < next ? 1 : 0)) * block;
  }

  std::vector<AnonymousWalk> walks() const {
    std::vector<AnonymousWalk> out;
    out.reserve(static_cast<std::size_t>(size_));
    for (Index i = 0; i < size_; ++i) out.push_back(walk(i));
    return out;
  }

  // One walk per line, states separated by spaces; line k holds walk k.
  void dump(std::ostream& os) const {
    for (Index i = 0; i < size_; ++i) os << walk(i) << '\n';
  }

 private:
  int length_;
  Index size_ = 0;
  Index& at(int r, int m) noexcept { return completions_[static_cast<std::size_t>(r) * stride_ + static_cast<std::size_t>(m)]; }
  Index at(int r, int m) const noexcept {
    return completions_[static_cast<std::size_t>(r) * stride_ + static_cast<std::size_t>(m)];
  }

  std::size_t stride_ = 0;
  std::vector<Index> completions_;  // (length + 1) x stride_
};

inline WalkVocabulary enumerate_vocabulary(int length) { return WalkVocabulary(length); }

// Samples a walk from `start` and returns the vocabulary index of its
// anonymous walk, anonymizing and ranking as the walk unfolds.
inline WalkVocabulary::Index sample_walk_index(const RandomWalkGraph& rwg,
                                               const WalkVocabulary& vocab, NodeId start,
                                               HalfWords& bits) {
  const int length = vocab.length();
  std::array<NodeId, kMaxWalkLength + 1> seen{};
  seen[0] = start;
  int max_state = 1;
  int last = 1;
  NodeId node = start;
  WalkVocabulary::Index rank = 0;
  for (int i = 1; i <= length; ++i) {
    node = rwg.step(node, bits);
    int state = max_state + 1;
    for (int s = 0; s < max_state; ++s)
      if (seen[s] == node) {
        state = s + 1;
        break;
      }
    if (state == max_state + 1) seen[max_state] = node;
    rank += vocab.step_rank(length - i, max_state, last, state);
    last = state;
  }
  return rank;
}

// Samples a walk of `length` edges from `start` and writes its anonymous
// states to states[0..length]. Consumes `bits` exactly as sample_walk_index.
inline void sample_walk_states(const RandomWalkGraph& rwg, NodeId start, int length, HalfWords& bits,
                               std::span<int> states) {
  std::array<NodeId, kMaxWalkLength + 1> seen{};
  seen[0] = start;
  states[0] = 1;
  int max_state = 1;
  NodeId node = start;
  for (int i = 1; i <= length; ++i) {
    node = rwg.step(node, bits);
    int state = max_state + 1;
    for (int s = 0; s < max_state; ++s)
      if (seen[s] == node) {
        state = s + 1;
        break;
      }
    if (state == max_state + 1) seen[max_state++] = node;
    states[i] = state;
  }
}

inline WalkVocabulary::Index sample_walk_index(const RandomWalkGraph& rwg,
                                               const WalkVocabulary& vocab, NodeId start,
                                               Rng& rng) {
  HalfWords bits(rng);
  return sample_walk_index(rwg, vocab, start, bits);
}

}  // namespace awe
