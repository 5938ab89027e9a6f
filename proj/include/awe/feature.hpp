#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "awe/common.hpp"
#include "awe/walk.hpp"

namespace awe {

enum class EmbeddingMode { Exact, Sampled };

inline std::string to_string(EmbeddingMode mode) {
  return mode == EmbeddingMode::Exact ? "exact" : "sampled";
}

// Distribution of anonymous walks of one length over a graph.
struct FeatureEmbedding {
  std::vector<double> values;  // one probability per vocabulary index
  int length = 0;
  EmbeddingMode mode = EmbeddingMode::Exact;
  std::uint64_t samples = 0;  // sampled mode only
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return values.size(); }
};

struct SamplingPlan {
  double epsilon = 0.1;
  double delta = 0.05;
  std::uint64_t samples = 1;
};

// Walks needed so the empirical distribution over `vocabulary_size`
// anonymous walks is within `epsilon` in L1 of the true one with
// probability at least 1 - delta.
inline std::uint64_t required_samples(double epsilon, double delta, std::uint64_t vocabulary_size) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must be in (0, 1)");
  if (vocabulary_size < 2) throw ValidationError("vocabulary size must be at least 2");
  const double eta = static_cast<double>(vocabulary_size);
  // ln(2^eta - 2) without forming 2^eta
  const double log_subsets = eta * std::log(2.0) + std::log1p(-std::exp2(1.0 - eta));
  return static_cast<std::uint64_t>(std::ceil(2.0 / (epsilon * epsilon) * (log_subsets - std::log(delta))));
}

inline SamplingPlan make_plan(double epsilon, double delta, std::uint64_t vocabulary_size) {
  return {epsilon, delta, required_samples(epsilon, delta, vocabulary_size)};
}

// Exact sum of positive doubles: a fixed-point accumulator whose result does
// not depend on the order of additions. Addends below 2^-1088 are truncated.
class ExactSum {
 public:
  void add(double x) noexcept {
    if (!(x > 0.0)) return;
    int exp = 0;
    const double frac = std::frexp(x, &exp);
    auto mantissa = static_cast<std::uint64_t>(std::ldexp(frac, 53));
    int pos = exp - 53 + kFractionBits;
    if (pos < 0) {
      if (pos <= -53) return;
      mantissa >>= -pos;
      pos = 0;
    }
    const auto limb = static_cast<std::size_t>(pos / 64);
    const auto shifted = static_cast<unsigned __int128>(mantissa) << (pos % 64);
    add_at(limb, static_cast<std::uint64_t>(shifted));
    add_at(limb + 1, static_cast<std::uint64_t>(shifted >> 64));
  }

  void add(const ExactSum& other) noexcept {
    for (std::size_t k = 0; k < kLimbs; ++k) add_at(k, other.limbs_[k]);
  }

  double value() const noexcept {
    double out = 0.0;
    std::size_t top = kLimbs;
    while (top > 0 && limbs_[top - 1] == 0) --top;
    const std::size_t stop = top > 3 ? top - 3 : 0;
    for (std::size_t k = top; k > stop; --k)
      out += std::ldexp(static_cast<double>(limbs_[k - 1]), static_cast<int>(64 * (k - 1)) - kFractionBits);
    return out;
  }

 private:
  static constexpr int kFractionBits = 1088;
  static constexpr std::size_t kLimbs = kFractionBits / 64 + 2;

  void add_at(std::size_t k, std::uint64_t v) noexcept {
    while (v != 0 && k < kLimbs) {
      const auto sum = static_cast<unsigned __int128>(limbs_[k]) + v;
      limbs_[k] = static_cast<std::uint64_t>(sum);
      v = static_cast<std::uint64_t>(sum >> 64);
      ++k;
    }
  }

  std::array<std::uint64_t, kLimbs> limbs_{};
};

// Upper bound on the number of walks the exact enumeration visits:
// n (d_in^max d_out^max)^(l/2).
inline double exact_walk_estimate(const RandomWalkGraph& rwg, int length) {
  const double n = static_cast<double>(rwg.node_count());
  const double base = static_cast<double>(rwg.max_in_degree()) * static_cast<double>(rwg.max_out_degree());
  if (base == 0.0) return 0.0;
  return n * std::pow(base, 0.5 * length);
}

inline constexpr double kDefaultExactBudget = 1e8;

namespace detail {

// Depth-first enumeration of all walks from one start node, accumulating the
// walk probability into the slot of its anonymous walk.
class ExactWalker {
 public:
  ExactWalker(const RandomWalkGraph& rwg, const WalkVocabulary& vocab)
      : rwg_(rwg), vocab_(vocab) {}

  void run(NodeId start, std::vector<ExactSum>& acc) {
    acc_ = &acc;
    seen_[0] = start;
    descend(start, 1, 1, 1, 0, 1.0);
  }

 private:
  void descend(NodeId node, int depth, int max_state, int last,
               WalkVocabulary::Index rank, double prob) {
    if (depth > vocab_.length()) {
      (*acc_)[rank].add(prob);
      return;
    }
    auto nbrs = rwg_.neighbors(node);
    auto probs = rwg_.probabilities(node);
    if (nbrs.empty())
      throw ComputeError("walk enumeration reached node " + std::to_string(node) +
                         " which has no out-arcs");
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const NodeId next = nbrs[k];
      int state = max_state + 1;
      for (int s = 0; s < max_state; ++s)
        if (seen_[s] == next) {
          state = s + 1;
          break;
        }
      int next_max = max_state;
      if (state == max_state + 1) seen_[max_state] = next;
      const auto next_rank = rank + vocab_.step_rank(vocab_.length() - depth, next_max, last, state);
      descend(next, depth + 1, next_max, state, next_rank, prob * probs[k]);
    }
  }

  const RandomWalkGraph& rwg_;
  const WalkVocabulary& vocab_;
  std::vector<ExactSum>* acc_ = nullptr;
  std::array<NodeId, kMaxWalkLength + 1> seen_{};
};

}  // namespace detail

// Probability of each anonymous walk under a uniformly chosen startable node
// followed by a random walk of vocab.length() steps.
inline FeatureEmbedding exact_embedding(const RandomWalkGraph& rwg, const WalkVocabulary& vocab,
                                        double budget = kDefaultExactBudget, unsigned threads = 1) {
  const double estimate = exact_walk_estimate(rwg, vocab.length());
  if (estimate > budget)
    throw ComputeError("exact embedding would enumerate up to " + std::to_string(estimate) +
                       " walks (budget " + std::to_string(budget) +
                       "); use sampled mode instead");
  const auto& starts = rwg.startable_nodes();
  const auto eta = static_cast<std::size_t>(vocab.size());
  FeatureEmbedding out;
  out.length = vocab.length();
  out.mode = EmbeddingMode::Exact;
  out.values.assign(eta, 0.0);
  if (starts.empty()) return out;

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(starts.size())));
  std::vector<std::vector<ExactSum>> partial(workers, std::vector<ExactSum>(eta));
  parallel_for(workers, workers, [&](std::size_t w) {
    detail::ExactWalker walker(rwg, vocab);
    for (std::size_t i = starts.size() * w / workers; i < starts.size() * (w + 1) / workers; ++i)
      walker.run(starts[i], partial[w]);
  });
  for (unsigned w = 1; w < workers; ++w)
    for (std::size_t i = 0; i < eta; ++i) partial[0][i].add(partial[w][i]);
  const double n = static_cast<double>(starts.size());
  for (std::size_t i = 0; i < eta; ++i) out.values[i] = partial[0][i].value() / n;
  return out;
}

inline constexpr std::uint64_t kSampleBatch = 1u << 16;

// Empirical distribution of m anonymous walks, each from a uniformly random
// startable node. Batch b of kSampleBatch walks draws from the stream
// derive_seed(seed, stream_id, b), so results do not depend on `threads`.
inline FeatureEmbedding sampled_embedding(const RandomWalkGraph& rwg, const WalkVocabulary& vocab,
                                          const SamplingPlan& plan, std::uint64_t seed,
                                          std::uint64_t stream_id = 0, unsigned threads = 1) {
  if (plan.samples < 1) throw ValidationError("sampling plan needs at least one walk");
  const auto& starts = rwg.startable_nodes();
  if (starts.empty()) throw ComputeError("graph has no node with an out-arc; cannot sample walks");
  const auto eta = static_cast<std::size_t>(vocab.size());
  const std::uint64_t batches = (plan.samples + kSampleBatch - 1) / kSampleBatch;
  const unsigned workers = static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, batches)));
  std::vector<std::vector<std::uint64_t>> counts(workers, std::vector<std::uint64_t>(eta, 0));
  parallel_for(workers, workers, [&](std::size_t w) {
    auto& local = counts[w];
    for (std::uint64_t b = batches * w / workers; b < batches * (w + 1) / workers; ++b) {
      Rng rng(derive_seed(seed, stream_id, b));
      HalfWords bits(rng);
      const std::uint64_t n = std::min(kSampleBatch, plan.samples - b * kSampleBatch);
      const auto node_count = static_cast<std::uint32_t>(starts.size());
      for (std::uint64_t j = 0; j < n; ++j) {
        const NodeId start = starts[bits.below(node_count)];
        ++local[sample_walk_index(rwg, vocab, start, bits)];
      }
    }
  });
  FeatureEmbedding out;
  out.length = vocab.length();
  out.mode = EmbeddingMode::Sampled;
  out.samples = plan.samples;
  out.seed = seed;
  out.values.assign(eta, 0.0);
  const double m = static_cast<double>(plan.samples);
  for (std::size_t i = 0; i < eta; ++i) {
    std::uint64_t c = 0;
    for (const auto& local : counts) c += local[i];
    out.values[i] = static_cast<double>(c) / m;
  }
  return out;
}

// Sampled embeddings for several walk lengths from one stream of walks. Walks
// are as long as the longest vocabulary; vocabulary i counts the prefixes of
// the first plans[i].samples walks. A prefix of a random walk is a random
// walk, so each result has the law of sampled_embedding at its own length, and
// a vocabulary that is longest and has the largest plan gets exactly the
// sampled_embedding result for the same seed and stream.
inline std::vector<FeatureEmbedding> sampled_embeddings(const RandomWalkGraph& rwg,
                                                        std::span<const WalkVocabulary> vocabs,
                                                        std::span<const SamplingPlan> plans, std::uint64_t seed,
                                                        std::uint64_t stream_id = 0, unsigned threads = 1) {
  if (vocabs.empty() || vocabs.size() != plans.size())
    throw ValidationError("need one sampling plan per vocabulary");
  const auto& starts = rwg.startable_nodes();
  if (starts.empty()) throw ComputeError("graph has no node with an out-arc; cannot sample walks");
  std::size_t longest = 0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < vocabs.size(); ++i) {
    if (plans[i].samples < 1) throw ValidationError("sampling plan needs at least one walk");
    if (vocabs[i].length() > vocabs[longest].length()) longest = i;
    total = std::max(total, plans[i].samples);
  }
  const int length = vocabs[longest].length();
  // Walks below this index need their prefixes ranked separately.
  std::uint64_t prefix_walks = 0;
  for (std::size_t i = 0; i < vocabs.size(); ++i)
    if (i != longest) prefix_walks = std::max(prefix_walks, plans[i].samples);
  prefix_walks = std::max(prefix_walks, total > plans[longest].samples ? total : 0);

  const std::uint64_t batches = (total + kSampleBatch - 1) / kSampleBatch;
  const unsigned workers = static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, batches)));
  std::vector<std::vector<std::vector<std::uint64_t>>> counts(workers);
  for (auto& per_worker : counts)
    for (const auto& v : vocabs) per_worker.emplace_back(static_cast<std::size_t>(v.size()), 0);
  parallel_for(workers, workers, [&](std::size_t w) {
    auto& local = counts[w];
    std::array<int, kMaxWalkLength + 1> states{};
    for (std::uint64_t b = batches * w / workers; b < batches * (w + 1) / workers; ++b) {
      Rng rng(derive_seed(seed, stream_id, b));
      HalfWords bits(rng);
      const std::uint64_t first = b * kSampleBatch;
      const std::uint64_t n = std::min(kSampleBatch, total - first);
      const auto node_count = static_cast<std::uint32_t>(starts.size());
      for (std::uint64_t j = first; j < first + n; ++j) {
        const NodeId start = starts[bits.below(node_count)];
        if (j >= prefix_walks) {
          ++local[longest][sample_walk_index(rwg, vocabs[longest], start, bits)];
          continue;
        }
        sample_walk_states(rwg, start, length, bits, states);
        for (std::size_t i = 0; i < vocabs.size(); ++i)
          if (j < plans[i].samples) ++local[i][vocabs[i].index_unchecked(states)];
      }
    }
  });
  std::vector<FeatureEmbedding> out(vocabs.size());
  for (std::size_t i = 0; i < vocabs.size(); ++i) {
    auto& e = out[i];
    e.length = vocabs[i].length();
    e.mode = EmbeddingMode::Sampled;
    e.samples = plans[i].samples;
    e.seed = seed;
    e.values.assign(static_cast<std::size_t>(vocabs[i].size()), 0.0);
    const double m = static_cast<double>(plans[i].samples);
    for (std::size_t k = 0; k < e.values.size(); ++k) {
      std::uint64_t c = 0;
      for (const auto& local : counts) c += local[i][k];
      e.values[k] = static_cast<double>(c) / m;
    }
  }
  return out;
}

inline double l1_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw ValidationError("L1 distance between embeddings of different vocabularies (" +
                          std::to_string(p.size()) + " vs " + std::to_string(q.size()) + ")");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return d;
}

inline double l1_distance(const FeatureEmbedding& p, const FeatureEmbedding& q) {
  if (p.length != q.length)
    throw ValidationError("L1 distance between embeddings of walk lengths " +
                          std::to_string(p.length) + " and " + std::to_string(q.length));
  return l1_distance(std::span<const double>(p.values), std::span<const double>(q.values));
}

}  // namespace awe
