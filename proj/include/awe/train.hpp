#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "awe/common.hpp"
#include "awe/walk.hpp"

namespace awe {

using WalkId = WalkVocabulary::Index;

// Co-occurring anonymous walks of one graph: for every startable node, the
// vocabulary ids of `walks_per_node` walks sampled from it, in sampling order.
struct Corpus {
  int length = 0;
  std::size_t walks_per_node = 0;
  std::vector<std::vector<WalkId>> sequences;
};

inline Corpus build_corpus(const RandomWalkGraph& rwg, const WalkVocabulary& vocab,
                           std::size_t walks_per_node, std::uint64_t seed,
                           std::uint64_t graph_id = 0, unsigned threads = 1) {
  if (walks_per_node < 1) throw ValidationError("walks per node must be at least 1");
  const auto& starts = rwg.startable_nodes();
  Corpus corpus;
  corpus.length = vocab.length();
  corpus.walks_per_node = walks_per_node;
  corpus.sequences.resize(starts.size());
  parallel_for(starts.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, graph_id, starts[i]));
    HalfWords bits(rng);
    auto& seq = corpus.sequences[i];
    seq.resize(walks_per_node);
    for (auto& id : seq) id = sample_walk_index(rwg, vocab, starts[i], bits);
  });
  return corpus;
}

enum class CandidateSampler { Uniform, LogUniform };

// Walk matrix W (vocab x walk_dim), graph vectors D (graphs x graph_dim),
// output weights U (vocab x (walk_dim + graph_dim)) and biases b (vocab).
// All matrices are row-major.
struct ModelParams {
  std::uint64_t vocab_size = 0;
  int length = 0;
  int walk_dim = 0;
  int graph_dim = 0;
  std::size_t graph_count = 0;
  std::vector<double> W, D, U, b;

  int hidden_dim() const noexcept { return walk_dim + graph_dim; }
  std::span<const double> walk_row(WalkId i) const {
    return {W.data() + i * static_cast<std::size_t>(walk_dim), static_cast<std::size_t>(walk_dim)};
  }
  std::span<const double> graph_row(std::size_t g) const {
    return {D.data() + g * static_cast<std::size_t>(graph_dim), static_cast<std::size_t>(graph_dim)};
  }
  std::span<const double> output_row(WalkId i) const {
    return {U.data() + i * static_cast<std::size_t>(hidden_dim()), static_cast<std::size_t>(hidden_dim())};
  }
};

struct TrainConfig {
  int window = 4;  // context half-width: 2*window walks around the target
  int epochs = 100;
  int iterations = 100;  // batch steps per epoch
  std::size_t batch_size = 100;
  double learning_rate = 0.1;
  double final_learning_rate = 1e-4;
  std::uint64_t candidates = 5;
  CandidateSampler sampler = CandidateSampler::Uniform;
  bool full_softmax = false;
  int walk_dim = 128;
  int graph_dim = 128;
  std::uint64_t seed = 0;

  void validate(std::uint64_t vocab_size) const {
    if (window < 1) throw ValidationError("window must be at least 1");
    if (batch_size < 1) throw ValidationError("batch size must be at least 1");
    if (epochs < 0 || iterations < 0) throw ValidationError("epochs and iterations must be non-negative");
    if (walk_dim < 1 || graph_dim < 1) throw ValidationError("embedding dimensions must be positive");
    if (!full_softmax && (candidates < 1 || candidates > vocab_size - 1))
      throw ValidationError("candidate count must be in 1..vocabulary size - 1 (" +
                            std::to_string(vocab_size - 1) + ")");
  }
};

// One training example: predict `target` from 2*window context walks and the
// graph vector of `graph`.
struct Example {
  std::size_t graph = 0;
  std::vector<WalkId> context;
  WalkId target = 0;
};

// Gradient rows keyed by parameter row id, in first-touch order.
class RowGradients {
 public:
  explicit RowGradients(std::size_t dim = 0) : dim_(dim) {}

  std::span<double> row(std::uint64_t id) {
    auto [it, inserted] = slot_.try_emplace(id, ids_.size());
    if (inserted) {
      ids_.push_back(id);
      values_.resize(values_.size() + dim_, 0.0);
    }
    return {values_.data() + it->second * dim_, dim_};
  }

  std::span<const double> row_at(std::size_t k) const { return {values_.data() + k * dim_, dim_}; }
  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  bool contains(std::uint64_t id) const { return slot_.count(id) != 0; }
  std::span<const double> find(std::uint64_t id) const {
    auto it = slot_.find(id);
    if (it == slot_.end()) return {};
    return row_at(it->second);
  }
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
  std::vector<std::uint64_t> ids_;
  std::vector<double> values_;
  std::unordered_map<std::uint64_t, std::size_t> slot_;
};

struct Gradients {
  double loss = 0.0;  // mean over the batch
  RowGradients W, D, U, b;
};

namespace detail {

inline double log_uniform_probability(WalkId c, std::uint64_t vocab_size) {
  return (std::log(static_cast<double>(c) + 2.0) - std::log(static_cast<double>(c) + 1.0)) /
         std::log(static_cast<double>(vocab_size) + 1.0);
}

// k distinct classes other than `target`.
inline std::vector<WalkId> draw_candidates(WalkId target, std::uint64_t vocab_size, std::uint64_t k,
                                           CandidateSampler sampler, Rng& rng) {
  std::vector<WalkId> out;
  out.reserve(k);
  if (sampler == CandidateSampler::Uniform && 2 * k >= vocab_size - 1) {
    std::vector<WalkId> pool;
    pool.reserve(vocab_size - 1);
    for (WalkId c = 0; c < vocab_size; ++c)
      if (c != target) pool.push_back(c);
    for (std::uint64_t j = 0; j < k; ++j) {
      auto pick = j + uniform_below(rng, pool.size() - j);
      std::swap(pool[j], pool[pick]);
      out.push_back(pool[j]);
    }
    return out;
  }
  const double log_range = std::log(static_cast<double>(vocab_size) + 1.0);
  while (out.size() < k) {
    WalkId c;
    if (sampler == CandidateSampler::Uniform) {
      c = uniform_below(rng, vocab_size);
    } else {
      c = static_cast<WalkId>(std::exp(uniform01(rng) * log_range)) - 1;
      c = std::min<WalkId>(c, vocab_size - 1);
    }
    if (c == target || std::find(out.begin(), out.end(), c) != out.end()) continue;
    out.push_back(c);
  }
  return out;
}

struct Tensors {
  const double* W;
  const double* D;
  const double* U;
  const double* b;
  std::uint64_t vocab_size;
  int walk_dim;
  int graph_dim;
};

inline void require_finite(std::span<const double> row, const char* tensor, std::uint64_t id) {
  for (double v : row)
    if (!std::isfinite(v))
      throw ComputeError(std::string("non-finite value in parameter tensor ") + tensor + " row " +
                         std::to_string(id));
}

// Mean softmax cross-entropy over the batch and its exact gradients. With
// `sampled` set, each example scores its target plus `candidates` sampled
// classes, logits shifted by -log(k Q(class)).
inline Gradients forward_backward(const Tensors& t, std::span<const Example> batch, bool sampled,
                                  std::uint64_t k, CandidateSampler sampler, Rng* rng) {
  const auto da = static_cast<std::size_t>(t.walk_dim);
  const auto dg = static_cast<std::size_t>(t.graph_dim);
  const std::size_t dh = da + dg;
  Gradients grads{0.0, RowGradients(da), RowGradients(dg), RowGradients(dh), RowGradients(1)};
  if (batch.empty()) return grads;
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<double> h(dh), dhidden(dh);
  std::vector<WalkId> classes;
  std::vector<double> logits;
  for (const auto& ex : batch) {
    if (ex.context.empty()) throw ValidationError("example without context walks");
    if (ex.target >= t.vocab_size) throw ValidationError("target id outside the vocabulary");
    std::fill(h.begin(), h.end(), 0.0);
    for (auto c : ex.context) {
      if (c >= t.vocab_size) throw ValidationError("context id outside the vocabulary");
      const double* w = t.W + c * da;
      require_finite({w, da}, "W", c);
      for (std::size_t j = 0; j < da; ++j) h[j] += w[j];
    }
    const double inv_context = 1.0 / static_cast<double>(ex.context.size());
    for (std::size_t j = 0; j < da; ++j) h[j] *= inv_context;
    const double* d = t.D + ex.graph * dg;
    require_finite({d, dg}, "D", ex.graph);
    std::copy(d, d + dg, h.begin() + static_cast<std::ptrdiff_t>(da));

    classes.clear();
    classes.push_back(ex.target);
    if (sampled) {
      auto cand = draw_candidates(ex.target, t.vocab_size, k, sampler, *rng);
      classes.insert(classes.end(), cand.begin(), cand.end());
    } else {
      for (WalkId c = 0; c < t.vocab_size; ++c)
        if (c != ex.target) classes.push_back(c);
    }

    logits.resize(classes.size());
    double max_logit = -INFINITY;
    for (std::size_t j = 0; j < classes.size(); ++j) {
      const WalkId c = classes[j];
      const double* u = t.U + c * dh;
      require_finite({u, dh}, "U", c);
      require_finite({t.b + c, 1}, "b", c);
      double z = t.b[c];
      for (std::size_t q = 0; q < dh; ++q) z += u[q] * h[q];
      if (sampled) {
        const double prob = sampler == CandidateSampler::Uniform
                                ? 1.0 / static_cast<double>(t.vocab_size)
                                : log_uniform_probability(c, t.vocab_size);
        z -= std::log(static_cast<double>(k) * prob);
      }
      logits[j] = z;
      max_logit = std::max(max_logit, z);
    }
    double total = 0.0;
    for (double z : logits) total += std::exp(z - max_logit);
    const double log_norm = max_logit + std::log(total);
    grads.loss += (log_norm - logits[0]) * scale;

    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t j = 0; j < classes.size(); ++j) {
      const WalkId c = classes[j];
      const double dz = (std::exp(logits[j] - log_norm) - (j == 0 ? 1.0 : 0.0)) * scale;
      const double* u = t.U + c * dh;
      auto gu = grads.U.row(c);
      for (std::size_t q = 0; q < dh; ++q) {
        gu[q] += dz * h[q];
        dhidden[q] += dz * u[q];
      }
      grads.b.row(c)[0] += dz;
    }
    for (auto c : ex.context) {
      auto gw = grads.W.row(c);
      for (std::size_t j = 0; j < da; ++j) gw[j] += dhidden[j] * inv_context;
    }
    auto gd = grads.D.row(ex.graph);
    for (std::size_t j = 0; j < dg; ++j) gd[j] += dhidden[da + j];
  }
  return grads;
}

inline void apply_rows(std::vector<double>& param, const RowGradients& g, double lr) {
  const std::size_t dim = g.dim();
  for (std::size_t k = 0; k < g.ids().size(); ++k) {
    double* p = param.data() + g.ids()[k] * dim;
    auto row = g.row_at(k);
    for (std::size_t j = 0; j < dim; ++j) p[j] -= lr * row[j];
  }
}

inline void init_uniform(std::span<double> out, double half_width, Rng& rng) {
  for (auto& v : out) v = (2.0 * uniform01(rng) - 1.0) * half_width;
}

inline void init_graph_row(std::span<double> row, std::uint64_t seed, std::uint64_t graph_key) {
  Rng rng(derive_seed(seed, 2, graph_key));
  init_uniform(row, 0.5 / static_cast<double>(row.size()), rng);
}

// Uniform draw over all (graph, sequence, position) windows that have a full
// context on both sides.
class WindowSampler {
 public:
  WindowSampler(std::span<const Corpus> corpora, int window) : corpora_(corpora), window_(window) {
    std::uint64_t total = 0;
    for (const auto& c : corpora) {
      const auto per_seq = positions(c);
      total += per_seq * c.sequences.size();
      prefix_.push_back(total);
    }
    if (total == 0)
      throw ValidationError("no training windows: every corpus needs walks_per_node >= 2*window+1 "
                            "and at least one startable node");
  }

  Example draw(Rng& rng) const {
    auto r = uniform_below(rng, prefix_.back());
    const auto g = static_cast<std::size_t>(std::upper_bound(prefix_.begin(), prefix_.end(), r) - prefix_.begin());
    if (g > 0) r -= prefix_[g - 1];
    const auto& corpus = corpora_[g];
    const auto per_seq = positions(corpus);
    const auto& seq = corpus.sequences[r / per_seq];
    const auto t = static_cast<std::size_t>(window_) + r % per_seq;
    Example ex;
    ex.graph = g;
    ex.target = seq[t];
    ex.context.reserve(2 * static_cast<std::size_t>(window_));
    for (auto j = t - static_cast<std::size_t>(window_); j <= t + static_cast<std::size_t>(window_); ++j)
      if (j != t) ex.context.push_back(seq[j]);
    return ex;
  }

 private:
  std::uint64_t positions(const Corpus& c) const {
    const auto span = 2 * static_cast<std::uint64_t>(window_) + 1;
    return c.walks_per_node >= span ? c.walks_per_node - span + 1 : 0;
  }

  std::span<const Corpus> corpora_;
  int window_;
  std::vector<std::uint64_t> prefix_;
};

inline double learning_rate_at(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total) {
  if (total <= 1) return cfg.learning_rate;
  const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
  return cfg.learning_rate + (cfg.final_learning_rate - cfg.learning_rate) * frac;
}

}  // namespace detail

inline Gradients loss_and_gradients(const ModelParams& params, std::span<const Example> batch,
                                    bool full_softmax, std::uint64_t candidates = 0,
                                    CandidateSampler sampler = CandidateSampler::Uniform,
                                    Rng* rng = nullptr) {
  for (const auto& ex : batch)
    if (ex.graph >= params.graph_count) throw ValidationError("graph id outside the model");
  if (!full_softmax && (rng == nullptr || candidates < 1 || candidates > params.vocab_size - 1))
    throw ValidationError("sampled softmax needs a generator and 1..vocab-1 candidates");
  detail::Tensors t{params.W.data(), params.D.data(), params.U.data(), params.b.data(),
                    params.vocab_size, params.walk_dim, params.graph_dim};
  return detail::forward_backward(t, batch, !full_softmax, candidates, sampler, rng);
}

// W and D uniform in +-0.5/dim, U and b zero.
inline ModelParams init_params(const WalkVocabulary& vocab, std::size_t graph_count, const TrainConfig& cfg) {
  ModelParams p;
  p.vocab_size = vocab.size();
  p.length = vocab.length();
  p.walk_dim = cfg.walk_dim;
  p.graph_dim = cfg.graph_dim;
  p.graph_count = graph_count;
  const auto da = static_cast<std::size_t>(cfg.walk_dim);
  const auto dg = static_cast<std::size_t>(cfg.graph_dim);
  p.W.resize(p.vocab_size * da);
  p.D.resize(graph_count * dg);
  p.U.assign(p.vocab_size * (da + dg), 0.0);
  p.b.assign(p.vocab_size, 0.0);
  Rng rng(derive_seed(cfg.seed, 1));
  detail::init_uniform(p.W, 0.5 / static_cast<double>(da), rng);
  for (std::size_t g = 0; g < graph_count; ++g)
    detail::init_graph_row({p.D.data() + g * dg, dg}, cfg.seed, g);
  return p;
}

struct TrainReport {
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

namespace detail {

// Plain SGD over sampled windows. W, U and b move only when update_shared.
inline TrainReport run_sgd(const Tensors& shared, ModelParams* owner, std::vector<double>& graph_vectors,
                           std::span<const Corpus> corpora, const TrainConfig& cfg, Rng& rng,
                           bool update_shared) {
  TrainReport report;
  if (cfg.epochs == 0 || cfg.iterations == 0) return report;
  WindowSampler windows(corpora, cfg.window);
  const auto total = static_cast<std::uint64_t>(cfg.epochs) * static_cast<std::uint64_t>(cfg.iterations);
  std::vector<Example> batch(cfg.batch_size);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (int it = 0; it < cfg.iterations; ++it, ++step) {
      for (auto& ex : batch) ex = windows.draw(rng);
      Tensors t = shared;
      t.D = graph_vectors.data();
      if (owner) {
        t.W = owner->W.data();
        t.U = owner->U.data();
        t.b = owner->b.data();
      }
      auto g = forward_backward(t, batch, !cfg.full_softmax, cfg.candidates, cfg.sampler, &rng);
      if (!std::isfinite(g.loss))
        throw ComputeError("training diverged at epoch " + std::to_string(epoch) + ", iteration " +
                           std::to_string(it) + " (loss is not finite)");
      sum += g.loss;
      const double lr = learning_rate_at(cfg, step, total);
      apply_rows(graph_vectors, g.D, lr);
      if (update_shared && owner) {
        apply_rows(owner->W, g.W, lr);
        apply_rows(owner->U, g.U, lr);
        apply_rows(owner->b, g.b, lr);
      }
    }
    report.epoch_losses.push_back(sum / cfg.iterations);
  }
  return report;
}

}  // namespace detail

// Joint training over all corpora (corpus g feeds graph vector g).
inline ModelParams train(std::span<const Corpus> corpora, const WalkVocabulary& vocab,
                         const TrainConfig& cfg, TrainReport* report = nullptr) {
  if (corpora.empty()) throw ValidationError("training needs at least one corpus");
  for (const auto& c : corpora)
    if (c.length != vocab.length()) throw ValidationError("corpus walk length does not match the vocabulary");
  cfg.validate(vocab.size());
  ModelParams params = init_params(vocab, corpora.size(), cfg);
  Rng rng(derive_seed(cfg.seed, 3));
  detail::Tensors t{params.W.data(), params.D.data(), params.U.data(), params.b.data(),
                    params.vocab_size, params.walk_dim, params.graph_dim};
  auto r = detail::run_sgd(t, &params, params.D, corpora, cfg, rng, true);
  if (report) *report = std::move(r);
  return params;
}

// Learns a vector for a new graph with W, U and b frozen. `graph_key` selects
// the initialization stream; passing a training graph's index reproduces that
// graph's initial vector.
inline std::vector<double> infer_embedding(const ModelParams& params, const Corpus& corpus,
                                           const TrainConfig& cfg, std::uint64_t graph_key = 0,
                                           TrainReport* report = nullptr) {
  if (corpus.length != params.length) throw ValidationError("corpus walk length does not match the model");
  if (cfg.graph_dim != params.graph_dim || cfg.walk_dim != params.walk_dim)
    throw ValidationError("config dimensions do not match the model");
  cfg.validate(params.vocab_size);
  std::vector<double> d(static_cast<std::size_t>(params.graph_dim));
  detail::init_graph_row(d, cfg.seed, graph_key);
  Rng rng(derive_seed(cfg.seed, 4, graph_key));
  detail::Tensors t{params.W.data(), nullptr, params.U.data(), params.b.data(),
                    params.vocab_size, params.walk_dim, params.graph_dim};
  auto r = detail::run_sgd(t, nullptr, d, std::span<const Corpus>(&corpus, 1), cfg, rng, false);
  if (report) *report = std::move(r);
  return d;
}

// Binary checkpoint: magic, version, dims, then W, D, U, b as little-endian doubles.
inline constexpr char kCheckpointMagic[8] = {'A', 'W', 'E', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + file.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put(kCheckpointVersion);
  put(p.vocab_size);
  put(static_cast<std::int32_t>(p.length));
  put(static_cast<std::int32_t>(p.walk_dim));
  put(static_cast<std::int32_t>(p.graph_dim));
  put(static_cast<std::uint64_t>(p.graph_count));
  for (const auto* t : {&p.W, &p.D, &p.U, &p.b})
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
}

inline ModelParams load_checkpoint(const std::filesystem::path& file, const WalkVocabulary& vocab) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw ValidationError(file.string() + " is not a model checkpoint");
  auto get = [&](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof v); };
  std::uint32_t version = 0;
  get(version);
  if (version != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  ModelParams p;
  std::int32_t length = 0, da = 0, dg = 0;
  std::uint64_t graphs = 0;
  get(p.vocab_size);
  get(length);
  get(da);
  get(dg);
  get(graphs);
  if (!in || da < 1 || dg < 1) throw ValidationError("truncated checkpoint header");
  if (length != vocab.length() || p.vocab_size != vocab.size())
    throw ValidationError("checkpoint was trained on walks of length " + std::to_string(length) +
                          " (vocabulary " + std::to_string(p.vocab_size) + "), active vocabulary has length " +
                          std::to_string(vocab.length()));
  p.length = length;
  p.walk_dim = da;
  p.graph_dim = dg;
  p.graph_count = graphs;
  p.W.resize(p.vocab_size * static_cast<std::size_t>(da));
  p.D.resize(graphs * static_cast<std::size_t>(dg));
  p.U.resize(p.vocab_size * static_cast<std::size_t>(da + dg));
  p.b.resize(p.vocab_size);
  for (auto* t : {&p.W, &p.D, &p.U, &p.b})
    in.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!in) throw ValidationError("truncated checkpoint " + file.string());
  return p;
}

}  // namespace awe
