#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "awe/common.hpp"
#include "awe/graph.hpp"
#include "awe/kernel.hpp"
#include "awe/svm.hpp"
#include "awe/train.hpp"
#include "awe/walk.hpp"

namespace awe {

// One embedding of the whole collection (e.g. feature-based at one walk
// length), kept as its pairwise inner products.
struct EmbeddingVariant {
  std::string name;
  DenseMatrix inner;
};

inline EmbeddingVariant make_variant(std::string name, std::span<const SparseVector> vectors, unsigned threads = 1) {
  return {std::move(name), inner_products(vectors, threads)};
}

inline EmbeddingVariant make_variant(std::string name, std::span<const std::vector<double>> vectors,
                                     unsigned threads = 1) {
  std::vector<SparseVector> sparse;
  sparse.reserve(vectors.size());
  for (const auto& v : vectors) sparse.push_back(SparseVector::from_dense(v));
  return make_variant(std::move(name), sparse, threads);
}

struct EvalConfig {
  int folds = 10;
  int repeats = 10;
  std::vector<double> c_grid{0.001, 0.01, 0.1, 1, 10};
  std::vector<KernelSpec> kernels{KernelSpec::rbf(1e-5), KernelSpec::rbf(1e-4), KernelSpec::rbf(1e-3),
                                  KernelSpec::rbf(1e-2), KernelSpec::rbf(1e-1), KernelSpec::rbf(1),
                                  KernelSpec::rbf(10)};
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct FoldRecord {
  int repeat = 0;
  int fold = 0;
  std::size_t test_size = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::string variant;
  std::string kernel;
  double C = 0.0;
};

struct EvalReport {
  std::vector<FoldRecord> folds;
  double mean = 0.0;
  double std = 0.0;  // population std over all fold accuracies
  double seconds = 0.0;
};

// Stratified assignment: members of each class are shuffled and dealt to
// folds round-robin, continuing the rotation across classes.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, Rng& rng) {
  const int classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::vector<int> assignment(labels.size(), -1);
  std::size_t next = 0;
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    for (auto i : m) assignment[i] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
  }
  return assignment;
}

namespace detail {

inline DenseMatrix submatrix(const DenseMatrix& m, const std::vector<std::size_t>& rows,
                             const std::vector<std::size_t>& cols) {
  DenseMatrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

inline std::size_t count_correct(const DenseMatrix& kernel, const std::vector<int>& labels,
                                 const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                                 double C) {
  std::vector<int> y;
  y.reserve(train.size());
  for (auto i : train) y.push_back(labels[i]);
  auto model = svm_train(submatrix(kernel, train, train), y, C);
  auto predicted = svm_predict(model, submatrix(kernel, test, train));
  std::size_t correct = 0;
  for (std::size_t t = 0; t < test.size(); ++t) correct += predicted[t] == labels[test[t]];
  return correct;
}

}  // namespace detail

// Repeated stratified k-fold cross-validation. For each test fold, the next
// fold serves as validation for choosing (variant, kernel, C) with the rest
// for training; the chosen setting is retrained on all non-test folds.
inline EvalReport cross_validate(const std::vector<int>& labels, std::span<const EmbeddingVariant> variants,
                                 const EvalConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.folds < 3) throw ValidationError("cross-validation needs at least 3 folds (one test, one validation)");
  if (cfg.repeats < 1) throw ValidationError("repeats must be at least 1");
  if (variants.empty() || cfg.kernels.empty() || cfg.c_grid.empty())
    throw ValidationError("embedding, kernel and C grids must be non-empty");
  for (const auto& v : variants)
    if (v.inner.rows != labels.size()) throw ValidationError("embedding variant " + v.name + " does not match labels");
  const int classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (classes < 2) throw ValidationError("cross-validation needs at least two classes");
  std::vector<std::size_t> class_size(static_cast<std::size_t>(classes), 0);
  for (int l : labels) ++class_size[static_cast<std::size_t>(l)];
  for (int c = 0; c < classes; ++c)
    if (class_size[static_cast<std::size_t>(c)] < static_cast<std::size_t>(cfg.folds))
      throw ValidationError("class " + std::to_string(c) + " has " + std::to_string(class_size[static_cast<std::size_t>(c)]) +
                            " graphs, fewer than " + std::to_string(cfg.folds) + " folds; use fewer folds");

  std::vector<std::vector<int>> assignments;
  for (int r = 0; r < cfg.repeats; ++r) {
    Rng rng(derive_seed(cfg.seed, 10, static_cast<std::uint64_t>(r)));
    assignments.push_back(stratified_folds(labels, cfg.folds, rng));
  }

  // Full Gram matrix per (variant, kernel); folds index into it.
  std::vector<DenseMatrix> grams(variants.size() * cfg.kernels.size());
  parallel_for(grams.size(), cfg.threads, [&](std::size_t k) {
    grams[k] = gram_from_inner(variants[k / cfg.kernels.size()].inner, cfg.kernels[k % cfg.kernels.size()]).values;
  });
  auto kernel_of = [&](std::size_t vi, std::size_t ki) -> const DenseMatrix& {
    return grams[vi * cfg.kernels.size() + ki];
  };

  EvalReport report;
  report.folds.resize(static_cast<std::size_t>(cfg.repeats * cfg.folds));
  parallel_for(report.folds.size(), cfg.threads, [&](std::size_t task) {
    const int r = static_cast<int>(task) / cfg.folds;
    const int f = static_cast<int>(task) % cfg.folds;
    const int v = (f + 1) % cfg.folds;
    const auto& fold_of = assignments[static_cast<std::size_t>(r)];
    std::vector<std::size_t> test, validation, inner_train, train;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold_of[i] == f) {
        test.push_back(i);
        continue;
      }
      train.push_back(i);
      (fold_of[i] == v ? validation : inner_train).push_back(i);
    }
    FoldRecord rec;
    rec.repeat = r;
    rec.fold = f;
    rec.test_size = test.size();
    std::size_t best_variant = 0, best_kernel = 0;
    double best_c = cfg.c_grid.front();
    std::size_t best_correct = 0;
    bool first = true;
    for (std::size_t vi = 0; vi < variants.size(); ++vi)
      for (std::size_t ki = 0; ki < cfg.kernels.size(); ++ki)
        for (double C : cfg.c_grid) {
          auto correct = detail::count_correct(kernel_of(vi, ki), labels, inner_train, validation, C);
          if (first || correct > best_correct) {
            first = false;
            best_correct = correct;
            best_variant = vi;
            best_kernel = ki;
            best_c = C;
          }
        }
    rec.validation_accuracy = static_cast<double>(best_correct) / static_cast<double>(validation.size());
    rec.variant = variants[best_variant].name;
    rec.kernel = cfg.kernels[best_kernel].to_string();
    rec.C = best_c;
    rec.correct = detail::count_correct(kernel_of(best_variant, best_kernel), labels, train, test, best_c);
    rec.accuracy = static_cast<double>(rec.correct) / static_cast<double>(test.size());
    report.folds[task] = rec;
  });

  double sum = 0.0;
  for (const auto& rec : report.folds) sum += rec.accuracy;
  report.mean = sum / static_cast<double>(report.folds.size());
  double sq = 0.0;
  for (const auto& rec : report.folds) sq += (rec.accuracy - report.mean) * (rec.accuracy - report.mean);
  report.std = std::sqrt(sq / static_cast<double>(report.folds.size()));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline nlohmann::json to_json(const EvalReport& report, const EvalConfig& cfg) {
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& k : cfg.kernels) kernels.push_back(k.to_string());
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds)
    folds.push_back({{"repeat", f.repeat},
                     {"fold", f.fold},
                     {"test_size", f.test_size},
                     {"correct", f.correct},
                     {"accuracy", f.accuracy},
                     {"validation_accuracy", f.validation_accuracy},
                     {"embedding", f.variant},
                     {"kernel", f.kernel},
                     {"C", f.C}});
  return {{"config",
           {{"folds", cfg.folds}, {"repeats", cfg.repeats}, {"c_grid", cfg.c_grid}, {"kernels", kernels}, {"seed", cfg.seed}}},
          {"folds", folds},
          {"summary", {{"mean_accuracy", report.mean}, {"std_accuracy", report.std}, {"fold_count", report.folds.size()}}},
          {"seconds", report.seconds}};
}

// 100 batch steps of 100 windows in a single epoch, 128-dimensional vectors.
inline TrainConfig one_epoch_config() {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.iterations = 100;
  cfg.batch_size = 100;
  cfg.walk_dim = cfg.graph_dim = 128;
  return cfg;
}

struct ScalabilitySettings {
  std::vector<std::size_t> sizes{10, 100, 1000, 10000};
  std::vector<double> mus{2, 3, 4, 5};
  int repetitions = 10;
  int walk_length = 10;
  std::size_t walks_per_node = 100;
  TrainConfig train = one_epoch_config();
  std::uint64_t seed = 0;
};

struct ScalabilityRow {
  std::size_t n = 0;
  double mu = 0.0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  std::vector<double> seconds;
};

// Data-driven embedding of one graph end to end: walk graph, corpus, training.
inline double time_data_driven_embedding(const Graph& g, const WalkVocabulary& vocab, std::size_t walks_per_node,
                                         const TrainConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  RandomWalkGraph rwg(g);
  std::vector<Corpus> corpora{build_corpus(rwg, vocab, walks_per_node, seed)};
  // A graph without edges has no walks; its vector stays at the initialization.
  auto params = corpora.front().sequences.empty() ? init_params(vocab, 1, cfg) : train(corpora, vocab, cfg);
  const auto stop = std::chrono::steady_clock::now();
  if (params.D.empty()) throw ComputeError("training produced no graph vector");
  return std::chrono::duration<double>(stop - start).count();
}

inline std::vector<ScalabilityRow> scalability_run(const ScalabilitySettings& s) {
  if (s.sizes.empty() || s.mus.empty() || s.repetitions < 1) throw ValidationError("empty scalability grid");
  WalkVocabulary vocab(s.walk_length);
  std::vector<ScalabilityRow> rows;
  for (double mu : s.mus)
    for (std::size_t n : s.sizes) {
      if (n < 1) throw ValidationError("graph sizes must be positive");
      ScalabilityRow row{n, mu, 0.0, 0.0, {}};
      const double p = std::min(1.0, mu / static_cast<double>(n));
      for (int r = 0; r < s.repetitions; ++r) {
        const auto seed = derive_seed(s.seed, n, static_cast<std::uint64_t>(mu * 1000), static_cast<std::uint64_t>(r));
        const Graph g = generate_erdos_renyi(n, p, seed);
        row.seconds.push_back(time_data_driven_embedding(g, vocab, s.walks_per_node, s.train, seed));
      }
      row.mean_seconds = std::accumulate(row.seconds.begin(), row.seconds.end(), 0.0) / row.seconds.size();
      double sq = 0.0;
      for (double t : row.seconds) sq += (t - row.mean_seconds) * (t - row.mean_seconds);
      row.std_seconds = std::sqrt(sq / row.seconds.size());
      rows.push_back(std::move(row));
    }
  return rows;
}

}  // namespace awe
