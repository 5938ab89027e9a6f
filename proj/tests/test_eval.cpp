#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "awe/eval.hpp"
#include "awe/feature.hpp"
#include "oracles.hpp"

using namespace awe;

namespace {

struct Synthetic {
  std::vector<Graph> graphs;
  std::vector<int> labels;
};

// Cycles (class 0) and complete graphs (class 1) with 8..12 nodes.
Synthetic cycles_and_cliques(std::size_t per_class) {
  Synthetic s;
  for (std::size_t i = 0; i < per_class; ++i) {
    s.graphs.push_back(oracle::cycle(8 + i % 5));
    s.labels.push_back(0);
    s.graphs.push_back(oracle::complete(8 + i % 5));
    s.labels.push_back(1);
  }
  return s;
}

EmbeddingVariant exact_variant(const std::vector<Graph>& graphs, int l) {
  const WalkVocabulary vocab(l);
  std::vector<std::vector<double>> rows;
  for (const auto& g : graphs) rows.push_back(exact_embedding(build_random_walk_graph(g), vocab).values);
  return make_variant("l=" + std::to_string(l), rows);
}

EvalConfig small_eval() {
  EvalConfig cfg;
  cfg.folds = 5;
  cfg.repeats = 3;
  cfg.c_grid = {0.1, 10};
  cfg.kernels = {KernelSpec::rbf(0.1), KernelSpec::rbf(1)};
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST(StratifiedFolds, PartitionAndBalance) {
  std::vector<int> labels;
  for (int i = 0; i < 53; ++i) labels.push_back(i % 7 == 0 ? 2 : i % 3 == 0 ? 1 : 0);
  Rng rng(1);
  const int k = 5;
  const auto fold = stratified_folds(labels, k, rng);
  std::map<int, std::size_t> total;
  std::map<std::pair<int, int>, std::size_t> per;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ASSERT_GE(fold[i], 0);
    ASSERT_LT(fold[i], k);
    ++total[labels[i]];
    ++per[{fold[i], labels[i]}];
  }
  for (const auto& [cls, n] : total)
    for (int f = 0; f < k; ++f) {
      const double expected = static_cast<double>(n) / k;
      EXPECT_LE(std::abs(static_cast<double>(per[{f, cls}]) - expected), 1.0) << "fold " << f << " class " << cls;
    }
}

TEST(CrossValidate, SeparableSyntheticIsPerfect) {
  const auto data = cycles_and_cliques(15);
  const std::vector<EmbeddingVariant> variants{exact_variant(data.graphs, 4)};
  const auto report = cross_validate(data.labels, variants, small_eval());
  EXPECT_EQ(report.mean, 1.0);
  EXPECT_EQ(report.folds.size(), 15u);
}

TEST(CrossValidate, PermutedLabelsAreAtChance) {
  const auto data = cycles_and_cliques(30);
  auto labels = data.labels;
  std::shuffle(labels.begin(), labels.end(), Rng(77));
  const std::vector<EmbeddingVariant> variants{exact_variant(data.graphs, 4)};
  auto cfg = small_eval();
  cfg.folds = 10;
  const auto report = cross_validate(labels, variants, cfg);
  const double sigma = std::sqrt(0.25 / static_cast<double>(labels.size()));
  EXPECT_LT(std::abs(report.mean - 0.5), 3 * sigma) << report.mean;
}

TEST(CrossValidate, DeterministicAndThreadIndependent) {
  const auto data = cycles_and_cliques(10);
  const std::vector<EmbeddingVariant> variants{exact_variant(data.graphs, 3), exact_variant(data.graphs, 4)};
  auto cfg = small_eval();
  const auto a = cross_validate(data.labels, variants, cfg);
  cfg.threads = 3;
  const auto b = cross_validate(data.labels, variants, cfg);
  ASSERT_EQ(a.folds.size(), b.folds.size());
  for (std::size_t i = 0; i < a.folds.size(); ++i) {
    EXPECT_EQ(a.folds[i].correct, b.folds[i].correct);
    EXPECT_EQ(a.folds[i].variant, b.folds[i].variant);
    EXPECT_EQ(a.folds[i].kernel, b.folds[i].kernel);
    EXPECT_EQ(a.folds[i].C, b.folds[i].C);
  }
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
}

TEST(CrossValidate, SummaryConsistentWithFolds) {
  const auto data = cycles_and_cliques(12);
  auto labels = data.labels;
  std::shuffle(labels.begin(), labels.end(), Rng(5));
  const std::vector<EmbeddingVariant> variants{exact_variant(data.graphs, 4)};
  const auto report = cross_validate(labels, variants, small_eval());
  long double sum = 0, sq = 0;
  for (const auto& f : report.folds) {
    EXPECT_GE(f.accuracy, 0.0);
    EXPECT_LE(f.accuracy, 1.0);
    sum += f.accuracy;
  }
  const double mean = static_cast<double>(sum / report.folds.size());
  for (const auto& f : report.folds) sq += (f.accuracy - mean) * (f.accuracy - mean);
  EXPECT_NEAR(report.mean, mean, 1e-12);
  EXPECT_NEAR(report.std, std::sqrt(static_cast<double>(sq / report.folds.size())), 1e-12);

  const auto json = to_json(report, small_eval());
  EXPECT_EQ(json["folds"].size(), report.folds.size());
  EXPECT_EQ(json["summary"]["mean_accuracy"].get<double>(), report.mean);
  EXPECT_EQ(json["config"]["folds"], 5);
}

TEST(CrossValidate, ValidationErrors) {
  const auto data = cycles_and_cliques(4);
  const std::vector<EmbeddingVariant> variants{exact_variant(data.graphs, 3)};
  auto cfg = small_eval();
  try {
    cross_validate(data.labels, variants, cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("fewer folds"), std::string::npos);
  }
  cfg.folds = 2;
  EXPECT_THROW(cross_validate(data.labels, variants, cfg), ValidationError);
  cfg.folds = 3;
  cfg.c_grid.clear();
  EXPECT_THROW(cross_validate(data.labels, variants, cfg), ValidationError);
}

TEST(Scalability, TableShape) {
  ScalabilitySettings s;
  s.sizes = {10, 100};
  s.mus = {2};
  s.repetitions = 2;
  s.walk_length = 5;
  s.walks_per_node = 20;
  s.train.walk_dim = s.train.graph_dim = 16;
  s.train.iterations = 10;
  const auto rows = scalability_run(s);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_GT(r.mean_seconds, 0.0);
    EXPECT_EQ(r.seconds.size(), 2u);
    EXPECT_EQ(r.mu, 2.0);
  }
  EXPECT_EQ(rows[0].n, 10u);
  EXPECT_EQ(rows[1].n, 100u);
}

TEST(Scalability, TimeGrowsWithGraphSize) {
  ScalabilitySettings s;
  s.sizes = {100, 10000};
  s.mus = {3};
  s.repetitions = 2;
  s.walk_length = 6;
  s.walks_per_node = 50;
  s.train.walk_dim = s.train.graph_dim = 16;
  const auto rows = scalability_run(s);
  EXPECT_GE(rows[1].mean_seconds, rows[0].mean_seconds);
}

TEST(Scalability, EdgelessGraphStillTimed) {
  const WalkVocabulary vocab(3);
  auto cfg = one_epoch_config();
  cfg.walk_dim = cfg.graph_dim = 4;
  EXPECT_GT(time_data_driven_embedding(Graph::from_edges(3, {}, false), vocab, 10, cfg, 1), 0.0);
}
