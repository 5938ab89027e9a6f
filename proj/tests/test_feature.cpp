#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "awe/feature.hpp"
#include "oracles.hpp"

using namespace awe;

namespace {

FeatureEmbedding exact(const Graph& g, int l) {
  return exact_embedding(build_random_walk_graph(g), WalkVocabulary(l));
}

double sum(const FeatureEmbedding& f) { return std::accumulate(f.values.begin(), f.values.end(), 0.0); }

}  // namespace

TEST(ExactEmbedding, Triangle) {
  auto f = exact(oracle::complete(3), 2);
  EXPECT_EQ(f.values, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(f.mode, EmbeddingMode::Exact);
}

TEST(ExactEmbedding, SingleEdge) {
  EXPECT_EQ(exact(oracle::path(2), 2).values, (std::vector<double>{1.0, 0.0}));
}

TEST(ExactEmbedding, MatchesBruteForceEnumerator) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 3 + seed % 6;
    const auto g = oracle::random_simple_graph(n, 0.5, seed);
    for (int l = 1; l <= 4; ++l) {
      const auto f = exact(g, l);
      const auto dist = oracle::exact_distribution(g, l);
      const WalkVocabulary vocab(l);
      std::vector<double> expected(vocab.size(), 0.0);
      for (const auto& [states, p] : dist) expected[vocab.index(AnonymousWalk{states})] = p;
      for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(f.values[i], expected[i], 1e-10);
      if (!build_random_walk_graph(g).startable_nodes().empty()) EXPECT_NEAR(sum(f), 1.0, 1e-9);
    }
  }
}

TEST(ExactEmbedding, WeightedDirectedAgainstOracle) {
  auto g = Graph::from_edges(4, {{0, 1, 0.7}, {1, 2, 1.3}, {2, 0, 2.0}, {1, 0, 0.2}, {2, 3, 0.4}, {3, 1, 1.0}}, true);
  for (int l = 1; l <= 5; ++l) {
    const auto f = exact(g, l);
    const WalkVocabulary vocab(l);
    for (const auto& [states, p] : oracle::exact_distribution(g, l))
      EXPECT_NEAR(f.values[vocab.index(AnonymousWalk{states})], p, 1e-12);
    EXPECT_NEAR(sum(f), 1.0, 1e-12);
  }
}

TEST(ExactEmbedding, VertexTransitiveGraphsAgreePerNode) {
  // On a cycle every start node yields the same distribution, so a subgraph
  // view from one node equals the whole-graph vector.
  for (std::size_t n : {5u, 6u, 9u}) {
    const auto f = exact(oracle::cycle(n), 4);
    const auto dist = oracle::exact_distribution(oracle::cycle(n), 4);
    EXPECT_NEAR(sum(f), 1.0, 1e-12);
    for (const auto& [states, p] : dist) EXPECT_NEAR(f.values[WalkVocabulary(4).index(AnonymousWalk{states})], p, 1e-15);
  }
}

TEST(ExactEmbedding, PermutationInvariantBitEqual) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = oracle::random_simple_graph(9, 0.45, seed);
    std::vector<NodeId> perm(g.node_count());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), Rng(seed + 100));
    const auto h = g.relabeled(perm);
    for (int l : {3, 5}) EXPECT_EQ(exact(g, l).values, exact(h, l).values) << "seed " << seed;
  }
}

TEST(ExactEmbedding, ThreadCountDoesNotChangeResult) {
  const auto rwg = build_random_walk_graph(oracle::random_simple_graph(12, 0.4, 3));
  const WalkVocabulary vocab(5);
  const auto one = exact_embedding(rwg, vocab, kDefaultExactBudget, 1);
  EXPECT_EQ(exact_embedding(rwg, vocab, kDefaultExactBudget, 4).values, one.values);
}

TEST(ExactEmbedding, CostGuard) {
  const auto rwg = build_random_walk_graph(oracle::complete(40));
  try {
    exact_embedding(rwg, WalkVocabulary(12));
    FAIL();
  } catch (const ComputeError& e) {
    EXPECT_NE(std::string(e.what()).find("sampled"), std::string::npos);
  }
}

TEST(ExactEmbedding, IsolatedNodesExcluded) {
  auto g = Graph::from_edges(5, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}}, false);
  EXPECT_EQ(exact(g, 2).values, (std::vector<double>{0.5, 0.5}));
}

TEST(RequiredSamples, KnownValues) {
  EXPECT_EQ(required_samples(0.5, 0.05, 877), 4888u);
  EXPECT_EQ(required_samples(0.1, 0.01, 877), 122500u);
  EXPECT_EQ(required_samples(1.0, 0.5, 2), 3u);
  EXPECT_EQ(required_samples(0.1, 0.05, 2), 738u);
}

TEST(RequiredSamples, MatchesDirectFormulaForSmallVocabularies) {
  // For small eta, ln(2^eta - 2) can be evaluated directly.
  for (std::uint64_t eta : {2u, 5u, 15u, 52u})
    for (double eps : {0.05, 0.1, 0.5, 1.0})
      for (double delta : {0.01, 0.05, 0.2}) {
        const double direct = 2.0 / (eps * eps) * (std::log(std::pow(2.0, double(eta)) - 2.0) - std::log(delta));
        EXPECT_EQ(required_samples(eps, delta, eta), static_cast<std::uint64_t>(std::ceil(direct)));
      }
}

TEST(RequiredSamples, Monotone) {
  EXPECT_GT(required_samples(0.1, 0.05, 877), required_samples(0.2, 0.05, 877));
  EXPECT_GT(required_samples(0.1, 0.01, 877), required_samples(0.1, 0.05, 877));
  EXPECT_GT(required_samples(0.1, 0.05, 878), required_samples(0.1, 0.05, 877));
  EXPECT_GT(required_samples(0.1, 0.05, 115975), required_samples(0.1, 0.05, 21147));
}

TEST(RequiredSamples, RejectsBadArguments) {
  EXPECT_THROW(required_samples(0.0, 0.05, 10), ValidationError);
  EXPECT_THROW(required_samples(0.1, 0.0, 10), ValidationError);
  EXPECT_THROW(required_samples(0.1, 1.0, 10), ValidationError);
  EXPECT_THROW(required_samples(0.1, 0.05, 1), ValidationError);
}

TEST(SampledEmbedding, ForcedOnSingleEdge) {
  const auto rwg = build_random_walk_graph(oracle::path(2));
  const auto f = sampled_embedding(rwg, WalkVocabulary(2), {0.1, 0.05, 777}, 1);
  EXPECT_EQ(f.values, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(f.samples, 777u);
}

TEST(SampledEmbedding, TriangleCloseToExact) {
  const auto rwg = build_random_walk_graph(oracle::complete(3));
  const WalkVocabulary vocab(2);
  const auto f = sampled_embedding(rwg, vocab, {0.1, 0.05, 10000}, 42);
  EXPECT_LT(l1_distance(f, exact_embedding(rwg, vocab)), 0.05);
}

TEST(SampledEmbedding, SumsToOneAndIsDeterministic) {
  const auto rwg = build_random_walk_graph(oracle::random_simple_graph(10, 0.4, 7));
  const WalkVocabulary vocab(6);
  const SamplingPlan plan{0.1, 0.05, 200001};
  const auto a = sampled_embedding(rwg, vocab, plan, 9, 0, 1);
  const auto b = sampled_embedding(rwg, vocab, plan, 9, 0, 3);
  EXPECT_EQ(a.values, b.values);
  std::uint64_t total = 0;
  for (double v : a.values) total += static_cast<std::uint64_t>(std::llround(v * 200001.0));
  EXPECT_EQ(total, 200001u);
  EXPECT_NE(sampled_embedding(rwg, vocab, plan, 10).values, a.values);
}

TEST(SampledEmbedding, ErrorShrinksWithMoreSamples) {
  const auto g = oracle::random_simple_graph(8, 0.5, 4);
  const auto rwg = build_random_walk_graph(g);
  const WalkVocabulary vocab(4);
  const auto truth = exact_embedding(rwg, vocab);
  std::vector<double> medians;
  for (std::uint64_t m : {100u, 1000u, 10000u}) {
    std::vector<double> d;
    for (std::uint64_t seed = 0; seed < 31; ++seed)
      d.push_back(l1_distance(sampled_embedding(rwg, vocab, {0.1, 0.05, m}, seed), truth));
    std::nth_element(d.begin(), d.begin() + 15, d.end());
    medians.push_back(d[15]);
  }
  EXPECT_GE(medians[0], medians[1]);
  EXPECT_GE(medians[1], medians[2]);
}

TEST(SampledEmbedding, RelabeledGraphHasSameExpectation) {
  const auto g = oracle::random_simple_graph(7, 0.5, 12);
  std::vector<NodeId> perm{3, 6, 0, 5, 1, 4, 2};
  const auto h = g.relabeled(perm);
  const WalkVocabulary vocab(3);
  const auto fg = sampled_embedding(build_random_walk_graph(g), vocab, {0.1, 0.05, 200000}, 1);
  const auto fh = sampled_embedding(build_random_walk_graph(h), vocab, {0.1, 0.05, 200000}, 2);
  EXPECT_LT(l1_distance(fg, fh), 0.02);
  EXPECT_EQ(exact(g, 3).values, exact(h, 3).values);
}

TEST(SampledEmbedding, NoStartableNode) {
  const auto rwg = build_random_walk_graph(Graph::from_edges(3, {}, false));
  EXPECT_THROW(sampled_embedding(rwg, WalkVocabulary(2), {0.1, 0.05, 10}, 1), ComputeError);
}

TEST(SampledEmbeddings, LongestEqualsSingleLength) {
  const auto rwg = build_random_walk_graph(oracle::random_simple_graph(10, 0.4, 7));
  const std::vector<WalkVocabulary> vocabs{WalkVocabulary(2), WalkVocabulary(6), WalkVocabulary(4)};
  const std::vector<SamplingPlan> plans{{0.1, 0.05, 70000}, {0.1, 0.05, 200001}, {0.1, 0.05, 150000}};
  const auto single = sampled_embedding(rwg, vocabs[1], plans[1], 9, 3);
  for (unsigned threads : {1u, 3u}) {
    const auto all = sampled_embeddings(rwg, vocabs, plans, 9, 3, threads);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[1].values, single.values);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(all[i].length, vocabs[i].length());
      EXPECT_EQ(all[i].samples, plans[i].samples);
      EXPECT_NEAR(sum(all[i]), 1.0, 1e-12);
    }
  }
}

TEST(SampledEmbeddings, PrefixesAgreeWithLongWalks) {
  // With equal sample counts, the short histogram is the long one summed over
  // walks with the same prefix.
  const auto rwg = build_random_walk_graph(oracle::random_simple_graph(8, 0.5, 4));
  const std::vector<WalkVocabulary> vocabs{WalkVocabulary(5), WalkVocabulary(2)};
  const std::vector<SamplingPlan> plans{{0.1, 0.05, 100000}, {0.1, 0.05, 100000}};
  const auto all = sampled_embeddings(rwg, vocabs, plans, 5);
  std::vector<double> folded(vocabs[1].size(), 0.0);
  for (WalkVocabulary::Index k = 0; k < vocabs[0].size(); ++k) {
    auto states = vocabs[0].walk(k).states;
    states.resize(3);
    folded[vocabs[1].index(AnonymousWalk{states})] += all[0].values[k];
  }
  for (std::size_t k = 0; k < folded.size(); ++k) EXPECT_NEAR(all[1].values[k], folded[k], 1e-12);
}

TEST(SampledEmbeddings, ShortLengthsCloseToExact) {
  const auto g = oracle::random_simple_graph(8, 0.5, 4);
  const auto rwg = build_random_walk_graph(g);
  const std::vector<WalkVocabulary> vocabs{WalkVocabulary(2), WalkVocabulary(3), WalkVocabulary(6)};
  const std::vector<SamplingPlan> plans{{0.1, 0.05, 200000}, {0.1, 0.05, 200000}, {0.1, 0.05, 1000}};
  const auto all = sampled_embeddings(rwg, vocabs, plans, 11);
  EXPECT_LT(l1_distance(all[0], exact(g, 2)), 0.02);
  EXPECT_LT(l1_distance(all[1], exact(g, 3)), 0.02);
}

TEST(SampledEmbeddings, RejectsMismatchedPlans) {
  const auto rwg = build_random_walk_graph(oracle::complete(3));
  const std::vector<WalkVocabulary> vocabs{WalkVocabulary(2)};
  EXPECT_THROW(sampled_embeddings(rwg, vocabs, std::vector<SamplingPlan>{}, 1), ValidationError);
}

TEST(L1Distance, Basics) {
  const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0};
  EXPECT_EQ(l1_distance(std::span<const double>(p), std::span<const double>(p)), 0.0);
  EXPECT_EQ(l1_distance(std::span<const double>(p), std::span<const double>(q)), 2.0);
  const std::vector<double> r{1.0};
  EXPECT_THROW(l1_distance(std::span<const double>(p), std::span<const double>(r)), ValidationError);
  EXPECT_THROW(l1_distance(exact(oracle::complete(3), 2), exact(oracle::complete(3), 3)), ValidationError);
}

TEST(ExactSum, OrderIndependent) {
  Rng rng(1);
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(std::ldexp(uniform01(rng), -static_cast<int>(uniform_below(rng, 60))));
  ExactSum a;
  for (double x : xs) a.add(x);
  std::shuffle(xs.begin(), xs.end(), rng);
  ExactSum b;
  for (double x : xs) b.add(x);
  EXPECT_EQ(a.value(), b.value());
  long double ref = 0;
  for (double x : xs) ref += x;
  EXPECT_NEAR(a.value(), static_cast<double>(ref), 1e-14);
}
