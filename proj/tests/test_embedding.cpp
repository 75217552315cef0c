#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "repoclass/embedding.hpp"
#include "repoclass/word_space.hpp"
#include "test_util.hpp"

using namespace repoclass;

namespace {

// Words a0..a5 only share documents among themselves, same for b0..b5.
HinGraph two_cliques() {
  std::vector<std::string> words;
  std::vector<WeightedEdge> edges;
  for (char c : {'a', 'b'}) {
    for (int i = 0; i < 6; ++i) words.push_back(std::string(1, c) + std::to_string(i));
    for (int d = 0; d < 8; ++d) {
      const std::string doc = std::string("doc-") + c + std::to_string(d);
      for (int i = 0; i < 6; ++i)
        if ((i + d) % 3 != 0) edges.push_back({EdgeType::WordDoc, std::string(1, c) + std::to_string(i), doc, 1.0 + (i % 2)});
    }
  }
  return HinGraph::from_edges(words, edges);
}

EmbeddingConfig small_config() {
  EmbeddingConfig c;
  c.dimension = 16;
  c.samples_per_edge = 400.0;
  c.heldout_pairs = 500;
  c.checkpoints = 4;
  return c;
}

void randomize(EmbeddingTable& t, Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : t.raw()) x = u(rng);
  for (auto type : kAllEdgeTypes) {
    auto& b = t.bias(type);
    b.global = u(rng);
    for (auto& x : b.source) x = u(rng);
    for (auto& x : b.target) x = u(rng);
  }
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

double mean_cos(const EmbeddingTable& t, const std::vector<NodeId>& xs, const std::vector<NodeId>& ys, bool same) {
  double s = 0.0;
  int n = 0;
  for (auto x : xs)
    for (auto y : ys) {
      if (same && x >= y) continue;
      s += dot(t.vec(x), t.vec(y));
      ++n;
    }
  return s / n;
}

}  // namespace

TEST(Score, ZeroParametersGiveZero) {
  EmbeddingTable t(3, 4);
  for (auto type : kAllEdgeTypes) EXPECT_EQ(score(t, 0, 1, type), 0.0);
}

TEST(Score, HandArithmetic) {
  EmbeddingTable t(2, 4);
  t.bias(EdgeType::WordUser).global = 1.0;
  for (NodeId id : {0u, 1u})
    for (auto& x : t.vec(id)) x = 0.25;  // squared norm 0.25
  EXPECT_DOUBLE_EQ(score(t, 0, 1, EdgeType::WordUser), 1.25);
}

TEST(Score, MatchesNaiveRecomputation) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingTable t(5, 13);
    randomize(t, rng, 1.0);
    const auto type = kAllEdgeTypes[trial % kNumEdgeTypes];
    auto v = [&](NodeId id) { return std::vector<double>(t.vec(id).begin(), t.vec(id).end()); };
    const auto& b = t.bias(type);
    const double expect = b.global + oracle::naive_dot(b.source, v(1)) + oracle::naive_dot(b.target, v(3)) +
                          oracle::naive_dot(v(1), v(3));
    EXPECT_NEAR(score(t, 1, 3, type), expect, 1e-12);
  }
}

TEST(PairGradient, MatchesCentralDifferences) {
  Rng rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingTable t(8, 6);
    randomize(t, rng, 0.8);
    PairSample s{kAllEdgeTypes[trial % kNumEdgeTypes], NodeId(trial % 8), NodeId((trial * 3 + 1) % 8), {}};
    for (int k = 0; k < 5; ++k) s.negatives.push_back(NodeId((trial + 2 * k + 5) % 8));
    const auto g = pair_gradient(t, s);
    const double h = 1e-6;
    auto numeric = [&](double& x) {
      const double keep = x;
      x = keep + h;
      const double up = pair_objective(t, s);
      x = keep - h;
      const double down = pair_objective(t, s);
      x = keep;
      return (up - down) / (2 * h);
    };
    for (const auto& [id, grad] : g.nodes)
      for (std::size_t i = 0; i < grad.size(); ++i) worst = std::max(worst, rel_err(grad[i], numeric(t.vec(id)[i])));
    auto& b = t.bias(s.path);
    worst = std::max(worst, rel_err(g.global, numeric(b.global)));
    for (std::size_t i = 0; i < b.source.size(); ++i) {
      worst = std::max(worst, rel_err(g.source[i], numeric(b.source[i])));
      worst = std::max(worst, rel_err(g.target[i], numeric(b.target[i])));
    }
    // Nodes absent from the gradient list must not affect the objective.
    std::set<NodeId> touched;
    for (const auto& n : g.nodes) touched.insert(n.first);
    for (NodeId id = 0; id < 8; ++id)
      if (!touched.count(id)) EXPECT_EQ(numeric(t.vec(id)[0]), 0.0);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(PairObjective, SigmoidStaysInUnitInterval) {
  Rng rng(5);
  EmbeddingTable t(4, 8);
  randomize(t, rng, 2.0);
  for (auto type : kAllEdgeTypes) {
    PairSample s{type, 0, 1, {2, 3}};
    const double f = pair_objective(t, s);
    EXPECT_TRUE(std::isfinite(f));
    EXPECT_LT(f, 0.0);
  }
}

TEST(SamplePathInstance, SharedDocumentPair) {
  std::vector<std::string> words{"a", "b"};
  std::vector<WeightedEdge> edges{{EdgeType::WordDoc, "a", "d", 1.0}, {EdgeType::WordDoc, "b", "d", 1.0}};
  auto g = HinGraph::from_edges(words, edges);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    auto [u, v] = sample_path_instance(g, EdgeType::WordDoc, rng);
    EXPECT_LT(u, 2u);
    EXPECT_LT(v, 2u);
  }
}

TEST(SamplePathInstance, SingleKeywordLabelGivesSelfPair) {
  std::vector<std::string> words{"k", "z"};
  std::vector<WeightedEdge> edges{{EdgeType::WordLabel, "k", "L", 1.0}, {EdgeType::WordDoc, "z", "d", 1.0}};
  auto g = HinGraph::from_edges(words, edges);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    auto [u, v] = sample_path_instance(g, EdgeType::WordLabel, rng);
    EXPECT_EQ(u, 0u);
    EXPECT_EQ(v, 0u);
  }
}

TEST(SamplePathInstance, EndpointsAreWordsLinkedThroughMiddleKind) {
  auto g = two_cliques();
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    auto [u, v] = sample_path_instance(g, EdgeType::WordDoc, rng);
    ASSERT_LT(u, g.word_count());
    ASSERT_LT(v, g.word_count());
    // Two cliques never mix through a document.
    EXPECT_EQ(g.node(u).key[0], g.node(v).key[0]);
  }
}

TEST(TrainEmbeddings, TwoCliqueMargin) {
  auto g = two_cliques();
  auto res = train_serial(g, small_config());
  std::vector<NodeId> a, b;
  for (NodeId id = 0; id < g.word_count(); ++id) (g.node(id).key[0] == 'a' ? a : b).push_back(id);
  const double intra = 0.5 * (mean_cos(res.table, a, a, true) + mean_cos(res.table, b, b, true));
  const double inter = mean_cos(res.table, a, b, false);
  EXPECT_GE(intra - inter, 0.2);
}

TEST(TrainEmbeddings, SerialIsReproducible) {
  auto g = two_cliques();
  auto c = small_config();
  c.samples_per_edge = 50.0;
  auto r1 = train_serial(g, c);
  auto r2 = train_serial(g, c);
  EXPECT_TRUE(r1.table == r2.table);
  c.seed = 2;
  auto r3 = train_serial(g, c);
  EXPECT_FALSE(r1.table == r3.table);
}

TEST(TrainEmbeddings, HeldOutLossDecreases) {
  auto g = two_cliques();
  auto res = train_serial(g, small_config());
  ASSERT_EQ(res.heldout_loss.size(), 5u);
  EXPECT_LT(res.heldout_loss.back(), res.heldout_loss[1]);
  EXPECT_LT(res.heldout_loss.back(), res.heldout_loss.front());
}

TEST(TrainEmbeddings, WordVectorsUnitNorm) {
  auto g = two_cliques();
  auto res = train_serial(g, small_config());
  for (NodeId id = 0; id < g.word_count(); ++id) EXPECT_NEAR(std::sqrt(dot(res.table.vec(id), res.table.vec(id))), 1.0, 1e-6);
}

TEST(TrainEmbeddings, SkippedPathsKeepInitialBiases) {
  auto g = two_cliques();
  auto res = train_serial(g, small_config());
  EXPECT_EQ(res.skipped_paths.size(), 4u);
  for (auto type : res.skipped_paths) {
    const auto& b = res.table.bias(type);
    EXPECT_EQ(b.global, 0.0);
    for (double x : b.source) EXPECT_EQ(x, 0.0);
    for (double x : b.target) EXPECT_EQ(x, 0.0);
  }
  EXPECT_NE(res.table.bias(EdgeType::WordDoc).global, 0.0);
}

TEST(TrainEmbeddings, ParallelProducesValidSeparatedTable) {
  auto g = two_cliques();
  auto c = small_config();
  c.workers = 2;
  auto res = train_parallel(g, c);
  EXPECT_TRUE(res.table.all_finite());
  std::vector<NodeId> a, b;
  for (NodeId id = 0; id < g.word_count(); ++id) (g.node(id).key[0] == 'a' ? a : b).push_back(id);
  const double intra = 0.5 * (mean_cos(res.table, a, a, true) + mean_cos(res.table, b, b, true));
  EXPECT_GE(intra - mean_cos(res.table, a, b, false), 0.2);
}

TEST(TrainEmbeddings, DivergenceIsReported) {
  auto g = two_cliques();
  auto c = small_config();
  c.lr_initial = 1e300;
  c.lr_final = 1e300;
  EXPECT_THROW(train_serial(g, c), NumericError);
}

TEST(EmbeddingConfigTest, RejectsBadValues) {
  EmbeddingConfig c;
  c.dimension = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.negatives = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.proportions = {0.5, 0.5, 0.5, 0.0, 0.0};
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(EmbeddingFile, WordVectorsRoundTrip) {
  auto g = two_cliques();
  auto c = small_config();
  c.samples_per_edge = 5.0;
  auto res = train_serial(g, c);
  testutil::TempDir dir;
  save_embeddings(dir / "w.txt", res.table, g, true);
  auto vecs = load_word_vectors(dir / "w.txt");
  ASSERT_EQ(vecs.size(), g.word_count());
  for (NodeId id = 0; id < g.word_count(); ++id) {
    const auto& v = vecs.at(g.node(id).key);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], res.table.vec(id)[i]);
  }
  save_embeddings(dir / "all.txt", res.table, g, false);
  const auto text = testutil::read(dir / "all.txt");
  EXPECT_EQ(text.substr(0, text.find('\n')), std::to_string(g.node_count()) + " 16");
}
