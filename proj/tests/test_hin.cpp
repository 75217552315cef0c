#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "repoclass/corpus.hpp"
#include "repoclass/hin.hpp"
#include "repoclass/synth.hpp"
#include "test_util.hpp"

using namespace repoclass;

namespace {

struct Built {
  std::vector<RepoRecord> records;
  LabelHierarchy hierarchy;
  Vocabulary vocab;
  std::vector<Document> docs;
  HinGraph graph;
};

Built build(std::vector<RepoRecord> records, const std::string& hierarchy_json) {
  Built b;
  b.records = std::move(records);
  b.hierarchy = LabelHierarchy::from_json(hierarchy_json);
  b.vocab = build_vocabulary(b.records, b.hierarchy);
  b.docs = build_documents(b.records, b.vocab);
  b.graph = HinGraph::build(b.records, b.docs, b.vocab, b.hierarchy);
  return b;
}

RepoRecord fig1() {
  RepoRecord r;
  r.id = "Natsu6767/DCGAN-PyTorch";
  r.user = "Natsu6767";
  r.name = "DCGAN-PyTorch";
  r.tags = {"pytorch", "dcgan", "generative-model", "celeba"};
  r.description = "PyTorch Implementation of DCGAN trained on the CelebA dataset.";
  r.readme = "DCGAN yolo nmt";
  return r;
}

std::map<std::string, double> as_map(const std::vector<std::pair<NodeRef, double>>& v) {
  std::map<std::string, double> m;
  for (const auto& [ref, w] : v) m[ref.key] = w;
  return m;
}

const char* kOneLeafPair = R"({"id":"root","children":[{"id":"A","keyword":"aa"},{"id":"B","keyword":"bb"}]})";

}  // namespace

TEST(BuildHin, FigureOneEgoNetwork) {
  auto b = build({fig1()}, testutil::kSmallHierarchy);
  NodeRef dcgan{NodeKind::Word, "dcgan"};
  auto users = as_map(b.graph.neighbors(dcgan, EdgeType::WordUser));
  EXPECT_TRUE(users.count("Natsu6767"));
  auto names = as_map(b.graph.neighbors(dcgan, EdgeType::WordName));
  EXPECT_TRUE(names.count("dcgan"));
  EXPECT_TRUE(names.count("pytorch"));
}

TEST(BuildHin, SeedLinksToLeafAndParents) {
  auto b = build({fig1()}, testutil::kSmallHierarchy);
  auto labels = as_map(b.graph.neighbors(NodeRef{NodeKind::Word, "dcgan"}, EdgeType::WordLabel));
  EXPECT_EQ(labels, (std::map<std::string, double>{{"$CV", 1.0}, {"$Image-Generation", 1.0}}));
}

TEST(BuildHin, HandTallyOfTfSums) {
  RepoRecord r;
  r.id = "d";
  r.user = "u";
  r.name = "x";
  r.description = "aa aa bb";
  auto b = build({r}, kOneLeafPair);
  auto wd_a = as_map(b.graph.neighbors(NodeRef{NodeKind::Word, "aa"}, EdgeType::WordDoc));
  auto wd_b = as_map(b.graph.neighbors(NodeRef{NodeKind::Word, "bb"}, EdgeType::WordDoc));
  EXPECT_EQ(wd_a, (std::map<std::string, double>{{"d", 2.0}}));
  EXPECT_EQ(wd_b, (std::map<std::string, double>{{"d", 1.0}}));
  auto wu = as_map(b.graph.neighbors(NodeRef{NodeKind::User, "u"}, EdgeType::WordUser));
  EXPECT_EQ(wu, (std::map<std::string, double>{{"aa", 2.0}, {"bb", 1.0}}));
}

TEST(BuildHin, MissingSeedIsFatalAndNamed) {
  RepoRecord r;
  r.id = "d";
  r.description = "aa only";
  try {
    build({r}, kOneLeafPair);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bb"), std::string::npos);
  }
}

TEST(Neighbors, WordWithoutTagsHasNone) {
  RepoRecord r;
  r.id = "d";
  r.user = "u";
  r.name = "x";
  r.description = "aa bb";
  auto b = build({r}, kOneLeafPair);
  EXPECT_TRUE(b.graph.neighbors(NodeRef{NodeKind::Word, "aa"}, EdgeType::WordTag).empty());
}

TEST(Neighbors, UnknownNodeIsAnError) {
  RepoRecord r;
  r.id = "d";
  r.description = "aa bb";
  auto b = build({r}, kOneLeafPair);
  EXPECT_THROW(b.graph.neighbors(NodeRef{NodeKind::User, "nobody"}, EdgeType::WordUser), ValidationError);
}

class SynthGraph : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthConfig sc;
    sc.repos = 80;
    auto s = make_synthetic(sc);
    built_ = new Built(build(s.records, s.hierarchy_json));
  }
  static void TearDownTestSuite() { delete built_; }
  static Built* built_;
};
Built* SynthGraph::built_ = nullptr;

TEST_F(SynthGraph, StarPropertyAndPositiveWeights) {
  for (const auto& e : built_->graph.edges()) {
    EXPECT_GT(e.weight, 0.0);
    EXPECT_TRUE(built_->graph.find(NodeKind::Word, e.word).has_value());
    EXPECT_TRUE(built_->graph.find(middle_kind(e.type), e.other).has_value());
  }
}

TEST_F(SynthGraph, AdjacencyIsSymmetric) {
  const auto& g = built_->graph;
  for (NodeId id = 0; id < g.node_count(); ++id) {
    for (int t = 0; t < kNumEdgeTypes; ++t) {
      auto type = static_cast<EdgeType>(t);
      for (const auto& n : g.neighbors(id, type)) {
        auto back = g.neighbors(n.node, type);
        auto it = std::find_if(back.begin(), back.end(), [&](const Neighbor& x) { return x.node == id; });
        ASSERT_NE(it, back.end());
        EXPECT_EQ(it->weight, n.weight);
      }
    }
  }
}

TEST_F(SynthGraph, UserWeightsConserveDocumentWeights) {
  const auto& g = built_->graph;
  for (NodeId w = 0; w < g.word_count(); ++w) {
    double du = 0.0, dd = 0.0;
    for (const auto& n : g.neighbors(w, EdgeType::WordUser)) du += n.weight;
    for (const auto& n : g.neighbors(w, EdgeType::WordDoc)) dd += n.weight;
    EXPECT_DOUBLE_EQ(du, dd);
  }
}

TEST_F(SynthGraph, IndependentOfRecordOrder) {
  auto records = built_->records;
  std::reverse(records.begin(), records.end());
  auto vocab = build_vocabulary(records, built_->hierarchy);
  auto docs = build_documents(records, vocab);
  auto g = HinGraph::build(records, docs, vocab, built_->hierarchy);
  auto a = built_->graph.edges(), b = g.edges();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].type, b[i].type);
    EXPECT_EQ(a[i].word, b[i].word);
    EXPECT_EQ(a[i].other, b[i].other);
    EXPECT_EQ(a[i].weight, b[i].weight);
  }
}

TEST_F(SynthGraph, TsvRoundTrip) {
  testutil::TempDir dir;
  built_->graph.write_tsv(dir / "edges.tsv");
  auto edges = HinGraph::read_tsv(dir / "edges.tsv");
  auto g = HinGraph::from_edges(built_->vocab.tokens(), edges);
  ASSERT_EQ(g.node_count(), built_->graph.node_count());
  for (NodeId id = 0; id < g.node_count(); ++id) {
    EXPECT_EQ(g.node(id), built_->graph.node(id));
    EXPECT_DOUBLE_EQ(g.strength(id), built_->graph.strength(id));
  }
}

TEST(SampleNeighbor, SingleNeighborAlwaysChosen) {
  std::vector<std::string> words{"a"};
  std::vector<WeightedEdge> edges{{EdgeType::WordDoc, "a", "d1", 2.0}};
  auto g = HinGraph::from_edges(words, edges);
  Rng rng(1);
  const auto d = *g.find(NodeKind::Doc, "d1");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(g.sample_neighbor(0, EdgeType::WordDoc, rng), d);
}

TEST(SampleNeighbor, WeightRatioThreeToOne) {
  std::vector<std::string> words{"a"};
  std::vector<WeightedEdge> edges{{EdgeType::WordDoc, "a", "d1", 3.0}, {EdgeType::WordDoc, "a", "d2", 1.0}};
  auto g = HinGraph::from_edges(words, edges);
  Rng rng(7);
  const auto d1 = *g.find(NodeKind::Doc, "d1");
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += g.sample_neighbor(0, EdgeType::WordDoc, rng) == d1;
  const double ratio = double(hits) / double(n - hits);
  EXPECT_NEAR(ratio, 3.0, 0.15);
}

TEST(SampleNeighbor, NoNeighborsIsAnError) {
  std::vector<std::string> words{"a", "b"};
  std::vector<WeightedEdge> edges{{EdgeType::WordDoc, "a", "d1", 1.0}};
  auto g = HinGraph::from_edges(words, edges);
  Rng rng(1);
  EXPECT_THROW(g.sample_neighbor(1, EdgeType::WordDoc, rng), std::out_of_range);
}

TEST(AliasTableTest, MatchesWeights) {
  std::vector<double> w{1.0, 0.0, 2.0, 5.0, 2.0};
  AliasTable t(w);
  Rng rng(11);
  std::vector<int> counts(w.size(), 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[t.sample(rng)];
  EXPECT_EQ(counts[1], 0);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(double(counts[i]) / n, w[i] / 10.0, 0.005);
}
