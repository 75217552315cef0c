#include <gtest/gtest.h>

#include "repoclass/config.hpp"
#include "test_util.hpp"

using namespace repoclass;

TEST(PipelineConfigTest, DefaultsMatchDocumentedValues) {
  PipelineConfig c;
  EXPECT_EQ(c.embedding.dimension, 50u);
  EXPECT_EQ(c.embedding.negatives, 5u);
  EXPECT_EQ(c.embedding.samples_per_edge, 200.0);
  EXPECT_EQ(c.enrichment.max_keywords, 100u);
  EXPECT_EQ(c.enrichment.min_document_frequency, 3u);
  EXPECT_EQ(c.generation.docs_per_child, 500u);
  EXPECT_EQ(c.generation.tau, 50u);
  EXPECT_EQ(c.generation.beta, 0.2);
  EXPECT_EQ(c.classifier.widths, (std::vector<std::size_t>{2, 3, 4, 5}));
  EXPECT_EQ(c.classifier.filters, 20u);
  EXPECT_EQ(c.classifier.epochs, 5u);
  EXPECT_EQ(c.classifier.batch_size, 64u);
}

TEST(PipelineConfigTest, ParsesSectionsListsAndComments) {
  auto c = PipelineConfig::parse(R"(
# comment
[pipeline]
seed = 7 ; trailing
[embedding]
dimension = 16
proportions = [0.5, 0.125, 0.125, 0.125, 0.125]
[classifier]
widths = 1, 3
[fetch]
base_url = "http://localhost:8080#x"
)");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.embedding.seed, 7u);
  EXPECT_EQ(c.classifier.seed, 7u);
  EXPECT_EQ(c.generation.seed, 7u);
  EXPECT_EQ(c.embedding.dimension, 16u);
  EXPECT_EQ(c.embedding.proportions[0], 0.5);
  EXPECT_EQ(c.classifier.widths, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(c.fetch_base_url, "http://localhost:8080#x");
}

TEST(PipelineConfigTest, TextRoundTrip) {
  PipelineConfig c;
  c.corpus = "c.jsonl";
  c.set_seed(42);
  c.embedding.lr_initial = 0.02;
  c.generation.beta = 0.3;
  c.classifier.widths = {2, 4};
  c.fail_under = 0.85;
  auto back = PipelineConfig::parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.embedding.lr_initial, 0.02);
  EXPECT_NE(c.to_text().find("learning_rate = 0.02\n"), std::string::npos);
}

TEST(PipelineConfigTest, UnknownKeyOrSectionNamesTheLine) {
  try {
    PipelineConfig::parse("[embedding]\ndimension = 8\ndimensions = 9\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("dimensions"), std::string::npos);
  }
  EXPECT_THROW(PipelineConfig::parse("[nope]\n"), ParseError);
  EXPECT_THROW(PipelineConfig::parse("seed = 1\n"), ParseError);
  EXPECT_THROW(PipelineConfig::parse("[pipeline]\nseed = x\n"), ParseError);
}

TEST(PipelineConfigTest, InvalidValuesAreRejected) {
  EXPECT_THROW(PipelineConfig::parse("[embedding]\ndimension = 1\n"), ValidationError);
  EXPECT_THROW(PipelineConfig::parse("[pseudogen]\nbeta = 1.5\n"), ValidationError);
  EXPECT_THROW(PipelineConfig::parse("[evaluation]\nfail_under = 2\n"), ValidationError);
}

TEST(PipelineConfigTest, DeterministicForcesSerialKernels) {
  auto c = PipelineConfig::parse("[pipeline]\ndeterministic = true\n[embedding]\nworkers = 4\n");
  EXPECT_EQ(c.embedding.workers, 1u);
  EXPECT_EQ(c.classifier.threads, 1u);
}

TEST(PipelineConfigTest, LoadResolvesRelativePaths) {
  testutil::TempDir dir;
  std::filesystem::create_directories(dir / "sub");
  testutil::write(dir / "sub/r.conf", "[paths]\ncorpus = data/c.jsonl\nworkdir = /abs/work\n");
  auto c = PipelineConfig::load(dir / "sub/r.conf");
  EXPECT_EQ(c.corpus, dir / "sub/data/c.jsonl");
  EXPECT_EQ(c.workdir, std::filesystem::path("/abs/work"));
  EXPECT_THROW(PipelineConfig::load(dir / "missing.conf"), ParseError);
}

TEST(PipelineConfigTest, SectionTextChangesOnlyWithItsSection) {
  PipelineConfig a, b;
  b.classifier.epochs = 9;
  EXPECT_EQ(a.section_text("embedding"), b.section_text("embedding"));
  EXPECT_NE(a.section_text("classifier"), b.section_text("classifier"));
}
