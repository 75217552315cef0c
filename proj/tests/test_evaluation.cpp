#include <algorithm>

#include <gtest/gtest.h>

#include <json.hpp>

#include "oracles.hpp"
#include "repoclass/common.hpp"
#include "repoclass/evaluation.hpp"
#include "test_util.hpp"

using namespace repoclass;

namespace {

const char* kWide = R"({"id":"root","children":[
  {"id":"A","children":[{"id":"A1","keyword":"aa1"},{"id":"A2","keyword":"aa2"},{"id":"A3","keyword":"aa3"}]},
  {"id":"B","children":[{"id":"B1","keyword":"bb1"},{"id":"B2","keyword":"bb2"}]},
  {"id":"C","children":[{"id":"C1","keyword":"cc1"},{"id":"C2","keyword":"cc2"},{"id":"C3","keyword":"cc3"},{"id":"C4","keyword":"cc4"}]}]})";

void expect_matches_oracle(const PathMap& gold, const PathMap& pred, const LabelHierarchy& h) {
  auto r = f1_report(gold, pred, h);
  auto o = oracle::f1_tally(gold, pred, h);
  for (const auto& c : r.classes) {
    const auto& k = o.per_class.at(c.id);
    EXPECT_EQ(c.tp, k.tp) << c.id;
    EXPECT_EQ(c.fp, k.fp) << c.id;
    EXPECT_EQ(c.fn, k.fn) << c.id;
  }
  ASSERT_EQ(r.scopes.size(), o.micro.size());
  for (const auto& s : r.scopes) {
    EXPECT_DOUBLE_EQ(s.micro_f1, o.micro.at(s.name)) << s.name;
    EXPECT_DOUBLE_EQ(s.macro_f1, o.macro.at(s.name)) << s.name;
  }
}

}  // namespace

TEST(F1Report, PerfectPredictions) {
  auto h = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  PathMap gold{{"r1", {"$CV", "$Image-Generation"}}, {"r2", {"$CV", "$Object-Detection"}}, {"r3", {"$NLP", "$Translation"}}};
  auto r = f1_report(gold, gold, h);
  for (const auto& s : r.scopes) {
    EXPECT_EQ(s.micro_f1, 1.0) << s.name;
    EXPECT_EQ(s.macro_f1, 1.0) << s.name;
  }
  EXPECT_EQ(r.repos, 3u);
}

TEST(F1Report, SwappedLeavesScoreZeroAtLevelTwo) {
  auto h = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  PathMap gold{{"r1", {"$CV", "$Image-Generation"}}, {"r2", {"$CV", "$Object-Detection"}}};
  PathMap pred{{"r1", {"$CV", "$Object-Detection"}}, {"r2", {"$CV", "$Image-Generation"}}};
  auto r = f1_report(gold, pred, h);
  EXPECT_EQ(r.scope("Level-2").micro_f1, 0.0);
  EXPECT_EQ(r.scope("Level-1").micro_f1, 1.0);
}

TEST(F1Report, SixRepoHandInstance) {
  auto h = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  const std::vector<std::string> IG{"$CV", "$Image-Generation"}, OD{"$CV", "$Object-Detection"},
      TR{"$NLP", "$Translation"};
  PathMap gold{{"r1", IG}, {"r2", IG}, {"r3", OD}, {"r4", OD}, {"r5", TR}, {"r6", TR}};
  PathMap pred{{"r1", IG}, {"r2", OD}, {"r3", OD}, {"r4", TR}, {"r5", TR}, {"r6", IG}};
  auto r = f1_report(gold, pred, h);
  // Hand tally: CV tp3 fp1 fn1, NLP tp1 fp1 fn1, every leaf tp1 fp1 fn1.
  const auto& l1 = r.scope("Level-1");
  EXPECT_EQ(l1.tp, 4u);
  EXPECT_EQ(l1.fp, 2u);
  EXPECT_EQ(l1.fn, 2u);
  EXPECT_DOUBLE_EQ(l1.micro_f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(l1.macro_f1, 0.625);
  EXPECT_DOUBLE_EQ(r.scope("Level-2").micro_f1, 0.5);
  EXPECT_DOUBLE_EQ(r.scope("Level-2").macro_f1, 0.5);
  EXPECT_DOUBLE_EQ(r.scope("Overall").micro_f1, 7.0 / 12.0);
  EXPECT_DOUBLE_EQ(r.scope("Overall").macro_f1, 0.55);
  expect_matches_oracle(gold, pred, h);
}

TEST(F1Report, MatchesOracleOnRandomPredictionSets) {
  auto h = LabelHierarchy::from_json(kWide);
  auto leaves = h.leaves();
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    PathMap gold, pred;
    const std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "repo" + std::to_string(i);
      gold[id] = h.path_to(leaves[rng() % leaves.size()]);
      auto p = h.path_to(leaves[rng() % leaves.size()]);
      if (rng() % 5 == 0) p.resize(1);  // stopped at an internal node
      pred[id] = p;
    }
    expect_matches_oracle(gold, pred, h);
  }
}

TEST(F1Report, IndependentOfRepoOrder) {
  auto h = LabelHierarchy::from_json(kWide);
  auto leaves = h.leaves();
  Rng rng(5);
  PathMap gold, pred, gold2, pred2;
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("r" + std::to_string(i));
  for (const auto& id : ids) {
    gold[id] = h.path_to(leaves[rng() % leaves.size()]);
    pred[id] = h.path_to(leaves[rng() % leaves.size()]);
  }
  // Rename ids so the map iterates in a different order.
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    gold2["x" + ids[i]] = gold.at("r" + std::to_string(i));
    pred2["x" + ids[i]] = pred.at("r" + std::to_string(i));
  }
  EXPECT_EQ(f1_report(gold, pred, h).to_json(), f1_report(gold2, pred2, h).to_json());
}

TEST(F1Report, MicroEqualsAccuracyPerLevel) {
  auto h = LabelHierarchy::from_json(kWide);
  auto leaves = h.leaves();
  Rng rng(6);
  PathMap gold, pred;
  std::size_t hits1 = 0, hits2 = 0;
  const std::size_t n = 200;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "r" + std::to_string(i);
    gold[id] = h.path_to(leaves[rng() % leaves.size()]);
    pred[id] = h.path_to(leaves[rng() % leaves.size()]);
    hits1 += gold[id][0] == pred[id][0];
    hits2 += gold[id][1] == pred[id][1];
  }
  auto r = f1_report(gold, pred, h);
  EXPECT_DOUBLE_EQ(r.scope("Level-1").micro_f1, double(hits1) / n);
  EXPECT_DOUBLE_EQ(r.scope("Level-2").micro_f1, double(hits2) / n);
  const auto& o = r.scope("Overall");
  EXPECT_EQ(o.tp, r.scope("Level-1").tp + r.scope("Level-2").tp);
  EXPECT_EQ(o.fp, r.scope("Level-1").fp + r.scope("Level-2").fp);
  EXPECT_EQ(o.fn, r.scope("Level-1").fn + r.scope("Level-2").fn);
}

TEST(F1Report, ScoresStayInUnitInterval) {
  auto h = LabelHierarchy::from_json(kWide);
  auto leaves = h.leaves();
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    PathMap gold, pred;
    for (int i = 0; i < 10; ++i) {
      gold["r" + std::to_string(i)] = h.path_to(leaves[rng() % leaves.size()]);
      pred["r" + std::to_string(i)] = h.path_to(leaves[rng() % 2]);
    }
    auto r = f1_report(gold, pred, h);
    for (const auto& c : r.classes) {
      EXPECT_GE(c.f1, 0.0);
      EXPECT_LE(c.f1, 1.0);
    }
    for (const auto& s : r.scopes) {
      EXPECT_GE(s.macro_f1, 0.0);
      EXPECT_LE(s.micro_f1, 1.0);
    }
  }
}

TEST(F1Report, ZeroSupportClassCountsAsZero) {
  auto h = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  PathMap gold{{"r1", {"$CV", "$Image-Generation"}}};
  auto r = f1_report(gold, gold, h);
  // Level-2 has three classes; only one is ever seen.
  EXPECT_DOUBLE_EQ(r.scope("Level-2").macro_f1, 1.0 / 3.0);
  EXPECT_EQ(r.scope("Level-2").micro_f1, 1.0);
}

TEST(F1Report, Errors) {
  auto h = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  PathMap gold{{"r1", {"$CV", "$Image-Generation"}}};
  EXPECT_THROW(f1_report(gold, {}, h), ValidationError);
  EXPECT_THROW(f1_report(gold, {{"r1", {"$CV", "$Image-Generation"}}, {"r2", {"$CV"}}}, h), ValidationError);
  EXPECT_THROW(f1_report(gold, {{"r1", {"$CV", "$Nope"}}}, h), ValidationError);
  EXPECT_THROW(f1_report(gold, {{"r1", {"$NLP", "$Image-Generation"}}}, h), ValidationError);
}

TEST(Prf, ZeroDenominators) {
  auto z = prf(0, 0, 0);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  auto p = prf(2, 2, 0);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 1.0);
  EXPECT_DOUBLE_EQ(p.f1, 2.0 / 3.0);
}

TEST(EvalReportTest, JsonAndTable) {
  auto h = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  PathMap gold{{"r1", {"$CV", "$Image-Generation"}}, {"r2", {"$NLP", "$Translation"}}};
  PathMap pred{{"r1", {"$CV", "$Image-Generation"}}, {"r2", {"$CV", "$Object-Detection"}}};
  auto r = f1_report(gold, pred, h);
  auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["repos"], 2);
  EXPECT_NE(r.to_table().find("Overall"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.min_micro_f1(), std::min({r.scope("Level-1").micro_f1, r.scope("Level-2").micro_f1,
                                               r.scope("Overall").micro_f1}));
}
