// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: acceptance_test <path to repoclass binary>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "repoclass/bessel.hpp"
#include "repoclass/classifier.hpp"
#include "repoclass/embedding.hpp"
#include "repoclass/enrichment.hpp"
#include "repoclass/evaluation.hpp"
#include "repoclass/pseudogen.hpp"
#include "repoclass/topics.hpp"
#include "test_util.hpp"

using namespace repoclass;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::normal_distribution<double> n;
  std::vector<double> v(d);
  double s = 0.0;
  for (auto& x : v) s += (x = n(rng)) * x;
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

void pseudo_labels(Outcome& o) {
  for (std::size_t m : {1u, 2u, 3u, 5u})
    for (double beta : {0.0, 0.2, 0.5})
      for (std::size_t c = 0; c < m; ++c) {
        auto l = pseudo_label(m, c, beta);
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double want = i == c ? (1.0 - beta) + beta / double(m) : beta / double(m);
          o.check(std::abs(l[i] - want) <= 1e-12, "m=" + std::to_string(m) + " beta=" + fmt(beta));
          sum += l[i];
        }
        o.check(std::abs(sum - 1.0) <= 1e-12, "sum");
      }
}

void word_distributions(Outcome& o) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng() % 60, d = 2 + rng() % 10;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.emplace_back("w" + std::to_string(1000 + i), random_unit(rng, d));
    WordSpace space(d, rows);
    std::vector<double> bg(n);
    for (auto& x : bg) x = u(rng);
    const double s = std::accumulate(bg.begin(), bg.end(), 0.0);
    for (auto& x : bg) x /= s;
    auto e = random_unit(rng, d);
    auto local = local_vocabulary(e, space, 1 + rng() % n);
    const double beta = trial % 3 == 0 ? 1.0 : trial % 3 == 1 ? 0.0 : u(rng);
    auto p = word_distribution(e, space, local, bg, beta);
    worst = std::max(worst, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    if (beta == 1.0) o.check(p == bg, "beta=1 equals background");
    if (beta == 0.0) {
      std::set<std::uint32_t> support(local.begin(), local.end());
      for (std::size_t w = 0; w < n; ++w)
        if (!support.count(std::uint32_t(w)) && p[w] != 0.0) o.check(false, "beta=0 support");
    }
  }
  o.check(worst <= 1e-9, "sum error " + fmt(worst));
  o.detail << " max |sum-1| = " << fmt(worst);
}

void vmf_recovery(Outcome& o) {
  Rng rng(3);
  for (double k : {5.0, 20.0, 50.0}) {
    VmfComponent truth{random_unit(rng, 10), k};
    PointSet ps{10, {}};
    for (int i = 0; i < 10000; ++i) ps.push(sample_vmf(truth, rng));
    std::vector<double> sum(10, 0.0);
    double mean_cos = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t j = 0; j < 10; ++j) sum[j] += ps.row(i)[j];
      mean_cos += dot(ps.row(i), truth.mean);
    }
    mean_cos /= double(ps.size());
    const double kh = estimate_kappa(std::sqrt(dot(sum, sum)) / double(ps.size()), 10);
    const double cos = dot(fit_vmf(ps).mean, truth.mean);
    const double moment = std::abs(mean_cos - vmf_mean_resultant(10.0, k));
    o.check(std::abs(kh - k) <= 0.15 * k, "kappa " + fmt(k));
    o.check(cos >= 0.99, "mean cos " + fmt(cos));
    o.check(moment <= 0.01, "moment " + fmt(moment));
    o.detail << " k=" << k << ":khat=" << fmt(kh) << ",cos=" << fmt(cos) << ",dA=" << fmt(moment);
  }
}

void em_recovery(Outcome& o) {
  Rng rng(4);
  std::vector<double> a(10, 0.0), b(10, 0.0);
  a[0] = 1.0;
  b[1] = 1.0;
  PointSet ps{10, {}};
  std::vector<std::size_t> assign;
  for (int i = 0; i < 200; ++i) {
    ps.push(sample_vmf({a, 50.0}, rng));
    assign.push_back(0);
  }
  for (int i = 0; i < 200; ++i) {
    ps.push(sample_vmf({b, 50.0}, rng));
    assign.push_back(1);
  }
  EmTrace trace;
  auto mix = fit_mixture(ps, assign, 2, &trace);
  const double straight = std::min(dot(mix.components[0].mean, a), dot(mix.components[1].mean, b));
  const double swapped = std::min(dot(mix.components[1].mean, a), dot(mix.components[0].mean, b));
  const double best = std::max(straight, swapped);
  o.check(best >= 0.95, "cosine " + fmt(best));
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    o.check(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-9 * std::abs(trace.log_likelihood[i - 1]),
            "log-likelihood decreased at iteration " + std::to_string(i));
  o.detail << " min cos = " << fmt(best) << ", iterations = " << trace.iterations;
}

void enrichment_oracle(Outcome& o) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 17, classes = 1 + rng() % 3, d = 2 + rng() % 6;
    std::map<std::string, std::vector<double>> vecs;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) {
      words.push_back("w" + std::to_string(i));
      vecs[words.back()] = random_unit(rng, d);
    }
    for (const auto& [w, v] : vecs) rows.emplace_back(w, v);
    std::shuffle(words.begin(), words.end(), rng);
    std::vector<std::string> seeds(words.begin(), words.begin() + classes);
    std::vector<std::string> pool(words.begin() + classes, words.end());
    const std::size_t cap = 100;
    auto got = keyword_enrich(seeds, WordSpace(d, rows), pool, cap).keywords;
    o.check(got == oracle::keyword_enrich(seeds, vecs, pool, cap), "trial " + std::to_string(trial) + " differs");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < got.size(); ++i) {
      o.check(!got[i].empty() && got[i][0] == seeds[i], "seed lost");
      for (const auto& w : got[i]) o.check(seen.insert(w).second, "not disjoint");
    }
  }
}

HinGraph two_cliques() {
  std::vector<std::string> words;
  std::vector<WeightedEdge> edges;
  for (char c : {'a', 'b'}) {
    for (int i = 0; i < 6; ++i) words.push_back(std::string(1, c) + std::to_string(i));
    for (int d = 0; d < 8; ++d)
      for (int i = 0; i < 6; ++i)
        if ((i + d) % 3 != 0)
          edges.push_back({EdgeType::WordDoc, std::string(1, c) + std::to_string(i), std::string("doc-") + c + std::to_string(d), 1.0});
  }
  return HinGraph::from_edges(words, edges);
}

void embedding_checks(Outcome& o) {
  Rng rng(6);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingTable t(8, 6);
    for (auto& x : t.raw()) x = u(rng);
    for (auto type : kAllEdgeTypes) {
      auto& b = t.bias(type);
      b.global = u(rng);
      for (auto& x : b.source) x = u(rng);
      for (auto& x : b.target) x = u(rng);
    }
    PairSample s{kAllEdgeTypes[trial % kNumEdgeTypes], NodeId(trial % 8), NodeId((trial * 3 + 1) % 8), {}};
    for (int k = 0; k < 5; ++k) s.negatives.push_back(NodeId((trial + 2 * k + 5) % 8));
    const auto g = pair_gradient(t, s);
    auto numeric = [&](double& x) {
      const double keep = x, h = 1e-6;
      x = keep + h;
      const double up = pair_objective(t, s);
      x = keep - h;
      const double down = pair_objective(t, s);
      x = keep;
      return (up - down) / (2 * h);
    };
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
    for (const auto& [id, grad] : g.nodes)
      for (std::size_t i = 0; i < grad.size(); ++i) worst = std::max(worst, rel(grad[i], numeric(t.vec(id)[i])));
    auto& b = t.bias(s.path);
    worst = std::max(worst, rel(g.global, numeric(b.global)));
    for (std::size_t i = 0; i < b.source.size(); ++i) {
      worst = std::max(worst, rel(g.source[i], numeric(b.source[i])));
      worst = std::max(worst, rel(g.target[i], numeric(b.target[i])));
    }
  }
  o.check(worst < 1e-4, "gradient error " + fmt(worst));

  auto graph = two_cliques();
  EmbeddingConfig c;
  c.dimension = 16;
  c.samples_per_edge = 400.0;
  c.heldout_pairs = 500;
  auto res = train_serial(graph, c);
  std::vector<NodeId> a, b;
  for (NodeId id = 0; id < graph.word_count(); ++id) (graph.node(id).key[0] == 'a' ? a : b).push_back(id);
  auto mean_cos = [&](const std::vector<NodeId>& xs, const std::vector<NodeId>& ys, bool same) {
    double s = 0.0;
    int n = 0;
    for (auto x : xs)
      for (auto y : ys)
        if (!same || x < y) {
          s += dot(res.table.vec(x), res.table.vec(y));
          ++n;
        }
    return s / n;
  };
  const double margin = 0.5 * (mean_cos(a, a, true) + mean_cos(b, b, true)) - mean_cos(a, b, false);
  o.check(margin >= 0.2, "margin " + fmt(margin));
  o.detail << " max rel err = " << fmt(worst) << ", margin = " << fmt(margin);
}

void cnn_checks(Outcome& o) {
  Rng rng(7);
  CnnConfig c;
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto p = random_params<double>(40, 8, 2, c, rng);
    ModelTokens doc(10);
    for (auto& t : doc) t = std::uint32_t(1 + rng() % 39);
    std::vector<double> label{0.35, 0.65};
    worst = std::max(worst, gradient_check(p, doc, label));
  }
  std::vector<double> p{0.1, 0.6, 0.3};
  const double kl = kl_divergence<double>(p, std::span<const double>(p));
  o.check(worst < 1e-4, "gradient error " + fmt(worst));
  o.check(kl == 0.0, "KL(p||p) = " + fmt(kl));
  o.detail << " max rel err = " << fmt(worst);
}

void metric_oracle(Outcome& o) {
  auto compare = [&](const PathMap& gold, const PathMap& pred, const LabelHierarchy& h) {
    auto r = f1_report(gold, pred, h);
    auto t = oracle::f1_tally(gold, pred, h);
    for (const auto& c : r.classes) {
      const auto& k = t.per_class.at(c.id);
      o.check(c.tp == k.tp && c.fp == k.fp && c.fn == k.fn, "counts " + c.id);
    }
    for (const auto& s : r.scopes)
      o.check(s.micro_f1 == t.micro.at(s.name) && s.macro_f1 == t.macro.at(s.name), "scope " + s.name);
  };
  auto small = LabelHierarchy::from_json(testutil::kSmallHierarchy);
  const std::vector<std::string> IG{"$CV", "$Image-Generation"}, OD{"$CV", "$Object-Detection"},
      TR{"$NLP", "$Translation"};
  compare({{"r1", IG}, {"r2", IG}, {"r3", OD}, {"r4", OD}, {"r5", TR}, {"r6", TR}},
          {{"r1", IG}, {"r2", OD}, {"r3", OD}, {"r4", TR}, {"r5", TR}, {"r6", IG}}, small);

  auto wide = LabelHierarchy::from_json(R"({"id":"root","children":[
    {"id":"A","children":[{"id":"A1","keyword":"aa1"},{"id":"A2","keyword":"aa2"},{"id":"A3","keyword":"aa3"}]},
    {"id":"B","children":[{"id":"B1","keyword":"bb1"},{"id":"B2","keyword":"bb2"}]}]})");
  auto leaves = wide.leaves();
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    PathMap gold, pred;
    const std::size_t n = 1 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      gold["r" + std::to_string(i)] = wide.path_to(leaves[rng() % leaves.size()]);
      pred["r" + std::to_string(i)] = wide.path_to(leaves[rng() % leaves.size()]);
    }
    compare(gold, pred, wide);
  }
}

int run(const std::string& cmd) {
  spdlog::debug("$ {}", cmd);
  return std::system((cmd + " > /dev/null 2>&1").c_str());
}

void end_to_end(Outcome& o, const std::string& cli) {
  testutil::TempDir dir;
  const auto d = dir.path().string();
  o.check(run(cli + " synth --out " + d + " --repos 400 --level1 2 --leaves 2") == 0, "synth failed");
  const std::string base = cli + " --config " + d + "/repoclass.conf --deterministic -q";
  o.check(run(base + " --workdir " + d + "/w1 e2e") == 0, "first e2e failed");
  o.check(run(base + " --workdir " + d + "/w2 e2e") == 0, "second e2e failed");
  const auto r1 = testutil::read(dir / "w1/report.json"), r2 = testutil::read(dir / "w2/report.json");
  if (r1.empty()) {
    o.check(false, "no report");
    return;
  }
  auto j = nlohmann::json::parse(r1);
  double overall = -1, level2 = -1;
  for (const auto& s : j["scopes"]) {
    if (s["scope"] == "Overall") overall = s["micro_f1"];
    if (s["scope"] == "Level-2") level2 = s["micro_f1"];
  }
  o.check(overall >= 0.90, "Overall micro-F1 " + fmt(overall));
  o.check(level2 >= 0.85, "Level-2 micro-F1 " + fmt(level2));
  o.check(r1 == r2, "reports differ between deterministic runs");
  o.detail << " Overall micro-F1 = " << fmt(overall) << ", Level-2 micro-F1 = " << fmt(level2)
           << ", identical = " << (r1 == r2 ? "yes" : "no");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <repoclass binary>\n", argv[0]);
    return 2;
  }
  spdlog::set_level(spdlog::level::err);
  const std::string cli = argv[1];
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"pseudo-label closed form", pseudo_labels},
      {"word distribution normalization", word_distributions},
      {"vMF estimator recovery", vmf_recovery},
      {"EM planted-mixture recovery", em_recovery},
      {"keyword enrichment oracle equivalence", enrichment_oracle},
      {"embedding gradient check and separation", embedding_checks},
      {"CNN gradient check and KL identity", cnn_checks},
      {"metric oracle", metric_oracle},
      {"end-to-end synthetic pipeline", [&](Outcome& o) { end_to_end(o, cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s criterion %zu: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
