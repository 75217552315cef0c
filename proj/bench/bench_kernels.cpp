// Serial reference vs OpenMP kernel for each parallel hot spot.

#include <benchmark/benchmark.h>

#include "repoclass/classifier.hpp"
#include "repoclass/corpus.hpp"
#include "repoclass/embedding.hpp"
#include "repoclass/hin.hpp"
#include "repoclass/pseudogen.hpp"
#include "repoclass/synth.hpp"
#include "repoclass/topics.hpp"

using namespace repoclass;

namespace {

struct Fixture {
  LabelHierarchy hierarchy;
  std::vector<RepoRecord> records;
  Vocabulary vocab;
  std::vector<Document> docs;
  HinGraph graph;

  Fixture() {
    auto synth = make_synthetic({});
    hierarchy = LabelHierarchy::from_json(synth.hierarchy_json);
    records = synth.records;
    vocab = build_vocabulary(records, hierarchy);
    docs = build_documents(records, vocab);
    graph = HinGraph::build(records, docs, vocab, hierarchy);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

EmbeddingConfig embed_config(std::size_t workers) {
  EmbeddingConfig c;
  c.samples_per_edge = 5;
  c.workers = workers;
  c.checkpoints = 1;
  c.heldout_pairs = 100;
  return c;
}

void BM_EmbedSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(train_serial(f.graph, embed_config(1)));
}
BENCHMARK(BM_EmbedSerial)->Unit(benchmark::kMillisecond);

void BM_EmbedParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(train_parallel(f.graph, embed_config(static_cast<std::size_t>(state.range(0)))));
}
BENCHMARK(BM_EmbedParallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

PointSet mixture_points(std::vector<std::size_t>& assign) {
  Rng rng(3);
  PointSet pts;
  pts.dim = 50;
  for (std::size_t c = 0; c < 4; ++c) {
    VmfComponent comp{std::vector<double>(50, 0.0), 40.0};
    comp.mean[c] = 1.0;
    for (int i = 0; i < 2000; ++i) {
      pts.push(sample_vmf(comp, rng));
      assign.push_back(c);
    }
  }
  return pts;
}

void BM_EStepSerial(benchmark::State& state) {
  std::vector<std::size_t> assign;
  auto pts = mixture_points(assign);
  auto mix = fit_mixture(pts, assign, 4, nullptr, 1);
  std::vector<double> resp;
  for (auto _ : state) benchmark::DoNotOptimize(e_step_serial(pts, mix, resp));
}
BENCHMARK(BM_EStepSerial);

void BM_EStepParallel(benchmark::State& state) {
  std::vector<std::size_t> assign;
  auto pts = mixture_points(assign);
  auto mix = fit_mixture(pts, assign, 4, nullptr, 1);
  std::vector<double> resp;
  for (auto _ : state) benchmark::DoNotOptimize(e_step_parallel(pts, mix, resp));
}
BENCHMARK(BM_EStepParallel);

struct GenFixture {
  WordSpace space;
  std::vector<double> background;
  VmfMixture mixture;
  GenFixture() {
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (int w = 0; w < 2000; ++w) {
      std::vector<double> v(50);
      double s = 0;
      for (auto& x : v) s += (x = n(rng)) * x;
      for (auto& x : v) x /= std::sqrt(s);
      rows.emplace_back("w" + std::to_string(w), v);
    }
    space = WordSpace(50, rows);
    background.assign(space.size(), 1.0 / double(space.size()));
    for (int c = 0; c < 3; ++c) {
      VmfComponent comp{std::vector<double>(space.row(c).begin(), space.row(c).end()), 30.0};
      mixture.components.push_back(comp);
      mixture.weights.push_back(1.0 / 3);
      mixture.child_ids.push_back("c" + std::to_string(c));
    }
  }
};

GenConfig gen_config() {
  GenConfig g;
  g.docs_per_child = 100;
  g.mean_length = 100;
  return g;
}

void BM_GenerateSerial(benchmark::State& state) {
  GenFixture f;
  PseudoGenerator gen(f.space, f.background, gen_config());
  for (auto _ : state) benchmark::DoNotOptimize(gen.generate_node_serial("root", f.mixture));
}
BENCHMARK(BM_GenerateSerial)->Unit(benchmark::kMillisecond);

void BM_GenerateParallel(benchmark::State& state) {
  GenFixture f;
  PseudoGenerator gen(f.space, f.background, gen_config());
  for (auto _ : state) benchmark::DoNotOptimize(gen.generate_node_parallel("root", f.mixture));
}
BENCHMARK(BM_GenerateParallel)->Unit(benchmark::kMillisecond);

std::vector<TrainingExample> cnn_batch() {
  Rng rng(9);
  std::uniform_int_distribution<std::uint32_t> tok(1, 999);
  std::vector<TrainingExample> batch(64);
  for (auto& ex : batch) {
    ex.tokens.resize(100);
    for (auto& t : ex.tokens) t = tok(rng);
    ex.label = {0.9, 0.1};
  }
  return batch;
}

void BM_CnnBatchSerial(benchmark::State& state) {
  Rng rng(1);
  auto p = random_params<float>(1000, 50, 2, CnnConfig{}, rng);
  auto batch = cnn_batch();
  CnnGradient<float> g;
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient_serial<float>(p, batch, g));
}
BENCHMARK(BM_CnnBatchSerial)->Unit(benchmark::kMillisecond);

void BM_CnnBatchParallel(benchmark::State& state) {
  Rng rng(1);
  auto p = random_params<float>(1000, 50, 2, CnnConfig{}, rng);
  auto batch = cnn_batch();
  CnnGradient<float> g;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        batch_gradient_parallel<float>(p, batch, g, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_CnnBatchParallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
