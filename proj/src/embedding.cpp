#include "repoclass/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <omp.h>
#include <spdlog/spdlog.h>

namespace repoclass {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct Schedule {
  std::vector<EdgeType> paths;
  std::discrete_distribution<std::size_t> pick;
};

Schedule make_schedule(const HinGraph& graph, const EmbeddingConfig& config,
                       std::vector<EdgeType>& skipped) {
  Schedule s;
  std::vector<double> weights;
  for (auto t : kAllEdgeTypes) {
    double p = config.proportions[static_cast<std::size_t>(t)];
    if (p <= 0.0) continue;
    if (graph.edge_count(t) == 0) {
      spdlog::warn("meta-path {} has no instances; skipped", metapath_name(t));
      skipped.push_back(t);
      continue;
    }
    s.paths.push_back(t);
    weights.push_back(p);
  }
  if (s.paths.empty()) throw ValidationError("embedding: no meta-path has any instance");
  s.pick = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  return s;
}

PairSample draw_sample(const HinGraph& graph, Schedule& schedule, const NegativeSampler& negs,
                       std::size_t k, Rng& rng) {
  PairSample s;
  s.path = schedule.paths[schedule.pick(rng)];
  std::tie(s.u, s.v) = sample_path_instance(graph, s.path, rng);
  s.negatives.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto n = negs.sample(rng);
    if (n != s.v) s.negatives.push_back(n);
  }
  return s;
}

EmbeddingTable init_table(const HinGraph& graph, const EmbeddingConfig& config) {
  EmbeddingTable table(graph.node_count(), config.dimension);
  Rng rng = derive_rng(config.seed, 0x1417);
  const double half = 0.5 / static_cast<double>(config.dimension);
  std::uniform_real_distribution<double> init(-half, half);
  for (auto& x : table.raw()) x = init(rng);
  return table;
}

std::vector<PairSample> heldout_set(const HinGraph& graph, const EmbeddingConfig& config,
                                    const NegativeSampler& negs) {
  std::vector<EdgeType> ignored;
  auto schedule = make_schedule(graph, config, ignored);
  Rng rng = derive_rng(config.seed, 0x4e1d);
  std::vector<PairSample> out;
  out.reserve(config.heldout_pairs);
  for (std::size_t i = 0; i < config.heldout_pairs; ++i)
    out.push_back(draw_sample(graph, schedule, negs, config.negatives, rng));
  return out;
}

double mean_loss(const EmbeddingTable& table, const std::vector<PairSample>& samples) {
  if (samples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : samples) s -= pair_objective(table, p);
  return s / static_cast<double>(samples.size());
}

void check_finite(const EmbeddingTable& table, std::size_t done, double lr) {
  if (!table.all_finite()) {
    throw NumericError("embedding: non-finite parameters after " + std::to_string(done) +
                       " samples (learning rate " + std::to_string(lr) +
                       "); lower embedding.lr_initial");
  }
}

double lr_at(const EmbeddingConfig& c, std::size_t step, std::size_t total) {
  return c.lr_initial - (c.lr_initial - c.lr_final) * static_cast<double>(step) /
                            static_cast<double>(std::max<std::size_t>(total, 1));
}

}  // namespace

void EmbeddingConfig::validate() const {
  if (dimension < 2) throw ValidationError("embedding: dimension must be >= 2");
  if (negatives < 1) throw ValidationError("embedding: negatives must be >= 1");
  if (workers < 1) throw ValidationError("embedding: workers must be >= 1");
  if (checkpoints < 1) throw ValidationError("embedding: checkpoints must be >= 1");
  if (!(samples_per_edge > 0.0)) throw ValidationError("embedding: samples_per_edge must be > 0");
  double sum = 0.0;
  for (double p : proportions) {
    if (p < 0.0) throw ValidationError("embedding: negative meta-path proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("embedding: proportions must sum to 1");
}

EmbeddingTable::EmbeddingTable(std::size_t nodes, std::size_t dimension)
    : dim_(dimension), vectors_(nodes * dimension, 0.0) {
  for (auto& b : bias_) {
    b.source.assign(dimension, 0.0);
    b.target.assign(dimension, 0.0);
  }
}

bool EmbeddingTable::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(vectors_.begin(), vectors_.end(), finite)) return false;
  for (const auto& b : bias_) {
    if (!std::isfinite(b.global)) return false;
    if (!std::all_of(b.source.begin(), b.source.end(), finite)) return false;
    if (!std::all_of(b.target.begin(), b.target.end(), finite)) return false;
  }
  return true;
}

std::pair<NodeId, NodeId> sample_path_instance(const HinGraph& graph, EdgeType path, Rng& rng) {
  const auto& starts = graph.words_with_edges(path);
  if (starts.empty()) {
    throw std::out_of_range("meta-path " + std::string(metapath_name(path)) + " has no instances");
  }
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  NodeId u = starts[pick(rng)];
  NodeId x = graph.sample_neighbor(u, path, rng);
  NodeId v = graph.sample_neighbor(x, path, rng);
  return {u, v};
}

NegativeSampler::NegativeSampler(const HinGraph& graph) {
  std::vector<double> weights;
  for (NodeId w = 0; w < graph.word_count(); ++w) {
    double s = graph.strength(w);
    if (s > 0.0) {
      words_.push_back(w);
      weights.push_back(std::pow(s, 0.75));
    }
  }
  if (words_.empty()) throw ValidationError("negative sampler: no connected word nodes");
  table_ = AliasTable(weights);
}

double score(const EmbeddingTable& table, NodeId u, NodeId v, EdgeType path) {
  const auto& b = table.bias(path);
  auto eu = table.vec(u), ev = table.vec(v);
  return b.global + dot(b.source, eu) + dot(b.target, ev) + dot(eu, ev);
}

double pair_objective(const EmbeddingTable& table, const PairSample& s) {
  double obj = log_sigmoid(score(table, s.u, s.v, s.path));
  for (auto n : s.negatives) obj += log_sigmoid(-score(table, s.u, n, s.path));
  return obj;
}

PairGradient pair_gradient(const EmbeddingTable& table, const PairSample& s) {
  const std::size_t d = table.dimension();
  const auto& b = table.bias(s.path);
  PairGradient g;
  g.source.assign(d, 0.0);
  g.target.assign(d, 0.0);
  auto slot = [&](NodeId id) -> std::vector<double>& {
    for (auto& [n, v] : g.nodes)
      if (n == id) return v;
    g.nodes.emplace_back(id, std::vector<double>(d, 0.0));
    return g.nodes.back().second;
  };
  auto eu = table.vec(s.u);
  auto accumulate = [&](NodeId t, double label) {
    auto et = table.vec(t);
    double coef = label - sigmoid(score(table, s.u, t, s.path));
    auto& gu = slot(s.u);
    for (std::size_t i = 0; i < d; ++i) gu[i] += coef * (b.source[i] + et[i]);
    auto& gt = slot(t);
    for (std::size_t i = 0; i < d; ++i) gt[i] += coef * (b.target[i] + eu[i]);
    for (std::size_t i = 0; i < d; ++i) {
      g.source[i] += coef * eu[i];
      g.target[i] += coef * et[i];
    }
    g.global += coef;
  };
  accumulate(s.v, 1.0);
  for (auto n : s.negatives) accumulate(n, 0.0);
  return g;
}

void sgd_step(EmbeddingTable& table, const PairSample& s, double lr) {
  const std::size_t d = table.dimension();
  auto& b = table.bias(s.path);
  const std::size_t k = 1 + s.negatives.size();
  thread_local std::vector<double> buf;
  buf.assign((k + 3) * d, 0.0);
  double* gu = buf.data();
  double* gp = gu + d;
  double* gq = gp + d;
  double* gt = gq + d;
  double gmu = 0.0;

  auto eu = table.vec(s.u);
  const double pu = dot(b.source, eu);
  for (std::size_t j = 0; j < k; ++j) {
    NodeId t = j == 0 ? s.v : s.negatives[j - 1];
    auto et = table.vec(t);
    double qt = 0.0, ut = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      qt += b.target[i] * et[i];
      ut += eu[i] * et[i];
    }
    double coef = (j == 0 ? 1.0 : 0.0) - sigmoid(b.global + pu + qt + ut);
    double* gtj = gt + j * d;
    for (std::size_t i = 0; i < d; ++i) {
      gu[i] += coef * (b.source[i] + et[i]);
      gtj[i] = coef * (b.target[i] + eu[i]);
      gp[i] += coef * eu[i];
      gq[i] += coef * et[i];
    }
    gmu += coef;
  }
  for (std::size_t i = 0; i < d; ++i) eu[i] += lr * gu[i];
  for (std::size_t j = 0; j < k; ++j) {
    auto et = table.vec(j == 0 ? s.v : s.negatives[j - 1]);
    const double* gtj = gt + j * d;
    for (std::size_t i = 0; i < d; ++i) et[i] += lr * gtj[i];
  }
  for (std::size_t i = 0; i < d; ++i) {
    b.source[i] += lr * gp[i];
    b.target[i] += lr * gq[i];
  }
  b.global += lr * gmu;
}

TrainResult train_serial(const HinGraph& graph, const EmbeddingConfig& config) {
  config.validate();
  TrainResult res;
  auto schedule = make_schedule(graph, config, res.skipped_paths);
  NegativeSampler negs(graph);
  res.table = init_table(graph, config);
  const auto heldout = heldout_set(graph, config, negs);
  res.total_samples = static_cast<std::size_t>(
      std::ceil(config.samples_per_edge * static_cast<double>(graph.edge_count())));
  res.heldout_loss.push_back(mean_loss(res.table, heldout));

  Rng rng = derive_rng(config.seed, 0x5a3b);
  const std::size_t total = res.total_samples;
  std::size_t step = 0;
  for (std::size_t c = 1; c <= config.checkpoints; ++c) {
    const std::size_t end = total * c / config.checkpoints;
    for (; step < end; ++step) {
      auto s = draw_sample(graph, schedule, negs, config.negatives, rng);
      sgd_step(res.table, s, lr_at(config, step, total));
    }
    check_finite(res.table, step, lr_at(config, step, total));
    res.heldout_loss.push_back(mean_loss(res.table, heldout));
  }
  normalize_words(res.table, graph);
  return res;
}

TrainResult train_parallel(const HinGraph& graph, const EmbeddingConfig& config) {
  config.validate();
  TrainResult res;
  auto schedule = make_schedule(graph, config, res.skipped_paths);
  NegativeSampler negs(graph);
  res.table = init_table(graph, config);
  const auto heldout = heldout_set(graph, config, negs);
  res.total_samples = static_cast<std::size_t>(
      std::ceil(config.samples_per_edge * static_cast<double>(graph.edge_count())));
  res.heldout_loss.push_back(mean_loss(res.table, heldout));

  const std::size_t total = res.total_samples;
  const int workers = static_cast<int>(config.workers);
  std::vector<Rng> rngs;
  std::vector<Schedule> schedules(workers, schedule);
  for (int w = 0; w < workers; ++w) rngs.push_back(derive_rng(config.seed, 0x5a3b, w + 1));

  std::size_t begin = 0;
  for (std::size_t c = 1; c <= config.checkpoints; ++c) {
    const std::size_t end = total * c / config.checkpoints;
    const std::size_t span = end - begin;
#pragma omp parallel num_threads(workers)
    {
      const int w = omp_get_thread_num();
      const int nw = omp_get_num_threads();
      const std::size_t lo = begin + span * w / nw;
      const std::size_t hi = begin + span * (w + 1) / nw;
      for (std::size_t step = lo; step < hi; ++step) {
        auto s = draw_sample(graph, schedules[w], negs, config.negatives, rngs[w]);
        sgd_step(res.table, s, lr_at(config, step, total));
      }
    }
    begin = end;
    check_finite(res.table, end, lr_at(config, end, total));
    res.heldout_loss.push_back(mean_loss(res.table, heldout));
  }
  normalize_words(res.table, graph);
  return res;
}

TrainResult train_embeddings(const HinGraph& graph, const EmbeddingConfig& config) {
  return config.workers <= 1 ? train_serial(graph, config) : train_parallel(graph, config);
}

void normalize_words(EmbeddingTable& table, const HinGraph& graph) {
  for (NodeId w = 0; w < graph.word_count(); ++w) {
    auto v = table.vec(w);
    double n = std::sqrt(dot(v, v));
    if (n > 0.0)
      for (auto& x : v) x /= n;
  }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     const HinGraph& graph, bool words_only) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  const std::size_t n = words_only ? graph.word_count() : graph.node_count();
  out << n << ' ' << table.dimension() << '\n';
  char buf[40];
  for (NodeId id = 0; id < n; ++id) {
    const auto& ref = graph.node(id);
    if (words_only) {
      out << ref.key;
    } else {
      out << to_string(ref.kind) << ':' << ref.key;
    }
    for (double x : table.vec(id)) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
}

WordVectors load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::size_t n = 0, d = 0;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  {
    std::istringstream hs(line);
    if (!(hs >> n >> d) || d == 0) throw ParseError(path.string() + ": bad header");
  }
  WordVectors out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    // Word tokens never contain ':'; prefixed keys come from a full dump.
    if (auto colon = key.find(':'); colon != std::string::npos) {
      if (key.rfind("word:", 0) != 0) continue;
      key = key.substr(colon + 1);
    }
    std::vector<double> v(d);
    for (auto& x : v) {
      if (!(ls >> x)) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": short vector");
    }
    out.emplace(std::move(key), std::move(v));
  }
  return out;
}

}  // namespace repoclass
