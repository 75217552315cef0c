#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "repoclass/hin.hpp"

namespace repoclass {

struct EmbeddingConfig {
  std::size_t dimension = 50;
  std::array<double, kNumEdgeTypes> proportions = {0.2, 0.2, 0.2, 0.2, 0.2};
  double samples_per_edge = 200.0;  // total path samples = this x |edges|
  std::size_t negatives = 5;
  double lr_initial = 0.025;
  double lr_final = 0.0001;
  std::uint64_t seed = 1;
  std::size_t workers = 1;  // 1 = deterministic serial trainer
  std::size_t checkpoints = 10;
  std::size_t heldout_pairs = 2000;

  void validate() const;
};

/// Global and local biases of one meta-path.
struct PathBias {
  double global = 0.0;
  std::vector<double> source;  // dotted with e_u
  std::vector<double> target;  // dotted with e_v
  bool operator==(const PathBias&) const = default;
};

/// Node vectors (row-major, one row per HIN node) plus one bias triple per
/// meta-path.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t nodes, std::size_t dimension);

  std::size_t dimension() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : vectors_.size() / dim_; }
  std::span<double> vec(NodeId id) { return std::span(vectors_).subspan(std::size_t(id) * dim_, dim_); }
  std::span<const double> vec(NodeId id) const {
    return std::span(vectors_).subspan(std::size_t(id) * dim_, dim_);
  }
  PathBias& bias(EdgeType path) { return bias_[static_cast<std::size_t>(path)]; }
  const PathBias& bias(EdgeType path) const { return bias_[static_cast<std::size_t>(path)]; }

  std::vector<double>& raw() { return vectors_; }
  const std::vector<double>& raw() const { return vectors_; }

  bool all_finite() const;
  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> vectors_;
  std::array<PathBias, kNumEdgeTypes> bias_;
};

/// One positive (u, v) pair from a W-X-W instance and its negatives.
struct PairSample {
  EdgeType path;
  NodeId u;
  NodeId v;
  std::vector<NodeId> negatives;
};

/// Samples a W-X-W instance: u uniform over words with an X-neighbor, then
/// two weighted hops. Self pairs (u == v) are legitimate.
std::pair<NodeId, NodeId> sample_path_instance(const HinGraph& graph, EdgeType path, Rng& rng);

/// Word-node unigram distribution (by edge strength) raised to 3/4.
class NegativeSampler {
 public:
  explicit NegativeSampler(const HinGraph& graph);
  NodeId sample(Rng& rng) const { return words_[table_.sample(rng)]; }
  std::span<const NodeId> support() const { return words_; }

 private:
  std::vector<NodeId> words_;
  AliasTable table_;
};

/// f(u,v,M) = mu_M + p_M.e_u + q_M.e_v + e_u.e_v
double score(const EmbeddingTable& table, NodeId u, NodeId v, EdgeType path);

/// log sig(f(u,v)) + sum over negatives of log sig(-f(u,v')).
double pair_objective(const EmbeddingTable& table, const PairSample& sample);

/// Exact gradient of pair_objective; node gradients are accumulated per
/// distinct node so coinciding u/v/negatives are handled.
struct PairGradient {
  std::vector<std::pair<NodeId, std::vector<double>>> nodes;
  double global = 0.0;
  std::vector<double> source;
  std::vector<double> target;
};
PairGradient pair_gradient(const EmbeddingTable& table, const PairSample& sample);

/// One SGD ascent step on a pair (the training kernel).
void sgd_step(EmbeddingTable& table, const PairSample& sample, double lr);

struct TrainResult {
  EmbeddingTable table;
  std::vector<double> heldout_loss;  // index 0 = before training, then per checkpoint
  std::vector<EdgeType> skipped_paths;
  std::size_t total_samples = 0;
};

/// Reference trainer: single thread, bitwise reproducible for a seed.
TrainResult train_serial(const HinGraph& graph, const EmbeddingConfig& config);

/// OpenMP trainer: workers update shared parameters without locks.
TrainResult train_parallel(const HinGraph& graph, const EmbeddingConfig& config);

/// Dispatches on config.workers.
TrainResult train_embeddings(const HinGraph& graph, const EmbeddingConfig& config);

/// Rescales every word-node vector to unit length.
void normalize_words(EmbeddingTable& table, const HinGraph& graph);

/// "N d" header then "<kind>:<key> v1 .. vd" per node; words_only drops the
/// kind prefix and non-word nodes.
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     const HinGraph& graph, bool words_only);

using WordVectors = std::unordered_map<std::string, std::vector<double>>;
WordVectors load_word_vectors(const std::filesystem::path& path);

}  // namespace repoclass
