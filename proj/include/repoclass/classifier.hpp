#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "repoclass/common.hpp"
#include "repoclass/hierarchy.hpp"
#include "repoclass/word_space.hpp"

namespace repoclass {

struct CnnConfig {
  std::vector<std::size_t> widths = {2, 3, 4, 5};
  std::size_t filters = 20;  // per width
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // 1 = deterministic serial batches
  double stop_below = 0.0;  // top-down early stop threshold; 0 disables

  void validate() const;
  std::size_t max_width() const;
};

/// Token sequence over model ids: 0 is the pad token, vocabulary token t is
/// t + 1.
using ModelTokens = std::vector<std::uint32_t>;

struct TrainingExample {
  ModelTokens tokens;
  std::vector<double> label;  // soft label, sums to 1
};

/// Parameter tensors. Embedding row 0 is the pad vector, fixed at zero.
template <typename T>
struct CnnParams {
  std::size_t vocab_rows = 0;  // including pad
  std::size_t dim = 0;
  std::size_t outputs = 0;
  std::vector<std::size_t> widths;
  std::size_t filters = 0;

  std::vector<T> embedding;               // vocab_rows x dim
  std::vector<std::vector<T>> conv_w;     // per width: filters x (width * dim)
  std::vector<std::vector<T>> conv_b;     // per width: filters
  std::vector<T> dense_w;                 // outputs x (widths * filters)
  std::vector<T> dense_b;                 // outputs

  std::size_t features() const { return widths.size() * filters; }
  std::size_t max_width() const;
  /// Same shapes, all zero.
  CnnParams zeros_like() const;

  template <typename U>
  CnnParams<U> cast() const;
};

/// Gradient with a sparse embedding part.
template <typename T>
struct CnnGradient {
  CnnParams<T> dense;  // embedding left empty
  std::map<std::uint32_t, std::vector<T>> embedding_rows;

  void add(const CnnGradient& other);
};

/// Intermediate values of one forward pass.
template <typename T>
struct ForwardCache {
  ModelTokens padded;
  std::vector<T> features;                // widths * filters, post ReLU + max-pool
  std::vector<std::size_t> argmax;        // position of the max per feature
  std::vector<T> logits;
  std::vector<T> probs;
};

template <typename T>
ForwardCache<T> forward(const CnnParams<T>& params, const ModelTokens& tokens);

/// KL(label || probs), with 0 log 0 = 0.
template <typename T>
T kl_divergence(std::span<const double> label, std::span<const T> probs);

/// Loss of one example plus its gradient (accumulated into `grad`).
template <typename T>
T example_gradient(const CnnParams<T>& params, const TrainingExample& ex, CnnGradient<T>& grad);

/// Mean-loss gradient over a batch. Serial reference and OpenMP kernel.
template <typename T>
T batch_gradient_serial(const CnnParams<T>& params, std::span<const TrainingExample> batch,
                        CnnGradient<T>& grad);
template <typename T>
T batch_gradient_parallel(const CnnParams<T>& params, std::span<const TrainingExample> batch,
                          CnnGradient<T>& grad, std::size_t threads);

/// Random small-scale initialisation; embedding rows drawn uniformly too.
template <typename T>
CnnParams<T> random_params(std::size_t vocab_rows, std::size_t dim, std::size_t outputs,
                           const CnnConfig& config, Rng& rng);

/// Max relative error between the analytic KL gradient and central
/// differences (h = 1e-5) over every parameter tensor (embedding rows of the
/// document's tokens included).
double gradient_check(const CnnParams<double>& params, const ModelTokens& tokens,
                      std::span<const double> label, double h = 1e-5);

struct TrainStats {
  std::vector<double> epoch_loss;  // index 0 = before training
};

/// Text CNN classifier for one internal node.
class LocalClassifier {
 public:
  LocalClassifier() = default;
  LocalClassifier(std::string node_id, CnnParams<float> params)
      : node_id_(std::move(node_id)), params_(std::move(params)) {}

  /// Embedding rows come from `space` (aligned with `vocab_tokens`, missing
  /// tokens get a random row); conv/dense layers are random.
  static LocalClassifier initialise(std::string node_id, std::size_t outputs,
                                    std::span<const std::string> vocab_tokens,
                                    const WordSpace& space, const CnnConfig& config);

  TrainStats train(std::span<const TrainingExample> examples, const CnnConfig& config);

  std::vector<double> predict(const ModelTokens& tokens) const;
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  const std::string& node_id() const { return node_id_; }
  const CnnParams<float>& params() const { return params_; }
  CnnParams<float>& params() { return params_; }

 private:
  std::string node_id_;
  CnnParams<float> params_;
  bool trained_ = false;
};

struct PathStep {
  std::string label;
  double confidence;
};

/// One classifier per internal node plus the shared vocabulary mapping.
class HierarchicalModel {
 public:
  HierarchicalModel(LabelHierarchy hierarchy, std::vector<std::string> vocab_tokens);

  const LabelHierarchy& hierarchy() const { return hierarchy_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  void set(LocalClassifier classifier);
  const LocalClassifier& at(std::string_view node_id) const;
  bool has(std::string_view node_id) const { return classifiers_.count(std::string(node_id)) > 0; }

  /// Maps tokens to model ids; out-of-vocabulary tokens are dropped.
  ModelTokens encode(std::span<const std::string> tokens) const;

  /// Greedy top-down descent; confidence is the product of chosen
  /// probabilities; ties go to the earlier child.
  std::vector<PathStep> predict_path(std::span<const std::string> tokens, double stop_below = 0.0) const;

  void save(const std::filesystem::path& path) const;
  static HierarchicalModel load(const std::filesystem::path& path);

 private:
  LabelHierarchy hierarchy_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::map<std::string, LocalClassifier> classifiers_;
};

/// Descends using per-node probability vectors supplied by `probs_of`.
template <class ProbFn>
std::vector<PathStep> descend(const LabelHierarchy& h, ProbFn&& probs_of, double stop_below = 0.0) {
  std::vector<PathStep> path;
  std::size_t node = h.root();
  double conf = 1.0;
  while (!h.is_leaf(node)) {
    const std::vector<double> p = probs_of(node);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.size(); ++j)
      if (p[j] > p[best]) best = j;
    if (stop_below > 0.0 && p[best] < stop_below && !path.empty()) break;
    conf *= p[best];
    node = h.node(node).children.at(best);
    path.push_back({h.node(node).id, conf});
  }
  return path;
}

}  // namespace repoclass
