#include "repoclass/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>
#include <omp.h>

namespace repoclass {

void CnnConfig::validate() const {
  if (widths.empty()) throw ValidationError("classifier: no filter widths");
  for (auto w : widths)
    if (w < 1) throw ValidationError("classifier: filter width must be >= 1");
  if (filters < 1) throw ValidationError("classifier: filters must be >= 1");
  if (batch_size < 1) throw ValidationError("classifier: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("classifier: learning_rate must be > 0");
  if (threads < 1) throw ValidationError("classifier: threads must be >= 1");
}

std::size_t CnnConfig::max_width() const { return *std::max_element(widths.begin(), widths.end()); }

template <typename T>
std::size_t CnnParams<T>::max_width() const {
  return *std::max_element(widths.begin(), widths.end());
}

template <typename T>
CnnParams<T> CnnParams<T>::zeros_like() const {
  CnnParams z = *this;
  std::fill(z.embedding.begin(), z.embedding.end(), T(0));
  for (auto& v : z.conv_w) std::fill(v.begin(), v.end(), T(0));
  for (auto& v : z.conv_b) std::fill(v.begin(), v.end(), T(0));
  std::fill(z.dense_w.begin(), z.dense_w.end(), T(0));
  std::fill(z.dense_b.begin(), z.dense_b.end(), T(0));
  return z;
}

template <typename T>
template <typename U>
CnnParams<U> CnnParams<T>::cast() const {
  CnnParams<U> out;
  out.vocab_rows = vocab_rows;
  out.dim = dim;
  out.outputs = outputs;
  out.widths = widths;
  out.filters = filters;
  auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
  out.embedding = conv(embedding);
  for (const auto& v : conv_w) out.conv_w.push_back(conv(v));
  for (const auto& v : conv_b) out.conv_b.push_back(conv(v));
  out.dense_w = conv(dense_w);
  out.dense_b = conv(dense_b);
  return out;
}

template <typename T>
void CnnGradient<T>::add(const CnnGradient& other) {
  auto acc = [](std::vector<T>& a, const std::vector<T>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  for (std::size_t w = 0; w < dense.conv_w.size(); ++w) {
    acc(dense.conv_w[w], other.dense.conv_w[w]);
    acc(dense.conv_b[w], other.dense.conv_b[w]);
  }
  acc(dense.dense_w, other.dense.dense_w);
  acc(dense.dense_b, other.dense.dense_b);
  for (const auto& [row, g] : other.embedding_rows) {
    auto [it, fresh] = embedding_rows.try_emplace(row, g);
    if (!fresh) acc(it->second, g);
  }
}

namespace {

template <typename T>
CnnGradient<T> empty_gradient(const CnnParams<T>& p) {
  CnnGradient<T> g;
  g.dense = p.zeros_like();
  g.dense.embedding.clear();
  return g;
}

template <typename T>
void scale(CnnGradient<T>& g, T s) {
  auto mul = [s](std::vector<T>& v) {
    for (auto& x : v) x *= s;
  };
  for (auto& v : g.dense.conv_w) mul(v);
  for (auto& v : g.dense.conv_b) mul(v);
  mul(g.dense.dense_w);
  mul(g.dense.dense_b);
  for (auto& [row, v] : g.embedding_rows) mul(v);
}

}  // namespace

template <typename T>
ForwardCache<T> forward(const CnnParams<T>& p, const ModelTokens& tokens) {
  ForwardCache<T> c;
  c.padded = tokens;
  const std::size_t mw = p.max_width();
  while (c.padded.size() < mw) c.padded.push_back(0);
  const std::size_t n = c.padded.size(), d = p.dim, F = p.filters;
  for (auto t : c.padded)
    if (t >= p.vocab_rows) throw ValidationError("classifier: token id out of range");

  c.features.assign(p.features(), T(0));
  c.argmax.assign(p.features(), 0);
  for (std::size_t wi = 0; wi < p.widths.size(); ++wi) {
    const std::size_t w = p.widths[wi];
    const T* W = p.conv_w[wi].data();
    for (std::size_t f = 0; f < F; ++f) {
      T best = -std::numeric_limits<T>::infinity();
      std::size_t best_i = 0;
      const T* wf = W + f * w * d;
      for (std::size_t i = 0; i + w <= n; ++i) {
        T a = p.conv_b[wi][f];
        for (std::size_t r = 0; r < w; ++r) {
          const T* e = p.embedding.data() + std::size_t(c.padded[i + r]) * d;
          const T* wr = wf + r * d;
          for (std::size_t k = 0; k < d; ++k) a += wr[k] * e[k];
        }
        if (a > best) {
          best = a;
          best_i = i;
        }
      }
      c.features[wi * F + f] = best > T(0) ? best : T(0);
      c.argmax[wi * F + f] = best_i;
    }
  }

  const std::size_t m = p.outputs, FF = p.features();
  c.logits.assign(m, T(0));
  for (std::size_t j = 0; j < m; ++j) {
    T z = p.dense_b[j];
    for (std::size_t f = 0; f < FF; ++f) z += p.dense_w[j * FF + f] * c.features[f];
    c.logits[j] = z;
  }
  T mx = *std::max_element(c.logits.begin(), c.logits.end());
  c.probs.resize(m);
  T s = 0;
  for (std::size_t j = 0; j < m; ++j) {
    c.probs[j] = std::exp(c.logits[j] - mx);
    s += c.probs[j];
  }
  for (auto& v : c.probs) v /= s;
  return c;
}

template <typename T>
T kl_divergence(std::span<const double> label, std::span<const T> probs) {
  T kl = 0;
  for (std::size_t j = 0; j < label.size(); ++j) {
    if (label[j] <= 0.0) continue;
    const T y = static_cast<T>(label[j]);
    kl += y * (std::log(y) - std::log(std::max(probs[j], std::numeric_limits<T>::min())));
  }
  return kl;
}

template <typename T>
T example_gradient(const CnnParams<T>& p, const TrainingExample& ex, CnnGradient<T>& g) {
  auto c = forward(p, ex.tokens);
  if (ex.label.size() != p.outputs) throw ValidationError("classifier: label arity mismatch");
  const T loss = kl_divergence<T>(ex.label, c.probs);
  const std::size_t m = p.outputs, FF = p.features(), F = p.filters, d = p.dim;

  std::vector<T> dz(m);
  for (std::size_t j = 0; j < m; ++j) dz[j] = c.probs[j] - static_cast<T>(ex.label[j]);
  std::vector<T> dh(FF, T(0));
  for (std::size_t j = 0; j < m; ++j) {
    g.dense.dense_b[j] += dz[j];
    for (std::size_t f = 0; f < FF; ++f) {
      g.dense.dense_w[j * FF + f] += dz[j] * c.features[f];
      dh[f] += dz[j] * p.dense_w[j * FF + f];
    }
  }
  for (std::size_t wi = 0; wi < p.widths.size(); ++wi) {
    const std::size_t w = p.widths[wi];
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t feat = wi * F + f;
      if (!(c.features[feat] > T(0))) continue;
      const T gh = dh[feat];
      g.dense.conv_b[wi][f] += gh;
      const std::size_t pos = c.argmax[feat];
      T* gw = g.dense.conv_w[wi].data() + f * w * d;
      const T* wf = p.conv_w[wi].data() + f * w * d;
      for (std::size_t r = 0; r < w; ++r) {
        const auto tok = c.padded[pos + r];
        const T* e = p.embedding.data() + std::size_t(tok) * d;
        for (std::size_t k = 0; k < d; ++k) gw[r * d + k] += gh * e[k];
        if (tok == 0) continue;  // pad row stays fixed
        auto [it, fresh] = g.embedding_rows.try_emplace(tok, d, T(0));
        for (std::size_t k = 0; k < d; ++k) it->second[k] += gh * wf[r * d + k];
      }
    }
  }
  return loss;
}

template <typename T>
T batch_gradient_serial(const CnnParams<T>& p, std::span<const TrainingExample> batch,
                        CnnGradient<T>& grad) {
  grad = empty_gradient(p);
  T loss = 0;
  for (const auto& ex : batch) loss += example_gradient(p, ex, grad);
  const T inv = T(1) / static_cast<T>(batch.size());
  scale(grad, inv);
  return loss * inv;
}

template <typename T>
T batch_gradient_parallel(const CnnParams<T>& p, std::span<const TrainingExample> batch,
                          CnnGradient<T>& grad, std::size_t threads) {
  const int nt = static_cast<int>(std::max<std::size_t>(1, std::min(threads, batch.size())));
  std::vector<CnnGradient<T>> partial(nt, empty_gradient(p));
  std::vector<T> partial_loss(nt, T(0));
#pragma omp parallel num_threads(nt)
  {
    const int t = omp_get_thread_num();
    const int n = omp_get_num_threads();
    const std::size_t lo = batch.size() * t / n, hi = batch.size() * (t + 1) / n;
    for (std::size_t i = lo; i < hi; ++i) partial_loss[t] += example_gradient(p, batch[i], partial[t]);
  }
  grad = std::move(partial[0]);
  T loss = partial_loss[0];
  for (int t = 1; t < nt; ++t) {
    grad.add(partial[t]);
    loss += partial_loss[t];
  }
  const T inv = T(1) / static_cast<T>(batch.size());
  scale(grad, inv);
  return loss * inv;
}

template <typename T>
CnnParams<T> random_params(std::size_t vocab_rows, std::size_t dim, std::size_t outputs,
                           const CnnConfig& config, Rng& rng) {
  config.validate();
  CnnParams<T> p;
  p.vocab_rows = vocab_rows;
  p.dim = dim;
  p.outputs = outputs;
  p.widths = config.widths;
  p.filters = config.filters;
  auto fill = [&rng](std::vector<T>& v, std::size_t n, double a) {
    std::uniform_real_distribution<double> u(-a, a);
    v.resize(n);
    for (auto& x : v) x = static_cast<T>(u(rng));
  };
  fill(p.embedding, vocab_rows * dim, 0.25);
  std::fill(p.embedding.begin(), p.embedding.begin() + static_cast<std::ptrdiff_t>(dim), T(0));
  for (auto w : p.widths) {
    std::vector<T> cw;
    fill(cw, p.filters * w * dim, std::sqrt(6.0 / double(w * dim + p.filters)));
    p.conv_w.push_back(std::move(cw));
    p.conv_b.emplace_back(p.filters, T(0));
  }
  fill(p.dense_w, outputs * p.features(), std::sqrt(6.0 / double(p.features() + outputs)));
  p.dense_b.assign(outputs, T(0));
  return p;
}

double gradient_check(const CnnParams<double>& params, const ModelTokens& tokens,
                      std::span<const double> label, double h) {
  TrainingExample ex{tokens, std::vector<double>(label.begin(), label.end())};
  auto g = empty_gradient(params);
  example_gradient(params, ex, g);

  CnnParams<double> p = params;
  auto loss = [&] { return kl_divergence<double>(ex.label, forward(p, ex.tokens).probs); };
  double worst = 0.0;
  auto check = [&](double& x, double analytic) {
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t wi = 0; wi < p.widths.size(); ++wi) {
    for (std::size_t i = 0; i < p.conv_w[wi].size(); ++i) check(p.conv_w[wi][i], g.dense.conv_w[wi][i]);
    for (std::size_t i = 0; i < p.conv_b[wi].size(); ++i) check(p.conv_b[wi][i], g.dense.conv_b[wi][i]);
  }
  for (std::size_t i = 0; i < p.dense_w.size(); ++i) check(p.dense_w[i], g.dense.dense_w[i]);
  for (std::size_t i = 0; i < p.dense_b.size(); ++i) check(p.dense_b[i], g.dense.dense_b[i]);
  std::vector<std::uint32_t> rows(tokens.begin(), tokens.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  for (auto row : rows) {
    if (row == 0) continue;
    auto it = g.embedding_rows.find(row);
    for (std::size_t k = 0; k < p.dim; ++k) {
      const double a = it == g.embedding_rows.end() ? 0.0 : it->second[k];
      check(p.embedding[std::size_t(row) * p.dim + k], a);
    }
  }
  return worst;
}

// LocalClassifier ----------------------------------------------------------

LocalClassifier LocalClassifier::initialise(std::string node_id, std::size_t outputs,
                                            std::span<const std::string> vocab_tokens,
                                            const WordSpace& space, const CnnConfig& config) {
  Rng rng = derive_rng(config.seed, fnv1a(node_id), 0xc22);
  auto p = random_params<float>(vocab_tokens.size() + 1, space.dimension(), outputs, config, rng);
  for (std::size_t t = 0; t < vocab_tokens.size(); ++t) {
    if (auto row = space.find(vocab_tokens[t])) {
      auto v = space.row(*row);
      std::copy(v.begin(), v.end(), p.embedding.begin() + static_cast<std::ptrdiff_t>((t + 1) * p.dim));
    }
  }
  return LocalClassifier(std::move(node_id), std::move(p));
}

namespace {

struct AdamState {
  std::vector<float> m, v;
  void ensure(std::size_t n) {
    if (m.size() != n) {
      m.assign(n, 0.f);
      v.assign(n, 0.f);
    }
  }
};

void adam_update(std::vector<float>& param, const std::vector<float>& grad, AdamState& st,
                 std::size_t offset, std::size_t count, const CnnConfig& c, double bc1, double bc2) {
  const float lr = static_cast<float>(c.learning_rate);
  const float b1 = static_cast<float>(c.beta1), b2 = static_cast<float>(c.beta2);
  for (std::size_t i = 0; i < count; ++i) {
    const float gi = grad[i];
    float& m = st.m[offset + i];
    float& v = st.v[offset + i];
    m = b1 * m + (1.f - b1) * gi;
    v = b2 * v + (1.f - b2) * gi * gi;
    const double mh = m / bc1, vh = v / bc2;
    param[offset + i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + c.epsilon));
  }
}

}  // namespace

TrainStats LocalClassifier::train(std::span<const TrainingExample> examples, const CnnConfig& config) {
  config.validate();
  if (examples.empty()) throw ValidationError("classifier '" + node_id_ + "': no training examples");
  std::vector<std::size_t> per_child(params_.outputs, 0);
  for (const auto& ex : examples) {
    if (ex.label.size() != params_.outputs)
      throw ValidationError("classifier '" + node_id_ + "': label arity mismatch");
    auto j = static_cast<std::size_t>(std::max_element(ex.label.begin(), ex.label.end()) - ex.label.begin());
    ++per_child[j];
  }
  for (std::size_t j = 0; j < per_child.size(); ++j)
    if (per_child[j] == 0 && params_.outputs > 1)
      throw ValidationError("classifier '" + node_id_ + "': child " + std::to_string(j) +
                            " has no documents");

  auto mean_loss = [&] {
    double s = 0.0;
    for (const auto& ex : examples) s += kl_divergence<float>(ex.label, forward(params_, ex.tokens).probs);
    return s / static_cast<double>(examples.size());
  };

  TrainStats stats;
  stats.epoch_loss.push_back(mean_loss());
  Rng rng = derive_rng(config.seed, fnv1a(node_id_), 0x7a1);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  AdamState emb_state;
  emb_state.ensure(params_.embedding.size());
  std::vector<AdamState> cw(params_.widths.size()), cb(params_.widths.size());
  AdamState dw, db;
  for (std::size_t wi = 0; wi < params_.widths.size(); ++wi) {
    cw[wi].ensure(params_.conv_w[wi].size());
    cb[wi].ensure(params_.conv_b[wi].size());
  }
  dw.ensure(params_.dense_w.size());
  db.ensure(params_.dense_b.size());

  std::size_t step = 0;
  std::vector<TrainingExample> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i)
        batch.push_back(examples[order[i]]);
      CnnGradient<float> g;
      const float loss = config.threads > 1 ? batch_gradient_parallel(params_, batch, g, config.threads)
                                            : batch_gradient_serial(params_, batch, g);
      if (!std::isfinite(loss)) {
        throw NumericError("classifier '" + node_id_ + "': non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step) +
                           "; lower classifier.learning_rate");
      }
      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, double(step));
      const double bc2 = 1.0 - std::pow(config.beta2, double(step));
      for (std::size_t wi = 0; wi < params_.widths.size(); ++wi) {
        adam_update(params_.conv_w[wi], g.dense.conv_w[wi], cw[wi], 0, params_.conv_w[wi].size(), config, bc1, bc2);
        adam_update(params_.conv_b[wi], g.dense.conv_b[wi], cb[wi], 0, params_.conv_b[wi].size(), config, bc1, bc2);
      }
      adam_update(params_.dense_w, g.dense.dense_w, dw, 0, params_.dense_w.size(), config, bc1, bc2);
      adam_update(params_.dense_b, g.dense.dense_b, db, 0, params_.dense_b.size(), config, bc1, bc2);
      // Lazy update: only rows touched by the batch move.
      for (const auto& [row, grow] : g.embedding_rows) {
        std::vector<float> full(params_.dim);
        std::copy(grow.begin(), grow.end(), full.begin());
        std::vector<float> slice(params_.embedding.begin() + std::ptrdiff_t(row * params_.dim),
                                 params_.embedding.begin() + std::ptrdiff_t((row + 1) * params_.dim));
        AdamState view;
        view.m.assign(emb_state.m.begin() + std::ptrdiff_t(row * params_.dim),
                      emb_state.m.begin() + std::ptrdiff_t((row + 1) * params_.dim));
        view.v.assign(emb_state.v.begin() + std::ptrdiff_t(row * params_.dim),
                      emb_state.v.begin() + std::ptrdiff_t((row + 1) * params_.dim));
        adam_update(slice, full, view, 0, params_.dim, config, bc1, bc2);
        std::copy(slice.begin(), slice.end(), params_.embedding.begin() + std::ptrdiff_t(row * params_.dim));
        std::copy(view.m.begin(), view.m.end(), emb_state.m.begin() + std::ptrdiff_t(row * params_.dim));
        std::copy(view.v.begin(), view.v.end(), emb_state.v.begin() + std::ptrdiff_t(row * params_.dim));
      }
    }
    stats.epoch_loss.push_back(mean_loss());
  }
  trained_ = true;
  return stats;
}

std::vector<double> LocalClassifier::predict(const ModelTokens& tokens) const {
  if (!trained_) throw ValidationError("classifier '" + node_id_ + "' is not trained");
  auto c = forward(params_, tokens);
  return {c.probs.begin(), c.probs.end()};
}

// HierarchicalModel --------------------------------------------------------

HierarchicalModel::HierarchicalModel(LabelHierarchy hierarchy, std::vector<std::string> vocab_tokens)
    : hierarchy_(std::move(hierarchy)), vocab_(std::move(vocab_tokens)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<std::uint32_t>(i + 1));
}

void HierarchicalModel::set(LocalClassifier classifier) {
  auto node = hierarchy_.index_of(classifier.node_id());
  if (hierarchy_.is_leaf(node)) throw ValidationError("classifier attached to leaf '" + classifier.node_id() + "'");
  if (classifier.params().outputs != hierarchy_.node(node).children.size())
    throw ValidationError("classifier '" + classifier.node_id() + "' has the wrong arity");
  classifiers_[classifier.node_id()] = std::move(classifier);
}

const LocalClassifier& HierarchicalModel::at(std::string_view node_id) const {
  auto it = classifiers_.find(std::string(node_id));
  if (it == classifiers_.end()) throw ValidationError("no classifier for node '" + std::string(node_id) + "'");
  return it->second;
}

ModelTokens HierarchicalModel::encode(std::span<const std::string> tokens) const {
  ModelTokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it != index_.end()) out.push_back(it->second);
  }
  return out;
}

std::vector<PathStep> HierarchicalModel::predict_path(std::span<const std::string> tokens,
                                                      double stop_below) const {
  const auto ids = encode(tokens);
  return descend(
      hierarchy_, [&](std::size_t node) { return at(hierarchy_.node(node).id).predict(ids); }, stop_below);
}

namespace {

constexpr char kMagic[8] = {'R', 'C', 'L', 'S', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_floats(std::ifstream& in, std::vector<float>& v, std::size_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw ParseError("model file truncated");
}

}  // namespace

void HierarchicalModel::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json header;
  header["format"] = "repoclass-model";
  header["version"] = kFormatVersion;
  header["hierarchy"] = nlohmann::ordered_json::parse(hierarchy_.to_json());
  header["vocab"] = vocab_;
  auto& list = header["classifiers"] = nlohmann::ordered_json::array();
  for (const auto& [id, c] : classifiers_) {
    const auto& p = c.params();
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    tensors.push_back({{"name", "embedding"}, {"shape", {p.vocab_rows, p.dim}}});
    for (std::size_t wi = 0; wi < p.widths.size(); ++wi) {
      tensors.push_back({{"name", "conv_w" + std::to_string(p.widths[wi])},
                         {"shape", {p.filters, p.widths[wi] * p.dim}}});
      tensors.push_back({{"name", "conv_b" + std::to_string(p.widths[wi])}, {"shape", {p.filters}}});
    }
    tensors.push_back({{"name", "dense_w"}, {"shape", {p.outputs, p.features()}}});
    tensors.push_back({{"name", "dense_b"}, {"shape", {p.outputs}}});
    list.push_back({{"node", id},
                    {"outputs", p.outputs},
                    {"dim", p.dim},
                    {"widths", p.widths},
                    {"filters", p.filters},
                    {"trained", c.trained()},
                    {"dtype", "float32-le"},
                    {"tensors", tensors}});
  }
  const std::string text = header.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kFormatVersion;
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [id, c] : classifiers_) {
    const auto& p = c.params();
    write_floats(out, p.embedding);
    for (std::size_t wi = 0; wi < p.widths.size(); ++wi) {
      write_floats(out, p.conv_w[wi]);
      write_floats(out, p.conv_b[wi]);
    }
    write_floats(out, p.dense_w);
    write_floats(out, p.dense_b);
  }
}

HierarchicalModel HierarchicalModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ParseError(path.string() + ": not a model file");
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || version != kFormatVersion)
    throw ParseError(path.string() + ": unsupported model version " + std::to_string(version));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  HierarchicalModel model(LabelHierarchy::from_json(header.at("hierarchy").dump()),
                          header.at("vocab").get<std::vector<std::string>>());
  for (const auto& entry : header.at("classifiers")) {
    CnnParams<float> p;
    p.outputs = entry.at("outputs").get<std::size_t>();
    p.dim = entry.at("dim").get<std::size_t>();
    p.widths = entry.at("widths").get<std::vector<std::size_t>>();
    p.filters = entry.at("filters").get<std::size_t>();
    p.vocab_rows = model.vocab_.size() + 1;
    read_floats(in, p.embedding, p.vocab_rows * p.dim);
    for (auto w : p.widths) {
      p.conv_w.emplace_back();
      read_floats(in, p.conv_w.back(), p.filters * w * p.dim);
      p.conv_b.emplace_back();
      read_floats(in, p.conv_b.back(), p.filters);
    }
    read_floats(in, p.dense_w, p.outputs * p.features());
    read_floats(in, p.dense_b, p.outputs);
    LocalClassifier c(entry.at("node").get<std::string>(), std::move(p));
    if (entry.value("trained", false)) c.mark_trained();
    model.set(std::move(c));
  }
  return model;
}

#define REPOCLASS_INSTANTIATE(T)                                                                  \
  template struct CnnParams<T>;                                                                   \
  template struct CnnGradient<T>;                                                                 \
  template ForwardCache<T> forward(const CnnParams<T>&, const ModelTokens&);                      \
  template T kl_divergence(std::span<const double>, std::span<const T>);                          \
  template T example_gradient(const CnnParams<T>&, const TrainingExample&, CnnGradient<T>&);      \
  template T batch_gradient_serial(const CnnParams<T>&, std::span<const TrainingExample>,         \
                                   CnnGradient<T>&);                                              \
  template T batch_gradient_parallel(const CnnParams<T>&, std::span<const TrainingExample>,       \
                                     CnnGradient<T>&, std::size_t);                               \
  template CnnParams<T> random_params(std::size_t, std::size_t, std::size_t, const CnnConfig&, Rng&);

REPOCLASS_INSTANTIATE(float)
REPOCLASS_INSTANTIATE(double)
template CnnParams<double> CnnParams<float>::cast<double>() const;
template CnnParams<float> CnnParams<double>::cast<float>() const;

}  // namespace repoclass
