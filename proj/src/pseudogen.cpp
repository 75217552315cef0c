#include "repoclass/pseudogen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace repoclass {

void GenConfig::validate() const {
  if (docs_per_child < 1) throw ValidationError("generate: docs_per_child must be >= 1");
  if (tau < 1) throw ValidationError("generate: tau must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("generate: beta must be in [0, 1)");
  if (max_length < 1) throw ValidationError("generate: max_length must be >= 1");
}

std::vector<std::uint32_t> local_vocabulary(std::span<const double> direction, const WordSpace& space,
                                            std::size_t tau) {
  if (space.size() < tau) {
    spdlog::warn("local vocabulary: only {} words available (tau = {})", space.size(), tau);
    tau = space.size();
  }
  std::vector<std::pair<double, std::uint32_t>> scored(space.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    scored[i] = {dot(space.row(i), direction), static_cast<std::uint32_t>(i)};
  auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(tau), scored.end(),
                    better);
  std::vector<std::uint32_t> out(tau);
  for (std::size_t i = 0; i < tau; ++i) out[i] = scored[i].second;
  return out;
}

namespace {

// Softmax of e_w.e_d over the local vocabulary.
std::vector<double> local_softmax(std::span<const double> direction, const WordSpace& space,
                                  std::span<const std::uint32_t> local) {
  std::vector<double> s(local.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < local.size(); ++i) {
    s[i] = dot(space.row(local[i]), direction);
    mx = std::max(mx, s[i]);
  }
  double z = 0.0;
  for (auto& v : s) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : s) v /= z;
  return s;
}

}  // namespace

std::vector<double> word_distribution(std::span<const double> direction, const WordSpace& space,
                                      std::span<const std::uint32_t> local,
                                      std::span<const double> background, double beta) {
  if (background.size() != space.size())
    throw ValidationError("word_distribution: background size mismatch");
  std::vector<double> pr(background.size());
  for (std::size_t w = 0; w < pr.size(); ++w) pr[w] = beta * background[w];
  if (beta < 1.0) {
    auto soft = local_softmax(direction, space, local);
    for (std::size_t i = 0; i < local.size(); ++i) pr[local[i]] += (1.0 - beta) * soft[i];
  }
  return pr;
}

std::vector<double> pseudo_label(std::size_t m, std::size_t child, double beta) {
  if (m < 1 || child >= m) throw ValidationError("pseudo_label: child index out of range");
  const double share = beta / static_cast<double>(m);
  std::vector<double> label(m, share);
  label[child] = (1.0 - beta) + share;
  return label;
}

PseudoGenerator::PseudoGenerator(const WordSpace& space, std::vector<double> background,
                                 GenConfig config)
    : space_(space), background_(std::move(background)), config_(config) {
  config_.validate();
  if (background_.size() != space_.size())
    throw ValidationError("generator: background size mismatch");
  if (space_.size() == 0) throw ValidationError("generator: empty word space");
  background_table_ = AliasTable(background_);
}

std::uint32_t PseudoGenerator::draw_word(std::span<const std::uint32_t> local,
                                         std::span<const double> local_cdf, Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < config_.beta) return static_cast<std::uint32_t>(background_table_.sample(rng));
  const double u = unit(rng) * local_cdf.back();
  auto it = std::upper_bound(local_cdf.begin(), local_cdf.end(), u);
  auto k = std::min<std::size_t>(static_cast<std::size_t>(it - local_cdf.begin()), local.size() - 1);
  return local[k];
}

PseudoDocument PseudoGenerator::generate(const std::string& class_id, const VmfMixture& mixture,
                                         std::size_t child, std::size_t index) const {
  const std::size_t m = mixture.components.size();
  if (child >= m) throw ValidationError("generate: child index out of range");
  Rng rng = derive_rng(config_.seed, fnv1a(class_id) ^ (std::uint64_t(child) << 48), index);

  PseudoDocument doc;
  doc.class_id = class_id;
  doc.child_index = child;
  doc.doc_vector = sample_vmf(mixture.components[child], rng);
  auto local = local_vocabulary(doc.doc_vector, space_, config_.tau);
  auto soft = local_softmax(doc.doc_vector, space_, local);
  std::vector<double> cdf(soft.size());
  std::partial_sum(soft.begin(), soft.end(), cdf.begin());

  const double lo = std::max(1.0, std::floor(0.5 * config_.mean_length));
  const double hi = std::max(lo, std::ceil(1.5 * config_.mean_length));
  std::uniform_int_distribution<std::size_t> len_dist(static_cast<std::size_t>(lo),
                                                      static_cast<std::size_t>(hi));
  const std::size_t len = std::min(len_dist(rng), config_.max_length);
  doc.words.reserve(len);
  for (std::size_t i = 0; i < len; ++i) doc.words.push_back(draw_word(local, cdf, rng));
  doc.label = pseudo_label(m, child, config_.beta);
  return doc;
}

std::vector<PseudoDocument> PseudoGenerator::generate_node_serial(const std::string& class_id,
                                                                  const VmfMixture& mixture) const {
  const std::size_t m = mixture.components.size(), per = config_.docs_per_child;
  std::vector<PseudoDocument> out;
  out.reserve(m * per);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < per; ++i) out.push_back(generate(class_id, mixture, j, i));
  return out;
}

std::vector<PseudoDocument> PseudoGenerator::generate_node_parallel(const std::string& class_id,
                                                                    const VmfMixture& mixture) const {
  const std::size_t m = mixture.components.size(), per = config_.docs_per_child;
  std::vector<PseudoDocument> out(m * per);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t k = 0; k < m * per; ++k) out[k] = generate(class_id, mixture, k / per, k % per);
  return out;
}

void save_pseudo_documents(const std::filesystem::path& path, std::span<const PseudoDocument> docs,
                           const WordSpace& space) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& d : docs) {
    std::vector<std::string> tokens;
    tokens.reserve(d.words.size());
    for (auto w : d.words) tokens.push_back(space.token(w));
    nlohmann::ordered_json obj{{"class", d.class_id},
                               {"child_index", d.child_index},
                               {"tokens", tokens},
                               {"label", d.label}};
    out << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

std::vector<PseudoRecord> load_pseudo_documents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<PseudoRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto obj = nlohmann::json::parse(line);
      out.push_back({obj.at("class").get<std::string>(), obj.at("child_index").get<std::size_t>(),
                     obj.at("tokens").get<std::vector<std::string>>(),
                     obj.at("label").get<std::vector<double>>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace repoclass
