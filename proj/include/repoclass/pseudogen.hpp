#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "repoclass/common.hpp"
#include "repoclass/hin.hpp"
#include "repoclass/topics.hpp"
#include "repoclass/word_space.hpp"

namespace repoclass {

struct GenConfig {
  std::size_t docs_per_child = 500;
  double beta = 0.2;
  std::size_t tau = 50;
  double mean_length = 100.0;  // mean real document length
  std::size_t max_length = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PseudoDocument {
  std::string class_id;     // internal node whose classifier trains on it
  std::size_t child_index;  // source child
  std::vector<std::uint32_t> words;  // WordSpace rows
  std::vector<double> doc_vector;
  std::vector<double> label;
};

/// The tau rows with the largest inner product with `direction`
/// (ties: lexicographic), most similar first.
std::vector<std::uint32_t> local_vocabulary(std::span<const double> direction, const WordSpace& space,
                                            std::size_t tau);

/// Pr(w) = beta p_B(w) + (1 - beta) softmax over the local vocabulary of e_w.e_d.
/// `background` is indexed by WordSpace row.
std::vector<double> word_distribution(std::span<const double> direction, const WordSpace& space,
                                      std::span<const std::uint32_t> local,
                                      std::span<const double> background, double beta);

/// (1 - beta) + beta/m at the source child, beta/m elsewhere.
std::vector<double> pseudo_label(std::size_t m, std::size_t child, double beta);

/// Shared read-only state for drawing pseudo documents.
class PseudoGenerator {
 public:
  PseudoGenerator(const WordSpace& space, std::vector<double> background, GenConfig config);

  const GenConfig& config() const { return config_; }
  const WordSpace& space() const { return space_; }

  /// Draws one document for child `child` of `class_id`; the RNG stream is
  /// derived from (seed, class, child, index) so results do not depend on
  /// scheduling.
  PseudoDocument generate(const std::string& class_id, const VmfMixture& mixture,
                          std::size_t child, std::size_t index) const;

  /// All docs_per_child x m documents for one internal node.
  std::vector<PseudoDocument> generate_node_serial(const std::string& class_id,
                                                   const VmfMixture& mixture) const;
  std::vector<PseudoDocument> generate_node_parallel(const std::string& class_id,
                                                     const VmfMixture& mixture) const;

  /// Draws a token from the mixed distribution without materialising it.
  std::uint32_t draw_word(std::span<const std::uint32_t> local, std::span<const double> local_cdf,
                          Rng& rng) const;

 private:
  const WordSpace& space_;
  std::vector<double> background_;
  AliasTable background_table_;
  GenConfig config_;
};

void save_pseudo_documents(const std::filesystem::path& path, std::span<const PseudoDocument> docs,
                           const WordSpace& space);

struct PseudoRecord {
  std::string class_id;
  std::size_t child_index;
  std::vector<std::string> tokens;
  std::vector<double> label;
};
std::vector<PseudoRecord> load_pseudo_documents(const std::filesystem::path& path);

}  // namespace repoclass
