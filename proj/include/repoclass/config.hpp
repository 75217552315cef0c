#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "repoclass/classifier.hpp"
#include "repoclass/corpus.hpp"
#include "repoclass/embedding.hpp"
#include "repoclass/enrichment.hpp"
#include "repoclass/pseudogen.hpp"

namespace repoclass {

/// Every tunable of the pipeline. Serialised as a sectioned key = value file:
///
///   [paths]       corpus, hierarchy, workdir
///   [pipeline]    seed, deterministic
///   [corpus]      remove_stopwords, max_document_tokens
///   [embedding]   dimension, proportions, samples_per_edge, negatives,
///                 learning_rate, final_learning_rate, workers, checkpoints,
///                 heldout_pairs
///   [enrichment]  max_keywords, min_document_frequency
///   [pseudogen]   docs_per_child, beta, tau, mean_length (0 = corpus mean),
///                 max_length
///   [classifier]  widths, filters, epochs, batch_size, learning_rate, beta1,
///                 beta2, epsilon, threads, stop_below
///   [evaluation]  fail_under
///   [fetch]       rpm, concurrency, base_url, token_env
///
/// Values may be quoted; lists are comma separated, optionally bracketed.
/// '#' and ';' start comments. Unknown sections or keys are errors.
struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path hierarchy;
  std::filesystem::path workdir = "work";
  std::uint64_t seed = 1;
  bool deterministic = false;

  TokenizerConfig tokenizer;
  EmbeddingConfig embedding;
  EnrichConfig enrichment;
  GenConfig generation{.mean_length = 0.0};
  CnnConfig classifier;
  double fail_under = 0.0;

  double fetch_rpm = 60.0;
  std::size_t fetch_concurrency = 4;
  std::string fetch_base_url = "https://api.github.com";
  std::string fetch_token_env;

  static PipelineConfig parse(std::string_view text);
  /// Relative paths in [paths] resolve against the file's directory.
  static PipelineConfig load(const std::filesystem::path& path);

  /// Sets the global seed and every module seed.
  void set_seed(std::uint64_t seed);
  /// Serial embedding trainer and single-threaded classifier batches.
  void make_deterministic();
  void validate() const;

  /// Canonical "key = value" lines of one section.
  std::string section_text(std::string_view section) const;
  /// Whole file in canonical form; parse(to_text()) round-trips.
  std::string to_text() const;
};

}  // namespace repoclass
