#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "repoclass/corpus.hpp"
#include "repoclass/hierarchy.hpp"

namespace repoclass {

/// Planted-topic corpus. Leaf j owns the disjoint vocabulary t{j}w0 ..
/// t{j}w{topical_words-1} (seed t{j}w0); every document mixes topical and
/// shared background (bg0 ..) tokens. Each synthetic user owns repositories
/// of a single leaf.
struct SynthConfig {
  std::size_t level1 = 2;
  std::size_t leaves_per_node = 2;
  std::size_t repos = 400;
  std::size_t topical_words = 30;
  std::size_t background_words = 100;
  double topical_fraction = 0.7;
  std::size_t min_length = 40;
  std::size_t max_length = 80;
  std::size_t users_per_leaf = 5;
  std::size_t tags_per_repo = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthCorpus {
  std::string hierarchy_json;
  std::vector<RepoRecord> records;  // gold labels set
};

SynthCorpus make_synthetic(const SynthConfig& config);

}  // namespace repoclass
