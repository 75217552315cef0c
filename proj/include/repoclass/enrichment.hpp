#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "repoclass/corpus.hpp"
#include "repoclass/word_space.hpp"

namespace repoclass {

struct EnrichConfig {
  std::size_t max_keywords = 100;        // per class, bounds the single-class case
  std::size_t min_document_frequency = 3;  // candidate pool filter
};

/// Ordered keyword set per leaf; keywords[i][0] is the seed of leaf i.
struct KeywordSets {
  std::vector<std::string> leaf_ids;
  std::vector<std::vector<std::string>> keywords;

  std::string to_json() const;
  std::string to_table() const;
  static KeywordSets from_json(std::string_view text);
  static KeywordSets load(const std::filesystem::path& path);
};

enum class EnrichStop { Intersection, Cap, Exhausted };

struct EnrichResult {
  std::vector<std::vector<std::string>> keywords;
  EnrichStop stop = EnrichStop::Intersection;
  std::size_t rounds = 0;
};

/// Grows every class, one nearest neighbor of its seed per round, until two
/// sets intersect; then every class drops its last-added word. Candidates
/// are ranked by inner product with the seed vector (ties: lexicographic).
/// Stops without removal when a class reaches `max_keywords` or runs out of
/// candidates. Seeds are always part of the candidate pool.
EnrichResult keyword_enrich(std::span<const std::string> seeds, const WordSpace& space,
                            std::span<const std::string> candidates, std::size_t max_keywords);

/// Candidate pool: words with document frequency >= the configured minimum
/// that have a vector.
std::vector<std::string> candidate_pool(const Vocabulary& vocab, const WordSpace& space,
                                        const EnrichConfig& config);

}  // namespace repoclass
