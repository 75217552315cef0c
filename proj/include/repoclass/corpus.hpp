#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "repoclass/common.hpp"
#include "repoclass/hierarchy.hpp"

namespace repoclass {

struct RepoRecord {
  std::string id;
  std::string user;
  std::string name;
  std::vector<std::string> tags;
  std::string description;
  std::string readme;
  std::optional<std::vector<std::string>> gold_labels;
};

struct TokenizerConfig {
  bool remove_stopwords = true;  // applies to document text only
  std::size_t max_document_tokens = 10000;
};

/// Lowercases ASCII letters and splits on every byte that is not an ASCII
/// alphanumeric (bytes >= 0x80 are kept so UTF-8 words survive intact).
/// Keeps tokens of length >= 2 that contain at least one non-digit.
std::vector<std::string> tokenize(std::string_view text);

bool is_stopword(std::string_view token);

/// Splits a repository name on '-', '_' and whitespace, dropping empties.
std::vector<std::string> segment_name(std::string_view name);

/// Normalized tag key: ASCII-lowercased, surrounding whitespace trimmed.
std::string normalize_tag(std::string_view tag);

/// Per-record distinct tag keys and lowercased name segments.
std::vector<std::string> record_tags(const RepoRecord& record);
std::vector<std::string> record_name_tokens(const RepoRecord& record);

// JSONL corpus I/O ---------------------------------------------------------

RepoRecord parse_record(std::string_view json_line);
std::string record_to_json(const RepoRecord& record);

/// Reads a JSONL corpus, preserving order. Throws ParseError naming the line
/// on malformed input and ValidationError on duplicate or empty ids.
std::vector<RepoRecord> load_corpus(const std::filesystem::path& path);
std::vector<RepoRecord> parse_corpus(std::string_view text);
void save_corpus(const std::filesystem::path& path, std::span<const RepoRecord> records);

/// Checks gold label paths against the hierarchy.
void validate_gold_labels(std::span<const RepoRecord> records, const LabelHierarchy& hierarchy);

// Vocabulary ---------------------------------------------------------------

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from a sorted, deduplicated token list.
  explicit Vocabulary(std::vector<std::string> sorted_tokens);

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id(std::string_view token) const;  // throws if absent
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::size_t document_frequency(TokenId id) const { return df_.at(id); }
  std::size_t corpus_frequency(TokenId id) const { return cf_.at(id); }
  void set_frequencies(std::vector<std::size_t> df, std::vector<std::size_t> cf);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::size_t> df_;
  std::vector<std::size_t> cf_;
};

struct Document {
  std::string repo_id;
  std::vector<TokenId> tokens;
};

/// Tokens of description followed by tokens of README, truncated to the
/// configured maximum.
std::vector<std::string> document_tokens(const RepoRecord& record, const TokenizerConfig& config);

/// Union of document tokens, tag tokens, name segment tokens and seed
/// keywords. Ids are assigned in lexicographic order; frequencies count
/// documents only.
Vocabulary build_vocabulary(std::span<const RepoRecord> records, const LabelHierarchy& hierarchy,
                            const TokenizerConfig& config = {});

Document build_document(const RepoRecord& record, const Vocabulary& vocab,
                        const TokenizerConfig& config = {});

std::vector<Document> build_documents(std::span<const RepoRecord> records, const Vocabulary& vocab,
                                      const TokenizerConfig& config = {});

/// p_B(w) = corpus frequency of w / total tokens, indexed by TokenId.
std::vector<double> background_distribution(std::span<const Document> documents,
                                            std::size_t vocab_size);

}  // namespace repoclass
