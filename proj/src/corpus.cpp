#include "repoclass/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace repoclass {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 64> kStopwords = {
    "a",     "an",    "and",   "are",   "as",    "at",    "be",    "been",  "but",  "by",
    "can",   "do",    "for",   "from",  "has",   "have",  "he",    "her",   "his",  "how",
    "if",    "in",    "into",  "is",    "it",    "its",   "me",    "my",    "no",   "not",
    "of",    "on",    "or",    "our",   "she",   "so",    "such",  "than",  "that", "the",
    "their", "them",  "then",  "there", "these", "they",  "this",  "those", "to",   "us",
    "was",   "we",    "were",  "what",  "when",  "which", "who",   "will",  "with", "would",
    "you",   "your",  "yours", "also"};

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool keep_token(const std::string& tok) {
  if (tok.size() < 2) return false;
  return std::any_of(tok.begin(), tok.end(),
                     [](unsigned char c) { return !(c >= '0' && c <= '9'); });
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> get_string_array(const json& obj, const char* key, std::size_t line) {
  std::vector<std::string> out;
  if (!obj.contains(key) || obj[key].is_null()) return out;
  if (!obj[key].is_array()) {
    throw ParseError("line " + std::to_string(line) + ": \"" + key + "\" must be an array");
  }
  for (const auto& v : obj[key]) {
    if (!v.is_string()) {
      throw ParseError("line " + std::to_string(line) + ": \"" + key + "\" must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string get_string(const json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || obj[key].is_null()) return {};
  if (!obj[key].is_string()) {
    throw ParseError("line " + std::to_string(line) + ": \"" + key + "\" must be a string");
  }
  return obj[key].get<std::string>();
}

RepoRecord parse_record_at(std::string_view text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line) + ": " + e.what());
  }
  if (!obj.is_object()) throw ParseError("line " + std::to_string(line) + ": expected an object");
  RepoRecord r;
  r.id = get_string(obj, "id", line);
  if (r.id.empty()) throw ValidationError("line " + std::to_string(line) + ": missing or empty id");
  r.user = get_string(obj, "user", line);
  r.name = get_string(obj, "name", line);
  r.tags = get_string_array(obj, "tags", line);
  r.description = get_string(obj, "description", line);
  r.readme = get_string(obj, "readme", line);
  if (obj.contains("labels") && !obj["labels"].is_null())
    r.gold_labels = get_string_array(obj, "labels", line);
  return r;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (keep_token(cur)) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

bool is_stopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::vector<std::string> segment_name(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string normalize_tag(std::string_view tag) {
  auto b = tag.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = tag.find_last_not_of(" \t\r\n");
  return ascii_lower(tag.substr(b, e - b + 1));
}

std::vector<std::string> record_tags(const RepoRecord& record) {
  std::set<std::string> keys;
  for (const auto& t : record.tags) {
    auto k = normalize_tag(t);
    if (!k.empty()) keys.insert(std::move(k));
  }
  return {keys.begin(), keys.end()};
}

std::vector<std::string> record_name_tokens(const RepoRecord& record) {
  std::set<std::string> keys;
  for (const auto& seg : segment_name(record.name)) keys.insert(ascii_lower(seg));
  return {keys.begin(), keys.end()};
}

RepoRecord parse_record(std::string_view json_line) { return parse_record_at(json_line, 1); }

std::string record_to_json(const RepoRecord& r) {
  json obj{{"id", r.id},     {"user", r.user},          {"name", r.name},
           {"tags", r.tags}, {"description", r.description}, {"readme", r.readme}};
  if (r.gold_labels) obj["labels"] = *r.gold_labels;
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<RepoRecord> parse_corpus(std::string_view text) {
  std::vector<RepoRecord> out;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      auto rec = parse_record_at(line, line_no);
      if (!ids.insert(rec.id).second) {
        throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + rec.id + "'");
      }
      out.push_back(std::move(rec));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

std::vector<RepoRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

void save_corpus(const std::filesystem::path& path, std::span<const RepoRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write corpus file " + path.string());
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

void validate_gold_labels(std::span<const RepoRecord> records, const LabelHierarchy& hierarchy) {
  for (const auto& r : records) {
    if (!r.gold_labels) continue;
    try {
      hierarchy.resolve_path(*r.gold_labels);
    } catch (const ValidationError& e) {
      throw ValidationError("record '" + r.id + "': " + e.what());
    }
  }
}

// Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> sorted_tokens) : tokens_(std::move(sorted_tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ValidationError("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
  df_.assign(tokens_.size(), 0);
  cf_.assign(tokens_.size(), 0);
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw ValidationError("token '" + std::string(token) + "' not in vocabulary");
  return *found;
}

void Vocabulary::set_frequencies(std::vector<std::size_t> df, std::vector<std::size_t> cf) {
  if (df.size() != tokens_.size() || cf.size() != tokens_.size())
    throw ValidationError("vocabulary: frequency table size mismatch");
  df_ = std::move(df);
  cf_ = std::move(cf);
}

std::vector<std::string> document_tokens(const RepoRecord& record, const TokenizerConfig& config) {
  auto toks = tokenize(record.description);
  auto readme = tokenize(record.readme);
  toks.insert(toks.end(), std::make_move_iterator(readme.begin()),
              std::make_move_iterator(readme.end()));
  if (config.remove_stopwords) std::erase_if(toks, [](const std::string& t) { return is_stopword(t); });
  if (toks.size() > config.max_document_tokens) toks.resize(config.max_document_tokens);
  return toks;
}

Vocabulary build_vocabulary(std::span<const RepoRecord> records, const LabelHierarchy& hierarchy,
                            const TokenizerConfig& config) {
  const std::size_t n = records.size();
  std::vector<std::vector<std::string>> doc_toks(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < n; ++i) doc_toks[i] = document_tokens(records[i], config);

  std::set<std::string> all;
  for (const auto& toks : doc_toks) all.insert(toks.begin(), toks.end());
  for (const auto& r : records) {
    for (const auto& tag : r.tags)
      for (auto& t : tokenize(tag)) all.insert(std::move(t));
    for (const auto& seg : segment_name(r.name))
      for (auto& t : tokenize(seg)) all.insert(std::move(t));
  }
  for (auto leaf : hierarchy.leaves()) all.insert(hierarchy.node(leaf).keyword);

  Vocabulary vocab(std::vector<std::string>(all.begin(), all.end()));
  std::vector<std::size_t> df(vocab.size(), 0), cf(vocab.size(), 0);
  std::vector<TokenId> seen;
  for (const auto& toks : doc_toks) {
    seen.clear();
    for (const auto& t : toks) {
      auto id = *vocab.find(t);
      ++cf[id];
      seen.push_back(id);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto id : seen) ++df[id];
  }
  vocab.set_frequencies(std::move(df), std::move(cf));
  return vocab;
}

Document build_document(const RepoRecord& record, const Vocabulary& vocab,
                        const TokenizerConfig& config) {
  Document doc;
  doc.repo_id = record.id;
  for (const auto& t : document_tokens(record, config)) {
    if (auto id = vocab.find(t)) doc.tokens.push_back(*id);
  }
  return doc;
}

std::vector<Document> build_documents(std::span<const RepoRecord> records, const Vocabulary& vocab,
                                      const TokenizerConfig& config) {
  std::vector<Document> docs(records.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < records.size(); ++i) docs[i] = build_document(records[i], vocab, config);
  return docs;
}

std::vector<double> background_distribution(std::span<const Document> documents,
                                            std::size_t vocab_size) {
  std::vector<double> counts(vocab_size, 0.0);
  std::size_t total = 0;
  for (const auto& d : documents) {
    for (auto t : d.tokens) {
      if (t >= vocab_size) throw ValidationError("background: token id out of range");
      counts[t] += 1.0;
    }
    total += d.tokens.size();
  }
  if (total == 0) throw ValidationError("background distribution of an empty corpus");
  for (auto& c : counts) c /= static_cast<double>(total);
  return counts;
}

}  // namespace repoclass
