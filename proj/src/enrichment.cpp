#include "repoclass/enrichment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "repoclass/common.hpp"

namespace repoclass {

WordSpace::WordSpace(std::size_t dimension,
                     std::vector<std::pair<std::string, std::vector<double>>> rows)
    : dim_(dimension) {
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  tokens_.reserve(rows.size());
  data_.reserve(rows.size() * dim_);
  for (auto& [tok, vec] : rows) {
    if (vec.size() != dim_) throw ValidationError("word space: vector of '" + tok + "' has wrong size");
    if (!index_.emplace(tok, tokens_.size()).second)
      throw ValidationError("word space: duplicate token '" + tok + "'");
    tokens_.push_back(std::move(tok));
    data_.insert(data_.end(), vec.begin(), vec.end());
  }
}

std::optional<std::size_t> WordSpace::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EnrichResult keyword_enrich(std::span<const std::string> seeds, const WordSpace& space,
                            std::span<const std::string> candidates, std::size_t max_keywords) {
  const std::size_t L = seeds.size();
  if (L == 0) throw ValidationError("keyword_enrich: no seeds");
  if (max_keywords < 1) throw ValidationError("keyword_enrich: max_keywords must be >= 1");

  std::vector<std::size_t> seed_rows(L);
  for (std::size_t i = 0; i < L; ++i) {
    auto row = space.find(seeds[i]);
    if (!row) throw ValidationError("keyword_enrich: seed '" + seeds[i] + "' has no embedding");
    seed_rows[i] = *row;
    for (std::size_t j = 0; j < i; ++j)
      if (seed_rows[j] == *row) throw ValidationError("keyword_enrich: duplicate seed '" + seeds[i] + "'");
  }

  // Pool as sorted unique rows (row order == lexicographic token order).
  std::vector<std::size_t> pool(seed_rows);
  for (const auto& c : candidates)
    if (auto row = space.find(c)) pool.push_back(*row);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  // Each class scans its pool ranking once; K_i only ever holds the seed
  // plus a prefix of that ranking.
  std::vector<std::vector<std::size_t>> ranking(L);
  for (std::size_t i = 0; i < L; ++i) {
    auto seed_vec = space.row(seed_rows[i]);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(pool.size());
    for (auto r : pool)
      if (r != seed_rows[i]) scored.emplace_back(dot(seed_vec, space.row(r)), r);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    ranking[i].reserve(scored.size());
    for (const auto& s : scored) ranking[i].push_back(s.second);
  }

  std::vector<std::vector<std::size_t>> sets(L);
  std::unordered_map<std::size_t, std::size_t> owners;  // row -> number of sets containing it
  std::size_t shared = 0;
  auto insert = [&](std::size_t cls, std::size_t row) {
    sets[cls].push_back(row);
    if (++owners[row] == 2) ++shared;
  };
  for (std::size_t i = 0; i < L; ++i) insert(i, seed_rows[i]);

  EnrichResult res;
  std::vector<std::size_t> cursor(L, 0);
  bool added_this_round = false;
  while (shared == 0) {
    bool capped = false;
    for (const auto& s : sets) capped = capped || s.size() >= max_keywords;
    if (capped) {
      res.stop = EnrichStop::Cap;
      break;
    }
    bool exhausted = false;
    for (std::size_t i = 0; i < L && !exhausted; ++i) {
      if (cursor[i] >= ranking[i].size()) {
        exhausted = true;
        break;
      }
      insert(i, ranking[i][cursor[i]++]);
    }
    ++res.rounds;
    added_this_round = true;
    if (exhausted) {
      res.stop = EnrichStop::Exhausted;
      break;
    }
  }
  if (shared > 0 && added_this_round) {
    res.stop = EnrichStop::Intersection;
    for (auto& s : sets)
      if (s.size() > 1) s.pop_back();
  }

  res.keywords.resize(L);
  for (std::size_t i = 0; i < L; ++i)
    for (auto r : sets[i]) res.keywords[i].push_back(space.token(r));
  return res;
}

std::vector<std::string> candidate_pool(const Vocabulary& vocab, const WordSpace& space,
                                        const EnrichConfig& config) {
  std::vector<std::string> out;
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (vocab.document_frequency(id) >= config.min_document_frequency && space.find(vocab.token(id)))
      out.push_back(vocab.token(id));
  }
  return out;
}

std::string KeywordSets::to_json() const {
  nlohmann::ordered_json obj = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < leaf_ids.size(); ++i) obj[leaf_ids[i]] = keywords[i];
  return obj.dump(2);
}

std::string KeywordSets::to_table() const {
  std::size_t width = 5;
  for (const auto& id : leaf_ids) width = std::max(width, id.size());
  std::ostringstream out;
  out << std::string(width - 5, ' ') << "class | keywords\n";
  out << std::string(width, '-') << "-+-" << std::string(40, '-') << '\n';
  for (std::size_t i = 0; i < leaf_ids.size(); ++i) {
    out << std::string(width - leaf_ids[i].size(), ' ') << leaf_ids[i] << " |";
    for (const auto& k : keywords[i]) out << ' ' << k;
    out << '\n';
  }
  return out.str();
}

KeywordSets KeywordSets::from_json(std::string_view text) {
  nlohmann::ordered_json obj;
  try {
    obj = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("keywords: ") + e.what());
  }
  KeywordSets ks;
  for (auto& [k, v] : obj.items()) {
    ks.leaf_ids.push_back(k);
    ks.keywords.push_back(v.get<std::vector<std::string>>());
  }
  return ks;
}

KeywordSets KeywordSets::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace repoclass
