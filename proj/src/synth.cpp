#include "repoclass/synth.hpp"

#include <algorithm>

#include <json.hpp>

#include "repoclass/common.hpp"

namespace repoclass {

void SynthConfig::validate() const {
  if (level1 < 1 || leaves_per_node < 1) throw ValidationError("synth: hierarchy shape must be positive");
  if (topical_words < 2) throw ValidationError("synth: topical_words must be >= 2");
  if (background_words < 1) throw ValidationError("synth: background_words must be >= 1");
  if (!(topical_fraction > 0.0 && topical_fraction <= 1.0))
    throw ValidationError("synth: topical_fraction must be in (0, 1]");
  if (min_length < 1 || max_length < min_length) throw ValidationError("synth: bad document length range");
  if (users_per_leaf < 1) throw ValidationError("synth: users_per_leaf must be >= 1");
  if (tags_per_repo > topical_words) throw ValidationError("synth: tags_per_repo exceeds topical_words");
}

SynthCorpus make_synthetic(const SynthConfig& c) {
  c.validate();
  const std::size_t leaves = c.level1 * c.leaves_per_node;
  auto word = [](std::size_t leaf, std::size_t k) { return "t" + std::to_string(leaf) + "w" + std::to_string(k); };

  nlohmann::ordered_json root{{"id", "root"}, {"name", "root"}, {"children", nlohmann::ordered_json::array()}};
  std::vector<std::vector<std::string>> leaf_path(leaves);
  for (std::size_t a = 0; a < c.level1; ++a) {
    const std::string aid = "c" + std::to_string(a);
    nlohmann::ordered_json node{{"id", aid}, {"name", "topic " + std::to_string(a)},
                                {"children", nlohmann::ordered_json::array()}};
    for (std::size_t b = 0; b < c.leaves_per_node; ++b) {
      const std::size_t leaf = a * c.leaves_per_node + b;
      const std::string lid = aid + "." + std::to_string(b);
      node["children"].push_back(
          {{"id", lid}, {"name", "topic " + std::to_string(a) + "." + std::to_string(b)}, {"keyword", word(leaf, 0)}});
      leaf_path[leaf] = {aid, lid};
    }
    root["children"].push_back(node);
  }

  SynthCorpus out;
  out.hierarchy_json = root.dump(2);
  Rng rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> topical(0, c.topical_words - 1);
  std::uniform_int_distribution<std::size_t> background(0, c.background_words - 1);
  std::uniform_int_distribution<std::size_t> length(c.min_length, c.max_length);
  std::uniform_int_distribution<std::size_t> user(0, c.users_per_leaf - 1);

  auto draw = [&](std::size_t leaf) {
    return unit(rng) < c.topical_fraction ? word(leaf, topical(rng)) : "bg" + std::to_string(background(rng));
  };
  for (std::size_t i = 0; i < c.repos; ++i) {
    const std::size_t leaf = i % leaves;
    RepoRecord r;
    r.id = "repo" + std::to_string(i);
    r.user = "u" + std::to_string(leaf) + "x" + std::to_string(user(rng));
    r.name = word(leaf, topical(rng)) + "-" + word(leaf, topical(rng));
    while (r.tags.size() < c.tags_per_repo) {
      auto t = word(leaf, topical(rng));
      if (std::find(r.tags.begin(), r.tags.end(), t) == r.tags.end()) r.tags.push_back(t);
    }
    const std::size_t n = length(rng);
    const std::size_t desc = std::min<std::size_t>(10, n);
    for (std::size_t k = 0; k < n; ++k) {
      std::string& field = k < desc ? r.description : r.readme;
      if (!field.empty()) field += ' ';
      field += draw(leaf);
    }
    r.gold_labels = leaf_path[leaf];
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace repoclass
