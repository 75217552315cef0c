#include "repoclass/hin.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace repoclass {

namespace {

constexpr std::array<std::string_view, 6> kKindNames = {"word", "doc", "user", "tag", "name", "label"};
constexpr std::array<std::string_view, kNumEdgeTypes> kEdgeNames = {"W-D", "W-U", "W-T", "W-N", "W-L"};
constexpr std::array<std::string_view, kNumEdgeTypes> kPathNames = {"W-D-W", "W-U-W", "W-T-W",
                                                                    "W-N-W", "W-L-W"};

std::size_t idx(EdgeType t) { return static_cast<std::size_t>(t); }
std::size_t idx(NodeKind k) { return static_cast<std::size_t>(k); }

}  // namespace

std::string_view to_string(NodeKind kind) { return kKindNames.at(idx(kind)); }
std::string_view to_string(EdgeType type) { return kEdgeNames.at(idx(type)); }
std::string_view metapath_name(EdgeType type) { return kPathNames.at(idx(type)); }

NodeKind parse_node_kind(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<NodeKind>(i);
  throw ParseError("unknown node kind '" + std::string(s) + "'");
}

EdgeType parse_edge_type(std::string_view s) {
  for (std::size_t i = 0; i < kNumEdgeTypes; ++i)
    if (kEdgeNames[i] == s || kPathNames[i] == s) return static_cast<EdgeType>(i);
  throw ParseError("unknown edge type '" + std::string(s) + "'");
}

NodeKind middle_kind(EdgeType type) { return static_cast<NodeKind>(idx(type) + 1); }

// AliasTable ---------------------------------------------------------------

AliasTable::AliasTable(std::span<const double> weights)
    : prob_(weights.size()), alias_(weights.size()) {
  build(weights, prob_, alias_);
}

void AliasTable::build(std::span<const double> weights, std::span<double> prob,
                       std::span<std::uint32_t> alias) {
  const std::size_t n = weights.size();
  if (n == 0) return;
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("alias table: negative or NaN weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("alias table: weights sum to zero");
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    prob[i] = weights[i] * static_cast<double>(n) / total;
    alias[i] = static_cast<std::uint32_t>(i);
    (prob[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    auto s = small.back();
    small.pop_back();
    auto l = large.back();
    alias[s] = l;
    prob[l] -= 1.0 - prob[s];
    if (prob[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) prob[i] = 1.0;
  for (auto i : small) prob[i] = 1.0;
}

std::size_t AliasTable::draw(std::span<const double> prob, std::span<const std::uint32_t> alias,
                             Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double x = unit(rng) * static_cast<double>(prob.size());
  auto i = std::min(static_cast<std::size_t>(x), prob.size() - 1);
  return (x - static_cast<double>(i)) < prob[i] ? i : alias[i];
}

std::size_t AliasTable::sample(Rng& rng) const {
  if (prob_.empty()) throw std::out_of_range("alias table is empty");
  return draw(prob_, alias_, rng);
}

// HinGraph -----------------------------------------------------------------

HinGraph HinGraph::build(std::span<const RepoRecord> records, std::span<const Document> documents,
                         const Vocabulary& vocab, const LabelHierarchy& hierarchy) {
  if (records.size() != documents.size())
    throw ValidationError("build_hin: records and documents differ in length");

  // Seeds must occur in at least one document.
  std::vector<std::string> missing;
  for (auto leaf : hierarchy.leaves()) {
    const auto& kw = hierarchy.node(leaf).keyword;
    auto id = vocab.find(kw);
    if (!id || vocab.corpus_frequency(*id) == 0) missing.push_back(kw);
  }
  if (!missing.empty()) {
    std::string msg = "seed keywords absent from the corpus documents:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }

  // Per-record tf, tag keys and name keys.
  struct Prepared {
    std::vector<std::pair<TokenId, double>> tf;
    std::vector<std::string> tags, names;
  };
  std::vector<Prepared> prep(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (documents[i].repo_id != records[i].id)
      throw ValidationError("build_hin: document/record id mismatch at " + records[i].id);
    std::map<TokenId, double> tf;
    for (auto t : documents[i].tokens) tf[t] += 1.0;
    prep[i].tf.assign(tf.begin(), tf.end());
    prep[i].tags = record_tags(records[i]);
    prep[i].names = record_name_tokens(records[i]);
  }

  std::vector<WeightedEdge> edges;
  std::map<std::pair<TokenId, std::string>, double> wu, wt, wn;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    for (auto [w, c] : prep[i].tf) {
      edges.push_back({EdgeType::WordDoc, vocab.token(w), r.id, c});
      if (!r.user.empty()) wu[{w, r.user}] += c;
      for (const auto& t : prep[i].tags) wt[{w, t}] += c;
      for (const auto& n : prep[i].names) wn[{w, n}] += c;
    }
  }
  auto flush = [&](EdgeType type, const auto& m) {
    for (const auto& [k, v] : m) edges.push_back({type, vocab.token(k.first), k.second, v});
  };
  flush(EdgeType::WordUser, wu);
  flush(EdgeType::WordTag, wt);
  flush(EdgeType::WordName, wn);
  // A seed links to its leaf and every ancestor below the (synthetic) root.
  for (auto leaf : hierarchy.leaves()) {
    const auto& kw = hierarchy.node(leaf).keyword;
    edges.push_back({EdgeType::WordLabel, kw, hierarchy.node(leaf).id, 1.0});
    for (auto a : hierarchy.ancestors(leaf)) {
      if (a == hierarchy.root()) continue;
      edges.push_back({EdgeType::WordLabel, kw, hierarchy.node(a).id, 1.0});
    }
  }
  return from_edges(vocab.tokens(), edges);
}

HinGraph HinGraph::from_edges(std::span<const std::string> words, std::span<const WeightedEdge> edges) {
  HinGraph g;
  for (const auto& w : words) {
    auto id = static_cast<NodeId>(g.nodes_.size());
    if (!g.index_[idx(NodeKind::Word)].emplace(w, id).second)
      throw ValidationError("hin: duplicate word '" + w + "'");
    g.nodes_.push_back({NodeKind::Word, w});
  }
  g.word_count_ = g.nodes_.size();

  std::array<std::set<std::string>, 6> keys;
  for (const auto& e : edges) keys[idx(middle_kind(e.type))].insert(e.other);
  for (std::size_t k = 1; k < keys.size(); ++k) {
    for (const auto& key : keys[k]) {
      auto id = static_cast<NodeId>(g.nodes_.size());
      g.index_[k].emplace(key, id);
      g.nodes_.push_back({static_cast<NodeKind>(k), key});
    }
  }

  std::vector<std::vector<std::pair<std::uint64_t, double>>> typed(kNumEdgeTypes);
  for (const auto& e : edges) {
    if (!(e.weight > 0.0)) throw ValidationError("hin: non-positive edge weight");
    auto w = g.find(NodeKind::Word, e.word);
    if (!w) throw ValidationError("hin: edge references unknown word '" + e.word + "'");
    auto o = *g.find(middle_kind(e.type), e.other);
    typed[idx(e.type)].push_back({g.pack(*w, o), e.weight});
  }
  g.finalize(std::move(typed));
  return g;
}

void HinGraph::finalize(std::vector<std::vector<std::pair<std::uint64_t, double>>> typed_edges) {
  const std::size_t n = nodes_.size();
  for (std::size_t t = 0; t < kNumEdgeTypes; ++t) {
    auto& list = typed_edges[t];
    std::sort(list.begin(), list.end());
    // Merge duplicate (word, other) pairs.
    std::vector<std::pair<std::uint64_t, double>> merged;
    for (const auto& e : list) {
      if (!merged.empty() && merged.back().first == e.first) {
        merged.back().second += e.second;
      } else {
        merged.push_back(e);
      }
    }
    edge_count_[t] = merged.size();

    std::vector<std::vector<Neighbor>> per_node(n);
    for (const auto& [key, w] : merged) {
      auto a = static_cast<NodeId>(key >> 32);
      auto b = static_cast<NodeId>(key & 0xffffffffu);
      per_node[a].push_back({b, w});
      per_node[b].push_back({a, w});
    }
    auto& adj = adj_[t];
    adj.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(per_node[i].begin(), per_node[i].end(),
                [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
      adj.offsets[i + 1] = adj.offsets[i] + per_node[i].size();
    }
    adj.entries.reserve(adj.offsets[n]);
    for (auto& v : per_node) adj.entries.insert(adj.entries.end(), v.begin(), v.end());
    adj.prob.assign(adj.entries.size(), 0.0);
    adj.alias.assign(adj.entries.size(), 0);
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) {
      auto b = adj.offsets[i], e = adj.offsets[i + 1];
      if (b == e) continue;
      weights.clear();
      for (auto k = b; k < e; ++k) weights.push_back(adj.entries[k].weight);
      AliasTable::build(weights, std::span(adj.prob).subspan(b, e - b),
                        std::span(adj.alias).subspan(b, e - b));
    }
    active_words_[t].clear();
    for (NodeId w = 0; w < word_count_; ++w)
      if (adj.offsets[w + 1] > adj.offsets[w]) active_words_[t].push_back(w);
  }
}

std::optional<NodeId> HinGraph::find(NodeKind kind, std::string_view key) const {
  const auto& m = index_[idx(kind)];
  auto it = m.find(std::string(key));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

NodeId HinGraph::id_of(const NodeRef& ref) const {
  auto id = find(ref.kind, ref.key);
  if (!id) {
    throw ValidationError("hin: unknown node " + std::string(to_string(ref.kind)) + ":" + ref.key);
  }
  return *id;
}

std::span<const Neighbor> HinGraph::neighbors(NodeId id, EdgeType type) const {
  const auto& adj = adj_[idx(type)];
  if (id >= nodes_.size()) throw ValidationError("hin: node id out of range");
  return std::span(adj.entries).subspan(adj.offsets[id], adj.offsets[id + 1] - adj.offsets[id]);
}

std::vector<std::pair<NodeRef, double>> HinGraph::neighbors(const NodeRef& ref, EdgeType type) const {
  std::vector<std::pair<NodeRef, double>> out;
  for (const auto& nb : neighbors(id_of(ref), type)) out.emplace_back(nodes_[nb.node], nb.weight);
  return out;
}

NodeId HinGraph::sample_neighbor(NodeId id, EdgeType type, Rng& rng) const {
  const auto& adj = adj_[idx(type)];
  auto b = adj.offsets.at(id), e = adj.offsets.at(id + 1);
  if (b == e) {
    throw std::out_of_range("hin: node " + nodes_[id].key + " has no " +
                            std::string(to_string(type)) + " neighbors");
  }
  auto k = AliasTable::draw(std::span(adj.prob).subspan(b, e - b),
                            std::span(adj.alias).subspan(b, e - b), rng);
  return adj.entries[b + k].node;
}

std::size_t HinGraph::edge_count() const {
  std::size_t s = 0;
  for (auto c : edge_count_) s += c;
  return s;
}

double HinGraph::strength(NodeId id) const {
  double s = 0.0;
  for (auto t : kAllEdgeTypes)
    for (const auto& nb : neighbors(id, t)) s += nb.weight;
  return s;
}

std::vector<WeightedEdge> HinGraph::edges() const {
  std::vector<WeightedEdge> out;
  for (auto t : kAllEdgeTypes) {
    for (NodeId w = 0; w < word_count_; ++w) {
      for (const auto& nb : neighbors(w, t))
        out.push_back({t, nodes_[w].key, nodes_[nb.node].key, nb.weight});
    }
  }
  return out;
}

void HinGraph::write_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "edge_type\tword_key\tother_key\tweight\n";
  char buf[64];
  for (const auto& e : edges()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    out << to_string(e.type) << '\t' << e.word << '\t' << e.other << '\t' << buf << '\n';
  }
}

std::vector<WeightedEdge> HinGraph::read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<WeightedEdge> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("edge_type", 0) == 0) continue;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      auto tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 4)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    try {
      out.push_back({parse_edge_type(cols[0]), cols[1], cols[2], std::stod(cols[3])});
    } catch (const std::invalid_argument&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad weight");
    }
  }
  return out;
}

}  // namespace repoclass
