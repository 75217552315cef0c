#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "repoclass/common.hpp"
#include "repoclass/corpus.hpp"
#include "repoclass/hierarchy.hpp"

namespace repoclass {

enum class NodeKind : std::uint8_t { Word, Doc, User, Tag, NameToken, Label };

/// The five word-centric edge types; each doubles as the meta-path W-X-W.
enum class EdgeType : std::uint8_t { WordDoc, WordUser, WordTag, WordName, WordLabel };

inline constexpr std::size_t kNumEdgeTypes = 5;
inline constexpr std::array<EdgeType, kNumEdgeTypes> kAllEdgeTypes = {
    EdgeType::WordDoc, EdgeType::WordUser, EdgeType::WordTag, EdgeType::WordName,
    EdgeType::WordLabel};

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeType type);  // "W-D", "W-U", ...
std::string_view metapath_name(EdgeType type);  // "W-D-W", ...
NodeKind parse_node_kind(std::string_view s);
EdgeType parse_edge_type(std::string_view s);  // accepts "W-D" or "W-D-W"
NodeKind middle_kind(EdgeType type);

struct NodeRef {
  NodeKind kind;
  std::string key;
  bool operator==(const NodeRef&) const = default;
};

using NodeId = std::uint32_t;

struct Neighbor {
  NodeId node;
  double weight;
};

/// Walker alias table over a fixed weight vector; O(1) draws.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);
  std::size_t size() const { return prob_.size(); }
  std::size_t sample(Rng& rng) const;

  // Raw layout, so tables can be packed contiguously.
  static void build(std::span<const double> weights, std::span<double> prob,
                    std::span<std::uint32_t> alias);
  static std::size_t draw(std::span<const double> prob, std::span<const std::uint32_t> alias,
                          Rng& rng);

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

struct WeightedEdge {
  EdgeType type;
  std::string word;
  std::string other;
  double weight;
};

/// Immutable word-centric star-schema network. Word nodes occupy ids
/// [0, |V|) in vocabulary order; the other kinds follow, each sorted by key,
/// so construction is independent of record order. Concurrent reads and
/// draws are safe; each caller owns its RNG.
class HinGraph {
 public:
  /// Builds the five tf-weighted edge types. Throws ValidationError listing
  /// seed keywords that never occur in any document.
  static HinGraph build(std::span<const RepoRecord> records, std::span<const Document> documents,
                        const Vocabulary& vocab, const LabelHierarchy& hierarchy);

  /// Reconstructs from a word list and an edge list (as written by write_tsv).
  static HinGraph from_edges(std::span<const std::string> words, std::span<const WeightedEdge> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t word_count() const { return word_count_; }
  const NodeRef& node(NodeId id) const { return nodes_.at(id); }
  std::optional<NodeId> find(NodeKind kind, std::string_view key) const;
  NodeId id_of(const NodeRef& ref) const;  // throws ValidationError

  std::span<const Neighbor> neighbors(NodeId id, EdgeType type) const;
  std::vector<std::pair<NodeRef, double>> neighbors(const NodeRef& ref, EdgeType type) const;

  /// Draws a neighbor with probability proportional to edge weight.
  /// Throws std::out_of_range when the node has no neighbor of that type.
  NodeId sample_neighbor(NodeId id, EdgeType type, Rng& rng) const;

  /// Word nodes with at least one edge of the given type.
  const std::vector<NodeId>& words_with_edges(EdgeType type) const {
    return active_words_[static_cast<std::size_t>(type)];
  }
  std::size_t edge_count(EdgeType type) const {
    return edge_count_[static_cast<std::size_t>(type)];
  }
  std::size_t edge_count() const;

  /// Sum of incident edge weights over all types.
  double strength(NodeId id) const;

  std::vector<WeightedEdge> edges() const;
  void write_tsv(const std::filesystem::path& path) const;
  static std::vector<WeightedEdge> read_tsv(const std::filesystem::path& path);

 private:
  struct Adjacency {
    std::vector<std::size_t> offsets;  // node_count + 1
    std::vector<Neighbor> entries;
    std::vector<double> prob;
    std::vector<std::uint32_t> alias;
  };

  void finalize(std::vector<std::vector<std::pair<std::uint64_t, double>>> typed_edges);
  std::uint64_t pack(NodeId a, NodeId b) const { return (std::uint64_t(a) << 32) | b; }

  std::vector<NodeRef> nodes_;
  std::array<std::unordered_map<std::string, NodeId>, 6> index_;
  std::size_t word_count_ = 0;
  std::array<Adjacency, kNumEdgeTypes> adj_;
  std::array<std::vector<NodeId>, kNumEdgeTypes> active_words_;
  std::array<std::size_t, kNumEdgeTypes> edge_count_{};
};

}  // namespace repoclass
