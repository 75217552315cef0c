#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace repoclass {

struct LabelNode {
  std::string id;
  std::string name;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  std::string keyword;  // normalized seed, leaves only
  std::size_t depth = 0;
};

/// Rooted category tree. Node 0 is the root; nodes are stored in pre-order.
/// Every leaf carries exactly one normalized seed keyword and seeds are
/// pairwise distinct.
class LabelHierarchy {
 public:
  static LabelHierarchy from_json(std::string_view text);
  static LabelHierarchy load(const std::filesystem::path& path);
  std::string to_json() const;

  std::size_t size() const { return nodes_.size(); }
  std::size_t root() const { return 0; }
  const LabelNode& node(std::size_t index) const { return nodes_.at(index); }
  const std::vector<LabelNode>& nodes() const { return nodes_; }
  bool is_leaf(std::size_t index) const { return nodes_.at(index).children.empty(); }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws ValidationError

  /// Leaves and internal nodes in pre-order.
  std::vector<std::size_t> leaves() const;
  std::vector<std::size_t> internal_nodes() const;

  /// Proper ancestors from parent up to and including the root.
  std::vector<std::size_t> ancestors(std::size_t index) const;

  /// Node ids from the root's child down to `index` (root excluded).
  std::vector<std::string> path_to(std::size_t index) const;

  /// Leaves in the subtree rooted at `index`.
  std::vector<std::size_t> leaves_under(std::size_t index) const;

  std::size_t max_depth() const;

  /// Validates a root-child-first label path (an optional leading root id is
  /// stripped) and returns node indices.
  std::vector<std::size_t> resolve_path(const std::vector<std::string>& ids) const;

 private:
  std::vector<LabelNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace repoclass
