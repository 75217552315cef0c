#include "repoclass/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "repoclass/common.hpp"
#include "repoclass/corpus.hpp"

namespace repoclass {

using nlohmann::json;

namespace {

std::string normalize_seed(const std::string& raw, const std::string& leaf_id) {
  auto toks = tokenize(raw);
  if (toks.size() != 1) {
    throw ValidationError("seed keyword '" + raw + "' of leaf '" + leaf_id +
                          "' must normalize to exactly one token (got " +
                          std::to_string(toks.size()) + ")");
  }
  return toks.front();
}

}  // namespace

LabelHierarchy LabelHierarchy::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("hierarchy: ") + e.what());
  }

  LabelHierarchy h;
  std::function<void(const json&, std::optional<std::size_t>, std::size_t)> visit =
      [&](const json& obj, std::optional<std::size_t> parent, std::size_t depth) {
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string()) {
          throw ParseError("hierarchy: every node needs a string \"id\"");
        }
        LabelNode node;
        node.id = obj["id"].get<std::string>();
        if (node.id.empty()) throw ValidationError("hierarchy: empty node id");
        node.name = obj.value("name", node.id);
        node.parent = parent;
        node.depth = depth;
        if (h.index_.count(node.id)) {
          throw ValidationError("hierarchy: duplicate node id '" + node.id + "'");
        }
        const std::size_t self = h.nodes_.size();
        h.index_.emplace(node.id, self);
        const bool has_children = obj.contains("children") && !obj["children"].empty();
        if (obj.contains("keyword")) {
          if (has_children) {
            throw ValidationError("hierarchy: internal node '" + node.id + "' has a keyword");
          }
          node.keyword = normalize_seed(obj["keyword"].get<std::string>(), node.id);
        } else if (!has_children) {
          throw ValidationError("hierarchy: leaf '" + node.id + "' has no keyword");
        }
        h.nodes_.push_back(std::move(node));
        if (parent) h.nodes_[*parent].children.push_back(self);
        if (has_children) {
          if (!obj["children"].is_array()) throw ParseError("hierarchy: \"children\" must be an array");
          for (const auto& child : obj["children"]) visit(child, self, depth + 1);
        }
      };
  visit(doc, std::nullopt, 0);

  if (h.is_leaf(0)) throw ValidationError("hierarchy: root must have children");

  std::unordered_map<std::string, std::string> seen;
  for (auto leaf : h.leaves()) {
    const auto& n = h.nodes_[leaf];
    auto [it, fresh] = seen.emplace(n.keyword, n.id);
    if (!fresh) {
      throw ValidationError("hierarchy: seed keyword '" + n.keyword + "' shared by leaves '" +
                            it->second + "' and '" + n.id + "'");
    }
  }
  return h;
}

LabelHierarchy LabelHierarchy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open hierarchy file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string LabelHierarchy::to_json() const {
  std::function<json(std::size_t)> emit = [&](std::size_t i) {
    const auto& n = nodes_[i];
    json obj{{"id", n.id}, {"name", n.name}};
    if (n.children.empty()) {
      obj["keyword"] = n.keyword;
    } else {
      json kids = json::array();
      for (auto c : n.children) kids.push_back(emit(c));
      obj["children"] = std::move(kids);
    }
    return obj;
  };
  return emit(0).dump(2);
}

std::optional<std::size_t> LabelHierarchy::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelHierarchy::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) throw ValidationError("unknown label id '" + std::string(id) + "'");
  return *found;
}

std::vector<std::size_t> LabelHierarchy::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].children.empty()) out.push_back(i);
  return out;
}

std::vector<std::size_t> LabelHierarchy::internal_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].children.empty()) out.push_back(i);
  return out;
}

std::vector<std::size_t> LabelHierarchy::ancestors(std::size_t index) const {
  std::vector<std::size_t> out;
  for (auto p = nodes_.at(index).parent; p; p = nodes_[*p].parent) out.push_back(*p);
  return out;
}

std::vector<std::string> LabelHierarchy::path_to(std::size_t index) const {
  std::vector<std::string> out;
  for (std::optional<std::size_t> i = index; i && *i != root(); i = nodes_[*i].parent)
    out.push_back(nodes_[*i].id);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> LabelHierarchy::leaves_under(std::size_t index) const {
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{index};
  while (!stack.empty()) {
    auto i = stack.back();
    stack.pop_back();
    const auto& n = nodes_.at(i);
    if (n.children.empty()) {
      out.push_back(i);
    } else {
      for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
    }
  }
  return out;
}

std::size_t LabelHierarchy::max_depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<std::size_t> LabelHierarchy::resolve_path(const std::vector<std::string>& ids) const {
  std::vector<std::size_t> out;
  std::size_t expected_parent = root();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto idx = index_of(ids[k]);
    if (k == 0 && idx == root()) continue;
    if (nodes_[idx].parent != expected_parent) {
      throw ValidationError("label path: '" + ids[k] + "' is not a child of '" +
                            nodes_[expected_parent].id + "'");
    }
    out.push_back(idx);
    expected_parent = idx;
  }
  return out;
}

}  // namespace repoclass
