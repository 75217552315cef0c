#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "repoclass/hierarchy.hpp"

namespace repoclass {

/// repo id -> label path (root's child first, root excluded).
using PathMap = std::map<std::string, std::vector<std::string>>;

struct ClassScore {
  std::string id;
  std::size_t depth = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct ScopeScore {
  std::string name;  // "Level-1", "Level-2", ..., "Overall"
  std::size_t tp = 0, fp = 0, fn = 0;
  double micro_precision = 0.0, micro_recall = 0.0;
  double micro_f1 = 0.0, macro_f1 = 0.0;
  std::size_t classes = 0;
};

struct EvalReport {
  std::size_t repos = 0;
  std::vector<ScopeScore> scopes;
  std::vector<ClassScore> classes;  // hierarchy pre-order

  const ScopeScore& scope(const std::string& name) const;
  double min_micro_f1() const;
  std::string to_json() const;
  std::string to_table() const;
};

/// P, R, F1 with 0 whenever a denominator is 0.
struct Prf {
  double precision, recall, f1;
};
Prf prf(std::size_t tp, std::size_t fp, std::size_t fn);

/// Per-depth scopes plus "Overall". Every gold repo needs a prediction and
/// vice versa; every label must exist in `hierarchy`.
EvalReport f1_report(const PathMap& gold, const PathMap& predicted, const LabelHierarchy& hierarchy);

}  // namespace repoclass
