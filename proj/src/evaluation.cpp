#include "repoclass/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "repoclass/common.hpp"

namespace repoclass {

Prf prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double p = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
  const double r = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
  const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  return {p, r, f};
}

const ScopeScore& EvalReport::scope(const std::string& name) const {
  for (const auto& s : scopes)
    if (s.name == name) return s;
  throw ValidationError("report has no scope '" + name + "'");
}

double EvalReport::min_micro_f1() const {
  double m = 1.0;
  for (const auto& s : scopes) m = std::min(m, s.micro_f1);
  return m;
}

EvalReport f1_report(const PathMap& gold, const PathMap& predicted, const LabelHierarchy& hierarchy) {
  for (const auto& [id, path] : gold)
    if (!predicted.count(id)) throw ValidationError("no prediction for repo '" + id + "'");
  for (const auto& [id, path] : predicted)
    if (!gold.count(id)) throw ValidationError("prediction for repo '" + id + "' has no gold labels");

  std::vector<ClassScore> cls(hierarchy.size());
  for (std::size_t i = 0; i < hierarchy.size(); ++i) {
    cls[i].id = hierarchy.node(i).id;
    cls[i].depth = hierarchy.node(i).depth;
  }
  for (const auto& [id, gpath] : gold) {
    std::vector<std::size_t> g, p;
    try {
      g = hierarchy.resolve_path(gpath);
      p = hierarchy.resolve_path(predicted.at(id));
    } catch (const ValidationError& e) {
      throw ValidationError("repo '" + id + "': " + e.what());
    }
    std::set<std::size_t> gs(g.begin(), g.end()), ps(p.begin(), p.end());
    for (auto c : ps) (gs.count(c) ? cls[c].tp : cls[c].fp)++;
    for (auto c : gs)
      if (!ps.count(c)) cls[c].fn++;
  }

  EvalReport report;
  report.repos = gold.size();
  for (std::size_t i = 1; i < cls.size(); ++i) {
    auto s = prf(cls[i].tp, cls[i].fp, cls[i].fn);
    cls[i].precision = s.precision;
    cls[i].recall = s.recall;
    cls[i].f1 = s.f1;
    report.classes.push_back(cls[i]);
  }

  auto make_scope = [&](std::string name, auto in_scope) {
    ScopeScore sc;
    sc.name = std::move(name);
    double macro = 0.0;
    for (const auto& c : report.classes) {
      if (!in_scope(c)) continue;
      sc.tp += c.tp;
      sc.fp += c.fp;
      sc.fn += c.fn;
      macro += c.f1;
      ++sc.classes;
    }
    auto s = prf(sc.tp, sc.fp, sc.fn);
    sc.micro_precision = s.precision;
    sc.micro_recall = s.recall;
    sc.micro_f1 = s.f1;
    sc.macro_f1 = sc.classes ? macro / double(sc.classes) : 0.0;
    return sc;
  };
  for (std::size_t d = 1; d <= hierarchy.max_depth(); ++d)
    report.scopes.push_back(make_scope("Level-" + std::to_string(d), [d](const ClassScore& c) { return c.depth == d; }));
  report.scopes.push_back(make_scope("Overall", [](const ClassScore&) { return true; }));
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["repos"] = repos;
  auto& sj = j["scopes"] = nlohmann::ordered_json::array();
  for (const auto& s : scopes)
    sj.push_back({{"scope", s.name},
                  {"micro_f1", s.micro_f1},
                  {"macro_f1", s.macro_f1},
                  {"micro_precision", s.micro_precision},
                  {"micro_recall", s.micro_recall},
                  {"tp", s.tp},
                  {"fp", s.fp},
                  {"fn", s.fn},
                  {"classes", s.classes}});
  auto& cj = j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes)
    cj.push_back({{"id", c.id},
                  {"depth", c.depth},
                  {"tp", c.tp},
                  {"fp", c.fp},
                  {"fn", c.fn},
                  {"precision", c.precision},
                  {"recall", c.recall},
                  {"f1", c.f1}});
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::size_t w = 8;
  for (const auto& c : classes) w = std::max(w, c.id.size() + 2 * (c.depth - 1));
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %6s %6s %6s\n", int(w), "scope", "micro-F1", "macro-F1", "TP", "FP",
                "FN");
  out << buf;
  for (const auto& s : scopes) {
    std::snprintf(buf, sizeof buf, "%-*s %9.4f %9.4f %6zu %6zu %6zu\n", int(w), s.name.c_str(), s.micro_f1,
                  s.macro_f1, s.tp, s.fp, s.fn);
    out << buf;
  }
  out << '\n';
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %6s %6s %6s %6s\n", int(w), "class", "precision", "recall", "F1",
                "TP", "FP", "FN");
  out << buf;
  for (const auto& c : classes) {
    const std::string name = std::string(2 * (c.depth - 1), ' ') + c.id;
    std::snprintf(buf, sizeof buf, "%-*s %9.4f %9.4f %6.4f %6zu %6zu %6zu\n", int(w), name.c_str(), c.precision,
                  c.recall, c.f1, c.tp, c.fp, c.fn);
    out << buf;
  }
  return out.str();
}

}  // namespace repoclass
