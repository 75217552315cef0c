#include "repoclass/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "repoclass/bessel.hpp"

namespace repoclass {

double estimate_kappa(double rbar, std::size_t p) {
  if (p < 2) throw ValidationError("estimate_kappa: dimension must be >= 2");
  if (!(rbar >= 0.0)) throw ValidationError("estimate_kappa: rbar must be >= 0");
  if (rbar >= 1.0) {
    spdlog::warn("estimate_kappa: rbar = {} (degenerate data); using kappa_max", rbar);
    return kKappaMax;
  }
  if (rbar == 0.0) return 0.0;
  const double pd = static_cast<double>(p);
  const double r2 = rbar * rbar;
  double kappa = rbar * (pd - r2) / (1.0 - r2);
  if (kappa >= kKappaMax) return kKappaMax;
  for (int step = 0; step < 2; ++step) {
    const double a = vmf_mean_resultant(pd, kappa);
    const double da = 1.0 - a * a - (pd - 1.0) / kappa * a;
    if (!(da > 0.0)) break;
    double next = kappa - (a - rbar) / da;
    if (!(next > 0.0)) next = 0.5 * kappa;
    kappa = next;
    if (kappa >= kKappaMax) return kKappaMax;
  }
  return std::clamp(kappa, 0.0, kKappaMax);
}

double log_normalizer(std::size_t p, double kappa) {
  const double pd = static_cast<double>(p);
  if (kappa <= 0.0) {
    // Uniform density: 1 / surface area of S^{p-1}.
    return std::lgamma(0.5 * pd) - std::log(2.0) - 0.5 * pd * std::log(M_PI);
  }
  return (0.5 * pd - 1.0) * std::log(kappa) - 0.5 * pd * std::log(2.0 * M_PI) -
         log_bessel_i(0.5 * pd - 1.0, kappa);
}

double log_density(std::span<const double> x, const VmfComponent& c) {
  if (x.size() != c.mean.size()) throw ValidationError("log_density: dimension mismatch");
  return log_normalizer(c.mean.size(), c.kappa) + c.kappa * dot(c.mean, x);
}

VmfComponent fit_vmf(const PointSet& points) {
  const std::size_t n = points.size();
  if (n == 0) throw ValidationError("fit_vmf: no points");
  std::vector<double> sum(points.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = points.row(i);
    for (std::size_t k = 0; k < points.dim; ++k) sum[k] += r[k];
  }
  const double norm = std::sqrt(dot(sum, sum));
  const double rbar = norm / static_cast<double>(n);
  VmfComponent c;
  if (rbar < 1e-12) {
    spdlog::warn("fit_vmf: resultant vanishes; returning the uniform component");
    c.mean.assign(points.dim, 0.0);
    c.mean[0] = 1.0;
    c.kappa = 0.0;
    return c;
  }
  c.mean = sum;
  for (auto& v : c.mean) v /= norm;
  c.kappa = estimate_kappa(std::min(rbar, 1.0), points.dim);
  return c;
}

std::vector<double> sample_vmf(const VmfComponent& c, Rng& rng) {
  const std::size_t p = c.dimension();
  if (p < 2) throw ValidationError("sample_vmf: dimension must be >= 2");
  const double pm1 = static_cast<double>(p - 1);
  const double kappa = c.kappa;

  // Cosine to the mean direction.
  const double b = pm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + pm1 * pm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double log_one_minus_x0sq = std::log(4.0 * b) - 2.0 * std::log1p(b);
  const double cst = kappa * x0 + pm1 * log_one_minus_x0sq;
  std::gamma_distribution<double> gamma(0.5 * pm1, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double w = 0.0, one_minus_w = 1.0;
  while (true) {
    const double g1 = gamma(rng), g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    const double denom = 1.0 - (1.0 - b) * z;
    w = (1.0 - (1.0 + b) * z) / denom;
    one_minus_w = 2.0 * b * z / denom;
    const double u = unit(rng);
    if (kappa * w + pm1 * std::log1p(-x0 * w) - cst >= std::log(u)) break;
  }

  // Uniform tangent direction, then x = (w, sqrt(1-w^2) t) in the e1 frame.
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(p);
  double tn = 0.0;
  do {
    tn = 0.0;
    for (std::size_t i = 1; i < p; ++i) {
      x[i] = normal(rng);
      tn += x[i] * x[i];
    }
  } while (tn == 0.0);
  const double radial = std::sqrt(std::max(0.0, one_minus_w * (1.0 + w)));
  tn = std::sqrt(tn);
  for (std::size_t i = 1; i < p; ++i) x[i] *= radial / tn;
  x[0] = w;

  // Householder reflection taking e1 to the mean.
  std::vector<double> u(c.mean);
  for (auto& v : u) v = -v;
  u[0] += 1.0;
  const double uu = dot(u, u);
  if (uu > 1e-24) {
    const double f = 2.0 * dot(u, x) / uu;
    for (std::size_t i = 0; i < p; ++i) x[i] -= f * u[i];
  }
  const double n = std::sqrt(dot(x, x));
  for (auto& v : x) v /= n;
  return x;
}

namespace {

double e_step_point(std::span<const double> x, const VmfMixture& mix,
                    std::span<const double> log_norm, std::span<double> resp) {
  const std::size_t m = mix.components.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const auto& c = mix.components[j];
    resp[j] = mix.weights[j] > 0.0
                  ? std::log(mix.weights[j]) + log_norm[j] + c.kappa * dot(c.mean, x)
                  : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, resp[j]);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    resp[j] = std::exp(resp[j] - mx);
    s += resp[j];
  }
  for (std::size_t j = 0; j < m; ++j) resp[j] /= s;
  return mx + std::log(s);
}

std::vector<double> log_norms(const VmfMixture& mix) {
  std::vector<double> out;
  for (const auto& c : mix.components) out.push_back(log_normalizer(c.dimension(), c.kappa));
  return out;
}

}  // namespace

double e_step_serial(const PointSet& points, const VmfMixture& mix, std::vector<double>& resp) {
  const std::size_t n = points.size(), m = mix.components.size();
  const auto ln = log_norms(mix);
  resp.assign(n * m, 0.0);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ll += e_step_point(points.row(i), mix, ln, std::span(resp).subspan(i * m, m));
  return ll;
}

double e_step_parallel(const PointSet& points, const VmfMixture& mix, std::vector<double>& resp) {
  const std::size_t n = points.size(), m = mix.components.size();
  const auto ln = log_norms(mix);
  resp.assign(n * m, 0.0);
  std::vector<double> per_point(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i)
    per_point[i] = e_step_point(points.row(i), mix, ln, std::span(resp).subspan(i * m, m));
  // Fixed summation order keeps the result identical to the serial kernel.
  double ll = 0.0;
  for (double v : per_point) ll += v;
  return ll;
}

double mixture_log_likelihood(const PointSet& points, const VmfMixture& mix) {
  std::vector<double> resp;
  return e_step_serial(points, mix, resp);
}

VmfMixture fit_mixture(const PointSet& points, std::span<const std::size_t> assignment,
                       std::size_t m, EmTrace* trace, std::size_t max_iterations,
                       double tolerance) {
  const std::size_t n = points.size();
  if (m < 1) throw ValidationError("fit_mixture: m must be >= 1");
  if (assignment.size() != n) throw ValidationError("fit_mixture: assignment size mismatch");

  VmfMixture mix;
  std::vector<PointSet> groups(m, PointSet{points.dim, {}});
  for (std::size_t i = 0; i < n; ++i) {
    if (assignment[i] >= m) throw ValidationError("fit_mixture: assignment out of range");
    groups[assignment[i]].push(points.row(i));
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (groups[j].size() == 0)
      throw ValidationError("fit_mixture: child " + std::to_string(j) + " has no points");
    mix.components.push_back(fit_vmf(groups[j]));
    mix.weights.push_back(static_cast<double>(groups[j].size()) / static_cast<double>(n));
  }

  std::vector<double> resp;
  double ll = e_step_parallel(points, mix, resp);
  if (trace) trace->log_likelihood.push_back(ll);

  for (std::size_t it = 0; it < max_iterations; ++it) {
    double delta = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double nj = 0.0;
      std::vector<double> r(points.dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = resp[i * m + j];
        nj += w;
        auto x = points.row(i);
        for (std::size_t k = 0; k < points.dim; ++k) r[k] += w * x[k];
      }
      const double alpha = nj / static_cast<double>(n);
      delta += std::abs(alpha - mix.weights[j]);
      mix.weights[j] = alpha;
      const double norm = std::sqrt(dot(r, r));
      if (nj < 1e-12 || norm < 1e-12) continue;
      auto& c = mix.components[j];
      for (std::size_t k = 0; k < points.dim; ++k) c.mean[k] = r[k] / norm;
      c.kappa = estimate_kappa(std::min(norm / nj, 1.0), points.dim);
    }
    ll = e_step_parallel(points, mix, resp);
    if (trace) {
      trace->log_likelihood.push_back(ll);
      trace->iterations = it + 1;
    }
    if (delta / static_cast<double>(m) < tolerance) break;
  }
  return mix;
}

// TopicModel ---------------------------------------------------------------

const VmfMixture& TopicModel::of(std::string_view id) const {
  for (std::size_t i = 0; i < class_ids.size(); ++i)
    if (class_ids[i] == id) return mixtures[i];
  throw ValidationError("topic model: no class '" + std::string(id) + "'");
}

std::string TopicModel::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    const auto& mix = mixtures[i];
    nlohmann::ordered_json comps = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < mix.components.size(); ++j) {
      comps.push_back({{"alpha", mix.weights[j]},
                       {"kappa", mix.components[j].kappa},
                       {"mean", mix.components[j].mean}});
    }
    arr.push_back({{"class", class_ids[i]}, {"components", comps}, {"children", mix.child_ids}});
  }
  return arr.dump(1);
}

TopicModel TopicModel::from_json(std::string_view text) {
  TopicModel tm;
  try {
    auto arr = nlohmann::json::parse(text);
    for (const auto& entry : arr) {
      tm.class_ids.push_back(entry.at("class").get<std::string>());
      VmfMixture mix;
      for (const auto& c : entry.at("components")) {
        mix.weights.push_back(c.at("alpha").get<double>());
        mix.components.push_back({c.at("mean").get<std::vector<double>>(), c.at("kappa").get<double>()});
      }
      mix.child_ids = entry.at("children").get<std::vector<std::string>>();
      tm.mixtures.push_back(std::move(mix));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("topics: ") + e.what());
  }
  return tm;
}

TopicModel TopicModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

TopicModel fit_topics(const LabelHierarchy& hierarchy, const KeywordSets& keywords,
                      const WordSpace& space) {
  auto keywords_of = [&](std::size_t leaf) -> const std::vector<std::string>& {
    const auto& id = hierarchy.node(leaf).id;
    for (std::size_t i = 0; i < keywords.leaf_ids.size(); ++i)
      if (keywords.leaf_ids[i] == id) return keywords.keywords[i];
    throw ValidationError("topics: no keyword set for leaf '" + id + "'");
  };
  auto add_points = [&](std::size_t leaf, PointSet& ps, std::vector<std::size_t>* assign,
                        std::size_t child) {
    for (const auto& kw : keywords_of(leaf)) {
      auto row = space.find(kw);
      if (!row) continue;
      ps.push(space.row(*row));
      if (assign) assign->push_back(child);
    }
  };

  TopicModel tm;
  for (std::size_t node = 0; node < hierarchy.size(); ++node) {
    const auto& n = hierarchy.node(node);
    PointSet ps{space.dimension(), {}};
    VmfMixture mix;
    if (n.children.empty()) {
      add_points(node, ps, nullptr, 0);
      if (ps.size() == 0) throw ValidationError("topics: leaf '" + n.id + "' has no embedded keyword");
      mix.components.push_back(fit_vmf(ps));
      mix.weights.push_back(1.0);
    } else {
      std::vector<std::size_t> assign;
      for (std::size_t j = 0; j < n.children.size(); ++j) {
        const auto before = ps.size();
        for (auto leaf : hierarchy.leaves_under(n.children[j])) add_points(leaf, ps, &assign, j);
        if (ps.size() == before) {
          throw ValidationError("topics: child '" + hierarchy.node(n.children[j]).id +
                                "' of '" + n.id + "' has an empty keyword set");
        }
        mix.child_ids.push_back(hierarchy.node(n.children[j]).id);
      }
      auto fitted = fit_mixture(ps, assign, n.children.size());
      mix.components = std::move(fitted.components);
      mix.weights = std::move(fitted.weights);
    }
    tm.class_ids.push_back(n.id);
    tm.mixtures.push_back(std::move(mix));
  }
  return tm;
}

}  // namespace repoclass
