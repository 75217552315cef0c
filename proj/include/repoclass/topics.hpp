#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "repoclass/common.hpp"
#include "repoclass/enrichment.hpp"
#include "repoclass/hierarchy.hpp"
#include "repoclass/word_space.hpp"

namespace repoclass {

inline constexpr double kKappaMax = 1e4;

struct VmfComponent {
  std::vector<double> mean;  // unit vector
  double kappa = 0.0;
  std::size_t dimension() const { return mean.size(); }
};

struct VmfMixture {
  std::vector<VmfComponent> components;
  std::vector<double> weights;
  std::vector<std::string> child_ids;  // aligned with components (empty for a leaf)
};

/// Row-major set of unit vectors.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> data;
  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t i) const { return std::span(data).subspan(i * dim, dim); }
  void push(std::span<const double> v) { data.insert(data.end(), v.begin(), v.end()); }
};

/// Closed-form approximation rbar (p - rbar^2) / (1 - rbar^2) refined by
/// two Newton steps on A_p(kappa) = rbar; clamped to [0, kKappaMax].
double estimate_kappa(double rbar, std::size_t p);

/// log c_p(kappa) + kappa mu.x
double log_density(std::span<const double> x, const VmfComponent& c);
double log_normalizer(std::size_t p, double kappa);

VmfComponent fit_vmf(const PointSet& points);

/// Exact draw via Wood's rejection scheme.
std::vector<double> sample_vmf(const VmfComponent& c, Rng& rng);

struct EmTrace {
  std::vector<double> log_likelihood;  // one entry per completed iteration (plus the initial fit)
  std::size_t iterations = 0;
};

/// Soft EM initialised from hard per-child fits. `assignment[n]` is the
/// child of point n; every child in [0, m) needs at least one point.
VmfMixture fit_mixture(const PointSet& points, std::span<const std::size_t> assignment,
                       std::size_t m, EmTrace* trace = nullptr, std::size_t max_iterations = 100,
                       double tolerance = 1e-5);

double mixture_log_likelihood(const PointSet& points, const VmfMixture& mix);

/// E-step kernels: responsibilities (n x m, row-major) and the total
/// log-likelihood. The serial version is the reference.
double e_step_serial(const PointSet& points, const VmfMixture& mix, std::vector<double>& resp);
double e_step_parallel(const PointSet& points, const VmfMixture& mix, std::vector<double>& resp);

/// Per-class spherical topic models: one vMF per leaf and one child-aligned
/// mixture per internal node.
struct TopicModel {
  std::vector<std::string> class_ids;
  std::vector<VmfMixture> mixtures;

  const VmfMixture& of(std::string_view id) const;
  std::string to_json() const;
  static TopicModel from_json(std::string_view text);
  static TopicModel load(const std::filesystem::path& path);
};

TopicModel fit_topics(const LabelHierarchy& hierarchy, const KeywordSets& keywords,
                      const WordSpace& space);

}  // namespace repoclass
