#include "repoclass/bessel.hpp"

#include <cmath>
#include <limits>

#include "repoclass/common.hpp"

namespace repoclass {

namespace {

constexpr double kSeriesLimit = 500.0;

// Series term t_k = (x/2)^(2k+v) / (k! Gamma(k+v+1)).
double log_series(double v, double x) {
  const double half = 0.5 * x;
  const double q = half * half;
  // Largest term: t_{k+1}/t_k = q / ((k+1)(k+v+1)) crosses 1 near k*.
  const double kstar = std::max(0.0, std::floor(0.5 * (-v + std::sqrt(v * v + x * x))));
  const double log_peak =
      (2.0 * kstar + v) * std::log(half) - std::lgamma(kstar + 1.0) - std::lgamma(kstar + v + 1.0);

  double sum = 1.0;
  double t = 1.0;
  for (double k = kstar; t > 1e-18 * sum; k += 1.0) {  // upward
    t *= q / ((k + 1.0) * (k + v + 1.0));
    sum += t;
  }
  t = 1.0;
  for (double k = kstar; k >= 1.0 && t > 1e-18 * sum; k -= 1.0) {  // downward
    t *= (k * (k + v)) / q;
    sum += t;
  }
  return log_peak + std::log(sum);
}

double log_debye(double v, double x) {
  const double s = std::sqrt(v * v + x * x);
  const double t2 = (v / s) * (v / s);
  const double eta = s + (v > 0.0 ? v * std::log(x / (v + s)) : 0.0);
  const double u1 = (3.0 - 5.0 * t2) / (24.0 * s);
  const double u2 = (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / (1152.0 * s * s);
  const double u3 = (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) /
                    (414720.0 * s * s * s);
  const double t4 = t2 * t2;
  const double u4 = (4465125.0 - 94121676.0 * t2 + 349922430.0 * t4 - 446185740.0 * t4 * t2 +
                     185910725.0 * t4 * t4) /
                    (39813120.0 * s * s * s * s);
  return eta - 0.5 * std::log(2.0 * M_PI) - 0.5 * std::log(s) + std::log1p(u1 + u2 + u3 + u4);
}

}  // namespace

double log_bessel_i(double v, double x) {
  if (v < 0.0 || x < 0.0 || !std::isfinite(v) || std::isnan(x))
    throw ValidationError("log_bessel_i: requires v >= 0 and x >= 0");
  if (x == 0.0) return v == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (std::isinf(x)) return x;
  return x <= kSeriesLimit ? log_series(v, x) : log_debye(v, x);
}

double vmf_mean_resultant(double p, double kappa) {
  if (kappa <= 0.0) return 0.0;
  const double v = 0.5 * p - 1.0;
  if (kappa < 1e-6) return kappa / p;  // A_p(k) = k/p + O(k^3)
  return std::exp(log_bessel_i(v + 1.0, kappa) - log_bessel_i(v, kappa));
}

}  // namespace repoclass
