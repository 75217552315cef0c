#pragma once

namespace repoclass {

/// log I_v(x) for v >= 0, x >= 0. Returns -inf at x = 0 for v > 0.
///
/// For x <= 500 the power series is summed outward from its largest term,
/// so only O(sqrt(x)) terms are needed and nothing overflows. Beyond that
/// the Debye uniform asymptotic expansion (four correction terms) is used;
/// written in terms of s = sqrt(v^2 + x^2) it stays valid down to v = 0.
double log_bessel_i(double v, double x);

/// A_p(kappa) = I_{p/2}(kappa) / I_{p/2-1}(kappa), the mean resultant length
/// of a p-dimensional vMF with concentration kappa.
double vmf_mean_resultant(double p, double kappa);

}  // namespace repoclass
