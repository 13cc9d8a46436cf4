#pragma once

// Central finite-difference gradient checking, double precision throughout.
// The relative error of one component uses the symmetric denominator
// |analytic| + |numeric|, floored by a small fraction of the largest
// analytic component so that near-zero gradients do not divide by zero.
//
// Three refinements keep the check sharp on losses routed through kinked
// activations and batch statistics:
//  - each component is differenced at two step sizes and the better match
//    wins, since a large step can straddle an activation kink while a small
//    one amplifies round-off cancellation;
//  - the denominator never drops below the quotient's own round-off band
//    (a multiple of eps * |loss| / step), because central differences
//    cannot resolve discrepancies finer than that no matter the gradient;
//  - a caller-supplied region tag (e.g. a hash of all ReLU activation signs)
//    invalidates any quotient whose two evaluations landed in different
//    smooth regions, where the difference measures the kink, not the slope.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>

#include "nexrl/rng.hpp"
#include "nexrl/tensor.hpp"

namespace nexrl::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // components invalidated by a region change
  std::size_t worst_index = 0;
};

/// Sweeps x[0..n), comparing central differences of `loss` against
/// `analytic`. `loss` must read x through this pointer on every call.
/// `region_tag`, when given, is read right after each `loss` call and must
/// identify the smooth region the evaluation landed in.
inline GradCheckResult check_gradient(
    const std::function<double()>& loss, double* x, const double* analytic,
    std::size_t n, double h = 1e-5,
    const std::function<std::uint64_t()>& region_tag = {}) {
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    scale = std::max(scale, std::abs(analytic[i]));
  const double floor = std::max(1e-12, 1e-6 * scale);

  // Round-off band of the difference quotient. Deep compositions accumulate
  // a few hundred ulp of loss error, so quotients carry noise of that size
  // over 2h; the band further divides by the strictest relative tolerance in
  // use (1e-4) because such discrepancies must score as negligible, not
  // merely as borderline. Computed from the larger step only, so a genuine
  // mismatch cannot hide inside the wider band of the smaller step below.
  const double base = std::max(1.0, std::abs(loss()));
  const std::uint64_t base_tag = region_tag ? region_tag() : 0;
  const double noise_band =
      1e3 / 1e-4 * std::numeric_limits<double>::epsilon() * base / (2.0 * h);

  GradCheckResult r;
  r.checked = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = x[i];
    double rel = 0.0;
    bool valid = false;
    for (const double step : {h, 0.1 * h}) {
      x[i] = saved + step;
      const double lp = loss();
      const bool plus_ok = !region_tag || region_tag() == base_tag;
      x[i] = saved - step;
      const double lm = loss();
      const bool minus_ok = !region_tag || region_tag() == base_tag;
      x[i] = saved;
      if (!plus_ok || !minus_ok) continue;
      const double fd = (lp - lm) / (2.0 * step);
      const double denom = std::max(
          {floor, noise_band, std::abs(analytic[i]) + std::abs(fd)});
      const double err = std::abs(analytic[i] - fd) / denom;
      rel = valid ? std::min(rel, err) : err;
      valid = true;
    }
    if (!valid) {
      ++r.skipped;
      continue;
    }
    if (rel > r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst_index = i;
    }
  }
  return r;
}

inline TensorT<double> random_tensor(Rng& rng, int n, int c, int h, int w,
                                     double lo = -1.0, double hi = 1.0) {
  TensorT<double> t(n, c, h, w);
  for (double& v : t) v = rng.uniform(lo, hi);
  return t;
}

/// A fixed random projection turns a tensor-valued op into the scalar loss
/// sum(out * r) whose input gradient is exactly the backward pass of r.
inline TensorT<double> random_projection(Rng& rng, const TensorT<double>& like) {
  TensorT<double> r = TensorT<double>::zeros_like(like);
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  return r;
}

inline double project(const TensorT<double>& out, const TensorT<double>& r) {
  double s = 0.0;
  const double* a = out.data();
  const double* b = r.data();
  for (std::size_t i = 0; i < out.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace nexrl::testing
