#pragma once

#include <functional>

#include "fblab/field.hpp"
#include "fblab/types.hpp"

// Gaussian-weighted quadrature against the backward heat kernel. The spatial
// integral is taken in the self-similar variable z = x / sqrt(-4t), where the
// weight becomes a fixed Gaussian, truncated at |z_a| <= R_cut per axis and
// clamped to an optional spatial box. Time uses composite 4-point
// Gauss-Legendre panels. Error estimates combine the defect against a nested
// half-resolution grid with the truncated tail mass.

namespace fblab {

struct QuadratureRule {
  double similarity_cutoff = 8.0;  // R_cut in z-units
  int nodes_per_axis = 129;        // odd, so the half-resolution grid nests
  int time_subdivisions = 8;
};

struct Integral {
  double value = 0.0;
  double err = 0.0;
};

// Upper bound on the Gaussian mass fraction discarded per time slice by the
// |z_a| <= R_cut truncation.
double tail_bound(const QuadratureRule& rule, int n);

// integral_{t1}^{t2} integral f(x,t) G(x,t) dx dt, with t1 < t2 <= 0.
// A clamp box (per-axis [clamp_lo, clamp_hi] in x) further restricts the
// spatial range; points outside it are never evaluated. When clamp_is_support
// is set the integrand is promised to vanish outside the clamp box, so the
// clamped sides contribute no discarded-tail error.
Integral slab_integral(const std::function<double(const Vec&, double)>& f, double t1, double t2,
                       int n, const QuadratureRule& rule, const Vec* clamp_lo = nullptr,
                       const Vec* clamp_hi = nullptr, bool clamp_is_support = false);

// Field form: integrates |u(x,t)| G over the slab, clamped to u's box.
Integral slab_integral(const SpaceTimeField& u, double t1, double t2,
                       const QuadratureRule& rule);

// integral f(x) G(x,t) dx at one fixed time t < 0.
Integral gaussian_integral(const std::function<double(const Vec&)>& f, double t, int n,
                           const QuadratureRule& rule, const Vec* clamp_lo = nullptr,
                           const Vec* clamp_hi = nullptr);

}  // namespace fblab
