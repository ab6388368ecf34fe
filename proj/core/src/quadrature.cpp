#include "fblab/quadrature.hpp"

#include <cmath>
#include <vector>

#include "fblab/parallel.hpp"

namespace fblab {
namespace {

constexpr double kPi = 3.14159265358979323846;

// 4-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr double kGLNode[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
constexpr double kGLWeight[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                 0.3478548451374538};

struct SliceResult {
  double full = 0.0;   // trapezoid at the rule's resolution
  double half = 0.0;   // nested half-resolution trapezoid
  double tail = 0.0;   // discarded-tail estimate
};

void check_rule(const QuadratureRule& rule) {
  if (!(rule.similarity_cutoff > 0.0)) throw ContractError("similarity cutoff must be positive");
  if (rule.nodes_per_axis < 3 || rule.nodes_per_axis % 2 == 0)
    throw ContractError("nodes_per_axis must be odd and at least 3");
  if (rule.time_subdivisions < 1) throw ContractError("time_subdivisions must be positive");
}

// Spatial integral of f(x, t) G(x, t) dx at fixed t < 0, in the z variable.
SliceResult slice_integral(const std::function<double(const Vec&, double)>& f, double t, int n,
                           const QuadratureRule& rule, const Vec* clamp_lo,
                           const Vec* clamp_hi, bool clamp_is_support) {
  const double s = std::sqrt(-4.0 * t);
  const int N = rule.nodes_per_axis;
  const double R = rule.similarity_cutoff;

  double zlo[kMaxDim], zhi[kMaxDim], h[kMaxDim];
  double tail_mass = 0.0;
  for (int a = 0; a < n; ++a) {
    zlo[a] = -R;
    zhi[a] = R;
    bool lo_clamped = false, hi_clamped = false;
    if (clamp_lo && clamp_lo[0][a] / s > zlo[a]) {
      zlo[a] = clamp_lo[0][a] / s;
      lo_clamped = true;
    }
    if (clamp_hi && clamp_hi[0][a] / s < zhi[a]) {
      zhi[a] = clamp_hi[0][a] / s;
      hi_clamped = true;
    }
    if (!(zlo[a] < zhi[a])) return {};
    if (!(clamp_is_support && lo_clamped)) tail_mass += 0.5 * std::erfc(std::abs(zlo[a]));
    if (!(clamp_is_support && hi_clamped)) tail_mass += 0.5 * std::erfc(std::abs(zhi[a]));
    h[a] = (zhi[a] - zlo[a]) / (N - 1);
  }

  SliceResult out;
  double max_abs_f = 0.0;
  int idx[kMaxDim] = {0, 0, 0};
  const double norm_const = std::pow(kPi, -0.5 * n);
  bool done = false;
  while (!done) {
    double z2 = 0.0;
    double wfull = 1.0;
    double whalf = 1.0;
    bool on_half = true;
    Vec x = vzero();
    for (int a = 0; a < n; ++a) {
      const double z = zlo[a] + h[a] * idx[a];
      z2 += z * z;
      x[a] = s * z;
      wfull *= h[a] * ((idx[a] == 0 || idx[a] == N - 1) ? 0.5 : 1.0);
      if (idx[a] % 2 != 0) {
        on_half = false;
      } else {
        whalf *= 2.0 * h[a] * ((idx[a] == 0 || idx[a] == N - 1) ? 0.5 : 1.0);
      }
    }
    const double fv = f(x, t);
    const double weighted = fv * std::exp(-z2) * norm_const;
    out.full += weighted * wfull;
    if (on_half) out.half += weighted * whalf;
    max_abs_f = std::max(max_abs_f, std::abs(fv));

    for (int a = n - 1; a >= 0; --a) {
      if (++idx[a] < N) break;
      idx[a] = 0;
      if (a == 0) done = true;
    }
  }
  out.tail = max_abs_f * tail_mass;
  return out;
}

Integral integrate_slab(const std::function<double(const Vec&, double)>& f, double t1, double t2,
                        int n, const QuadratureRule& rule, const Vec* clamp_lo,
                        const Vec* clamp_hi, bool clamp_is_support) {
  check_rule(rule);
  if (n < 1 || n > kMaxDim) throw ContractError("dimension out of range");
  if (!(t1 < t2)) throw OutOfDomainError("slab needs t1 < t2");
  if (t2 > 0.0) throw OutOfDomainError("slab must end at t2 <= 0: the kernel vanishes there");

  const int panels = rule.time_subdivisions;
  const double width = (t2 - t1) / panels;
  const int tasks = panels * 4;

  std::vector<double> full(tasks), half(tasks), tail(tasks);
  parallel_for(tasks, [&](int task) {
    const int panel = task / 4;
    const int node = task % 4;
    const double mid = t1 + width * (panel + 0.5);
    const double t = mid + 0.5 * width * kGLNode[node];
    const double wt = 0.5 * width * kGLWeight[node];
    const SliceResult slice = slice_integral(f, t, n, rule, clamp_lo, clamp_hi, clamp_is_support);
    full[task] = wt * slice.full;
    half[task] = wt * slice.half;
    tail[task] = wt * slice.tail;
  });

  Integral out;
  out.value = pairwise_sum(full);
  const double value_half = pairwise_sum(half);
  const double tail_sum = pairwise_sum(tail);
  out.err = std::abs(out.value - value_half) + tail_sum;
  return out;
}

}  // namespace

double tail_bound(const QuadratureRule& rule, int n) {
  return n * std::erfc(rule.similarity_cutoff) / 2.0;
}

Integral slab_integral(const std::function<double(const Vec&, double)>& f, double t1, double t2,
                       int n, const QuadratureRule& rule, const Vec* clamp_lo,
                       const Vec* clamp_hi, bool clamp_is_support) {
  return integrate_slab(f, t1, t2, n, rule, clamp_lo, clamp_hi, clamp_is_support);
}

Integral slab_integral(const SpaceTimeField& u, double t1, double t2,
                       const QuadratureRule& rule) {
  const Params& P = u.params();
  const Axis& tax = u.time_axis();
  const double slack = 1e-9 * (tax.hi - tax.lo);
  if (t1 < tax.lo - slack || t2 > tax.hi + slack)
    throw OutOfDomainError("slab leaves the field's time axis");
  Vec lo = vzero(), hi = vzero();
  for (int a = 0; a < P.n; ++a) {
    lo[a] = u.space_axis(a).lo;
    hi[a] = u.space_axis(a).hi;
  }
  return integrate_slab(
      [&u, &P](const Vec& x, double t) { return cnorm(u.value(x, t), P.m); }, t1, t2, P.n, rule,
      &lo, &hi, false);
}

Integral gaussian_integral(const std::function<double(const Vec&)>& f, double t, int n,
                           const QuadratureRule& rule, const Vec* clamp_lo, const Vec* clamp_hi) {
  check_rule(rule);
  if (n < 1 || n > kMaxDim) throw ContractError("dimension out of range");
  if (!(t < 0.0)) throw OutOfDomainError("fixed-time Gaussian integral needs t < 0");
  const SliceResult slice = slice_integral([&f](const Vec& x, double) { return f(x); }, t, n,
                                           rule, clamp_lo, clamp_hi, false);
  Integral out;
  out.value = slice.full;
  out.err = std::abs(slice.full - slice.half) + slice.tail;
  return out;
}

}  // namespace fblab
