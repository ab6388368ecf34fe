#include "fblab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "fblab/operators.hpp"
#include "fblab/solver.hpp"

namespace fblab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sumsq(const CVec& v, int m) {
  double s = 0.0;
  for (int c = 0; c < m; ++c) s += v[c] * v[c];
  return s;
}

// |v|^(1+q) given |v|^2, safe at zero.
double power_term(double v2, double q) {
  if (v2 <= 0.0) return 0.0;
  return std::pow(v2, 0.5 * (1.0 + q));
}

void check_time_slab(const SpaceTimeField& u, double t1, double t2, const char* what) {
  const Axis& tax = u.time_axis();
  const double slack = 1e-9 * std::max(1.0, tax.hi - tax.lo);
  if (t1 < tax.lo - slack || t2 > tax.hi + slack) {
    char msg[200];
    std::snprintf(msg, sizeof msg, "%s slab (%g, %g] leaves the sampled time range [%g, %g]",
                  what, t1, t2, tax.lo, tax.hi);
    throw OutOfDomainError(msg);
  }
}

// Multilinear interpolation error model on top of the quadrature estimate.
double interp_error_term(const SpaceTimeField& u, double r, double value) {
  const double sx = u.max_dx() / r;
  const double st = u.nt() > 1 ? u.dt() / (r * r) : 0.0;
  return kInterpErrorModel * (sx * sx + st * st) * std::abs(value);
}

double ring_volume(const CutoffSpec& eta, int n) {
  switch (n) {
    case 1:
      return 2.0 * (eta.outer - eta.inner);
    case 2:
      return kPi * (eta.outer * eta.outer - eta.inner * eta.inner);
    default:
      return (4.0 * kPi / 3.0) *
             (eta.outer * eta.outer * eta.outer - eta.inner * eta.inner * eta.inner);
  }
}

// Explicit part of the repair term, int_0^r s^(-n-2k+1) exp(-c/s^2) ds with
// c = inner^2/16, written through the upper incomplete gamma function.
double cutoff_shape_integral(const Params& P, const CutoffSpec& eta, double r) {
  const double p = P.n + 2.0 * P.kappa - 1.0;
  const double a = 0.5 * (p - 1.0);
  const double c = eta.inner * eta.inner / 16.0;
  return 0.5 * std::pow(c, -a) * boost::math::tgamma(a, c / (r * r));
}

// sup over the cutoff ring (both in space and over the time slabs reachable
// below radius r) of |Lv| (|Hv| + |v|^q) for v = eta*u, assembled from node
// tables. The defect of the localized energy is supported where grad(eta)
// lives, and bounding its radial derivative by
//   2 rho^(-2k-1) * 3 rho^2 * vol_ring * sup * (4 pi)^(-n/2) rho^(-n) e^(-c/rho^2)
// leaves the constant 6 * vol_ring * (4 pi)^(-n/2) * sup in front of the
// shape integral.
double ring_sup_constant(const SpaceTimeField& u, const SpaceTimePoint& X0,
                         const CutoffSpec& eta, double r) {
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  const double fuzz = u.max_dx();

  int jlo[kMaxDim] = {};
  int jhi[kMaxDim] = {};
  for (int a = 0; a < n; ++a) {
    const Axis& ax = u.space_axis(a);
    const double h = ax.step();
    const int lo = static_cast<int>(std::ceil((X0.x[a] - eta.outer - fuzz - ax.lo) / h - 1e-9));
    const int hi = static_cast<int>(std::floor((X0.x[a] + eta.outer + fuzz - ax.lo) / h + 1e-9));
    jlo[a] = std::max(lo, 1);
    jhi[a] = std::min(hi, u.nx(a) - 2);
    if (jlo[a] > jhi[a]) return 0.0;
  }

  const Axis& tax = u.time_axis();
  int it_lo = 0;
  int it_hi = u.nt() - 1;
  if (u.nt() > 1) {
    const double dt = tax.step();
    it_lo = std::max(0, static_cast<int>(std::ceil((X0.t - 4.0 * r * r - tax.lo) / dt - 0.5)));
    it_hi = std::min(u.nt() - 1, static_cast<int>(std::floor((X0.t - tax.lo) / dt + 0.5)));
    if (it_hi < it_lo) {
      it_lo = std::max(0, std::min(it_lo, u.nt() - 1));
      it_hi = it_lo;
    }
  }

  double ring_sup = 0.0;
  double ball_sup = 0.0;
  long ring_count = 0;
  for (int it = it_lo; it <= it_hi; ++it) {
    const double t = tax.coord(it);
    GridIndex ix{};
    for (int a = 0; a < n; ++a) ix[a] = jlo[a];
    while (true) {
      const Vec x = u.node_x(ix);
      double rho2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const double d = x[a] - X0.x[a];
        rho2 += d * d;
      }
      const double rho = std::sqrt(rho2);
      if (rho <= eta.outer + fuzz) {
        const double ev = cutoff_value(eta, rho);
        const CVec uval = u.node_value(it, ix);
        const CVec ut = u.nt() > 1 ? u.node_time_deriv(it, ix) : czero();
        CVec vc = czero();
        for (int c = 0; c < m; ++c) vc[c] = ev * uval[c];
        CVec lap = czero();
        CVec stretch = czero();  // sum_a (x_a - x0_a) d_a v
        for (int a = 0; a < n; ++a) {
          GridIndex ixp = ix;
          GridIndex ixm = ix;
          ++ixp[a];
          --ixm[a];
          const CVec up = u.node_value(it, ixp);
          const CVec um = u.node_value(it, ixm);
          const double da = x[a] - X0.x[a];
          const double h = u.dx(a);
          const double rhop = std::sqrt(std::max(0.0, rho2 + 2.0 * h * da + h * h));
          const double rhom = std::sqrt(std::max(0.0, rho2 - 2.0 * h * da + h * h));
          const double evp = cutoff_value(eta, rhop);
          const double evm = cutoff_value(eta, rhom);
          for (int c = 0; c < m; ++c) {
            const double vp = evp * up[c];
            const double vm = evm * um[c];
            lap[c] += (vp - 2.0 * vc[c] + vm) / (h * h);
            stretch[c] += da * (vp - vm) / (2.0 * h);
          }
        }
        double hv2 = 0.0;
        double lv2 = 0.0;
        for (int c = 0; c < m; ++c) {
          const double hc = lap[c] - ev * ut[c];
          const double lc = stretch[c] + 2.0 * (t - X0.t) * ev * ut[c] - P.kappa * vc[c];
          hv2 += hc * hc;
          lv2 += lc * lc;
        }
        const double v2 = sumsq(vc, m);
        const double vq = P.q == 0.0 ? (v2 > 0.0 ? 1.0 : 0.0) : std::pow(v2, 0.5 * P.q);
        const double s = std::sqrt(lv2) * (std::sqrt(hv2) + vq);
        ball_sup = std::max(ball_sup, s);
        if (rho >= eta.inner - fuzz) {
          ring_sup = std::max(ring_sup, s);
          ++ring_count;
        }
      }
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] <= jhi[a]) break;
        ix[a] = jlo[a];
      }
      if (a < 0) break;
    }
  }
  // A grid too coarse to place nodes on the ring falls back to the whole
  // cutoff ball, which can only enlarge the constant.
  const double sup = ring_count > 0 ? ring_sup : ball_sup;
  return 6.0 * ring_volume(eta, n) * std::pow(4.0 * kPi, -0.5 * n) * sup;
}

// Direction search shared by both halfspace fits: exhaustive on a coarse
// sphere grid, then local refinement (golden section on the circle, shrinking
// 3x3 patches on the sphere).
Vec sweep_directions(int n, const std::function<double(const Vec&)>& score) {
  if (n == 1) {
    Vec plus = unit_x(0);
    Vec minus = vzero();
    minus[0] = -1.0;
    return score(plus) <= score(minus) ? plus : minus;
  }
  if (n == 2) {
    auto dir = [](double phi) {
      Vec v = vzero();
      v[0] = std::cos(phi);
      v[1] = std::sin(phi);
      return v;
    };
    const int K = 64;
    double best_phi = 0.0;
    double best = score(dir(0.0));
    for (int j = 1; j < K; ++j) {
      const double phi = j * 2.0 * kPi / K;
      const double s = score(dir(phi));
      if (s < best) {
        best = s;
        best_phi = phi;
      }
    }
    double a = best_phi - 2.0 * kPi / K;
    double b = best_phi + 2.0 * kPi / K;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = score(dir(x1));
    double f2 = score(dir(x2));
    for (int iter = 0; iter < 32; ++iter) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = score(dir(x1));
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = score(dir(x2));
      }
    }
    return dir(0.5 * (a + b));
  }
  auto dir3 = [](double th, double ph) {
    Vec v = vzero();
    v[0] = std::sin(th) * std::cos(ph);
    v[1] = std::sin(th) * std::sin(ph);
    v[2] = std::cos(th);
    return v;
  };
  double best_th = 0.5 * kPi;
  double best_ph = 0.0;
  double best = score(dir3(best_th, best_ph));
  for (int i = 0; i < 8; ++i) {
    const double th = (i + 0.5) * kPi / 8.0;
    for (int j = 0; j < 16; ++j) {
      const double ph = j * kPi / 8.0;
      const double s = score(dir3(th, ph));
      if (s < best) {
        best = s;
        best_th = th;
        best_ph = ph;
      }
    }
  }
  double hth = 0.5 * kPi / 8.0;
  double hph = 0.5 * kPi / 8.0;
  for (int round = 0; round < 14; ++round) {
    double loc_th = best_th;
    double loc_ph = best_ph;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        const double th = std::clamp(best_th + di * hth, 0.0, kPi);
        const double ph = best_ph + dj * hph;
        const double s = score(dir3(th, ph));
        if (s < best) {
          best = s;
          loc_th = th;
          loc_ph = ph;
        }
      }
    }
    best_th = loc_th;
    best_ph = loc_ph;
    hth *= 0.5;
    hph *= 0.5;
  }
  return dir3(best_th, best_ph);
}

}  // namespace

EnergyConstants energy_constants(const Params& params) {
  const double k = params.kappa;
  EnergyConstants ec;
  // Library tgamma is accurate to a few ulp, well inside the 1e-10 budget.
  ec.A_q = (std::pow(params.alpha, 1.0 + params.q) / (k * (k - 1.0))) *
           ((std::pow(4.0, k) - 1.0) / std::sqrt(kPi)) * std::exp2(2.0 * k - 3.0) *
           std::tgamma(k - 0.5);
  ec.M_theta = (std::exp2(k - 1.0) / (std::pow(k, k) * (k - 1.0))) * (std::pow(4.0, k) - 1.0);
  return ec;
}

double cutoff_value(const CutoffSpec& eta, double rho) {
  if (!(eta.inner > 0.0 && eta.outer > eta.inner)) {
    throw ContractError("cutoff profile needs 0 < inner < outer");
  }
  if (rho <= eta.inner) return 1.0;
  if (rho >= eta.outer) return 0.0;
  const double w = (rho - eta.inner) / (eta.outer - eta.inner);
  return 1.0 - w * w * w * (10.0 - 15.0 * w + 6.0 * w * w);
}

double cutoff_deriv(const CutoffSpec& eta, double rho) {
  if (!(eta.inner > 0.0 && eta.outer > eta.inner)) {
    throw ContractError("cutoff profile needs 0 < inner < outer");
  }
  if (rho <= eta.inner || rho >= eta.outer) return 0.0;
  const double width = eta.outer - eta.inner;
  const double w = (rho - eta.inner) / width;
  const double omw = 1.0 - w;
  return -30.0 * w * w * omw * omw / width;
}

double cutoff_laplacian(const CutoffSpec& eta, double rho, int n) {
  if (!(eta.inner > 0.0 && eta.outer > eta.inner)) {
    throw ContractError("cutoff profile needs 0 < inner < outer");
  }
  if (rho <= eta.inner || rho >= eta.outer) return 0.0;
  const double width = eta.outer - eta.inner;
  const double w = (rho - eta.inner) / width;
  const double second = -60.0 * w * (1.0 - w) * (1.0 - 2.0 * w) / (width * width);
  return second + (n - 1) * cutoff_deriv(eta, rho) / rho;
}

Integral weiss(const SpaceTimeField& u, double r, const SpaceTimePoint& X0,
               const QuadratureRule& rule) {
  if (!(r > 0.0)) throw ContractError("weiss: radius must be positive");
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  check_time_slab(u, X0.t - 4.0 * r * r, X0.t - r * r, "energy");

  Vec clo = vzero();
  Vec chi = vzero();
  for (int a = 0; a < n; ++a) {
    clo[a] = u.space_axis(a).lo - X0.x[a];
    chi[a] = u.space_axis(a).hi - X0.x[a];
  }
  const double kap = P.kappa;
  const double q = P.q;
  auto f = [&](const Vec& y, double tau) {
    Vec x = y;
    for (int a = 0; a < n; ++a) x[a] += X0.x[a];
    const double t = X0.t + tau;
    const CVec val = u.value(x, t);
    const auto grad = u.gradient(x, t);
    double g2 = 0.0;
    for (int a = 0; a < n; ++a) g2 += sumsq(grad[a], m);
    const double v2 = sumsq(val, m);
    return g2 + kap * v2 / (2.0 * tau) + (2.0 / (1.0 + q)) * power_term(v2, q);
  };
  const Integral raw = slab_integral(f, -4.0 * r * r, -r * r, n, rule, &clo, &chi);
  const double scale = std::pow(r, -2.0 * kap);
  Integral out{raw.value * scale, raw.err * scale};
  out.err += interp_error_term(u, r, out.value);
  return out;
}

LocalizedWeiss weiss_localized(const SpaceTimeField& u, double r, const SpaceTimePoint& X0,
                               const CutoffSpec& eta, const QuadratureRule& rule) {
  if (!(r > 0.0)) throw ContractError("weiss_localized: radius must be positive");
  if (!(eta.inner > 0.0 && eta.outer > eta.inner)) {
    throw ContractError("weiss_localized: cutoff needs 0 < inner < outer");
  }
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  check_time_slab(u, X0.t - 4.0 * r * r, X0.t - r * r, "localized energy");

  Vec clo = vzero();
  Vec chi = vzero();
  bool covers_ball = true;
  for (int a = 0; a < n; ++a) {
    const double lo_rel = u.space_axis(a).lo - X0.x[a];
    const double hi_rel = u.space_axis(a).hi - X0.x[a];
    const double slack = 1e-9 * (u.space_axis(a).hi - u.space_axis(a).lo);
    if (lo_rel > -eta.outer + slack || hi_rel < eta.outer - slack) covers_ball = false;
    clo[a] = std::max(lo_rel, -eta.outer);
    chi[a] = std::min(hi_rel, eta.outer);
    if (!(clo[a] < chi[a])) {
      throw OutOfDomainError("weiss_localized: cutoff ball misses the sampled box");
    }
  }

  const double kap = P.kappa;
  const double q = P.q;
  auto f = [&](const Vec& y, double tau) {
    double rho2 = 0.0;
    for (int a = 0; a < n; ++a) rho2 += y[a] * y[a];
    const double rho = std::sqrt(rho2);
    if (rho >= eta.outer) return 0.0;
    const double ev = cutoff_value(eta, rho);
    const double ep = cutoff_deriv(eta, rho);
    Vec x = y;
    for (int a = 0; a < n; ++a) x[a] += X0.x[a];
    const double t = X0.t + tau;
    const CVec val = u.value(x, t);
    const auto grad = u.gradient(x, t);
    double g2 = 0.0;
    for (int a = 0; a < n; ++a) {
      const double ra = rho > 0.0 ? ep * y[a] / rho : 0.0;
      for (int c = 0; c < m; ++c) {
        const double gac = ev * grad[a][c] + ra * val[c];
        g2 += gac * gac;
      }
    }
    const double v2 = ev * ev * sumsq(val, m);
    return g2 + kap * v2 / (2.0 * tau) + (2.0 / (1.0 + q)) * power_term(v2, q);
  };
  // When the box covers the whole cutoff ball the clamped sides cut only
  // points where eta vanishes, so they carry no tail error.
  const Integral raw = slab_integral(f, -4.0 * r * r, -r * r, n, rule, &clo, &chi, covers_ball);
  const double scale = std::pow(r, -2.0 * kap);
  LocalizedWeiss out;
  out.value = raw.value * scale;
  out.err = raw.err * scale + interp_error_term(u, r, out.value);
  out.C_F = ring_sup_constant(u, X0, eta, r);
  out.F_shape = cutoff_shape_integral(P, eta, r);
  out.F = out.C_F * out.F_shape;
  return out;
}

WeissLimit weiss_limit(const SpaceTimeField& u, const SpaceTimePoint& X0,
                       const std::vector<double>& radii, const QuadratureRule& rule) {
  const std::size_t k = radii.size();
  if (k < 4) throw ContractError("weiss_limit: need at least four radii");
  for (std::size_t i = 0; i < k; ++i) {
    if (!(radii[i] > 0.0)) throw ContractError("weiss_limit: radii must be positive");
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double ratio = radii[i] / radii[i - 1];
    if (ratio < 1.9 || ratio > 2.1) {
      throw ContractError("weiss_limit: radii must ascend dyadically");
    }
  }

  const Params& P = u.params();
  const CutoffSpec eta{};
  double margin_min = std::numeric_limits<double>::infinity();
  for (int a = 0; a < P.n; ++a) {
    margin_min = std::min(margin_min, X0.x[a] - u.space_axis(a).lo);
    margin_min = std::min(margin_min, u.space_axis(a).hi - X0.x[a]);
  }
  // The plain energy is clean when the box holds the Gaussian mass out to
  // erfc-negligible radii; otherwise localize, provided the cutoff ring is
  // actually inside the box. If even that fails the plain version with its
  // honestly reported clamp tails is all there is.
  const bool ring_fits = margin_min >= eta.outer + 4.0 * u.max_dx();
  const bool tails_clean = margin_min >= 16.0 * radii.back();
  const bool use_localized = ring_fits && !tails_clean;

  WeissLimit res;
  res.localized = use_localized;
  std::vector<double> w(k);
  std::vector<double> errs(k);
  for (std::size_t i = 0; i < k; ++i) {
    double value = 0.0;
    double corr = 0.0;
    double err = 0.0;
    if (use_localized) {
      const LocalizedWeiss lw = weiss_localized(u, radii[i], X0, eta, rule);
      value = lw.value;
      corr = lw.F;
      err = lw.err;
    } else {
      const Integral iv = weiss(u, radii[i], X0, rule);
      value = iv.value;
      err = iv.err;
    }
    res.curve.push(radii[i], value, corr, err);
    w[i] = value + corr;
    errs[i] = err;
  }
  res.curve.validate();

  // Power-law model w(r) = w0 + b r^g over dyadic radii: successive
  // differences satisfy d2/d1 = 2^g, so w0 = w1 - d1/(2^g - 1). When the
  // differences sit inside the error estimates, or do not contract, the
  // smallest value itself is the best available limit.
  auto extrap = [&](std::size_t i) {
    const double w1 = w[i];
    const double w2 = w[i + 1];
    const double w3 = w[i + 2];
    const double d1 = w2 - w1;
    const double d2 = w3 - w2;
    const double noise = errs[i] + errs[i + 1];
    if (!(d1 > noise) || !(d2 > 0.0)) return w1;
    const double ratio = d2 / d1;
    if (ratio <= 1.05) return w1;
    return w1 - d1 / (ratio - 1.0);
  };
  res.limit = extrap(0);
  const double second = extrap(1);
  res.band = std::abs(res.limit - second) + std::max({errs[0], errs[1], errs[2]});
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (w[i + 1] < w[i] - 3.0 * (errs[i] + errs[i + 1])) res.inconsistent = true;
  }
  return res;
}

Frequency almgren(const SpaceTimeField& h, double r, const QuadratureRule& rule,
                  double caloric_threshold) {
  if (!(r > 0.0)) throw ContractError("almgren: radius must be positive");
  const Params& P = h.params();
  const int n = P.n;
  const int m = P.m;
  const double t1 = -4.0 * r * r;
  const double t2 = -r * r;
  check_time_slab(h, t1, t2, "frequency");

  Vec clo = vzero();
  Vec chi = vzero();
  for (int a = 0; a < n; ++a) {
    clo[a] = h.space_axis(a).lo;
    chi[a] = h.space_axis(a).hi;
  }
  auto fn = [&](const Vec& x, double t) {
    const auto grad = h.gradient(x, t);
    double g2 = 0.0;
    for (int a = 0; a < n; ++a) g2 += sumsq(grad[a], m);
    return g2;
  };
  auto fd = [&](const Vec& x, double t) { return sumsq(h.value(x, t), m) / (-t); };
  const Integral num = slab_integral(fn, t1, t2, n, rule, &clo, &chi);
  const Integral den = slab_integral(fd, t1, t2, n, rule, &clo, &chi);
  if (!(den.value > 0.0) || den.value <= 10.0 * den.err) {
    throw ContractError("almgren: frequency denominator vanishes on the slab");
  }
  Frequency out;
  out.value = num.value / den.value;
  out.err = (num.err + std::abs(out.value) * den.err) / den.value +
            interp_error_term(h, r, out.value);
  out.residual = interior_max_abs(apply_H(h), 1);
  out.caloric = out.residual <= caloric_threshold;
  return out;
}

double local_weiss(const SpaceTimeField& u, double r, const Vec& x0, double t0) {
  if (!(r > 0.0)) throw ContractError("local_weiss: radius must be positive");
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  const Axis& tax = u.time_axis();
  const double tsl = 1e-9 * std::max(1.0, tax.hi - tax.lo);
  if (t0 < tax.lo - tsl || t0 > tax.hi + tsl) {
    throw OutOfDomainError("local_weiss: slice time leaves the sampled range");
  }
  for (int a = 0; a < n; ++a) {
    const Axis& ax = u.space_axis(a);
    const double sl = 1e-9 * (ax.hi - ax.lo);
    if (x0[a] - r < ax.lo - sl || x0[a] + r > ax.hi + sl) {
      throw OutOfDomainError("local_weiss: ball leaves the sampled box");
    }
  }
  const double q = P.q;
  auto bulk = [&](const Vec& x) {
    const CVec val = u.value(x, t0);
    const auto grad = u.gradient(x, t0);
    double g2 = 0.0;
    for (int a = 0; a < n; ++a) g2 += sumsq(grad[a], m);
    return g2 + (2.0 / (1.0 + q)) * power_term(sumsq(val, m), q);
  };
  auto trace = [&](const Vec& x) { return sumsq(u.value(x, t0), m); };

  double vol = 0.0;
  double sph = 0.0;
  if (n == 1) {
    const int K = 256;
    const double hstep = 2.0 * r / K;
    for (int i = 0; i <= K; ++i) {
      Vec x = x0;
      x[0] = x0[0] - r + i * hstep;
      vol += ((i == 0 || i == K) ? 0.5 : 1.0) * bulk(x) * hstep;
    }
    Vec xl = x0;
    Vec xr = x0;
    xl[0] -= r;
    xr[0] += r;
    sph = trace(xl) + trace(xr);
  } else if (n == 2) {
    const int Kr = 128;
    const int Ka = 128;
    const double dr = r / Kr;
    const double da = 2.0 * kPi / Ka;
    for (int i = 0; i < Kr; ++i) {
      const double rho = (i + 0.5) * dr;
      for (int j = 0; j < Ka; ++j) {
        const double phi = j * da;
        Vec x = x0;
        x[0] += rho * std::cos(phi);
        x[1] += rho * std::sin(phi);
        vol += bulk(x) * rho * dr * da;
      }
    }
    for (int j = 0; j < Ka; ++j) {
      const double phi = j * da;
      Vec x = x0;
      x[0] += r * std::cos(phi);
      x[1] += r * std::sin(phi);
      sph += trace(x) * r * da;
    }
  } else {
    const int Kr = 96;
    const int Kt = 24;
    const int Kp = 48;
    const double dr = r / Kr;
    const double dth = kPi / Kt;
    const double dph = 2.0 * kPi / Kp;
    for (int i = 0; i < Kr; ++i) {
      const double rho = (i + 0.5) * dr;
      for (int jt = 0; jt < Kt; ++jt) {
        const double th = (jt + 0.5) * dth;
        const double s = std::sin(th);
        for (int jp = 0; jp < Kp; ++jp) {
          const double ph = jp * dph;
          Vec x = x0;
          x[0] += rho * s * std::cos(ph);
          x[1] += rho * s * std::sin(ph);
          x[2] += rho * std::cos(th);
          vol += bulk(x) * rho * rho * s * dr * dth * dph;
        }
      }
    }
    for (int jt = 0; jt < Kt; ++jt) {
      const double th = (jt + 0.5) * dth;
      const double s = std::sin(th);
      for (int jp = 0; jp < Kp; ++jp) {
        const double ph = jp * dph;
        Vec x = x0;
        x[0] += r * s * std::cos(ph);
        x[1] += r * s * std::sin(ph);
        x[2] += r * std::cos(th);
        sph += trace(x) * r * r * s * dth * dph;
      }
    }
  }
  const double kap = P.kappa;
  return std::pow(r, -(n + 2.0 * kap - 2.0)) * vol -
         kap * std::pow(r, -(n + 2.0 * kap - 1.0)) * sph;
}

double elliptic_M(const SpatialField& v) {
  const Params& P = v.params();
  const int n = P.n;
  const int m = P.m;
  const double interior = elliptic_interior_energy(v);
  double tr = 0.0;
  if (n == 1) {
    Vec xl = vzero();
    Vec xr = vzero();
    xl[0] = -1.0;
    xr[0] = 1.0;
    tr = sumsq(v.value(xl), m) + sumsq(v.value(xr), m);
  } else if (n == 2) {
    const int K = 256;
    const double da = 2.0 * kPi / K;
    for (int j = 0; j < K; ++j) {
      Vec x = vzero();
      x[0] = std::cos(j * da);
      x[1] = std::sin(j * da);
      tr += sumsq(v.value(x), m) * da;
    }
  } else {
    const int Kt = 24;
    const int Kp = 48;
    const double dth = kPi / Kt;
    const double dph = 2.0 * kPi / Kp;
    for (int jt = 0; jt < Kt; ++jt) {
      const double th = (jt + 0.5) * dth;
      const double s = std::sin(th);
      for (int jp = 0; jp < Kp; ++jp) {
        Vec x = vzero();
        x[0] = s * std::cos(jp * dph);
        x[1] = s * std::sin(jp * dph);
        x[2] = std::cos(th);
        tr += sumsq(v.value(x), m) * s * dth * dph;
      }
    }
  }
  return interior - P.kappa * tr;
}

HalfspaceFit dist_to_H(const SpaceTimeField& u, const QuadratureRule& rule) {
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  const Axis& tax = u.time_axis();
  const double t1 = std::max(-1.0, tax.lo);
  const double t2 = std::min(0.0, tax.hi);
  if (!(t1 < t2)) throw OutOfDomainError("dist_to_H: field does not meet the slab (-1, 0)");

  Vec clo = vzero();
  Vec chi = vzero();
  for (int a = 0; a < n; ++a) {
    clo[a] = u.space_axis(a).lo;
    chi[a] = u.space_axis(a).hi;
  }

  QuadratureRule coarse = rule;
  coarse.nodes_per_axis = std::max(n == 3 ? 17 : 33, (rule.nodes_per_axis / 2) | 1);
  coarse.time_subdivisions = std::max(2, rule.time_subdivisions / 2);

  const double alpha = P.alpha;
  const double kap = P.kappa;
  auto phi_at = [&](const Vec& x, const Vec& nu) {
    const double d = dot(x, nu, n);
    return d > 0.0 ? alpha * std::pow(d, kap) : 0.0;
  };
  auto norm2_of_u = [&](const QuadratureRule& rr) {
    return slab_integral([&](const Vec& x, double t) { return sumsq(u.value(x, t), m); }, t1, t2,
                         n, rr, &clo, &chi)
        .value;
  };
  const double u2_coarse = norm2_of_u(coarse);
  const double u2_full = norm2_of_u(rule);

  int evals = 0;
  auto dist2_for = [&](const Vec& nu, const QuadratureRule& rr, double u2, CVec* e_out) {
    ++evals;
    CVec w = czero();
    for (int c = 0; c < m; ++c) {
      w[c] = slab_integral(
                 [&](const Vec& x, double t) { return u.value(x, t)[c] * phi_at(x, nu); }, t1,
                 t2, n, rr, &clo, &chi)
                 .value;
    }
    const double phi2 = slab_integral(
                            [&](const Vec& x, double) {
                              const double p = phi_at(x, nu);
                              return p * p;
                            },
                            t1, t2, n, rr, &clo, &chi)
                            .value;
    const double wn = cnorm(w, m);
    if (e_out) {
      if (wn > 0.0) {
        for (int c = 0; c < m; ++c) (*e_out)[c] = w[c] / wn;
      } else {
        *e_out = unit_c(0);
      }
    }
    return u2 - 2.0 * wn + phi2;
  };

  const Vec nu_best = sweep_directions(
      n, [&](const Vec& nu) { return dist2_for(nu, coarse, u2_coarse, nullptr); });

  HalfspaceFit fit;
  CVec e = unit_c(0);
  const double d2 = dist2_for(nu_best, rule, u2_full, &e);
  fit.nu = nu_best;
  fit.e = e;
  fit.distance = std::sqrt(std::max(0.0, d2));
  fit.norm_kind = "gauss-slab-l2";
  fit.sweep_points = evals;
  return fit;
}

HalfspaceFit dist_to_H(const SpatialField& v, const std::string& norm_kind) {
  if (norm_kind != "l2" && norm_kind != "max" && norm_kind != "w12") {
    throw ContractError("dist_to_H: unknown norm kind: " + norm_kind);
  }
  const Params& P = v.params();
  const int n = P.n;
  const int m = P.m;
  const bool with_grad = norm_kind == "w12";

  struct BallNode {
    GridIndex ix;
    Vec x;
  };
  std::vector<BallNode> nodes;
  {
    GridIndex ix{};
    while (true) {
      const Vec x = v.node_x(ix);
      if (norm(x, n) <= 1.0 + 1e-12) nodes.push_back({ix, x});
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] < v.nx(a)) break;
        ix[a] = 0;
      }
      if (a < 0) break;
    }
  }
  double cell = 1.0;
  for (int a = 0; a < n; ++a) cell *= v.dx(a);

  // Node gradients of v, centered in the interior, one-sided at box edges.
  std::vector<std::array<CVec, kMaxDim>> grads;
  if (with_grad) {
    grads.resize(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      for (int a = 0; a < n; ++a) {
        GridIndex p = nodes[j].ix;
        GridIndex mn = nodes[j].ix;
        const int i0 = nodes[j].ix[a];
        double span = 2.0 * v.dx(a);
        if (i0 + 1 < v.nx(a)) {
          ++p[a];
        } else {
          span -= v.dx(a);
        }
        if (i0 > 0) {
          --mn[a];
        } else {
          span -= v.dx(a);
        }
        const CVec vp = v.node_value(p);
        const CVec vm = v.node_value(mn);
        for (int c = 0; c < m; ++c) grads[j][a][c] = (vp[c] - vm[c]) / span;
      }
    }
  }

  const double alpha = P.alpha;
  const double kap = P.kappa;
  auto phi_at = [&](const Vec& x, const Vec& nu) {
    const double d = dot(x, nu, n);
    return d > 0.0 ? alpha * std::pow(d, kap) : 0.0;
  };
  auto dphi_at = [&](const Vec& x, const Vec& nu, int a) {
    const double d = dot(x, nu, n);
    return d > 0.0 ? kap * alpha * std::pow(d, kap - 1.0) * nu[a] : 0.0;
  };

  double v2 = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    v2 += cell * sumsq(v.node_value(nodes[j].ix), m);
    if (with_grad) {
      for (int a = 0; a < n; ++a) v2 += cell * sumsq(grads[j][a], m);
    }
  }

  int evals = 0;
  auto fit_for = [&](const Vec& nu, CVec* e_out) -> double {
    ++evals;
    CVec w = czero();
    double phi2 = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double p = phi_at(nodes[j].x, nu);
      const CVec val = v.node_value(nodes[j].ix);
      for (int c = 0; c < m; ++c) w[c] += cell * val[c] * p;
      phi2 += cell * p * p;
      if (with_grad) {
        for (int a = 0; a < n; ++a) {
          const double dp = dphi_at(nodes[j].x, nu, a);
          for (int c = 0; c < m; ++c) w[c] += cell * grads[j][a][c] * dp;
          phi2 += cell * dp * dp;
        }
      }
    }
    const double wn = cnorm(w, m);
    CVec e = unit_c(0);
    if (wn > 0.0) {
      for (int c = 0; c < m; ++c) e[c] = w[c] / wn;
    }
    if (e_out) *e_out = e;
    if (norm_kind == "max") {
      // The direction pair (nu, e) is fitted in L2; only the distance is
      // measured in the max norm.
      double mx = 0.0;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double p = phi_at(nodes[j].x, nu);
        const CVec val = v.node_value(nodes[j].ix);
        double s2 = 0.0;
        for (int c = 0; c < m; ++c) {
          const double diff = val[c] - p * e[c];
          s2 += diff * diff;
        }
        mx = std::max(mx, std::sqrt(s2));
      }
      return mx;
    }
    return v2 - 2.0 * wn + phi2;
  };

  const Vec nu_best = sweep_directions(n, [&](const Vec& nu) { return fit_for(nu, nullptr); });
  HalfspaceFit fit;
  CVec e = unit_c(0);
  const double sc = fit_for(nu_best, &e);
  fit.nu = nu_best;
  fit.e = e;
  fit.distance = norm_kind == "max" ? sc : std::sqrt(std::max(0.0, sc));
  fit.norm_kind = norm_kind;
  fit.sweep_points = evals;
  return fit;
}

}  // namespace fblab
