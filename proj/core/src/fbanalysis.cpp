#include "fblab/fbanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <vector>

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

// Least-squares slope and intercept of y against x.
void line_fit(const std::vector<double>& xs, const std::vector<double>& ys, double* slope,
              double* intercept) {
  const std::size_t k = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  *slope = sxx > 0.0 ? sxy / sxx : 0.0;
  if (intercept) *intercept = my - *slope * mx;
}

struct CylinderWindow {
  int jlo[kMaxDim] = {};
  int jhi[kMaxDim] = {};
  int it_lo = 0;
  int it_hi = 0;
  bool empty = true;
};

// Grid nodes meeting B_r(x0) x [t0 - r^2, t0], index ranges clamped to the
// grid.
CylinderWindow cylinder_window(const SpaceTimeField& u, const SpaceTimePoint& X0, double r) {
  const int n = u.params().n;
  CylinderWindow w;
  for (int a = 0; a < n; ++a) {
    const Axis& ax = u.space_axis(a);
    const double h = ax.step();
    w.jlo[a] = std::max(0, static_cast<int>(std::ceil((X0.x[a] - r - ax.lo) / h - 1e-9)));
    w.jhi[a] =
        std::min(u.nx(a) - 1, static_cast<int>(std::floor((X0.x[a] + r - ax.lo) / h + 1e-9)));
    if (w.jlo[a] > w.jhi[a]) return w;
  }
  w.it_lo = 0;
  w.it_hi = u.nt() - 1;
  if (u.nt() > 1) {
    const Axis& tax = u.time_axis();
    const double dt = tax.step();
    w.it_lo = std::max(
        0, static_cast<int>(std::ceil((X0.t - r * r - tax.lo) / dt - 1e-9)));
    w.it_hi = std::min(u.nt() - 1,
                       static_cast<int>(std::floor((X0.t - tax.lo) / dt + 1e-9)));
    if (w.it_lo > w.it_hi) return w;
  }
  w.empty = false;
  return w;
}

// Max of f over cylinder nodes (euclidean ball test on top of the index
// window). Returns 0 on an empty window.
double cylinder_max(const SpaceTimeField& u, const SpaceTimePoint& X0, double r,
                    const std::function<double(int, const GridIndex&)>& f) {
  const int n = u.params().n;
  const CylinderWindow w = cylinder_window(u, X0, r);
  if (w.empty) return 0.0;
  const double r2 = r * r * (1.0 + 1e-12);
  double best = 0.0;
  for (int it = w.it_lo; it <= w.it_hi; ++it) {
    GridIndex ix{};
    for (int a = 0; a < n; ++a) ix[a] = w.jlo[a];
    while (true) {
      const Vec x = u.node_x(ix);
      double d2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const double d = x[a] - X0.x[a];
        d2 += d * d;
      }
      if (d2 <= r2) best = std::max(best, f(it, ix));
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] <= w.jhi[a]) break;
        ix[a] = w.jlo[a];
      }
      if (a < 0) break;
    }
  }
  return best;
}

void require_cylinder_in_domain(const SpaceTimeField& u, const SpaceTimePoint& X0, double r,
                                const char* who) {
  const int n = u.params().n;
  char msg[200];
  for (int a = 0; a < n; ++a) {
    const Axis& ax = u.space_axis(a);
    const double sl = 1e-9 * (ax.hi - ax.lo);
    if (X0.x[a] - r < ax.lo - sl || X0.x[a] + r > ax.hi + sl) {
      std::snprintf(msg, sizeof msg, "%s: cylinder of radius %g leaves the sampled box", who, r);
      throw OutOfDomainError(msg);
    }
  }
  const Axis& tax = u.time_axis();
  const double sl = 1e-9 * std::max(1.0, tax.hi - tax.lo);
  if (X0.t - r * r < tax.lo - sl || X0.t > tax.hi + sl) {
    std::snprintf(msg, sizeof msg, "%s: cylinder of radius %g leaves the sampled time range", who,
                  r);
    throw OutOfDomainError(msg);
  }
}

void require_ascending_dyadic(const std::vector<double>& radii, std::size_t min_count,
                              const char* who) {
  char msg[160];
  if (radii.size() < min_count) {
    std::snprintf(msg, sizeof msg, "%s: need at least %zu dyadic radii", who, min_count);
    throw ContractError(msg);
  }
  for (double r : radii) {
    if (!(r > 0.0)) {
      std::snprintf(msg, sizeof msg, "%s: radii must be positive", who);
      throw ContractError(msg);
    }
  }
  for (std::size_t i = 1; i < radii.size(); ++i) {
    const double ratio = radii[i] / radii[i - 1];
    if (ratio < 1.9 || ratio > 2.1) {
      std::snprintf(msg, sizeof msg, "%s: radii must ascend dyadically", who);
      throw ContractError(msg);
    }
  }
}

double node_abs(const SpaceTimeField& u, int it, const GridIndex& ix) {
  return std::sqrt(sumsq(u.node_value(it, ix), u.params().m));
}

// L1 distance of two fields over the unit sphere at fixed rescaled time s.
double sphere_l1_gap(const SpaceTimeField& a, const SpaceTimeField& b, double s) {
  const int n = a.params().n;
  const int m = a.params().m;
  auto gap_at = [&](const Vec& x) {
    const CVec va = a.value(x, s);
    const CVec vb = b.value(x, s);
    double d2 = 0.0;
    for (int c = 0; c < m; ++c) d2 += (va[c] - vb[c]) * (va[c] - vb[c]);
    return std::sqrt(d2);
  };
  if (n == 1) {
    Vec xl = vzero();
    Vec xr = vzero();
    xl[0] = -1.0;
    xr[0] = 1.0;
    return gap_at(xl) + gap_at(xr);
  }
  if (n == 2) {
    const int K = 256;
    const double da = 2.0 * kPi / K;
    double s1 = 0.0;
    for (int j = 0; j < K; ++j) {
      Vec x = vzero();
      x[0] = std::cos(j * da);
      x[1] = std::sin(j * da);
      s1 += gap_at(x) * da;
    }
    return s1;
  }
  const int Kt = 24;
  const int Kp = 48;
  const double dth = kPi / Kt;
  const double dph = 2.0 * kPi / Kp;
  double s1 = 0.0;
  for (int jt = 0; jt < Kt; ++jt) {
    const double th = (jt + 0.5) * dth;
    const double sn = std::sin(th);
    for (int jp = 0; jp < Kp; ++jp) {
      Vec x = vzero();
      x[0] = sn * std::cos(jp * dph);
      x[1] = sn * std::sin(jp * dph);
      x[2] = std::cos(th);
      s1 += gap_at(x) * sn * dth * dph;
    }
  }
  return s1;
}

int odd_count(int c) { return c | 1; }

// Largest power of two <= x (as a radius), and smallest >= x.
double dyadic_floor(double x) {
  double r = 1.0;
  while (r > x) r *= 0.5;
  return r;
}

double dyadic_ceil(double x) {
  double r = 1.0;
  if (x > 1.0) {
    while (r < x) r *= 2.0;
    return r;
  }
  while (r * 0.5 >= x) r *= 0.5;
  return r;
}

}  // namespace

double default_fb_threshold(const SpaceTimeField& u) {
  return 10.0 * std::pow(u.max_dx(), u.params().kappa);
}

FreeBoundarySample extract_fb(const SpaceTimeField& u, double threshold) {
  const Params& P = u.params();
  const int n = P.n;
  if (threshold < 0.0) threshold = default_fb_threshold(u);
  FreeBoundarySample out;
  out.threshold = threshold;

  // Indicator table first, faces second.
  std::vector<char> above(u.node_count());
  for (int it = 0; it < u.nt(); ++it) {
    GridIndex ix{};
    while (true) {
      above[u.node_offset(it, ix)] = node_abs(u, it, ix) > threshold ? 1 : 0;
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] < u.nx(a)) break;
        ix[a] = 0;
      }
      if (a < 0) break;
    }
  }
  for (int it = 0; it < u.nt(); ++it) {
    GridIndex ix{};
    while (true) {
      const char here = above[u.node_offset(it, ix)];
      const Vec x = u.node_x(ix);
      for (int a = 0; a < n; ++a) {
        if (ix[a] + 1 >= u.nx(a)) continue;
        GridIndex jx = ix;
        ++jx[a];
        if (above[u.node_offset(it, jx)] != here) {
          FreeBoundaryPoint p;
          p.X.x = x;
          p.X.x[a] += 0.5 * u.dx(a);
          p.X.t = u.node_t(it);
          p.face_axis = a;
          out.points.push_back(p);
        }
      }
      if (it + 1 < u.nt() && above[u.node_offset(it + 1, ix)] != here) {
        FreeBoundaryPoint p;
        p.X.x = x;
        p.X.t = u.node_t(it) + 0.5 * u.dt();
        p.face_axis = -1;
        out.points.push_back(p);
      }
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] < u.nx(a)) break;
        ix[a] = 0;
      }
      if (a < 0) break;
    }
  }
  return out;
}

SpaceTimePoint locate_fb(const SpaceTimeField& u, const FreeBoundaryPoint& face,
                         double threshold) {
  if (threshold < 0.0) threshold = default_fb_threshold(u);
  SpaceTimePoint X = face.X;
  const int a = face.face_axis;
  if (a < 0) return X;
  const Params& P = u.params();
  const double halo = std::pow(threshold / P.alpha, 1.0 / P.kappa);

  // The zero side of the face is the neighbor with the smaller amplitude.
  const Axis& tax = u.time_axis();
  const int it = u.nt() > 1 ? std::clamp(static_cast<int>(std::lround((X.t - tax.lo) /
                                                                      tax.step())),
                                         0, u.nt() - 1)
                            : 0;
  GridIndex lo_ix{};
  for (int b = 0; b < P.n; ++b) {
    lo_ix[b] = std::clamp(static_cast<int>(std::lround((X.x[b] - u.space_axis(b).lo) / u.dx(b) -
                                                       (b == a ? 0.5 : 0.0))),
                          0, u.nx(b) - 1);
  }
  GridIndex hi_ix = lo_ix;
  if (hi_ix[a] + 1 < u.nx(a)) ++hi_ix[a];
  const double below = node_abs(u, it, lo_ix);
  const double above = node_abs(u, it, hi_ix);
  X.x[a] += (below < above ? -1.0 : 1.0) * halo;
  return X;
}

double nondegeneracy_fit(const SpaceTimeField& u, const SpaceTimePoint& X0,
                         const std::vector<double>& radii) {
  if (radii.empty()) throw ContractError("nondegeneracy_fit: need at least one radius");
  std::vector<double> rs = radii;
  std::sort(rs.begin(), rs.end());
  if (!(rs.front() > 0.0)) throw ContractError("nondegeneracy_fit: radii must be positive");
  require_cylinder_in_domain(u, X0, rs.back(), "nondegeneracy_fit");

  const double kap = u.params().kappa;
  const double thr = default_fb_threshold(u);
  auto amp = [&](int it, const GridIndex& ix) { return node_abs(u, it, ix); };
  double c_hat = std::numeric_limits<double>::infinity();
  bool first = true;
  for (double r : rs) {
    const double sup = cylinder_max(u, X0, r, amp);
    if (first && sup <= thr) {
      throw ContractError("nondegeneracy_fit: X0 is outside the closure of the positivity set");
    }
    first = false;
    c_hat = std::min(c_hat, sup / std::pow(r, kap));
  }
  return c_hat;
}

GrowthFit growth_fit(const SpaceTimeField& u, const SpaceTimePoint& X0,
                     const std::vector<double>& radii) {
  require_ascending_dyadic(radii, 5, "growth_fit");
  require_cylinder_in_domain(u, X0, radii.back(), "growth_fit");

  const double kap = u.params().kappa;
  GrowthFit g;
  g.radii = radii;
  auto amp = [&](int it, const GridIndex& ix) { return node_abs(u, it, ix); };
  for (double r : radii) g.sups.push_back(cylinder_max(u, X0, r, amp));

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (g.sups[i] > 0.0) {
      xs.push_back(std::log(radii[i]));
      ys.push_back(std::log(g.sups[i]));
      g.C_hat = std::max(g.C_hat, g.sups[i] / std::pow(radii[i], kap));
    }
  }
  if (xs.size() < 2) {
    throw ContractError("growth_fit: the point sits deep in the zero set");
  }
  line_fit(xs, ys, &g.exponent, nullptr);

  g.doubling_ok = true;
  const double dx = u.max_dx();
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    const double allow = std::exp2(kap) * g.sups[i] * (1.0 + 4.0 * dx / radii[i]);
    if (g.sups[i + 1] > allow) g.doubling_ok = false;
  }
  return g;
}

VanishingOrder vanishing_order(const SpaceTimeField& u, const SpaceTimePoint& X0,
                               const std::vector<double>& radii) {
  const GrowthFit g = growth_fit(u, X0, radii);
  const double kap = u.params().kappa;
  std::vector<double> admissible;
  for (int j = 1; j <= static_cast<int>(std::floor(kap)); ++j) admissible.push_back(j);
  if (admissible.empty() || admissible.back() < kap) admissible.push_back(kap);

  double best = admissible[0];
  double best_d = std::abs(g.exponent - best);
  double second_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < admissible.size(); ++i) {
    const double d = std::abs(g.exponent - admissible[i]);
    if (d < best_d) {
      second_d = best_d;
      best_d = d;
      best = admissible[i];
    } else {
      second_d = std::min(second_d, d);
    }
  }
  VanishingOrder vo;
  if (admissible.size() > 1 && second_d - best_d <= 0.05) {
    vo.known = false;  // tie: the fit does not separate neighboring orders
    vo.order = 0.0;
  } else {
    vo.known = true;
    vo.order = best;
  }
  return vo;
}

BlowupSequence blowup_sequence(const SpaceTimeField& u, const SpaceTimePoint& X0,
                               const std::vector<double>& radii_desc) {
  if (radii_desc.empty()) throw ContractError("blowup_sequence: need at least one radius");
  for (std::size_t i = 0; i < radii_desc.size(); ++i) {
    if (!(radii_desc[i] > 0.0)) throw ContractError("blowup_sequence: radii must be positive");
    if (i > 0 && !(radii_desc[i] < radii_desc[i - 1])) {
      throw ContractError("blowup_sequence: radii must descend");
    }
  }
  const Params& P = u.params();
  const int n = P.n;
  const double r_top = radii_desc.front();
  auto amp = [&](int it, const GridIndex& ix) { return node_abs(u, it, ix); };
  if (cylinder_max(u, X0, r_top, amp) <= default_fb_threshold(u)) {
    throw ContractError("blowup_sequence: zero growth at X0 (point of the zero set)");
  }

  double margin = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    margin = std::min(margin, X0.x[a] - u.space_axis(a).lo);
    margin = std::min(margin, u.space_axis(a).hi - X0.x[a]);
  }
  const double half = std::min(2.0, 0.98 * margin / r_top);
  const double span = X0.t - u.time_axis().lo;
  const double depth = std::min(1.0, 0.98 * span / (r_top * r_top));
  if (!(half > 0.0) || !(depth > 0.0)) {
    throw OutOfDomainError("blowup_sequence: no rescaling window fits the domain");
  }
  SpaceAxes axes{};
  for (int a = 0; a < n; ++a) axes[a] = make_axis(-half, half, odd_count(n == 3 ? 65 : 129));
  const Axis taxis = make_axis(-depth, 0.0, 33);

  BlowupSequence out;
  for (double r : radii_desc) {
    out.fields.push_back(parabolic_rescale(u, X0, r, taxis, axes));
  }
  for (std::size_t i = 0; i + 1 < out.fields.size(); ++i) {
    out.cauchy_rates.push_back(sphere_l1_gap(out.fields[i], out.fields[i + 1], -depth));
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i + 1 < radii_desc.size(); ++i) {
    if (out.cauchy_rates[i] > 0.0) {
      xs.push_back(std::log(radii_desc[i + 1]));
      ys.push_back(std::log(out.cauchy_rates[i]));
    }
  }
  if (xs.size() >= 2) {
    line_fit(xs, ys, &out.fitted_rate, nullptr);
    out.rate_valid = true;
  }
  return out;
}

Classification classify_point(const SpaceTimeField& u, const SpaceTimePoint& X0,
                              const QuadratureRule& rule) {
  const Params& P = u.params();
  const int n = P.n;

  // Free-boundary membership: the indicator must flip near X0. "Near" allows
  // for the threshold halo: a kappa-growth profile stays under the threshold
  // within (threshold/alpha)^(1/kappa) of its boundary, so the flip can sit
  // that far inside the positivity set even when X0 is exact.
  const double thr = default_fb_threshold(u);
  {
    SpaceTimePoint probe = X0;
    const double rp = std::pow(thr / P.alpha, 1.0 / P.kappa) + 3.5 * u.max_dx();
    const CylinderWindow w = cylinder_window(u, probe, rp);
    bool has_above = false;
    bool has_below = false;
    if (!w.empty) {
      int it_lo = w.it_lo;
      int it_hi = w.it_hi;
      if (u.nt() > 1) {
        const Axis& tax = u.time_axis();
        const double dt = tax.step();
        it_lo = std::max(0, static_cast<int>(std::floor((X0.t - tax.lo) / dt - 3.0)));
        it_hi = std::min(u.nt() - 1, static_cast<int>(std::ceil((X0.t - tax.lo) / dt + 3.0)));
      }
      for (int it = it_lo; it <= it_hi && !(has_above && has_below); ++it) {
        GridIndex ix{};
        for (int a = 0; a < n; ++a) ix[a] = w.jlo[a];
        while (true) {
          (node_abs(u, it, ix) > thr ? has_above : has_below) = true;
          int a = n - 1;
          for (; a >= 0; --a) {
            if (++ix[a] <= w.jhi[a]) break;
            ix[a] = w.jlo[a];
          }
          if (a < 0) break;
        }
      }
    }
    if (!has_above || !has_below) {
      throw ContractError(
          "classify_point: X0 is not a free boundary point (no indicator flip nearby)");
    }
  }

  // Dyadic ladder from the grid geometry: small enough that interpolation
  // stays a second-order correction, large enough that the Gaussian tails
  // stay inside the box and the slab inside the time range.
  const double r_lo_req =
      std::max(6.0 * u.max_dx(), u.nt() > 1 ? 2.0 * std::sqrt(u.dt()) : 0.0);
  double margin = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    margin = std::min(margin, X0.x[a] - u.space_axis(a).lo);
    margin = std::min(margin, u.space_axis(a).hi - X0.x[a]);
  }
  const double span = X0.t - u.time_axis().lo;
  const double r_hi_req = std::min(margin / 16.0, std::sqrt(span / 4.0));
  const double r_min = dyadic_ceil(r_lo_req);
  const double r_max = dyadic_floor(r_hi_req);
  if (!(r_max >= 8.0 * r_min * (1.0 - 1e-12))) {
    throw ContractError(
        "classify_point: the grid cannot support four dyadic energy radii at X0");
  }
  std::vector<double> radii;
  for (double r = r_min; r <= r_max * (1.0 + 1e-12); r *= 2.0) radii.push_back(r);
  while (radii.size() > 6) radii.pop_back();

  Classification out;
  out.X0 = X0;
  out.radii = radii;
  const EnergyConstants ec = energy_constants(P);
  out.A_q = ec.A_q;
  out.M_theta = ec.M_theta;

  out.weiss = weiss_limit(u, X0, radii, rule);
  out.band = kClassifyBandFactor * out.weiss.band;

  // Growth wants five dyadic radii; extend the ladder wherever the domain
  // allows (the cylinder only needs depth r^2).
  std::vector<double> growth_radii = radii;
  if (growth_radii.size() < 5) {
    const double r_up = growth_radii.back() * 2.0;
    if (r_up <= margin && r_up * r_up <= span) {
      growth_radii.push_back(r_up);
    } else {
      growth_radii.insert(growth_radii.begin(), growth_radii.front() * 0.5);
    }
  }
  out.growth = growth_fit(u, X0, growth_radii);
  out.c_hat = nondegeneracy_fit(u, X0, radii);

  const double gap = std::abs(out.weiss.limit - out.A_q);
  if (out.weiss.inconsistent) {
    out.kind = PointClass::Unknown;  // a non-monotone curve cannot classify
  } else if (gap <= out.band) {
    const BlowupSequence bs = blowup_sequence(u, X0, {radii.front()});
    out.fit = dist_to_H(bs.fields.front(), rule);
    out.kind = out.fit.distance <= kDistTol ? PointClass::Regular : PointClass::Unknown;
  } else if (out.weiss.limit >= out.A_q + 2.0 * out.band) {
    out.kind = PointClass::NonRegular;
  } else {
    out.kind = PointClass::Unknown;
  }
  return out;
}

SupportSlab support_slab_check(const SpaceTimeField& u, double eps) {
  if (!(eps > 0.0)) throw ContractError("support_slab_check: eps must be positive");
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  const Axis& tax = u.time_axis();
  const double t1 = std::max(-1.0, tax.lo);
  const double t2 = std::min(0.0, tax.hi);
  if (!(t1 < t2)) {
    throw OutOfDomainError("support_slab_check: field does not meet the slab (-1, 0)");
  }
  Vec clo = vzero();
  Vec chi = vzero();
  for (int a = 0; a < n; ++a) {
    clo[a] = std::max(u.space_axis(a).lo, -1.0);
    chi[a] = std::min(u.space_axis(a).hi, 1.0);
  }
  const double alpha = P.alpha;
  const double kap = P.kappa;
  auto f = [&](const Vec& x, double t) {
    const CVec val = u.value(x, t);
    const double hx = x[n - 1] > 0.0 ? alpha * std::pow(x[n - 1], kap) : 0.0;
    double d2 = 0.0;
    for (int c = 0; c < m; ++c) {
      const double d = val[c] - (c == 0 ? hx : 0.0);
      d2 += d * d;
    }
    return std::sqrt(d2);
  };
  SupportSlab s;
  s.closeness = slab_integral(f, t1, t2, n, QuadratureRule{}, &clo, &chi).value;
  s.closeness_ok = s.closeness < eps;
  s.bound = 10.0 * std::pow(eps, 1.0 / (n + 4.0));

  const double thr = default_fb_threshold(u);
  SpaceTimePoint origin{};
  origin.t = std::min(0.0, tax.hi);
  s.offset = -0.5;  // deepest possible violation in Q_{1/2}^-
  cylinder_max(u, origin, 0.5, [&](int it, const GridIndex& ix) {
    if (node_abs(u, it, ix) > thr) {
      s.offset = std::max(s.offset, -u.node_x(ix)[n - 1]);
    }
    return 0.0;
  });
  s.holds = s.offset <= s.bound;
  return s;
}

TimeDecayFit time_derivative_decay(const SpaceTimeField& u, const SpaceTimePoint& X0,
                                   const std::vector<double>& radii) {
  if (radii.size() < 2) throw ContractError("time_derivative_decay: need at least two radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ContractError("time_derivative_decay: radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) {
      throw ContractError("time_derivative_decay: radii must ascend");
    }
  }
  require_cylinder_in_domain(u, X0, radii.back(), "time_derivative_decay");
  TimeDecayFit fit;
  fit.radii = radii;
  if (u.nt() < 2) {
    fit.time_independent = true;
    return fit;
  }
  auto dt_amp = [&](int it, const GridIndex& ix) {
    return std::sqrt(sumsq(u.node_time_deriv(it, ix), u.params().m));
  };
  for (double r : radii) fit.sups.push_back(cylinder_max(u, X0, r, dt_amp));

  const double floor =
      100.0 * std::numeric_limits<double>::epsilon() * u.max_abs() / u.dt();
  fit.time_independent = true;
  for (double s : fit.sups) {
    if (s > floor) fit.time_independent = false;
  }
  if (fit.time_independent) return fit;

  const double kap = u.params().kappa;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (fit.sups[i] > floor) {
      xs.push_back(std::log(radii[i]));
      ys.push_back(std::log(fit.sups[i]));
      fit.C_hat = std::max(fit.C_hat, fit.sups[i] / std::pow(radii[i], kap - 2.0));
    }
  }
  if (xs.size() >= 2) line_fit(xs, ys, &fit.exponent, nullptr);
  return fit;
}

PointwiseReport pointwise_diagnostics(const SpaceTimeField& u, const Region& region) {
  const Params& P = u.params();
  const int n = P.n;
  const int m = P.m;
  const double q = P.q;

  // Node index ranges of the region, then a one-node margin for stencils.
  int jlo[kMaxDim] = {};
  int jhi[kMaxDim] = {};
  for (int a = 0; a < n; ++a) {
    const Axis& ax = u.space_axis(a);
    const double h = ax.step();
    jlo[a] = std::max(0, static_cast<int>(std::ceil((region.xlo[a] - ax.lo) / h - 1e-9)));
    jhi[a] =
        std::min(u.nx(a) - 1, static_cast<int>(std::floor((region.xhi[a] - ax.lo) / h + 1e-9)));
    if (jlo[a] > jhi[a]) {
      throw ContractError("pointwise_diagnostics: region contains no grid nodes");
    }
  }
  const Axis& tax = u.time_axis();
  int it_lo = 0;
  int it_hi = u.nt() - 1;
  if (u.nt() > 1) {
    const double dt = tax.step();
    it_lo = std::max(0, static_cast<int>(std::ceil((region.tlo - tax.lo) / dt - 1e-9)));
    it_hi = std::min(u.nt() - 1, static_cast<int>(std::floor((region.thi - tax.lo) / dt + 1e-9)));
  }
  if (it_lo > it_hi) throw ContractError("pointwise_diagnostics: region contains no grid nodes");

  const double thr = default_fb_threshold(u);
  {
    GridIndex ix{};
    for (int it = it_lo; it <= it_hi; ++it) {
      for (int a = 0; a < n; ++a) ix[a] = jlo[a];
      while (true) {
        if (node_abs(u, it, ix) <= thr) {
          throw ContractError("pointwise_diagnostics: region touches the zero set");
        }
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++ix[a] <= jhi[a]) break;
          ix[a] = jlo[a];
        }
        if (a < 0) break;
      }
    }
  }

  PointwiseReport rep;
  rep.theta_used = q > 0.0 ? 0.5 / (1.0 - q) + 0.05 : 1.0;

  // g (or g^theta) on the margin-extended window, then the discrete H.
  int elo[kMaxDim] = {};
  int ehi[kMaxDim] = {};
  int ecount[kMaxDim] = {};
  for (int a = 0; a < n; ++a) {
    elo[a] = std::max(0, jlo[a] - 1);
    ehi[a] = std::min(u.nx(a) - 1, jhi[a] + 1);
    ecount[a] = ehi[a] - elo[a] + 1;
  }
  const int et_lo = std::max(0, it_lo - 1);
  const int et_hi = std::min(u.nt() - 1, it_hi + 1);
  const int et_count = et_hi - et_lo + 1;
  bool stencil_ok = et_count >= 2 && u.nt() >= 2;
  for (int a = 0; a < n; ++a) stencil_ok = stencil_ok && ecount[a] >= 3;

  auto g_at = [&](int it, const GridIndex& ix) {
    const double ut2 = sumsq(u.node_time_deriv(it, ix), m);
    const double v2 = sumsq(u.node_value(it, ix), m);
    const double g = q > 0.0 ? ut2 * std::pow(v2, -q) : ut2;
    return q > 0.0 ? std::pow(g, rep.theta_used) : g;
  };

  if (stencil_ok) {
    std::size_t total = static_cast<std::size_t>(et_count);
    for (int a = 0; a < n; ++a) total *= static_cast<std::size_t>(ecount[a]);
    std::vector<double> gv(total);
    std::size_t pos = 0;
    for (int it = et_lo; it <= et_hi; ++it) {
      GridIndex ix{};
      for (int a = 0; a < n; ++a) ix[a] = elo[a];
      while (true) {
        gv[pos++] = g_at(it, ix);
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++ix[a] <= ehi[a]) break;
          ix[a] = elo[a];
        }
        if (a < 0) break;
      }
    }
    Params Pg = P;
    Pg.m = 1;
    SpaceAxes gaxes{};
    for (int a = 0; a < n; ++a) {
      gaxes[a] = make_axis(u.space_axis(a).coord(elo[a]), u.space_axis(a).coord(ehi[a]),
                           ecount[a]);
    }
    const Axis gtax = make_axis(u.node_t(et_lo), u.node_t(et_hi), et_count);
    const SpaceTimeField g = SpaceTimeField::from_values(Pg, gtax, gaxes, std::move(gv));
    const SpaceTimeField Hg = apply_H(g);
    // Interior of the extended window = the region nodes themselves.
    rep.min_Hg = std::numeric_limits<double>::infinity();
    for (int it = std::max(et_lo + 1, it_lo); it <= std::min(et_hi - 1, it_hi); ++it) {
      GridIndex ix{};
      for (int a = 0; a < n; ++a) ix[a] = std::max(elo[a] + 1, jlo[a]);
      bool any = true;
      for (int a = 0; a < n; ++a) {
        if (ix[a] > std::min(ehi[a] - 1, jhi[a])) any = false;
      }
      while (any) {
        GridIndex lx{};
        for (int a = 0; a < n; ++a) lx[a] = ix[a] - elo[a];
        rep.min_Hg = std::min(rep.min_Hg, Hg.node_value(it - et_lo, lx)[0]);
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++ix[a] <= std::min(ehi[a] - 1, jhi[a])) break;
          ix[a] = std::max(elo[a] + 1, jlo[a]);
        }
        if (a < 0) break;
      }
    }
    if (!std::isfinite(rep.min_Hg)) rep.min_Hg = 0.0;
  }

  // Cauchy-Schwarz sharpness over the region.
  {
    GridIndex ix{};
    for (int it = it_lo; it <= it_hi; ++it) {
      for (int a = 0; a < n; ++a) ix[a] = jlo[a];
      while (true) {
        const CVec val = u.node_value(it, ix);
        const double v2 = sumsq(val, m);
        double g2 = 0.0;
        double proj2 = 0.0;
        for (int a = 0; a < n; ++a) {
          const CVec da = u.node_gradient(it, ix, a);
          g2 += sumsq(da, m);
          double pa = 0.0;
          for (int c = 0; c < m; ++c) pa += val[c] * da[c];
          proj2 += pa * pa;
        }
        const double lhs = v2 * g2;
        if (proj2 > 0.0) {
          rep.cauchy_eps = std::max(rep.cauchy_eps, lhs / proj2 - 1.0);
        } else if (lhs > 0.0) {
          rep.cauchy_eps = std::numeric_limits<double>::infinity();
        }
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++ix[a] <= jhi[a]) break;
          ix[a] = jlo[a];
        }
        if (a < 0) break;
      }
    }
  }

  // Collar maxima of g approaching the zero set, nearest collar first.
  {
    const double w = 2.0 * u.max_dx();
    std::vector<double> cmax(3, 0.0);
    std::vector<bool> seen(3, false);
    for (int it = it_lo; it <= it_hi; ++it) {
      // Below-threshold nodes of this slice, whole grid.
      std::vector<Vec> below;
      GridIndex ix{};
      while (true) {
        if (node_abs(u, it, ix) <= thr) below.push_back(u.node_x(ix));
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++ix[a] < u.nx(a)) break;
          ix[a] = 0;
        }
        if (a < 0) break;
      }
      if (below.empty()) continue;
      for (int a = 0; a < n; ++a) ix[a] = jlo[a];
      while (true) {
        const Vec x = u.node_x(ix);
        double dmin = std::numeric_limits<double>::infinity();
        for (const Vec& y : below) {
          double d2 = 0.0;
          for (int a = 0; a < n; ++a) d2 += (x[a] - y[a]) * (x[a] - y[a]);
          dmin = std::min(dmin, std::sqrt(d2));
        }
        const int band = static_cast<int>(std::floor(dmin / w));
        if (band >= 0 && band < 3) {
          const double ut2 = sumsq(u.node_time_deriv(it, ix), m);
          const double v2 = sumsq(u.node_value(it, ix), m);
          const double gval = q > 0.0 ? ut2 * std::pow(v2, -q) : ut2;
          cmax[band] = std::max(cmax[band], gval);
          seen[band] = true;
        }
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++ix[a] <= jhi[a]) break;
          ix[a] = jlo[a];
        }
        if (a < 0) break;
      }
    }
    rep.collar_defined = seen[0] && seen[1] && seen[2];
    if (rep.collar_defined) {
      rep.collar_max = cmax;
      rep.collar_decreasing = cmax[0] <= cmax[1] && cmax[1] <= cmax[2];
    }
  }
  return rep;
}

EpiperimetricResult epiperimetric_test(const Params& params,
                                       const std::function<CVec(const Vec&)>& c_boundary,
                                       const HalfspaceFit& fit, const EpiperimetricOptions& opts) {
  const int n = params.n;
  const int m = params.m;
  const double kap = params.kappa;
  const double alpha = params.alpha;
  SpaceAxes axes{};
  for (int a = 0; a < n; ++a) axes[a] = make_axis(-1.0, 1.0, odd_count(opts.nodes_per_axis));

  const SpatialField c = SpatialField::sample(params, axes, [&](const Vec& x) {
    const double rho = norm(x, n);
    if (rho <= 0.0) return czero();
    Vec dir = x;
    for (int a = 0; a < n; ++a) dir[a] /= rho;
    CVec tv = c_boundary(dir);
    const double s = std::pow(rho, kap);
    for (int cc = 0; cc < m; ++cc) tv[cc] *= s;
    return tv;
  });
  const SpatialField h = SpatialField::sample(params, axes, [&](const Vec& x) {
    const double d = dot(x, fit.nu, n);
    const double hv = d > 0.0 ? alpha * std::pow(d, kap) : 0.0;
    CVec out = czero();
    for (int cc = 0; cc < m; ++cc) out[cc] = hv * fit.e[cc];
    return out;
  });

  EpiperimetricResult res;
  res.M_h = elliptic_M(h);
  res.M_c = elliptic_M(c);

  // Trace closeness over the ball, W^{1,2} and max norms of c - h.
  {
    double cell = 1.0;
    for (int a = 0; a < n; ++a) cell *= c.dx(a);
    double w12 = 0.0;
    double mx = 0.0;
    GridIndex ix{};
    while (true) {
      const Vec x = c.node_x(ix);
      if (norm(x, n) <= 1.0 + 1e-12) {
        const CVec dv = [&] {
          CVec d = c.node_value(ix);
          const CVec hv = h.node_value(ix);
          for (int cc = 0; cc < m; ++cc) d[cc] -= hv[cc];
          return d;
        }();
        w12 += cell * sumsq(dv, m);
        mx = std::max(mx, std::sqrt(sumsq(dv, m)));
        for (int a = 0; a < n; ++a) {
          GridIndex p = ix;
          GridIndex mn = ix;
          double span = 2.0 * c.dx(a);
          if (ix[a] + 1 < c.nx(a)) {
            ++p[a];
          } else {
            span -= c.dx(a);
          }
          if (ix[a] > 0) {
            --mn[a];
          } else {
            span -= c.dx(a);
          }
          const CVec cp = c.node_value(p);
          const CVec cm = c.node_value(mn);
          const CVec hp = h.node_value(p);
          const CVec hm = h.node_value(mn);
          for (int cc = 0; cc < m; ++cc) {
            const double dd = ((cp[cc] - hp[cc]) - (cm[cc] - hm[cc])) / span;
            w12 += cell * dd * dd;
          }
        }
      }
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] < c.nx(a)) break;
        ix[a] = 0;
      }
      if (a < 0) break;
    }
    res.trace_w12_gap = std::sqrt(w12);
    res.trace_max_gap = mx;
    res.trace_close = res.trace_w12_gap + res.trace_max_gap <= opts.delta;
  }

  SolverConfig cfg;
  cfg.linear_tol = opts.descent_tol;
  cfg.max_newton_iters = opts.descent_iters;
  const DescentResult dr = minimize_elliptic(c, nullptr, cfg);
  res.converged = dr.converged;
  res.M_v = elliptic_M(dr.v);

  const double dx = c.dx(0);
  res.noise_floor = opts.noise_floor_cells * dx * dx;
  if (res.M_c <= res.M_h + res.noise_floor) {
    res.degenerate = true;
    res.eps_achieved = 0.0;
  } else {
    res.eps_achieved = 1.0 - (res.M_v - res.M_h) / (res.M_c - res.M_h);
  }
  return res;
}

NormalFieldReport normal_field_fit(const SpaceTimeField& u, double t0) {
  const Params& P = u.params();
  const int n = P.n;
  const Axis& tax = u.time_axis();
  const double dt = u.nt() > 1 ? tax.step() : 1.0;
  const int it0 = u.nt() > 1
                      ? std::clamp(static_cast<int>(std::lround((t0 - tax.lo) / dt)), 0,
                                   u.nt() - 1)
                      : 0;
  const double t_slice = tax.coord(it0);

  const FreeBoundarySample fb = extract_fb(u);
  std::vector<Vec> at_slice;
  for (const FreeBoundaryPoint& p : fb.points) {
    if (p.face_axis >= 0 && std::abs(p.X.t - t_slice) <= 0.51 * dt) {
      at_slice.push_back(p.X.x);
    }
  }
  if (at_slice.size() < 2) {
    throw ContractError("normal_field_fit: insufficient data (need two regular points)");
  }
  // Cap the per-point work; keep an even spread.
  const std::size_t cap = 24;
  if (at_slice.size() > cap) {
    std::vector<Vec> kept;
    for (std::size_t i = 0; i < cap; ++i) {
      kept.push_back(at_slice[i * at_slice.size() / cap]);
    }
    at_slice.swap(kept);
  }

  const double r_bu =
      dyadic_ceil(std::max(6.0 * u.max_dx(), u.nt() > 1 ? 2.0 * std::sqrt(u.dt()) : 0.0));
  QuadratureRule coarse;
  coarse.nodes_per_axis = 65;
  coarse.time_subdivisions = 4;

  NormalFieldReport rep;
  for (const Vec& x : at_slice) {
    SpaceTimePoint X;
    X.x = x;
    X.t = t_slice;
    const BlowupSequence bs = blowup_sequence(u, X, {r_bu});
    const HalfspaceFit hf = dist_to_H(bs.fields.front(), coarse);
    NormalFieldEntry e;
    e.x = x;
    e.nu = hf.nu;
    e.e = hf.e;
    rep.points.push_back(e);
  }

  // Pairwise Holder quotients for the normal field; the largest exponent is
  // kept while the maximizing pair is not the closest one (a closest-pair
  // maximum signals a diverging quotient).
  std::vector<double> pair_dist;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.points.size(); ++j) {
      Vec d = rep.points[i].x;
      for (int a = 0; a < n; ++a) d[a] -= rep.points[j].x[a];
      pair_dist.push_back(norm(d, n));
    }
  }
  std::vector<double> sorted = pair_dist;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  rep.spatial_exponent = 0.0;
  rep.spatial_constant = 0.0;
  for (int step = 1; step <= 20; ++step) {
    const double a_exp = 0.05 * step;
    double K = 0.0;
    double arg_dist = 0.0;
    std::size_t pi = 0;
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
      for (std::size_t j = i + 1; j < rep.points.size(); ++j, ++pi) {
        const double dij = pair_dist[pi];
        if (!(dij > 0.0)) continue;
        Vec dn = rep.points[i].nu;
        for (int aa = 0; aa < n; ++aa) dn[aa] -= rep.points[j].nu[aa];
        const double quot = norm(dn, n) / std::pow(dij, a_exp);
        if (quot > K) {
          K = quot;
          arg_dist = dij;
        }
      }
    }
    const bool stable = K == 0.0 || arg_dist >= median;
    if (stable) {
      rep.spatial_exponent = a_exp;
      rep.spatial_constant = K;
    }
  }

  // Half-Lipschitz constant in time: track each slice point against the
  // nearest boundary point at other slices.
  if (u.nt() > 1) {
    std::vector<std::vector<Vec>> by_slice(u.nt());
    for (const FreeBoundaryPoint& p : fb.points) {
      if (p.face_axis < 0) continue;
      const int it = std::clamp(static_cast<int>(std::lround((p.X.t - tax.lo) / dt)), 0,
                                u.nt() - 1);
      by_slice[it].push_back(p.X.x);
    }
    const int stride = std::max(1, u.nt() / 16);
    for (const NormalFieldEntry& e : rep.points) {
      for (int it = 0; it < u.nt(); it += stride) {
        if (it == it0 || by_slice[it].empty()) continue;
        double dmin = std::numeric_limits<double>::infinity();
        for (const Vec& y : by_slice[it]) {
          Vec d = e.x;
          for (int a = 0; a < n; ++a) d[a] -= y[a];
          dmin = std::min(dmin, norm(d, n));
        }
        const double gap = std::abs(tax.coord(it) - t_slice);
        if (gap > 0.0) {
          rep.time_constant = std::max(rep.time_constant, dmin / std::sqrt(gap));
          ++rep.time_pairs;
        }
      }
    }
  }
  return rep;
}

LocalEnergyDecay local_energy_decay(const SpaceTimeField& u, const SpaceTimePoint& X0,
                                    const std::vector<double>& radii) {
  if (radii.size() < 3) throw ContractError("local_energy_decay: need at least three radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ContractError("local_energy_decay: radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) {
      throw ContractError("local_energy_decay: radii must ascend");
    }
  }
  LocalEnergyDecay out;
  std::vector<double> w;
  for (double r : radii) {
    const double v = local_weiss(u, r, X0.x, X0.t);
    w.push_back(v);
    out.curve.push(r, v);
  }

  double scale = 0.0;
  for (double v : w) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-12, 1e-10 * scale);

  const double d1 = w[1] - w[0];
  const double d2 = w[2] - w[1];
  out.limit = w[0];
  if (std::abs(d1) > floor && std::abs(d2) > std::abs(d1) * 1.05 && d1 * d2 > 0.0) {
    out.limit = w[0] - d1 / (d2 / d1 - 1.0);
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double gap = std::abs(w[i] - out.limit);
    if (gap > floor) {
      xs.push_back(std::log(radii[i]));
      ys.push_back(std::log(gap));
    }
  }
  if (xs.size() >= 2) {
    line_fit(xs, ys, &out.gamma, nullptr);
  } else {
    out.gamma_degenerate = true;
  }

  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    out.defect = std::max(out.defect, w[i] - w[i + 1]);
  }

  // Fit the defect bound C |r2^b - r1^b| over consecutive drops.
  std::vector<double> drops, r1s, r2s;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double drop = w[i] - w[i + 1];
    if (drop > floor) {
      drops.push_back(drop);
      r1s.push_back(radii[i]);
      r2s.push_back(radii[i + 1]);
    }
  }
  if (!drops.empty()) {
    double best_res = std::numeric_limits<double>::infinity();
    for (int bstep = 2; bstep <= 40; ++bstep) {
      const double beta = 0.05 * bstep;
      double C = 0.0;
      for (std::size_t i = 0; i < drops.size(); ++i) {
        const double gap = std::abs(std::pow(r2s[i], beta) - std::pow(r1s[i], beta));
        if (gap > 0.0) C = std::max(C, drops[i] / gap);
      }
      double res = 0.0;
      for (std::size_t i = 0; i < drops.size(); ++i) {
        const double gap = std::abs(std::pow(r2s[i], beta) - std::pow(r1s[i], beta));
        if (gap > 0.0) {
          const double e = std::log(C * gap) - std::log(drops[i]);
          res += e * e;
        }
      }
      if (res < best_res) {
        best_res = res;
        out.C_fit = C;
        out.beta_fit = beta;
      }
    }
  }
  return out;
}

}  // namespace fblab
