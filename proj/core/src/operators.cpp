#include "fblab/operators.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

namespace fblab {
namespace {

// Second spatial derivative along one axis at node index i, with the stencil
// shifted inward at the two edge nodes.
double second_deriv(const std::vector<double>& data, std::size_t base, std::size_t stride,
                    int i, int count, double h) {
  const auto at = [&](int j) { return data[base + static_cast<std::size_t>(j) * stride]; };
  int c = i;
  if (c == 0) c = 1;
  if (c == count - 1) c = count - 2;
  return (at(c + 1) - 2.0 * at(c) + at(c - 1)) / (h * h);
}

void require_stencil_grid(const SpaceTimeField& u) {
  if (u.nt() < 3) throw ContractError("stencil operators need at least 3 time nodes");
  for (int a = 0; a < u.params().n; ++a)
    if (u.nx(a) < 3) throw ContractError("stencil operators need at least 3 nodes per axis");
}

}  // namespace

CVec reaction(const CVec& u, const Params& params) {
  const double mag = cnorm(u, params.m);
  CVec out = czero();
  if (mag == 0.0) return out;
  const double factor = std::pow(mag, params.q - 1.0);
  for (int c = 0; c < params.m; ++c) out[c] = factor * u[c];
  return out;
}

CVec reaction_regularized(const CVec& u, const Params& params, double delta) {
  const double mag = cnorm(u, params.m);
  CVec out = czero();
  if (mag == 0.0) return out;
  const double base = params.q == 0.0 ? mag : std::max(mag, delta);
  const double factor = std::pow(base, params.q - 1.0);
  for (int c = 0; c < params.m; ++c) out[c] = factor * u[c];
  return out;
}

SpaceTimeField parabolic_rescale(const SpaceTimeField& u, const SpaceTimePoint& X0, double r,
                                 const Axis& target_time, const SpaceAxes& target_space) {
  if (!(r > 0.0)) throw ContractError("rescale radius must be positive");
  const Params& P = u.params();
  const int n = P.n;

  // The map is affine, so checking the 2^(n+1) target box corners suffices.
  for (int mask = 0; mask < (1 << (n + 1)); ++mask) {
    Vec corner = vzero();
    for (int a = 0; a < n; ++a) {
      const Axis& ax = target_space[a];
      corner[a] = (mask >> a) & 1 ? ax.hi : ax.lo;
    }
    const double tc = (mask >> n) & 1 ? target_time.hi : target_time.lo;
    Vec mapped = vzero();
    for (int a = 0; a < n; ++a) mapped[a] = r * corner[a] + X0.x[a];
    const double tm = r * r * tc + X0.t;
    if (!u.contains(mapped, tm, 1e-9)) {
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "rescaled box leaves the domain at corner x1=%g t=%g (mapped x1=%g t=%g)",
                    corner[0], tc, mapped[0], tm);
      throw OutOfDomainError(msg);
    }
  }

  const double scale = std::pow(r, -P.kappa);
  return SpaceTimeField::sample(P, target_time, target_space, [&](const Vec& x, double t) {
    Vec mapped = vzero();
    for (int a = 0; a < n; ++a) mapped[a] = r * x[a] + X0.x[a];
    CVec v = u.value(mapped, r * r * t + X0.t);
    for (int c = 0; c < P.m; ++c) v[c] *= scale;
    return v;
  });
}

SpaceTimeField apply_L(const SpaceTimeField& u) {
  require_stencil_grid(u);
  const Params& P = u.params();
  const int n = P.n;
  std::vector<double> out(u.data().size());

  for (int it = 0; it < u.nt(); ++it) {
    const double t = u.node_t(it);
    GridIndex ix{};
    bool done = false;
    while (!done) {
      const Vec x = u.node_x(ix);
      const std::size_t off = u.node_offset(it, ix) * static_cast<std::size_t>(P.m);
      const CVec val = u.node_value(it, ix);
      const CVec ut = u.node_time_deriv(it, ix);
      CVec acc = czero();
      for (int a = 0; a < n; ++a) {
        const CVec ga = u.node_gradient(it, ix, a);
        for (int c = 0; c < P.m; ++c) acc[c] += x[a] * ga[c];
      }
      for (int c = 0; c < P.m; ++c)
        out[off + c] = acc[c] + 2.0 * t * ut[c] - P.kappa * val[c];
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < u.nx(a)) break;
        ix[a] = 0;
        if (a == 0) done = true;
      }
    }
  }
  return SpaceTimeField::from_values(P, u.time_axis(),
                                     [&] {
                                       SpaceAxes axes{};
                                       for (int a = 0; a < n; ++a) axes[a] = u.space_axis(a);
                                       return axes;
                                     }(),
                                     std::move(out));
}

namespace {

SpaceTimeField heat_apply_impl(const SpaceTimeField& u, bool subtract_reaction) {
  require_stencil_grid(u);
  const Params& P = u.params();
  const int n = P.n;
  const std::vector<double>& data = u.data();
  std::vector<double> out(data.size());

  // Node strides in samples (components fastest).
  std::size_t strides[kMaxDim + 1];
  strides[n] = static_cast<std::size_t>(P.m);
  for (int a = n - 1; a >= 1; --a)
    strides[a] = strides[a + 1] * static_cast<std::size_t>(u.nx(a));
  strides[0] = strides[1] * static_cast<std::size_t>(u.nx(0));

  for (int it = 0; it < u.nt(); ++it) {
    GridIndex ix{};
    bool done = false;
    while (!done) {
      const std::size_t off = u.node_offset(it, ix) * static_cast<std::size_t>(P.m);
      const CVec val = u.node_value(it, ix);
      const CVec ut = u.node_time_deriv(it, ix);
      const CVec f = subtract_reaction ? reaction(val, P) : czero();
      for (int c = 0; c < P.m; ++c) {
        double lap = 0.0;
        for (int a = 0; a < n; ++a) {
          const std::size_t stride = strides[a + 1];
          const std::size_t line = off + c - static_cast<std::size_t>(ix[a]) * stride;
          lap += second_deriv(data, line, stride, ix[a], u.nx(a), u.dx(a));
        }
        out[off + c] = lap - ut[c] - f[c];
      }
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < u.nx(a)) break;
        ix[a] = 0;
        if (a == 0) done = true;
      }
    }
  }
  SpaceAxes axes{};
  for (int a = 0; a < n; ++a) axes[a] = u.space_axis(a);
  return SpaceTimeField::from_values(P, u.time_axis(), axes, std::move(out));
}

}  // namespace

SpaceTimeField apply_H(const SpaceTimeField& u) { return heat_apply_impl(u, false); }

SpaceTimeField heat_residual(const SpaceTimeField& u) { return heat_apply_impl(u, true); }

double interior_max_abs(const SpaceTimeField& f, int ring) {
  const Params& P = f.params();
  const int n = P.n;
  double worst = 0.0;
  for (int it = ring; it < f.nt() - ring; ++it) {
    GridIndex ix{};
    bool done = false;
    while (!done) {
      bool inside = true;
      for (int a = 0; a < n; ++a)
        if (ix[a] < ring || ix[a] >= f.nx(a) - ring) inside = false;
      if (inside) worst = std::max(worst, cnorm(f.node_value(it, ix), P.m));
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < f.nx(a)) break;
        ix[a] = 0;
        if (a == 0) done = true;
      }
    }
  }
  return worst;
}

}  // namespace fblab
