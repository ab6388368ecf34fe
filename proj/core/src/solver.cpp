#include "fblab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblab/operators.hpp"

namespace fblab {
namespace {

struct GridInfo {
  int n = 1;
  int m = 1;
  std::array<int, kMaxDim> nx{};
  std::array<double, kMaxDim> dx{};
  std::array<std::size_t, kMaxDim> stride{};  // node strides, innermost last
  std::size_t nodes = 1;

  bool on_boundary(std::size_t node) const {
    std::size_t rem = node;
    for (int a = 0; a < n; ++a) {
      const int i = static_cast<int>(rem / stride[a]);
      rem %= stride[a];
      if (i == 0 || i == nx[a] - 1) return true;
    }
    return false;
  }
};

GridInfo grid_info(const SpatialField& f) {
  GridInfo g;
  g.n = f.params().n;
  g.m = f.params().m;
  for (int a = 0; a < g.n; ++a) {
    g.nx[a] = f.nx(a);
    g.dx[a] = f.dx(a);
    g.nodes *= static_cast<std::size_t>(g.nx[a]);
  }
  g.stride[g.n - 1] = 1;
  for (int a = g.n - 2; a >= 0; --a)
    g.stride[a] = g.stride[a + 1] * static_cast<std::size_t>(g.nx[a + 1]);
  return g;
}

void check_finite(const std::vector<double>& v, int step) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::runtime_error("solver produced a non-finite value at step " +
                               std::to_string(step));
}

// Tridiagonal solve of (1 + 2mu) u_i - mu (u_{i-1} + u_{i+1}) = rhs_i for the
// interior of one component, Dirichlet values already folded into rhs.
void thomas_solve(double mu, std::vector<double>& rhs, std::vector<double>& scratch) {
  const std::size_t N = rhs.size();
  scratch.resize(N);
  const double b = 1.0 + 2.0 * mu;
  double beta = b;
  rhs[0] /= beta;
  for (std::size_t i = 1; i < N; ++i) {
    scratch[i] = -mu / beta;
    beta = b + mu * scratch[i];
    rhs[i] = (rhs[i] + mu * rhs[i - 1]) / beta;
  }
  for (std::size_t i = N - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

// Applies v -> v - dt Laplacian(v) on the interior (v = 0 on the boundary).
void apply_imex_operator(const GridInfo& g, double dt, const std::vector<double>& v,
                         const std::vector<char>& boundary, std::vector<double>& out) {
  for (std::size_t j = 0; j < g.nodes; ++j) {
    if (boundary[j]) {
      out[j] = 0.0;
      continue;
    }
    double acc = v[j];
    for (int a = 0; a < g.n; ++a) {
      const double left = v[j - g.stride[a]];
      const double right = v[j + g.stride[a]];
      acc -= dt * (left - 2.0 * v[j] + right) / (g.dx[a] * g.dx[a]);
    }
    out[j] = acc;
  }
}

// Unpreconditioned CG for the IMEX step operator; deterministic.
void cg_solve(const GridInfo& g, double dt, const std::vector<char>& boundary,
              std::vector<double>& x, const std::vector<double>& rhs, double tol,
              int max_iters) {
  std::vector<double> r(g.nodes), p(g.nodes), Ap(g.nodes);
  apply_imex_operator(g, dt, x, boundary, Ap);
  double rr = 0.0;
  for (std::size_t j = 0; j < g.nodes; ++j) {
    r[j] = boundary[j] ? 0.0 : rhs[j] - Ap[j];
    p[j] = r[j];
    rr += r[j] * r[j];
  }
  double rhs_norm = 0.0;
  for (std::size_t j = 0; j < g.nodes; ++j)
    if (!boundary[j]) rhs_norm += rhs[j] * rhs[j];
  const double target = tol * tol * std::max(rhs_norm, 1e-300);
  for (int it = 0; it < max_iters && rr > target; ++it) {
    apply_imex_operator(g, dt, p, boundary, Ap);
    double pAp = 0.0;
    for (std::size_t j = 0; j < g.nodes; ++j) pAp += p[j] * Ap[j];
    const double alpha = rr / pAp;
    double rr_new = 0.0;
    for (std::size_t j = 0; j < g.nodes; ++j) {
      x[j] += alpha * p[j];
      r[j] -= alpha * Ap[j];
      rr_new += r[j] * r[j];
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t j = 0; j < g.nodes; ++j) p[j] = r[j] + beta * p[j];
  }
  if (rr > target)
    throw std::runtime_error("implicit diffusion solve did not converge: residual " +
                             std::to_string(std::sqrt(rr)));
}

}  // namespace

SpaceTimeField solve_cauchy(const SpatialField& initial, const SolverConfig& config,
                            const Axis& time_axis) {
  const Params& P = initial.params();
  if (!config.bc) throw ContractError("solve_cauchy needs a Dirichlet boundary trace");
  if (!(config.dt > 0.0)) throw ContractError("time step must be positive");
  if (time_axis.count < 2) throw ContractError("time axis needs at least two slices");

  const GridInfo g = grid_info(initial);
  double dx_min = g.dx[0];
  for (int a = 1; a < g.n; ++a) dx_min = std::min(dx_min, g.dx[a]);

  if (config.scheme == Scheme::explicit_euler) {
    const double limit = dx_min * dx_min / (2.0 * g.n);
    if (config.dt > limit * (1.0 + 1e-12))
      throw ContractError("explicit scheme unstable: need dt <= dx^2/(2n) = " +
                          std::to_string(limit));
  } else if (config.dt > dx_min * (1.0 + 1e-12)) {
    throw ContractError("imex scheme needs dt <= dx for reaction accuracy");
  }

  const double step_out = time_axis.step();
  const double ratio = step_out / config.dt;
  const int substeps = static_cast<int>(std::lround(ratio));
  if (substeps < 1 || std::abs(ratio - substeps) > 1e-6 * std::max(1.0, ratio))
    throw ContractError("output step must be an integer multiple of dt");

  const double delta =
      config.reaction_floor < 0.0 ? std::pow(dx_min, P.kappa) : config.reaction_floor;

  // Node coordinates and boundary mask.
  std::vector<char> boundary(g.nodes);
  std::vector<Vec> coords(g.nodes);
  {
    GridIndex ix{};
    for (std::size_t j = 0; j < g.nodes; ++j) {
      coords[j] = initial.node_x(ix);
      boundary[j] = g.on_boundary(j) ? 1 : 0;
      for (int a = g.n - 1; a >= 0; --a) {
        if (++ix[a] < g.nx[a]) break;
        ix[a] = 0;
      }
    }
  }

  std::vector<double> cur = initial.data();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(time_axis.count) * g.nodes * g.m);
  out.insert(out.end(), cur.begin(), cur.end());

  const double mu = config.dt / (dx_min * dx_min);  // 1-D Thomas coefficient
  std::vector<double> comp_rhs, scratch, next(cur.size());
  std::vector<double> cg_rhs(g.nodes), cg_x(g.nodes);

  int global_step = 0;
  for (int slice = 1; slice < time_axis.count; ++slice) {
    for (int sub = 0; sub < substeps; ++sub) {
      ++global_step;
      const double t_new = time_axis.lo + config.dt * global_step;

      if (config.scheme == Scheme::explicit_euler) {
        for (std::size_t j = 0; j < g.nodes; ++j) {
          if (boundary[j]) continue;
          CVec uj = czero();
          for (int c = 0; c < g.m; ++c) uj[c] = cur[j * g.m + c];
          const CVec f = reaction_regularized(uj, P, delta);
          for (int c = 0; c < g.m; ++c) {
            double lap = 0.0;
            for (int a = 0; a < g.n; ++a) {
              const std::size_t s = g.stride[a] * g.m;
              lap += (cur[j * g.m + c - s] - 2.0 * cur[j * g.m + c] + cur[j * g.m + c + s]) /
                     (g.dx[a] * g.dx[a]);
            }
            next[j * g.m + c] = cur[j * g.m + c] + config.dt * (lap - f[c]);
          }
        }
      } else if (g.n == 1) {
        // rhs = u - dt f(u), Dirichlet ends folded in; Thomas per component.
        const std::size_t N = g.nodes - 2;
        for (int c = 0; c < g.m; ++c) {
          comp_rhs.resize(N);
          for (std::size_t j = 1; j + 1 < g.nodes; ++j) {
            CVec uj = czero();
            for (int cc = 0; cc < g.m; ++cc) uj[cc] = cur[j * g.m + cc];
            const CVec f = reaction_regularized(uj, P, delta);
            comp_rhs[j - 1] = cur[j * g.m + c] - config.dt * f[c];
          }
          const CVec left = config.bc(coords[0], t_new);
          const CVec right = config.bc(coords[g.nodes - 1], t_new);
          comp_rhs[0] += mu * left[c];
          comp_rhs[N - 1] += mu * right[c];
          thomas_solve(mu, comp_rhs, scratch);
          for (std::size_t j = 1; j + 1 < g.nodes; ++j) next[j * g.m + c] = comp_rhs[j - 1];
        }
      } else {
        // CG per component on the interior, warm-started from the last slice.
        for (int c = 0; c < g.m; ++c) {
          for (std::size_t j = 0; j < g.nodes; ++j) {
            cg_x[j] = boundary[j] ? 0.0 : cur[j * g.m + c];
            if (boundary[j]) {
              cg_rhs[j] = 0.0;
              continue;
            }
            CVec uj = czero();
            for (int cc = 0; cc < g.m; ++cc) uj[cc] = cur[j * g.m + cc];
            const CVec f = reaction_regularized(uj, P, delta);
            double rhs = cur[j * g.m + c] - config.dt * f[c];
            // Known boundary neighbors feed the right-hand side.
            for (int a = 0; a < g.n; ++a) {
              const std::size_t s = g.stride[a];
              if (boundary[j - s])
                rhs += config.dt * config.bc(coords[j - s], t_new)[c] / (g.dx[a] * g.dx[a]);
              if (boundary[j + s])
                rhs += config.dt * config.bc(coords[j + s], t_new)[c] / (g.dx[a] * g.dx[a]);
            }
            cg_rhs[j] = rhs;
          }
          cg_solve(g, config.dt, boundary, cg_x, cg_rhs, config.linear_tol,
                   config.max_newton_iters);
          for (std::size_t j = 0; j < g.nodes; ++j)
            if (!boundary[j]) next[j * g.m + c] = cg_x[j];
        }
      }

      // Dirichlet trace on the spatial boundary.
      for (std::size_t j = 0; j < g.nodes; ++j) {
        if (!boundary[j]) continue;
        const CVec b = config.bc(coords[j], t_new);
        for (int c = 0; c < g.m; ++c) next[j * g.m + c] = b[c];
      }
      cur.swap(next);
      check_finite(cur, global_step);
    }
    out.insert(out.end(), cur.begin(), cur.end());
  }

  SpaceAxes axes{};
  for (int a = 0; a < g.n; ++a) axes[a] = initial.axis(a);
  return SpaceTimeField::from_values(P, time_axis, axes, std::move(out));
}

namespace {

// Discrete epiperimetric energy on the unit-ball nodes. In 1-D the ball is
// the interval [-1, 1] and the end nodes get trapezoid half-weights; in
// higher dimensions nodes strictly inside the ball get full weight.
struct EllipticEnergy {
  const GridInfo* g = nullptr;
  const std::vector<Vec>* coords = nullptr;
  const std::vector<char>* free_node = nullptr;
  const std::vector<double>* source = nullptr;  // may be null
  double q = 0.0;
  double cell = 0.0;  // prod dx

  int axis_index(std::size_t j, int a) const {
    return static_cast<int>((j / g->stride[a]) % static_cast<std::size_t>(g->nx[a]));
  }

  double node_weight(std::size_t j) const {
    const Vec& x = (*coords)[j];
    double r2 = 0.0;
    for (int a = 0; a < g->n; ++a) r2 += x[a] * x[a];
    if (r2 > 1.0 + 1e-12) return 0.0;
    if (g->n == 1 && std::abs(std::abs(x[0]) - 1.0) <= 1e-12) return 0.5;
    return 1.0;
  }

  double value(const std::vector<double>& v) const {
    double bulk = 0.0;
    for (std::size_t j = 0; j < g->nodes; ++j) {
      const double w = node_weight(j);
      if (w == 0.0) continue;
      double mag2 = 0.0, vg = 0.0;
      for (int c = 0; c < g->m; ++c) {
        const double vc = v[j * g->m + c];
        mag2 += vc * vc;
        if (source) vg += vc * (*source)[j * g->m + c];
      }
      bulk += w * ((2.0 / (1.0 + q)) * std::pow(mag2, 0.5 * (1.0 + q)) + 2.0 * vg);
    }
    // Edge sum for the gradient term, each edge weighted by its endpoints.
    double grad = 0.0;
    for (int a = 0; a < g->n; ++a) {
      const std::size_t s = g->stride[a];
      for (std::size_t j = 0; j < g->nodes; ++j) {
        if (axis_index(j, a) + 1 >= g->nx[a]) continue;
        const double w = 0.5 * (node_weight(j) + node_weight(j + s));
        if (w == 0.0) continue;
        for (int c = 0; c < g->m; ++c) {
          const double d = (v[(j + s) * g->m + c] - v[j * g->m + c]) / g->dx[a];
          grad += w * d * d;
        }
      }
    }
    return cell * (bulk + grad);
  }

  // Gradient of the discrete energy with respect to the free node values.
  void gradient(const std::vector<double>& v, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < g->nodes; ++j) {
      if (!(*free_node)[j]) continue;
      const double w = node_weight(j);
      double mag2 = 0.0;
      for (int c = 0; c < g->m; ++c) {
        const double vc = v[j * g->m + c];
        mag2 += vc * vc;
      }
      const double mag = std::sqrt(mag2);
      for (int c = 0; c < g->m; ++c) {
        double gc = 0.0;
        const double vc = v[j * g->m + c];
        if (w > 0.0) {
          if (mag > 0.0) gc += w * 2.0 * std::pow(mag, q - 1.0) * vc;
          if (source) gc += w * 2.0 * (*source)[j * g->m + c];
        }
        for (int a = 0; a < g->n; ++a) {
          const std::size_t s = g->stride[a];
          const int i = axis_index(j, a);
          if (i + 1 < g->nx[a]) {
            const double we = 0.5 * (node_weight(j) + node_weight(j + s));
            gc -= we * 2.0 * (v[(j + s) * g->m + c] - vc) / (g->dx[a] * g->dx[a]);
          }
          if (i > 0) {
            const double we = 0.5 * (node_weight(j) + node_weight(j - s));
            gc += we * 2.0 * (vc - v[(j - s) * g->m + c]) / (g->dx[a] * g->dx[a]);
          }
        }
        out[j * g->m + c] = gc;
      }
    }
  }
};

}  // namespace

DescentResult minimize_elliptic(const SpatialField& boundary, const SpatialField* source,
                                const SolverConfig& config) {
  const Params& P = boundary.params();
  const GridInfo g = grid_info(boundary);
  for (int a = 0; a < g.n; ++a) {
    if (boundary.axis(a).lo > -1.0 + 1e-12 || boundary.axis(a).hi < 1.0 - 1e-12)
      throw ContractError("boundary field must cover the closed unit ball");
  }
  if (source) {
    for (int a = 0; a < g.n; ++a)
      if (source->nx(a) != g.nx[a]) throw ContractError("source grid mismatch");
  }

  std::vector<Vec> coords(g.nodes);
  std::vector<char> free_node(g.nodes);
  {
    GridIndex ix{};
    for (std::size_t j = 0; j < g.nodes; ++j) {
      coords[j] = boundary.node_x(ix);
      double r2 = 0.0;
      for (int a = 0; a < g.n; ++a) r2 += coords[j][a] * coords[j][a];
      free_node[j] = r2 < 1.0 - 1e-12 ? 1 : 0;
      for (int a = g.n - 1; a >= 0; --a) {
        if (++ix[a] < g.nx[a]) break;
        ix[a] = 0;
      }
    }
  }

  // Initial iterate: kappa-homogeneous extension of the sphere trace; pinned
  // nodes keep the boundary field's values.
  std::vector<double> v = boundary.data();
  for (std::size_t j = 0; j < g.nodes; ++j) {
    if (!free_node[j]) continue;
    const double r = norm(coords[j], g.n);
    if (r == 0.0) {
      for (int c = 0; c < g.m; ++c) v[j * g.m + c] = 0.0;
      continue;
    }
    Vec dir = coords[j];
    for (int a = 0; a < g.n; ++a) dir[a] /= r;
    const CVec trace = boundary.value(dir);
    const double scale = std::pow(r, P.kappa);
    for (int c = 0; c < g.m; ++c) v[j * g.m + c] = scale * trace[c];
  }

  EllipticEnergy E;
  E.g = &g;
  E.coords = &coords;
  E.free_node = &free_node;
  E.source = source ? &source->data() : nullptr;
  E.q = P.q;
  E.cell = 1.0;
  for (int a = 0; a < g.n; ++a) E.cell *= g.dx[a];

  DescentResult res;
  double J = E.value(v);
  res.energy_trace.push_back(J);

  double dx_min = g.dx[0];
  for (int a = 1; a < g.n; ++a) dx_min = std::min(dx_min, g.dx[a]);
  double sigma = dx_min * dx_min / 4.0;
  const double sigma_cap = dx_min * dx_min * 8.0;

  std::vector<double> grad(v.size()), trial(v.size());
  const int cap = 500000;
  int iter = 0;
  for (; iter < cap; ++iter) {
    E.gradient(v, grad);
    double gnorm2 = 0.0;
    for (double gv : grad) gnorm2 += gv * gv;
    if (gnorm2 == 0.0) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double J_new = J;
    for (int back = 0; back < 60; ++back) {
      for (std::size_t i = 0; i < v.size(); ++i) trial[i] = v[i] - sigma * grad[i];
      J_new = E.value(trial);
      if (J_new <= J - 1e-4 * sigma * gnorm2) {
        accepted = true;
        break;
      }
      sigma *= 0.5;
    }
    if (!accepted) break;  // stall: Armijo found no step
    v.swap(trial);
    const double decrease = J - J_new;
    J = J_new;
    res.energy_trace.push_back(J);
    sigma = std::min(sigma * 1.3, sigma_cap);
    if (decrease < config.linear_tol) {
      res.converged = true;
      break;
    }
  }
  res.iterations = iter;
  res.energy = J;

  SpaceAxes axes{};
  for (int a = 0; a < g.n; ++a) axes[a] = boundary.axis(a);
  res.v = SpatialField::from_values(P, axes, std::move(v));
  return res;
}

double elliptic_interior_energy(const SpatialField& f) {
  const GridInfo g = grid_info(f);
  std::vector<Vec> coords(g.nodes);
  {
    GridIndex ix{};
    for (std::size_t j = 0; j < g.nodes; ++j) {
      coords[j] = f.node_x(ix);
      for (int a = g.n - 1; a >= 0; --a) {
        if (++ix[a] < g.nx[a]) break;
        ix[a] = 0;
      }
    }
  }
  const std::vector<char> free_node(g.nodes, 0);
  EllipticEnergy E;
  E.g = &g;
  E.coords = &coords;
  E.free_node = &free_node;
  E.source = nullptr;
  E.q = f.params().q;
  E.cell = 1.0;
  for (int a = 0; a < g.n; ++a) E.cell *= g.dx[a];
  return E.value(f.data());
}

DecayCheck uniqueness_decay_check(const SpaceTimeField& u, const SpaceTimeField& v, double s,
                                  double t0, const QuadratureRule& rule, int samples) {
  const Params& P = u.params();
  if (v.params().n != P.n || v.params().m != P.m || v.nt() != u.nt())
    throw ContractError("uniqueness check needs matching grids");
  for (int a = 0; a < P.n; ++a)
    if (v.nx(a) != u.nx(a) || v.space_axis(a).lo != u.space_axis(a).lo ||
        v.space_axis(a).hi != u.space_axis(a).hi)
      throw ContractError("uniqueness check needs matching grids");
  if (!(s < t0) || t0 > 0.0) throw ContractError("slab needs s < t0 <= 0");
  if (samples < 2) throw ContractError("need at least two curve samples");

  DecayCheck out;
  out.residual_u = interior_max_abs(heat_residual(u), 1);
  out.residual_v = interior_max_abs(heat_residual(v), 1);

  Vec lo = vzero(), hi = vzero();
  for (int a = 0; a < P.n; ++a) {
    lo[a] = u.space_axis(a).lo;
    hi[a] = u.space_axis(a).hi;
  }
  const auto integrand = [&](const Vec& x, double t) {
    const CVec a = u.value(x, t);
    const CVec b = v.value(x, t);
    double d2 = 0.0;
    for (int c = 0; c < P.m; ++c) {
      const double d = a[c] - b[c];
      d2 += d * d;
    }
    return P.n / (-4.0 * t) * d2;
  };

  double phi = 0.0, err_acc = 0.0;
  for (int k = 1; k <= samples; ++k) {
    const double tau_prev = s + (t0 - s) * (k - 1) / samples;
    const double tau = s + (t0 - s) * k / samples;
    const Integral piece = slab_integral(integrand, tau_prev, tau, P.n, rule, &lo, &hi);
    phi += piece.value;
    err_acc += piece.err;
    const double weight = std::pow(-tau, 0.5 * P.n);
    out.curve.push(tau, weight * phi, phi, weight * err_acc);
  }
  out.curve.validate();
  return out;
}

}  // namespace fblab
