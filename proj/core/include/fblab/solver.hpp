#pragma once

#include <functional>
#include <vector>

#include "fblab/field.hpp"
#include "fblab/quadrature.hpp"
#include "fblab/types.hpp"

// Time stepping for Delta u - dt u = f(u) and the descent minimizer for the
// elliptic epiperimetric energy.

namespace fblab {

enum class Scheme { imex_euler, explicit_euler };

struct SolverConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::imex_euler;
  // Regularization scale for the non-Lipschitz reaction; negative means the
  // default dx^kappa. Ignored for q = 0 where the reaction is bounded.
  double reaction_floor = -1.0;
  int max_newton_iters = 500;   // iteration cap for the inner linear solve
  double linear_tol = 1e-10;
  std::function<CVec(const Vec&, double)> bc;  // Dirichlet trace
};

// Marches `initial` (the slice at time_axis.lo) to time_axis.hi with steps of
// config.dt, storing every slice of time_axis; time_axis.step() must be an
// integer multiple of config.dt. Diffusion is implicit for imex_euler (exact
// tridiagonal solve in 1-D, conjugate gradients otherwise), the regularized
// reaction explicit. The explicit scheme enforces dt <= dx^2/(2n); imex
// enforces dt <= dx for reaction accuracy.
SpaceTimeField solve_cauchy(const SpatialField& initial, const SolverConfig& config,
                            const Axis& time_axis);

struct DescentResult {
  SpatialField v;
  double energy = 0.0;  // final discrete J(v)
  bool converged = false;
  int iterations = 0;
  std::vector<double> energy_trace;  // accepted energies, nonincreasing
};

// Minimizes J(v) = int_{B1} |grad v|^2 + (2/(1+q))|v|^(1+q) + 2 v.g over the
// nodes strictly inside the unit ball, holding every node with |x| >= 1 at
// the boundary field's values, by projected gradient descent with Armijo
// backtracking. Initial iterate: the kappa-homogeneous extension of the
// trace. `source` may be null for g = 0. The boundary field's box must cover
// the closed unit ball.
DescentResult minimize_elliptic(const SpatialField& boundary, const SpatialField* source,
                                const SolverConfig& config);

// The g = 0 part of the descent objective, int_{B1} |grad v|^2 +
// (2/(1+q))|v|^(1+q), with the same node weights and edge sums the minimizer
// uses, so energies of fields on the same grid are directly comparable.
double elliptic_interior_energy(const SpatialField& v);

struct DecayCheck {
  EnergyCurve curve;    // radii = tau (ascending), values = (-tau)^(n/2) phi,
                        // corrections = phi, errors = accumulated quadrature error
  double residual_u = 0.0;  // interior max-norm heat residual of u
  double residual_v = 0.0;
};

// phi(tau) = int_s^tau int (n/(-4t)) |u-v|^2 G dx dt for tau in (s, t0], with
// the derived curve (-tau)^(n/2) phi(tau) whose monotone decrease witnesses
// forward uniqueness. Fields must share grid and params.
DecayCheck uniqueness_decay_check(const SpaceTimeField& u, const SpaceTimeField& v, double s,
                                  double t0, const QuadratureRule& rule, int samples = 16);

}  // namespace fblab
