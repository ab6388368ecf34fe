#pragma once

#include "fblab/field.hpp"
#include "fblab/types.hpp"

// Parabolic rescaling, the scaling generator L, the heat residual of the
// reaction system, and the reaction law itself.

namespace fblab {

// f(u) = |u|^(q-1) u on {|u| > 0}; exactly zero where the stored |u| is zero.
CVec reaction(const CVec& u, const Params& params);

// Regularized law f_delta(u) = u * max(|u|, delta)^(q-1) * chi{|u|>0} used by
// the time stepper. For q = 0 this is u/|u| wherever |u| > 0, no delta needed.
CVec reaction_regularized(const CVec& u, const Params& params, double delta);

// u_{r,X0}(x,t) = u(r x + x0, r^2 t + t0) / r^kappa sampled on the target
// grid by multilinear interpolation. Throws OutOfDomainError naming the first
// violating target corner when the mapped box leaves u's domain.
SpaceTimeField parabolic_rescale(const SpaceTimeField& u, const SpaceTimePoint& X0, double r,
                                 const Axis& target_time, const SpaceAxes& target_space);

// L u = x . grad u + 2 t du/dt - kappa u from the node stencil tables.
// Values on the outermost node ring come from one-sided stencils; consumers
// that need the advertised order should restrict to interior nodes.
SpaceTimeField apply_L(const SpaceTimeField& u);

// H u = Laplacian u - du/dt, second-order centered Laplacian in the interior.
// Same boundary-ring caveat as apply_L.
SpaceTimeField apply_H(const SpaceTimeField& u);

// H u - f(u): zero (to scheme order) for exact solutions of the system.
SpaceTimeField heat_residual(const SpaceTimeField& u);

// Max of |f| over nodes at least `ring` nodes away from every face of the
// grid (both time faces and all spatial faces).
double interior_max_abs(const SpaceTimeField& f, int ring);

}  // namespace fblab
