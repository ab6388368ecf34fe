#pragma once

#include <string>
#include <vector>

#include "fblab/field.hpp"
#include "fblab/quadrature.hpp"
#include "fblab/types.hpp"

namespace fblab {

// Closed-form reference energies: A_q for the half-space family, M_theta for
// the spatially flat solution.
struct EnergyConstants {
  double A_q = 0.0;
  double M_theta = 0.0;
};

EnergyConstants energy_constants(const Params& params);

// Radial cutoff profile: 1 inside |x| <= inner, 0 outside |x| >= outer,
// quintic (C^2) in between.
struct CutoffSpec {
  double inner = 0.5;
  double outer = 0.75;
};

double cutoff_value(const CutoffSpec& eta, double rho);
double cutoff_deriv(const CutoffSpec& eta, double rho);
double cutoff_laplacian(const CutoffSpec& eta, double rho, int n);

// Coefficient of the interpolation-error model added on top of the raw
// quadrature estimate: err += coeff * ((dx/r)^2 + (dt/r^2)^2) * |value|.
// Multilinear interpolation carries an h^2 f''/8 error; the curvature of the
// integrands scales like value/r^2 per time unit and value/r per space unit
// on a slab of width ~r^2, which gives the two squared ratios. The factor 8
// absorbed together with moderate polynomial curvature constants lands at 1.
inline constexpr double kInterpErrorModel = 1.0;

// Gaussian-weighted slab energy, recentered at X0:
//   r^(-2k)_int_{t0-4r^2}^{t0-r^2} int (|grad u|^2 + k|u|^2/(2t) +
//   (2/(1+q))|u|^(1+q)) G dx dt
// with t measured from t0. Spatial integration is clamped to the field's box
// (the clamp shows up in the error term).
Integral weiss(const SpaceTimeField& u, double r, const SpaceTimePoint& X0,
               const QuadratureRule& rule = QuadratureRule{});

// Same energy for the cutoff-localized field eta*u, plus the monotonicity
// repair term F(r) = C_F * int_0^r s^(-n-2k+1) exp(-c/s^2) ds, split into the
// constant C_F (estimated from the field on the cutoff ring) and the explicit
// shape integral.
struct LocalizedWeiss {
  double value = 0.0;
  double err = 0.0;
  double C_F = 0.0;
  double F_shape = 0.0;
  double F = 0.0;
};

LocalizedWeiss weiss_localized(const SpaceTimeField& u, double r,
                               const SpaceTimePoint& X0,
                               const CutoffSpec& eta = CutoffSpec{},
                               const QuadratureRule& rule = QuadratureRule{});

// Extrapolated r -> 0+ limit of the (corrected) Weiss curve over dyadic
// radii. The curve stores values in `values`, the F correction in
// `corrections`, and per-point error estimates in `errors`.
struct WeissLimit {
  double limit = 0.0;
  double band = 0.0;
  bool inconsistent = false;
  bool localized = false;
  EnergyCurve curve;
};

WeissLimit weiss_limit(const SpaceTimeField& u, const SpaceTimePoint& X0,
                       const std::vector<double>& radii,
                       const QuadratureRule& rule = QuadratureRule{});

// Parabolic frequency of a caloric field at the origin:
//   N(r) = [int int |grad h|^2 G] / [int int |h|^2/(-t) G]
// over the slab (-4r^2, -r^2). `residual` is the interior max of |Hh| and
// `caloric` records whether it clears the threshold.
struct Frequency {
  double value = 0.0;
  double err = 0.0;
  double residual = 0.0;
  bool caloric = false;
};

Frequency almgren(const SpaceTimeField& h, double r,
                  const QuadratureRule& rule = QuadratureRule{},
                  double caloric_threshold = 1e-6);

// Fixed-time local energy
//   W_{t0}(u,r,x0) = r^(-n-2k+2) int_{B_r} (|grad u|^2 + (2/(1+q))|u|^(1+q))
//                  - k r^(-n-2k+1) int_{dB_r} |u|^2
// evaluated on the slice t = t0 by interpolation.
double local_weiss(const SpaceTimeField& u, double r, const Vec& x0,
                   double t0);

// Elliptic energy on the unit ball:
//   M(v) = int_{B1} (|grad v|^2 + (2/(1+q))|v|^(1+q)) - k int_{dB1} |v|^2.
// The volume part matches the descent discretization exactly so that energy
// differences between minimizer and competitor are consistent.
double elliptic_M(const SpatialField& v);

// Best half-space approximation alpha*(x.nu)_+^k e over unit nu, e.
struct HalfspaceFit {
  Vec nu = vzero();
  CVec e = czero();
  double distance = 0.0;
  std::string norm_kind;
  int sweep_points = 0;
};

// Space-time profile: Gaussian-weighted L2 on the slab (-1,0) intersected
// with the field's time range, clamped to the field's box.
HalfspaceFit dist_to_H(const SpaceTimeField& u,
                       const QuadratureRule& rule = QuadratureRule{});

// Spatial profile on the unit ball; norm_kind is one of "l2", "max", "w12".
HalfspaceFit dist_to_H(const SpatialField& v, const std::string& norm_kind);

}  // namespace fblab
