#pragma once

#include <string>
#include <vector>

#include "fblab/field.hpp"
#include "fblab/functionals.hpp"
#include "fblab/types.hpp"

namespace fblab {

// Pinned decision constants for the free-boundary diagnostics. The
// classification band multiplies the weiss_limit band (quadrature error plus
// extrapolation spread); the distance tolerance gates the half-space fit of
// the smallest blow-up.
inline constexpr double kClassifyBandFactor = 3.0;
inline constexpr double kDistTol = 0.15;

// Positivity threshold separating the regularization halo from the genuine
// positivity set: 10 * dx^kappa (an order of magnitude above the reaction
// floor scale).
double default_fb_threshold(const SpaceTimeField& u);

// One face of a grid cell where the indicator |u| > threshold flips.
// face_axis is the spatial axis of the face, or -1 for a time face; X sits at
// the face midpoint.
struct FreeBoundaryPoint {
  SpaceTimePoint X;
  int face_axis = 0;
};

struct FreeBoundarySample {
  std::vector<FreeBoundaryPoint> points;
  double threshold = 0.0;
};

// All faces where the indicator changes, spatial and temporal. threshold < 0
// selects the default.
FreeBoundarySample extract_fb(const SpaceTimeField& u, double threshold = -1.0);

// Boundary location estimate behind a positivity face. The |u| > threshold
// contour of a kappa-growth profile sits (threshold/alpha)^(1/kappa) inside
// the positivity set, so the estimate steps that far from the face midpoint
// toward the zero side. Time faces are returned unchanged (the vanishing is
// in time, not offset in space).
SpaceTimePoint locate_fb(const SpaceTimeField& u, const FreeBoundaryPoint& face,
                         double threshold = -1.0);

// c_hat = min over radii of sup_{Q_r^-(X0)} |u| / r^kappa. Throws
// ContractError when X0 is outside the closure of the positivity set (no node
// above threshold in the smallest cylinder).
double nondegeneracy_fit(const SpaceTimeField& u, const SpaceTimePoint& X0,
                         const std::vector<double>& radii);

struct GrowthFit {
  double exponent = 0.0;   // log-log least-squares slope of S(r) = sup|u|
  double C_hat = 0.0;      // max over radii of S(r)/r^kappa
  bool doubling_ok = false;
  std::vector<double> radii;
  std::vector<double> sups;
};

// Needs at least 5 dyadic radii. The doubling check S(2r) <= 2^kappa S(r) is
// applied with a discretization allowance (1 + 4 dx/r) since the node sup can
// undershoot the continuum sup on the smaller cylinder.
GrowthFit growth_fit(const SpaceTimeField& u, const SpaceTimePoint& X0,
                     const std::vector<double>& radii);

struct VanishingOrder {
  double order = 0.0;
  bool known = false;  // false when the fit sits between admissible values
};

// Snaps the growth exponent to the admissible spectrum {1, ..., floor(kappa),
// kappa}.
VanishingOrder vanishing_order(const SpaceTimeField& u, const SpaceTimePoint& X0,
                               const std::vector<double>& radii);

struct BlowupSequence {
  std::vector<SpaceTimeField> fields;      // u_{r,X0}, one per radius
  std::vector<double> cauchy_rates;        // L1(dB1) gaps of consecutive pairs at s = -1
  double fitted_rate = 0.0;                // log-log slope of the gaps vs r
  bool rate_valid = false;
};

// Rescalings at descending radii. Throws ContractError at a point of the
// zero set (everything rescales to zero) and OutOfDomainError when a target
// window leaves the sampled domain.
BlowupSequence blowup_sequence(const SpaceTimeField& u, const SpaceTimePoint& X0,
                               const std::vector<double>& radii_desc);

enum class PointClass { Regular, NonRegular, Unknown };

struct Classification {
  PointClass kind = PointClass::Unknown;
  SpaceTimePoint X0{};
  std::vector<double> radii;    // dyadic ladder chosen from the grid geometry
  WeissLimit weiss;
  double A_q = 0.0;
  double M_theta = 0.0;         // reference high energy, compared for q = 0
  double band = 0.0;            // kClassifyBandFactor * weiss.band
  HalfspaceFit fit;             // half-space fit of the smallest blow-up
  double dist_tol = kDistTol;
  GrowthFit growth;
  double c_hat = 0.0;
};

// Regular when the Weiss limit sits within the band of A_q and the smallest
// blow-up is close to a half-space profile; NonRegular when the limit clears
// A_q by twice the band. Throws ContractError when X0 is not a free-boundary
// point of u (no indicator flip within a few cells).
Classification classify_point(const SpaceTimeField& u, const SpaceTimePoint& X0,
                              const QuadratureRule& rule = QuadratureRule{});

struct SupportSlab {
  bool holds = false;
  double offset = 0.0;       // worst -x_n over positivity nodes in Q_{1/2}^-
  double bound = 0.0;        // C * eps^beta with beta = 1/(n+4)
  double closeness = 0.0;    // measured int int |u - h| G over Q_1^-
  bool closeness_ok = false; // closeness < eps
};

// Checks {|u| > threshold} cap Q_{1/2}^- subset {x_n > -C eps^(1/(n+4))}
// against the last-axis half-space profile, C = 10.
SupportSlab support_slab_check(const SpaceTimeField& u, double eps);

struct TimeDecayFit {
  double exponent = 0.0;
  double C_hat = 0.0;
  bool time_independent = false;  // sup below discretization noise everywhere
  std::vector<double> radii;
  std::vector<double> sups;
};

// log-log fit of sup_{Q_r^-} |du/dt| against r.
TimeDecayFit time_derivative_decay(const SpaceTimeField& u, const SpaceTimePoint& X0,
                                   const std::vector<double>& radii);

struct Region {
  Vec xlo = vzero();
  Vec xhi = vzero();
  double tlo = 0.0;
  double thi = 0.0;
};

struct PointwiseReport {
  double min_Hg = 0.0;     // min over region of the discrete H applied to g
                           // (q = 0) or g^theta
  double theta_used = 1.0;
  double cauchy_eps = 0.0; // smallest eps with |u|^2|grad u|^2 <= (1+eps)|sum u^k grad u^k|^2
  std::vector<double> collar_max;  // max g over shrinking collars at the FB
  bool collar_decreasing = false;
  bool collar_defined = false;     // false when no zero-set nodes are in reach
};

// g = |du/dt|^2 |u|^(-2q) diagnostics on a region inside the positivity set.
// Throws ContractError when the region touches the zero set.
PointwiseReport pointwise_diagnostics(const SpaceTimeField& u, const Region& region);

struct EpiperimetricResult {
  double M_c = 0.0;
  double M_v = 0.0;
  double M_h = 0.0;               // same-grid energy of the fitted half-space
  double eps_achieved = 0.0;
  bool degenerate = false;        // M(c) within the noise floor of M(h)
  bool trace_close = false;       // both trace gaps below delta
  double trace_w12_gap = 0.0;
  double trace_max_gap = 0.0;
  bool converged = false;
  double noise_floor = 0.0;
};

struct EpiperimetricOptions {
  int nodes_per_axis = 161;        // grid over [-1,1]^n
  double delta = 0.35;             // closeness gate on the trace
  double noise_floor_cells = 25.0; // floor = cells * dx^2
  double descent_tol = 1e-10;
  int descent_iters = 4000;
};

// Builds the kappa-homogeneous extension c of the boundary trace, measures
// M(c), minimizes the same energy with the same trace, and reports the
// achieved epiperimetric constant 1 - (M(v)-M(h))/(M(c)-M(h)).
EpiperimetricResult epiperimetric_test(const Params& params,
                                       const std::function<CVec(const Vec&)>& c_boundary,
                                       const HalfspaceFit& fit,
                                       const EpiperimetricOptions& opts = EpiperimetricOptions{});

struct NormalFieldEntry {
  Vec x = vzero();
  Vec nu = vzero();
  CVec e = czero();
};

struct NormalFieldReport {
  std::vector<NormalFieldEntry> points;
  double spatial_exponent = 0.0;  // largest stable Holder exponent for nu
  double spatial_constant = 0.0;
  double time_constant = 0.0;     // C in |x(t)-x(s)| <= C |t-s|^(1/2)
  int time_pairs = 0;
};

// Per free-boundary point at the slice nearest t0: direction pair from the
// half-space fit of a small blow-up, then pairwise Holder quotients. Throws
// ContractError with fewer than two points.
NormalFieldReport normal_field_fit(const SpaceTimeField& u, double t0);

struct LocalEnergyDecay {
  double limit = 0.0;
  double gamma = 0.0;
  bool gamma_degenerate = false;  // residuals below noise at every radius
  double defect = 0.0;            // worst decrease of W_{t0} along ascending radii
  double C_fit = 0.0;             // fitted constant of the |r2^b - r1^b| defect bound
  double beta_fit = 0.0;
  EnergyCurve curve;
};

// Fixed-time energy W_{t0} across radii with extrapolated limit and decay
// fit.
LocalEnergyDecay local_energy_decay(const SpaceTimeField& u, const SpaceTimePoint& X0,
                                    const std::vector<double>& radii);

}  // namespace fblab
