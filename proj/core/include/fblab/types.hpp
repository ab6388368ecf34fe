#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Shared vocabulary for the whole library: problem constants, space-time
// points and cylinders, radius-indexed energy curves, and the fixed-capacity
// vector types used for spatial points and solution components.

namespace fblab {

inline constexpr int kMaxDim = 3;   // spatial dimensions supported
inline constexpr int kMaxComp = 8;  // solution components supported

// Spatial point; entries past the active dimension n are kept at zero.
using Vec = std::array<double, kMaxDim>;
// Component vector; entries past the active component count m are zero.
using CVec = std::array<double, kMaxComp>;

// Thrown when a documented precondition is violated.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a requested point leaves the sampled domain.
class OutOfDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Problem constants. kappa and alpha are derived from q; see make_params.
struct Params {
  double q = 0.0;
  double kappa = 2.0;
  double alpha = 0.5;
  int n = 1;
  int m = 2;
};

// Builds Params from the reaction exponent: kappa = 2/(1-q),
// alpha = (kappa(kappa-1))^(-kappa/2). Throws ContractError for q outside
// [0,1) or nonpositive dimensions.
Params make_params(double q, int n = 1, int m = 2);

struct SpaceTimePoint {
  Vec x{};
  double t = 0.0;
};

// |X| = (|x|^2 + |t|)^(1/2).
double parabolic_norm(const SpaceTimePoint& X, int n);

enum class CylinderKind { lower, upper, full };

// Q_r^-(X0) = B_r(x0) x (t0 - r^2, t0], Q_r^+ = B_r x [t0, t0 + r^2),
// Q_r = B_r x (t0 - r^2, t0 + r^2).
struct Cylinder {
  SpaceTimePoint center{};
  double radius = 1.0;
  CylinderKind kind = CylinderKind::lower;
};

bool cylinder_contains(const Cylinder& c, const Vec& x, double t, int n);

// Radius-indexed values of a functional, with per-point corrections (e.g. the
// cutoff term F(r)) and per-point error estimates. Arrays share one length;
// radii are strictly increasing.
struct EnergyCurve {
  std::vector<double> radii;
  std::vector<double> values;
  std::vector<double> corrections;
  std::vector<double> errors;

  std::size_t size() const { return radii.size(); }
  void push(double r, double v, double corr = 0.0, double err = 0.0);
  void validate() const;  // throws ContractError on malformed curves
};

// Small vector helpers (the first n / m entries are the active ones).
double dot(const Vec& a, const Vec& b, int n);
double norm(const Vec& a, int n);
double cdot(const CVec& a, const CVec& b, int m);
double cnorm(const CVec& a, int m);
Vec vzero();
CVec czero();

// Unit basis vectors.
Vec unit_x(int axis);
CVec unit_c(int comp);

}  // namespace fblab
