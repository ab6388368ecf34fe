#pragma once

#include <array>
#include <vector>

#include "fblab/field.hpp"
#include "fblab/types.hpp"

// Backward heat kernel, caloric polynomials (kernel of H = Laplacian - d/dt),
// least-squares caloric fitting, and the closed-form solution families used
// as oracles everywhere else: half-space profiles, the time-only profile
// theta, sampled caloric polynomials, and zero.

namespace fblab {

// G(x,t) = (-4 pi t)^(-n/2) exp(|x|^2/(4t)) for t < 0, and 0 for t >= 0.
double heat_kernel(const Vec& x, double t, int n);

// grad G = (x/(2t)) G for t < 0, zero for t >= 0.
Vec heat_kernel_grad(const Vec& x, double t, int n);

// One monomial coeff * x^powers * t^tpower of a polynomial in (x, t).
struct MonomialTerm {
  std::array<int, kMaxDim> powers{};
  int tpower = 0;
  double coeff = 0.0;
};

// Polynomial in (x, t) with exact symbolic derivatives. Instances produced by
// caloric_basis satisfy H p = 0 identically.
class CaloricPolynomial {
 public:
  CaloricPolynomial() = default;
  CaloricPolynomial(std::vector<MonomialTerm> terms, int n);

  // Caloric extension sum_k t^k Delta^k x^powers / k! of a spatial monomial.
  static CaloricPolynomial extend_monomial(const std::array<int, kMaxDim>& powers, int n);

  double value(const Vec& x, double t) const;
  Vec gradient(const Vec& x, double t) const;
  double time_deriv(const Vec& x, double t) const;

  CaloricPolynomial laplacian() const;
  CaloricPolynomial dt() const;
  CaloricPolynomial heat_applied() const;  // Delta p - dt p, symbolically
  CaloricPolynomial scaled(double c) const;
  CaloricPolynomial plus(const CaloricPolynomial& other) const;

  // Max over terms of |powers| + 2 * tpower; -1 for the zero polynomial.
  int parabolic_degree() const;
  int dim() const { return n_; }
  bool is_zero(double tol = 0.0) const;
  const std::vector<MonomialTerm>& terms() const { return terms_; }

 private:
  std::vector<MonomialTerm> terms_;
  int n_ = 1;

  void merge_terms();
};

// Caloric extensions of every spatial monomial x^alpha with |alpha| <= degree,
// graded by degree and then lexicographically (x1 before x2 before x3).
// Spans all polynomials p with H p = 0 of parabolic degree <= degree.
std::vector<CaloricPolynomial> caloric_basis(int degree, int n);

struct CaloricFit {
  std::vector<CaloricPolynomial> components;  // one polynomial per component, centered at X0
  EnergyCurve residual_curve;                 // per radius: max-norm misfit on Q_r^-(X0)
};

// Least-squares fit of u by caloric polynomials of parabolic degree <= degree
// on the grid nodes inside Q_{r_min}^-(X0), then the max-norm residual per
// requested radius. Throws ContractError when the smallest cylinder holds
// fewer nodes than the basis has elements.
CaloricFit caloric_fit(const SpaceTimeField& u, const SpaceTimePoint& X0, int degree,
                       const std::vector<double>& radii);

enum class ExactKind { halfspace, time_flat, caloric_poly, zero };

// Closed-form solutions with analytic derivatives.
//   halfspace:    alpha * max(x . nu, 0)^kappa * e
//   time_flat:    (-2t/kappa)^(kappa/2) * e for t < 0, zero for t >= 0
//   caloric_poly: one polynomial per component, H u = 0 (not a reaction solution)
//   zero:         identically zero
class ExactSolution {
 public:
  static ExactSolution halfspace(const Params& params, const Vec& nu, const CVec& e);
  static ExactSolution time_flat(const Params& params, const CVec& e);
  static ExactSolution caloric_poly(const Params& params, std::vector<CaloricPolynomial> comps);
  static ExactSolution zero(const Params& params);

  ExactKind kind() const { return kind_; }
  const Params& params() const { return params_; }
  const Vec& nu() const { return nu_; }
  const CVec& e() const { return e_; }

  CVec value(const Vec& x, double t) const;
  std::array<CVec, kMaxDim> gradient(const Vec& x, double t) const;
  CVec time_deriv(const Vec& x, double t) const;

  // True when the closed form solves Delta u - dt u = f(u) everywhere.
  bool solves_system() const { return kind_ != ExactKind::caloric_poly; }

 private:
  ExactKind kind_ = ExactKind::zero;
  Params params_{};
  Vec nu_{};
  CVec e_{};
  std::vector<CaloricPolynomial> comps_;
};

// Samples the closed form on the grid. time_flat requires the time axis to
// stay within t <= 0.
SpaceTimeField exact_sample(const ExactSolution& sol, const Axis& time_axis,
                            const SpaceAxes& space_axes);

}  // namespace fblab
