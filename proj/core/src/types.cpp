#include "fblab/types.hpp"

#include <cmath>

namespace fblab {

Params make_params(double q, int n, int m) {
  if (!(q >= 0.0 && q < 1.0)) {
    throw ContractError("make_params: exponent out of range, need 0 <= q < 1, got q=" +
                        std::to_string(q));
  }
  if (n < 1 || n > kMaxDim) {
    throw ContractError("make_params: spatial dimension n must be in [1," +
                        std::to_string(kMaxDim) + "], got " + std::to_string(n));
  }
  if (m < 1 || m > kMaxComp) {
    throw ContractError("make_params: component count m must be in [1," +
                        std::to_string(kMaxComp) + "], got " + std::to_string(m));
  }
  Params p;
  p.q = q;
  p.n = n;
  p.m = m;
  p.kappa = 2.0 / (1.0 - q);
  p.alpha = std::pow(p.kappa * (p.kappa - 1.0), -p.kappa / 2.0);
  return p;
}

double parabolic_norm(const SpaceTimePoint& X, int n) {
  double s = std::abs(X.t);
  for (int i = 0; i < n; ++i) s += X.x[i] * X.x[i];
  return std::sqrt(s);
}

bool cylinder_contains(const Cylinder& c, const Vec& x, double t, int n) {
  double d2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = x[i] - c.center.x[i];
    d2 += d * d;
  }
  if (d2 >= c.radius * c.radius) return false;
  const double t0 = c.center.t;
  const double r2 = c.radius * c.radius;
  switch (c.kind) {
    case CylinderKind::lower:
      return t > t0 - r2 && t <= t0;
    case CylinderKind::upper:
      return t >= t0 && t < t0 + r2;
    case CylinderKind::full:
      return t > t0 - r2 && t < t0 + r2;
  }
  return false;
}

void EnergyCurve::push(double r, double v, double corr, double err) {
  radii.push_back(r);
  values.push_back(v);
  corrections.push_back(corr);
  errors.push_back(err);
}

void EnergyCurve::validate() const {
  const std::size_t k = radii.size();
  if (values.size() != k || corrections.size() != k || errors.size() != k) {
    throw ContractError("EnergyCurve: array lengths differ");
  }
  for (std::size_t i = 1; i < k; ++i) {
    if (!(radii[i] > radii[i - 1])) {
      throw ContractError("EnergyCurve: radii must be strictly increasing");
    }
  }
}

double dot(const Vec& a, const Vec& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a, int n) { return std::sqrt(dot(a, a, n)); }

double cdot(const CVec& a, const CVec& b, int m) {
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += a[i] * b[i];
  return s;
}

double cnorm(const CVec& a, int m) { return std::sqrt(cdot(a, a, m)); }

Vec vzero() { return Vec{}; }
CVec czero() { return CVec{}; }

Vec unit_x(int axis) {
  Vec v{};
  v[axis] = 1.0;
  return v;
}

CVec unit_c(int comp) {
  CVec v{};
  v[comp] = 1.0;
  return v;
}

}  // namespace fblab
