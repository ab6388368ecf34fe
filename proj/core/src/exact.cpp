#include "fblab/exact.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <tuple>

#include <Eigen/Dense>

namespace fblab {
namespace {

constexpr double kPi = 3.14159265358979323846;

double ipow(double base, int e) {
  double out = 1.0;
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

}  // namespace

double heat_kernel(const Vec& x, double t, int n) {
  if (t >= 0.0) return 0.0;
  const double r2 = dot(x, x, n);
  return std::pow(-4.0 * kPi * t, -0.5 * n) * std::exp(r2 / (4.0 * t));
}

Vec heat_kernel_grad(const Vec& x, double t, int n) {
  Vec g = vzero();
  if (t >= 0.0) return g;
  const double G = heat_kernel(x, t, n);
  for (int a = 0; a < n; ++a) g[a] = x[a] / (2.0 * t) * G;
  return g;
}

CaloricPolynomial::CaloricPolynomial(std::vector<MonomialTerm> terms, int n)
    : terms_(std::move(terms)), n_(n) {
  if (n < 1 || n > kMaxDim) throw ContractError("polynomial dimension out of range");
  for (const auto& term : terms_) {
    if (term.tpower < 0) throw ContractError("negative time power");
    for (int a = 0; a < kMaxDim; ++a)
      if (term.powers[a] < 0 || (a >= n && term.powers[a] != 0))
        throw ContractError("monomial power outside the active dimensions");
  }
  merge_terms();
}

void CaloricPolynomial::merge_terms() {
  std::map<std::tuple<int, int, int, int>, double> acc;
  for (const auto& term : terms_) {
    auto key = std::make_tuple(term.powers[0], term.powers[1], term.powers[2], term.tpower);
    acc[key] += term.coeff;
  }
  terms_.clear();
  for (const auto& [key, coeff] : acc) {
    if (coeff == 0.0) continue;
    MonomialTerm term;
    term.powers = {std::get<0>(key), std::get<1>(key), std::get<2>(key)};
    term.tpower = std::get<3>(key);
    term.coeff = coeff;
    terms_.push_back(term);
  }
}

CaloricPolynomial CaloricPolynomial::extend_monomial(const std::array<int, kMaxDim>& powers,
                                                     int n) {
  MonomialTerm seed;
  seed.powers = powers;
  seed.coeff = 1.0;
  CaloricPolynomial level({seed}, n);
  CaloricPolynomial out = level;
  int k = 0;
  while (!level.is_zero()) {
    CaloricPolynomial lap = level.laplacian();
    ++k;
    std::vector<MonomialTerm> lifted = lap.terms();
    for (auto& term : lifted) {
      term.tpower += 1;
      term.coeff /= static_cast<double>(k);
    }
    level = CaloricPolynomial(std::move(lifted), n);
    out = out.plus(level);
  }
  return out;
}

double CaloricPolynomial::value(const Vec& x, double t) const {
  double out = 0.0;
  for (const auto& term : terms_) {
    double v = term.coeff * ipow(t, term.tpower);
    for (int a = 0; a < n_; ++a) v *= ipow(x[a], term.powers[a]);
    out += v;
  }
  return out;
}

Vec CaloricPolynomial::gradient(const Vec& x, double t) const {
  Vec g = vzero();
  for (const auto& term : terms_) {
    for (int a = 0; a < n_; ++a) {
      if (term.powers[a] == 0) continue;
      double v = term.coeff * term.powers[a] * ipow(t, term.tpower);
      for (int b = 0; b < n_; ++b) v *= ipow(x[b], term.powers[b] - (b == a ? 1 : 0));
      g[a] += v;
    }
  }
  return g;
}

double CaloricPolynomial::time_deriv(const Vec& x, double t) const {
  double out = 0.0;
  for (const auto& term : terms_) {
    if (term.tpower == 0) continue;
    double v = term.coeff * term.tpower * ipow(t, term.tpower - 1);
    for (int a = 0; a < n_; ++a) v *= ipow(x[a], term.powers[a]);
    out += v;
  }
  return out;
}

CaloricPolynomial CaloricPolynomial::laplacian() const {
  std::vector<MonomialTerm> out;
  for (const auto& term : terms_) {
    for (int a = 0; a < n_; ++a) {
      if (term.powers[a] < 2) continue;
      MonomialTerm d = term;
      d.coeff *= term.powers[a] * (term.powers[a] - 1);
      d.powers[a] -= 2;
      out.push_back(d);
    }
  }
  return CaloricPolynomial(std::move(out), n_);
}

CaloricPolynomial CaloricPolynomial::dt() const {
  std::vector<MonomialTerm> out;
  for (const auto& term : terms_) {
    if (term.tpower == 0) continue;
    MonomialTerm d = term;
    d.coeff *= term.tpower;
    d.tpower -= 1;
    out.push_back(d);
  }
  return CaloricPolynomial(std::move(out), n_);
}

CaloricPolynomial CaloricPolynomial::heat_applied() const {
  return laplacian().plus(dt().scaled(-1.0));
}

CaloricPolynomial CaloricPolynomial::scaled(double c) const {
  std::vector<MonomialTerm> out = terms_;
  for (auto& term : out) term.coeff *= c;
  return CaloricPolynomial(std::move(out), n_);
}

CaloricPolynomial CaloricPolynomial::plus(const CaloricPolynomial& other) const {
  if (other.n_ != n_) throw ContractError("polynomial dimension mismatch");
  std::vector<MonomialTerm> out = terms_;
  out.insert(out.end(), other.terms_.begin(), other.terms_.end());
  return CaloricPolynomial(std::move(out), n_);
}

int CaloricPolynomial::parabolic_degree() const {
  int deg = -1;
  for (const auto& term : terms_) {
    int d = term.tpower * 2;
    for (int a = 0; a < n_; ++a) d += term.powers[a];
    deg = std::max(deg, d);
  }
  return deg;
}

bool CaloricPolynomial::is_zero(double tol) const {
  for (const auto& term : terms_)
    if (std::abs(term.coeff) > tol) return false;
  return true;
}

std::vector<CaloricPolynomial> caloric_basis(int degree, int n) {
  if (degree < 0 || degree > 4) throw ContractError("caloric basis degree out of range");
  if (n < 1 || n > kMaxDim) throw ContractError("dimension out of range");
  std::vector<CaloricPolynomial> basis;
  for (int total = 0; total <= degree; ++total) {
    // Lexicographic enumeration of |alpha| = total with x1 varying slowest.
    std::array<int, kMaxDim> alpha{};
    std::function<void(int, int)> emit = [&](int axis, int remaining) {
      if (axis == n - 1) {
        alpha[axis] = remaining;
        basis.push_back(CaloricPolynomial::extend_monomial(alpha, n));
        return;
      }
      for (int p = total == 0 ? 0 : remaining; p >= 0; --p) {
        alpha[axis] = p;
        emit(axis + 1, remaining - p);
      }
    };
    emit(0, total);
  }
  return basis;
}

CaloricFit caloric_fit(const SpaceTimeField& u, const SpaceTimePoint& X0, int degree,
                       const std::vector<double>& radii) {
  if (radii.empty()) throw ContractError("caloric fit needs at least one radius");
  std::vector<double> rs = radii;
  std::sort(rs.begin(), rs.end());
  if (rs.front() <= 0.0) throw ContractError("caloric fit radii must be positive");

  const Params& P = u.params();
  const int n = P.n;
  std::vector<CaloricPolynomial> basis = caloric_basis(degree, n);
  const int B = static_cast<int>(basis.size());

  // Collect the grid nodes inside each cylinder; the fit uses the smallest.
  Cylinder smallest{X0, rs.front(), CylinderKind::lower};
  std::vector<std::pair<int, GridIndex>> fit_nodes;
  for (int it = 0; it < u.nt(); ++it) {
    const double t = u.node_t(it);
    GridIndex ix{};
    bool done = false;
    while (!done) {
      Vec x = u.node_x(ix);
      if (cylinder_contains(smallest, x, t, n)) fit_nodes.emplace_back(it, ix);
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < u.nx(a)) break;
        ix[a] = 0;
        if (a == 0) done = true;
      }
    }
  }
  if (static_cast<int>(fit_nodes.size()) < B)
    throw ContractError("caloric fit underdetermined: fewer nodes than basis elements");

  const int N = static_cast<int>(fit_nodes.size());
  Eigen::MatrixXd A(N, B);
  for (int i = 0; i < N; ++i) {
    Vec x = u.node_x(fit_nodes[i].second);
    double t = u.node_t(fit_nodes[i].first);
    Vec dxv = vzero();
    for (int a = 0; a < n; ++a) dxv[a] = x[a] - X0.x[a];
    for (int j = 0; j < B; ++j) A(i, j) = basis[j].value(dxv, t - X0.t);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);

  CaloricFit fit;
  for (int c = 0; c < P.m; ++c) {
    Eigen::VectorXd b(N);
    for (int i = 0; i < N; ++i)
      b(i) = u.node_value(fit_nodes[i].first, fit_nodes[i].second)[c];
    Eigen::VectorXd coef = qr.solve(b);
    CaloricPolynomial comp({}, n);
    for (int j = 0; j < B; ++j) comp = comp.plus(basis[j].scaled(coef(j)));
    fit.components.push_back(comp);
  }

  // Max-norm misfit per radius.
  for (double r : rs) {
    Cylinder cyl{X0, r, CylinderKind::lower};
    double worst = 0.0;
    for (int it = 0; it < u.nt(); ++it) {
      const double t = u.node_t(it);
      GridIndex ix{};
      bool done = false;
      while (!done) {
        Vec x = u.node_x(ix);
        if (cylinder_contains(cyl, x, t, n)) {
          Vec dxv = vzero();
          for (int a = 0; a < n; ++a) dxv[a] = x[a] - X0.x[a];
          CVec uval = u.node_value(it, ix);
          double misfit2 = 0.0;
          for (int c = 0; c < P.m; ++c) {
            double d = uval[c] - fit.components[c].value(dxv, t - X0.t);
            misfit2 += d * d;
          }
          worst = std::max(worst, std::sqrt(misfit2));
        }
        for (int a = n - 1; a >= 0; --a) {
          if (++ix[a] < u.nx(a)) break;
          ix[a] = 0;
          if (a == 0) done = true;
        }
      }
    }
    fit.residual_curve.push(r, worst);
  }
  return fit;
}

ExactSolution ExactSolution::halfspace(const Params& params, const Vec& nu, const CVec& e) {
  const double nn = norm(nu, params.n);
  const double ne = cnorm(e, params.m);
  if (std::abs(nn - 1.0) > 1e-9 || std::abs(ne - 1.0) > 1e-9)
    throw ContractError("halfspace directions must be unit vectors");
  ExactSolution s;
  s.kind_ = ExactKind::halfspace;
  s.params_ = params;
  s.nu_ = nu;
  s.e_ = e;
  return s;
}

ExactSolution ExactSolution::time_flat(const Params& params, const CVec& e) {
  if (std::abs(cnorm(e, params.m) - 1.0) > 1e-9)
    throw ContractError("time_flat direction must be a unit vector");
  ExactSolution s;
  s.kind_ = ExactKind::time_flat;
  s.params_ = params;
  s.e_ = e;
  return s;
}

ExactSolution ExactSolution::caloric_poly(const Params& params,
                                          std::vector<CaloricPolynomial> comps) {
  if (comps.empty() || comps.size() > static_cast<std::size_t>(params.m))
    throw ContractError("caloric_poly needs between 1 and m component polynomials");
  for (const auto& p : comps) {
    if (p.dim() != params.n) throw ContractError("caloric_poly dimension mismatch");
    if (!p.heat_applied().is_zero(1e-12))
      throw ContractError("caloric_poly component is not caloric");
  }
  ExactSolution s;
  s.kind_ = ExactKind::caloric_poly;
  s.params_ = params;
  s.comps_ = std::move(comps);
  return s;
}

ExactSolution ExactSolution::zero(const Params& params) {
  ExactSolution s;
  s.kind_ = ExactKind::zero;
  s.params_ = params;
  return s;
}

CVec ExactSolution::value(const Vec& x, double t) const {
  CVec out = czero();
  switch (kind_) {
    case ExactKind::halfspace: {
      const double s = std::max(dot(x, nu_, params_.n), 0.0);
      const double amp = params_.alpha * std::pow(s, params_.kappa);
      for (int c = 0; c < params_.m; ++c) out[c] = amp * e_[c];
      break;
    }
    case ExactKind::time_flat: {
      if (t >= 0.0) break;
      const double amp = std::pow(-2.0 * t / params_.kappa, 0.5 * params_.kappa);
      for (int c = 0; c < params_.m; ++c) out[c] = amp * e_[c];
      break;
    }
    case ExactKind::caloric_poly:
      for (std::size_t c = 0; c < comps_.size(); ++c) out[c] = comps_[c].value(x, t);
      break;
    case ExactKind::zero:
      break;
  }
  return out;
}

std::array<CVec, kMaxDim> ExactSolution::gradient(const Vec& x, double t) const {
  std::array<CVec, kMaxDim> g;
  g.fill(czero());
  switch (kind_) {
    case ExactKind::halfspace: {
      const double s = std::max(dot(x, nu_, params_.n), 0.0);
      if (s > 0.0) {
        const double amp = params_.alpha * params_.kappa * std::pow(s, params_.kappa - 1.0);
        for (int a = 0; a < params_.n; ++a)
          for (int c = 0; c < params_.m; ++c) g[a][c] = amp * nu_[a] * e_[c];
      }
      break;
    }
    case ExactKind::caloric_poly:
      for (std::size_t c = 0; c < comps_.size(); ++c) {
        Vec gc = comps_[c].gradient(x, t);
        for (int a = 0; a < params_.n; ++a) g[a][c] = gc[a];
      }
      break;
    case ExactKind::time_flat:
    case ExactKind::zero:
      break;
  }
  return g;
}

CVec ExactSolution::time_deriv(const Vec& x, double t) const {
  CVec out = czero();
  switch (kind_) {
    case ExactKind::time_flat: {
      if (t >= 0.0) break;
      const double amp = -std::pow(-2.0 * t / params_.kappa, 0.5 * params_.kappa - 1.0);
      for (int c = 0; c < params_.m; ++c) out[c] = amp * e_[c];
      break;
    }
    case ExactKind::caloric_poly:
      for (std::size_t c = 0; c < comps_.size(); ++c) out[c] = comps_[c].time_deriv(x, t);
      break;
    case ExactKind::halfspace:
    case ExactKind::zero:
      break;
  }
  return out;
}

SpaceTimeField exact_sample(const ExactSolution& sol, const Axis& time_axis,
                            const SpaceAxes& space_axes) {
  if (sol.kind() == ExactKind::time_flat && time_axis.hi > 1e-12)
    throw ContractError("time_flat sampling requires t <= 0");
  return SpaceTimeField::sample(sol.params(), time_axis, space_axes,
                                [&sol](const Vec& x, double t) { return sol.value(x, t); });
}

}  // namespace fblab
