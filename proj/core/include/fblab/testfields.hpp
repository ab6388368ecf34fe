#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "fblab/field.hpp"
#include "fblab/types.hpp"

// Seeded smooth test fields for property checks: sums of separable cos^2
// bumps with analytic derivatives and compact spatial support. The same seed
// always produces the same field, so property failures are reproducible from
// the seed alone.

namespace fblab {

struct BumpTerm {
  Vec center = vzero();
  Vec width = vzero();  // support |x_a - c_a| <= width_a per axis
  double amp = 0.0;
  int comp = 0;
  double tfreq = 0.0;  // value scales with 1 + 0.3 cos(tfreq * t + tphase)
  double tphase = 0.0;
};

class BumpField {
 public:
  BumpField(const Params& params, std::vector<BumpTerm> terms)
      : params_(params), terms_(std::move(terms)) {}

  static BumpField random(const Params& params, unsigned seed, int bumps, double spread,
                          bool time_dependent) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ucenter(-spread, spread);
    std::uniform_real_distribution<double> uwidth(0.4, 1.2);
    std::uniform_real_distribution<double> uamp(-1.0, 1.0);
    std::uniform_int_distribution<int> ucomp(0, params.m - 1);
    std::uniform_real_distribution<double> ufreq(0.5, 2.0);
    std::uniform_real_distribution<double> uphase(0.0, 6.28318530717958648);
    std::vector<BumpTerm> terms(static_cast<std::size_t>(bumps));
    for (BumpTerm& b : terms) {
      for (int a = 0; a < params.n; ++a) {
        b.center[a] = ucenter(rng);
        b.width[a] = uwidth(rng);
      }
      b.amp = uamp(rng);
      b.comp = ucomp(rng);
      if (time_dependent) {
        b.tfreq = ufreq(rng);
        b.tphase = uphase(rng);
      }
    }
    return BumpField(params, std::move(terms));
  }

  const Params& params() const { return params_; }

  CVec value(const Vec& x, double t) const {
    CVec out = czero();
    for (const BumpTerm& b : terms_) {
      out[b.comp] += b.amp * tfactor(b, t) * shape(b, x);
    }
    return out;
  }

  std::array<CVec, kMaxDim> gradient(const Vec& x, double t) const {
    std::array<CVec, kMaxDim> out{};
    for (auto& g : out) g = czero();
    for (const BumpTerm& b : terms_) {
      const double f = b.amp * tfactor(b, t);
      for (int a = 0; a < params_.n; ++a) {
        out[a][b.comp] += f * shape_deriv(b, x, a);
      }
    }
    return out;
  }

  CVec time_deriv(const Vec& x, double t) const {
    CVec out = czero();
    for (const BumpTerm& b : terms_) {
      if (b.tfreq == 0.0) continue;
      const double df = -0.3 * b.tfreq * std::sin(b.tfreq * t + b.tphase);
      out[b.comp] += b.amp * df * shape(b, x);
    }
    return out;
  }

  SpaceTimeField sample(const Axis& time_axis, const SpaceAxes& space_axes) const {
    return SpaceTimeField::sample(params_, time_axis, space_axes,
                                  [this](const Vec& x, double t) { return value(x, t); });
  }

 private:
  Params params_;
  std::vector<BumpTerm> terms_;

  static double pi() { return 3.14159265358979323846; }

  double tfactor(const BumpTerm& b, double t) const {
    return b.tfreq == 0.0 ? 1.0 : 1.0 + 0.3 * std::cos(b.tfreq * t + b.tphase);
  }

  // Product of cos^2(pi s_a / 2) over axes, s_a = (x_a - c_a)/w_a, zero
  // outside |s_a| < 1.
  double shape(const BumpTerm& b, const Vec& x) const {
    double p = 1.0;
    for (int a = 0; a < params_.n; ++a) {
      const double s = (x[a] - b.center[a]) / b.width[a];
      if (std::abs(s) >= 1.0) return 0.0;
      const double c = std::cos(0.5 * pi() * s);
      p *= c * c;
    }
    return p;
  }

  double shape_deriv(const BumpTerm& b, const Vec& x, int axis) const {
    double p = 1.0;
    for (int a = 0; a < params_.n; ++a) {
      const double s = (x[a] - b.center[a]) / b.width[a];
      if (std::abs(s) >= 1.0) return 0.0;
      if (a == axis) {
        // d/dx cos^2(pi s/2) = -(pi/2) sin(pi s) / w
        p *= -0.5 * pi() * std::sin(pi() * s) / b.width[a];
      } else {
        const double c = std::cos(0.5 * pi() * s);
        p *= c * c;
      }
    }
    return p;
  }
};

}  // namespace fblab
