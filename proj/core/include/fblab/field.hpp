#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "fblab/types.hpp"

// Sampled fields on regular space-time (and space-only) grids. Fields are
// immutable after construction; copies share the payload. Point evaluation is
// multilinear, and node-wise derivative tables (second-order centered stencils
// in the interior, second-order one-sided at the edges) are built lazily and
// then interpolated like any other sample.

namespace fblab {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;

  double step() const { return (hi - lo) / (count - 1); }
  double coord(int i) const { return lo + step() * i; }
};

// Convenience builder for the common uniform axis.
Axis make_axis(double lo, double hi, int count);

using SpaceAxes = std::array<Axis, kMaxDim>;
using GridIndex = std::array<int, kMaxDim>;

class SpaceTimeField {
 public:
  SpaceTimeField() = default;

  // Samples f(x, t) on the grid. f returns the m active components.
  static SpaceTimeField sample(const Params& params, const Axis& time_axis,
                               const SpaceAxes& space_axes,
                               const std::function<CVec(const Vec&, double)>& f);

  // Wraps existing samples, laid out row-major over (t, x1, ..., xn) with the
  // m components fastest-varying. Throws ContractError on a size mismatch or
  // non-finite samples.
  static SpaceTimeField from_values(const Params& params, const Axis& time_axis,
                                    const SpaceAxes& space_axes, std::vector<double> values);

  bool empty() const { return !payload_; }
  const Params& params() const { return params_; }
  const Axis& time_axis() const { return taxis_; }
  const Axis& space_axis(int i) const { return xaxes_[i]; }
  int nt() const { return taxis_.count; }
  int nx(int i) const { return xaxes_[i].count; }
  double dt() const { return taxis_.step(); }
  double dx(int i) const { return xaxes_[i].step(); }
  double max_dx() const;
  std::size_t node_count() const;
  const std::vector<double>& data() const;

  double node_t(int it) const { return taxis_.coord(it); }
  Vec node_x(const GridIndex& ix) const;
  std::size_t node_offset(int it, const GridIndex& ix) const;  // into data(), excl. components
  CVec node_value(int it, const GridIndex& ix) const;

  // True when (x, t) lies inside the sampled box, with a per-axis slack
  // measured in fractions of the axis span.
  bool contains(const Vec& x, double t, double rel_slack = 1e-9) const;

  // Multilinear interpolation; throws OutOfDomainError outside the box.
  CVec value(const Vec& x, double t) const;
  // Interpolated spatial gradient, one CVec per spatial axis.
  std::array<CVec, kMaxDim> gradient(const Vec& x, double t) const;
  // Interpolated time derivative.
  CVec time_deriv(const Vec& x, double t) const;

  // Node-table access for stencil-based consumers.
  CVec node_gradient(int it, const GridIndex& ix, int axis) const;
  CVec node_time_deriv(int it, const GridIndex& ix) const;

  double max_abs() const;  // max over nodes of |u(node)|

 private:
  struct Payload;
  Params params_{};
  Axis taxis_{};
  SpaceAxes xaxes_{};
  std::shared_ptr<Payload> payload_;

  const std::vector<double>& deriv_table(int axis) const;  // axis -1 = time
  CVec interp(const std::vector<double>& table, const Vec& x, double t) const;
};

// Spatial-only carrier used by the elliptic energy machinery.
class SpatialField {
 public:
  SpatialField() = default;
  static SpatialField sample(const Params& params, const SpaceAxes& axes,
                             const std::function<CVec(const Vec&)>& f);
  static SpatialField from_values(const Params& params, const SpaceAxes& axes,
                                  std::vector<double> values);

  bool empty() const { return data_.empty(); }
  const Params& params() const { return params_; }
  const Axis& axis(int i) const { return axes_[i]; }
  int nx(int i) const { return axes_[i].count; }
  double dx(int i) const { return axes_[i].step(); }
  std::size_t node_count() const;
  const std::vector<double>& data() const { return data_; }

  Vec node_x(const GridIndex& ix) const;
  std::size_t node_offset(const GridIndex& ix) const;
  CVec node_value(const GridIndex& ix) const;

  bool contains(const Vec& x, double rel_slack = 1e-9) const;
  CVec value(const Vec& x) const;  // multilinear

 private:
  Params params_{};
  SpaceAxes axes_{};
  std::vector<double> data_;
};

}  // namespace fblab
