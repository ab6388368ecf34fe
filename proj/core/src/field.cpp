#include "fblab/field.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace fblab {

Axis make_axis(double lo, double hi, int count) {
  if (!(hi > lo) || count < 2) {
    throw ContractError("make_axis: need hi > lo and count >= 2");
  }
  return Axis{lo, hi, count};
}

namespace {

void check_axis(const Axis& a, const char* who) {
  if (!(a.hi > a.lo) || a.count < 2) {
    throw ContractError(std::string(who) + ": malformed axis");
  }
}

// Clamp a continuous coordinate into cell index + fraction, allowing a small
// relative slack beyond the ends.
bool locate(const Axis& a, double x, int& cell, double& frac, double rel_slack) {
  const double span = a.hi - a.lo;
  const double tol = rel_slack * span;
  if (x < a.lo - tol || x > a.hi + tol) return false;
  double u = (x - a.lo) / a.step();
  int i = static_cast<int>(std::floor(u));
  i = std::clamp(i, 0, a.count - 2);
  double f = u - i;
  f = std::clamp(f, 0.0, 1.0);
  cell = i;
  frac = f;
  return true;
}

// One-dimensional derivative stencil along one stride of a flat table.
// Second-order centered in the interior, second-order one-sided at the ends.
inline double stencil_deriv(const double* base, std::ptrdiff_t stride, int i, int count,
                            double h) {
  if (count < 2) return 0.0;
  if (count == 2) return (base[stride] - base[0]) / h;
  if (i == 0) return (-3.0 * base[0] + 4.0 * base[stride] - base[2 * stride]) / (2.0 * h);
  if (i == count - 1) {
    const double* p = base + static_cast<std::ptrdiff_t>(i) * stride;
    return (3.0 * p[0] - 4.0 * p[-stride] + p[-2 * stride]) / (2.0 * h);
  }
  const double* p = base + static_cast<std::ptrdiff_t>(i) * stride;
  return (p[stride] - p[-stride]) / (2.0 * h);
}

}  // namespace

struct SpaceTimeField::Payload {
  std::vector<double> data;
  mutable std::mutex lock;
  // index 0..kMaxDim-1: spatial axes; index kMaxDim: time derivative
  mutable std::array<std::shared_ptr<const std::vector<double>>, kMaxDim + 1> tables;
};

SpaceTimeField SpaceTimeField::sample(const Params& params, const Axis& time_axis,
                                      const SpaceAxes& space_axes,
                                      const std::function<CVec(const Vec&, double)>& f) {
  check_axis(time_axis, "SpaceTimeField::sample");
  for (int i = 0; i < params.n; ++i) check_axis(space_axes[i], "SpaceTimeField::sample");

  std::size_t nodes = time_axis.count;
  for (int i = 0; i < params.n; ++i) nodes *= space_axes[i].count;
  std::vector<double> values(nodes * params.m);

  std::size_t idx = 0;
  GridIndex ix{};
  for (int it = 0; it < time_axis.count; ++it) {
    const double t = time_axis.coord(it);
    ix.fill(0);
    for (;;) {
      Vec x{};
      for (int a = 0; a < params.n; ++a) x[a] = space_axes[a].coord(ix[a]);
      const CVec v = f(x, t);
      for (int c = 0; c < params.m; ++c) values[idx++] = v[c];
      // odometer over the spatial axes, last axis fastest
      int a = params.n - 1;
      for (; a >= 0; --a) {
        if (++ix[a] < space_axes[a].count) break;
        ix[a] = 0;
      }
      if (a < 0) break;
    }
  }
  return from_values(params, time_axis, space_axes, std::move(values));
}

SpaceTimeField SpaceTimeField::from_values(const Params& params, const Axis& time_axis,
                                           const SpaceAxes& space_axes,
                                           std::vector<double> values) {
  check_axis(time_axis, "SpaceTimeField::from_values");
  std::size_t nodes = time_axis.count;
  for (int i = 0; i < params.n; ++i) {
    check_axis(space_axes[i], "SpaceTimeField::from_values");
    nodes *= space_axes[i].count;
  }
  if (values.size() != nodes * static_cast<std::size_t>(params.m)) {
    throw ContractError("SpaceTimeField::from_values: sample count " +
                        std::to_string(values.size()) + " does not match shape*m " +
                        std::to_string(nodes * params.m));
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ContractError("SpaceTimeField::from_values: non-finite sample");
    }
  }
  SpaceTimeField u;
  u.params_ = params;
  u.taxis_ = time_axis;
  u.xaxes_ = space_axes;
  u.payload_ = std::make_shared<Payload>();
  u.payload_->data = std::move(values);
  return u;
}

double SpaceTimeField::max_dx() const {
  double h = 0.0;
  for (int i = 0; i < params_.n; ++i) h = std::max(h, xaxes_[i].step());
  return h;
}

std::size_t SpaceTimeField::node_count() const {
  if (!payload_) return 0;
  return payload_->data.size() / params_.m;
}

const std::vector<double>& SpaceTimeField::data() const {
  if (!payload_) throw ContractError("SpaceTimeField: empty field");
  return payload_->data;
}

Vec SpaceTimeField::node_x(const GridIndex& ix) const {
  Vec x{};
  for (int a = 0; a < params_.n; ++a) x[a] = xaxes_[a].coord(ix[a]);
  return x;
}

std::size_t SpaceTimeField::node_offset(int it, const GridIndex& ix) const {
  std::size_t off = it;
  for (int a = 0; a < params_.n; ++a) off = off * xaxes_[a].count + ix[a];
  return off;
}

CVec SpaceTimeField::node_value(int it, const GridIndex& ix) const {
  const double* p = data().data() + node_offset(it, ix) * params_.m;
  CVec v{};
  for (int c = 0; c < params_.m; ++c) v[c] = p[c];
  return v;
}

bool SpaceTimeField::contains(const Vec& x, double t, double rel_slack) const {
  if (!payload_) return false;
  int cell;
  double frac;
  if (!locate(taxis_, t, cell, frac, rel_slack)) return false;
  for (int a = 0; a < params_.n; ++a) {
    if (!locate(xaxes_[a], x[a], cell, frac, rel_slack)) return false;
  }
  return true;
}

CVec SpaceTimeField::interp(const std::vector<double>& table, const Vec& x, double t) const {
  const int n = params_.n;
  const int m = params_.m;
  int cell[kMaxDim + 1];
  double frac[kMaxDim + 1];
  if (!locate(taxis_, t, cell[0], frac[0], 1e-9)) {
    throw OutOfDomainError("SpaceTimeField: t=" + std::to_string(t) + " outside [" +
                           std::to_string(taxis_.lo) + "," + std::to_string(taxis_.hi) + "]");
  }
  for (int a = 0; a < n; ++a) {
    if (!locate(xaxes_[a], x[a], cell[a + 1], frac[a + 1], 1e-9)) {
      throw OutOfDomainError("SpaceTimeField: x[" + std::to_string(a) + "]=" +
                             std::to_string(x[a]) + " outside [" + std::to_string(xaxes_[a].lo) +
                             "," + std::to_string(xaxes_[a].hi) + "]");
    }
  }
  // strides in nodes
  std::size_t stride[kMaxDim + 1];
  stride[n] = 1;  // innermost spatial axis
  for (int a = n - 1; a >= 1; --a) stride[a] = stride[a + 1] * xaxes_[a].count;
  stride[0] = stride[1] * xaxes_[0].count;  // time stride
  std::size_t base = cell[0] * stride[0];
  for (int a = 0; a < n; ++a) base += static_cast<std::size_t>(cell[a + 1]) * stride[a + 1];

  CVec out{};
  const int corners = 1 << (n + 1);
  for (int corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    std::size_t off = base;
    for (int d = 0; d <= n; ++d) {
      const bool hi = (corner >> d) & 1;
      w *= hi ? frac[d] : (1.0 - frac[d]);
      if (hi) off += stride[d];
    }
    if (w == 0.0) continue;
    const double* p = table.data() + off * m;
    for (int c = 0; c < m; ++c) out[c] += w * p[c];
  }
  return out;
}

CVec SpaceTimeField::value(const Vec& x, double t) const { return interp(data(), x, t); }

const std::vector<double>& SpaceTimeField::deriv_table(int axis) const {
  if (!payload_) throw ContractError("SpaceTimeField: empty field");
  const int slot = (axis < 0) ? kMaxDim : axis;
  std::lock_guard<std::mutex> g(payload_->lock);
  if (payload_->tables[slot]) return *payload_->tables[slot];

  const int n = params_.n;
  const int m = params_.m;
  const std::vector<double>& src = payload_->data;
  auto table = std::make_shared<std::vector<double>>(src.size());

  std::size_t stride_nodes[kMaxDim + 1];
  stride_nodes[n] = 1;
  for (int a = n - 1; a >= 1; --a) stride_nodes[a] = stride_nodes[a + 1] * xaxes_[a].count;
  stride_nodes[0] = stride_nodes[1] * xaxes_[0].count;

  const bool time = (axis < 0);
  const int count = time ? taxis_.count : xaxes_[axis].count;
  const double h = time ? taxis_.step() : xaxes_[axis].step();
  const std::ptrdiff_t stride =
      static_cast<std::ptrdiff_t>((time ? stride_nodes[0] : stride_nodes[axis + 1]) * m);

  const std::size_t total = src.size() / m;
  for (std::size_t node = 0; node < total; ++node) {
    // index along the differentiated axis
    std::size_t rem = node;
    int pos;
    if (time) {
      pos = static_cast<int>(rem / stride_nodes[0]);
    } else {
      rem %= stride_nodes[0];
      for (int a = 0; a < axis; ++a) rem %= stride_nodes[a + 1];
      pos = static_cast<int>(rem / stride_nodes[axis + 1]);
    }
    const std::size_t line_start = node - static_cast<std::size_t>(pos) *
                                              (time ? stride_nodes[0] : stride_nodes[axis + 1]);
    for (int c = 0; c < m; ++c) {
      (*table)[node * m + c] =
          stencil_deriv(src.data() + line_start * m + c, stride, pos, count, h);
    }
  }
  payload_->tables[slot] = table;
  return *payload_->tables[slot];
}

std::array<CVec, kMaxDim> SpaceTimeField::gradient(const Vec& x, double t) const {
  std::array<CVec, kMaxDim> g{};
  for (int a = 0; a < params_.n; ++a) g[a] = interp(deriv_table(a), x, t);
  return g;
}

CVec SpaceTimeField::time_deriv(const Vec& x, double t) const {
  return interp(deriv_table(-1), x, t);
}

CVec SpaceTimeField::node_gradient(int it, const GridIndex& ix, int axis) const {
  const std::vector<double>& table = deriv_table(axis);
  const double* p = table.data() + node_offset(it, ix) * params_.m;
  CVec v{};
  for (int c = 0; c < params_.m; ++c) v[c] = p[c];
  return v;
}

CVec SpaceTimeField::node_time_deriv(int it, const GridIndex& ix) const {
  const std::vector<double>& table = deriv_table(-1);
  const double* p = table.data() + node_offset(it, ix) * params_.m;
  CVec v{};
  for (int c = 0; c < params_.m; ++c) v[c] = p[c];
  return v;
}

double SpaceTimeField::max_abs() const {
  const std::vector<double>& d = data();
  const int m = params_.m;
  double best = 0.0;
  for (std::size_t node = 0; node < d.size() / m; ++node) {
    double s = 0.0;
    for (int c = 0; c < m; ++c) s += d[node * m + c] * d[node * m + c];
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// SpatialField

SpatialField SpatialField::sample(const Params& params, const SpaceAxes& axes,
                                  const std::function<CVec(const Vec&)>& f) {
  std::size_t nodes = 1;
  for (int i = 0; i < params.n; ++i) {
    check_axis(axes[i], "SpatialField::sample");
    nodes *= axes[i].count;
  }
  std::vector<double> values(nodes * params.m);
  std::size_t idx = 0;
  GridIndex ix{};
  ix.fill(0);
  for (;;) {
    Vec x{};
    for (int a = 0; a < params.n; ++a) x[a] = axes[a].coord(ix[a]);
    const CVec v = f(x);
    for (int c = 0; c < params.m; ++c) values[idx++] = v[c];
    int a = params.n - 1;
    for (; a >= 0; --a) {
      if (++ix[a] < axes[a].count) break;
      ix[a] = 0;
    }
    if (a < 0) break;
  }
  return from_values(params, axes, std::move(values));
}

SpatialField SpatialField::from_values(const Params& params, const SpaceAxes& axes,
                                       std::vector<double> values) {
  std::size_t nodes = 1;
  for (int i = 0; i < params.n; ++i) {
    check_axis(axes[i], "SpatialField::from_values");
    nodes *= axes[i].count;
  }
  if (values.size() != nodes * static_cast<std::size_t>(params.m)) {
    throw ContractError("SpatialField::from_values: sample count mismatch");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ContractError("SpatialField::from_values: non-finite sample");
  }
  SpatialField u;
  u.params_ = params;
  u.axes_ = axes;
  u.data_ = std::move(values);
  return u;
}

std::size_t SpatialField::node_count() const { return data_.size() / params_.m; }

Vec SpatialField::node_x(const GridIndex& ix) const {
  Vec x{};
  for (int a = 0; a < params_.n; ++a) x[a] = axes_[a].coord(ix[a]);
  return x;
}

std::size_t SpatialField::node_offset(const GridIndex& ix) const {
  std::size_t off = 0;
  for (int a = 0; a < params_.n; ++a) off = off * axes_[a].count + ix[a];
  return off;
}

CVec SpatialField::node_value(const GridIndex& ix) const {
  const double* p = data_.data() + node_offset(ix) * params_.m;
  CVec v{};
  for (int c = 0; c < params_.m; ++c) v[c] = p[c];
  return v;
}

bool SpatialField::contains(const Vec& x, double rel_slack) const {
  if (data_.empty()) return false;
  int cell;
  double frac;
  for (int a = 0; a < params_.n; ++a) {
    if (!locate(axes_[a], x[a], cell, frac, rel_slack)) return false;
  }
  return true;
}

CVec SpatialField::value(const Vec& x) const {
  const int n = params_.n;
  const int m = params_.m;
  int cell[kMaxDim];
  double frac[kMaxDim];
  for (int a = 0; a < n; ++a) {
    if (!locate(axes_[a], x[a], cell[a], frac[a], 1e-9)) {
      throw OutOfDomainError("SpatialField: x[" + std::to_string(a) + "]=" +
                             std::to_string(x[a]) + " outside axis range");
    }
  }
  std::size_t stride[kMaxDim];
  stride[n - 1] = 1;
  for (int a = n - 2; a >= 0; --a) stride[a] = stride[a + 1] * axes_[a + 1].count;
  std::size_t base = 0;
  for (int a = 0; a < n; ++a) base += static_cast<std::size_t>(cell[a]) * stride[a];

  CVec out{};
  const int corners = 1 << n;
  for (int corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    std::size_t off = base;
    for (int d = 0; d < n; ++d) {
      const bool hi = (corner >> d) & 1;
      w *= hi ? frac[d] : (1.0 - frac[d]);
      if (hi) off += stride[d];
    }
    if (w == 0.0) continue;
    const double* p = data_.data() + off * m;
    for (int c = 0; c < m; ++c) out[c] += w * p[c];
  }
  return out;
}

}  // namespace fblab
