#include "fblab/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "fblab/exact.hpp"
#include "fblab/fbanalysis.hpp"
#include "fblab/functionals.hpp"
#include "fblab/operators.hpp"
#include "fblab/quadrature.hpp"
#include "fblab/solver.hpp"
#include "fblab/spectrum.hpp"
#include "fblab/testfields.hpp"

namespace fblab {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string config_stamp(const Config& cfg) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "config_hash=%016llx",
                static_cast<unsigned long long>(fnv1a(cfg.text)));
  return buf;
}

std::string out_path(const RunOptions& opts, const std::string& file) {
  return (std::filesystem::path(opts.out_dir) / file).string();
}

// Input paths are taken as given (relative to the working directory);
// only outputs land in --out.
std::string in_path(const std::string& value) { return value; }

void check_keys(const Config& cfg, std::initializer_list<const char*> allowed) {
  for (const ConfigEntry& e : cfg.entries) {
    bool known = false;
    for (const char* k : allowed) {
      if (e.key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ContractError("config line " + std::to_string(e.line) + ": key '" +
                          e.key + "' is not understood by this experiment");
    }
  }
}

std::string require(const Config& cfg, const char* key) {
  const ConfigEntry* e = cfg.find(key);
  if (!e) {
    throw ContractError(std::string("config: missing required key '") + key +
                        "'");
  }
  return e->value;
}

[[noreturn]] void key_error(const Config& cfg, const char* key,
                            const std::string& what) {
  const ConfigEntry* e = cfg.find(key);
  if (e) {
    throw ContractError("config line " + std::to_string(e->line) + ": " +
                        what);
  }
  throw ContractError("config: " + what);
}

// Records assertion outcomes; any failure turns the run's exit status to 1.
struct Asserter {
  int status = 0;

  void close(const std::string& name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    std::printf("  assert %s: got %.10g want %.10g tol %.3g -> %s\n",
                name.c_str(), got, want, tol, ok ? "ok" : "FAIL");
    if (!ok) status = 1;
  }

  void at_most(const std::string& name, double got, double bound) {
    const bool ok = got <= bound;
    std::printf("  assert %s: got %.10g bound %.10g -> %s\n", name.c_str(),
                got, bound, ok ? "ok" : "FAIL");
    if (!ok) status = 1;
  }

  void truth(const std::string& name, bool got) {
    std::printf("  assert %s: %s\n", name.c_str(), got ? "ok" : "FAIL");
    if (!got) status = 1;
  }
};

Axis axis_from(const Config& cfg, const char* key, const Axis& fallback) {
  const ConfigEntry* e = cfg.find(key);
  if (!e) return fallback;
  const std::vector<double> v = parse_number_list(e->value);
  if (v.size() != 3) {
    key_error(cfg, key,
              std::string(key) + " expects 'lo, hi, count' (three numbers)");
  }
  const long count = std::lround(v[2]);
  if (std::abs(v[2] - static_cast<double>(count)) > 1e-9 || count < 2) {
    key_error(cfg, key, std::string(key) + " count must be an integer >= 2");
  }
  return make_axis(v[0], v[1], static_cast<int>(count));
}

QuadratureRule rule_from(const Config& cfg) {
  QuadratureRule rule;
  rule.similarity_cutoff =
      cfg.get_num("quadrature.cutoff", rule.similarity_cutoff);
  rule.nodes_per_axis = static_cast<int>(
      cfg.get_int("quadrature.nodes", rule.nodes_per_axis));
  rule.time_subdivisions = static_cast<int>(
      cfg.get_int("quadrature.time_subdivisions", rule.time_subdivisions));
  return rule;
}

Vec point_from(const Config& cfg, const char* key, int n) {
  Vec x = vzero();
  const ConfigEntry* e = cfg.find(key);
  if (!e) return x;
  const std::vector<double> v = parse_number_list(e->value);
  if (static_cast<int>(v.size()) != n) {
    key_error(cfg, key,
              std::string(key) + " expects " + std::to_string(n) +
                  " coordinates");
  }
  for (int a = 0; a < n; ++a) x[a] = v[a];
  return x;
}

std::vector<double> radii_from(const Config& cfg, const char* key,
                               std::vector<double> fallback) {
  const ConfigEntry* e = cfg.find(key);
  if (!e) return fallback;
  std::vector<double> r = parse_number_list(e->value);
  if (r.empty()) key_error(cfg, key, std::string(key) + " must be nonempty");
  for (double v : r) {
    if (!(v > 0.0)) {
      key_error(cfg, key, std::string(key) + " entries must be positive");
    }
  }
  return r;
}

SpatialField spatial_slice(const SpaceTimeField& u, int it) {
  const int n = u.params().n;
  const int m = u.params().m;
  SpaceAxes axes{};
  std::size_t nodes = 1;
  for (int a = 0; a < n; ++a) {
    axes[a] = u.space_axis(a);
    nodes *= static_cast<std::size_t>(u.nx(a));
  }
  const double* base = u.data().data() + static_cast<std::size_t>(it) * nodes * m;
  return SpatialField::from_values(u.params(), axes,
                                   std::vector<double>(base, base + nodes * m));
}

template <class F>
void for_each_space_node(const SpaceTimeField& u, F&& f) {
  const int n = u.params().n;
  GridIndex ix{};
  for (;;) {
    f(ix);
    int a = 0;
    for (; a < n; ++a) {
      if (++ix[a] < u.nx(a)) break;
      ix[a] = 0;
    }
    if (a == n) break;
  }
}

double slice_max_abs(const SpaceTimeField& u, int it) {
  const int m = u.params().m;
  std::size_t nodes = 1;
  for (int a = 0; a < u.params().n; ++a) nodes *= static_cast<std::size_t>(u.nx(a));
  const double* base = u.data().data() + static_cast<std::size_t>(it) * nodes * m;
  double best = 0.0;
  for (std::size_t j = 0; j < nodes * m; ++j) best = std::max(best, std::abs(base[j]));
  return best;
}

double slice_max_err(const SpaceTimeField& u, int it, const ExactSolution& sol) {
  const int m = u.params().m;
  const double t = u.node_t(it);
  double best = 0.0;
  for_each_space_node(u, [&](const GridIndex& ix) {
    const Vec x = u.node_x(ix);
    const CVec want = sol.value(x, t);
    const CVec got = u.node_value(it, ix);
    for (int c = 0; c < m; ++c) best = std::max(best, std::abs(got[c] - want[c]));
  });
  return best;
}

// Spatial straddle face with the latest time (latest vanishing activity),
// ties broken lexicographically toward larger coordinates, then the halo
// correction toward the true boundary.
SpaceTimePoint frontier_point(const SpaceTimeField& u) {
  const FreeBoundarySample fb = extract_fb(u);
  const FreeBoundaryPoint* best = nullptr;
  for (const FreeBoundaryPoint& p : fb.points) {
    if (p.face_axis < 0) continue;
    if (!best) {
      best = &p;
      continue;
    }
    if (p.X.t > best->X.t + 1e-15) {
      best = &p;
      continue;
    }
    if (p.X.t < best->X.t - 1e-15) continue;
    for (int a = 0; a < u.params().n; ++a) {
      if (p.X.x[a] > best->X.x[a] + 1e-15) {
        best = &p;
        break;
      }
      if (p.X.x[a] < best->X.x[a] - 1e-15) break;
    }
  }
  if (!best) {
    throw ContractError(
        "no spatial free-boundary face found (field does not vanish inside "
        "the box)");
  }
  return locate_fb(u, *best, fb.threshold);
}

SpaceTimePoint point_of(const Config& cfg, const SpaceTimeField& u,
                        const char* prefix) {
  const std::string locate_key = std::string(prefix) + ".locate";
  if (cfg.get_int(locate_key, 0) != 0) return frontier_point(u);
  SpaceTimePoint X0;
  X0.x = point_from(cfg, (std::string(prefix) + ".x0").c_str(), u.params().n);
  X0.t = cfg.get_num(std::string(prefix) + ".t0", 0.0);
  return X0;
}

const char* point_class_name(PointClass kind) {
  switch (kind) {
    case PointClass::Regular:
      return "Regular";
    case PointClass::NonRegular:
      return "NonRegular";
    default:
      return "Unknown";
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// ---------------------------------------------------------------------------
// experiment: constants

int run_constants(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "params.q", "assert.A_q", "assert.M_theta",
                   "assert.tol"});
  const double q = cfg.get_num("params.q", 0.0);
  const Params P = make_params(q, 1, 1);
  const auto clock0 = std::chrono::steady_clock::now();
  const EnergyConstants ec = energy_constants(P);
  const double us = std::chrono::duration<double, std::micro>(
                        std::chrono::steady_clock::now() - clock0)
                        .count();
  write_csv(out_path(opts, "constants.csv"), config_stamp(cfg),
            {"q", "kappa", "alpha", "A_q", "M_theta"},
            {{P.q, P.kappa, P.alpha, ec.A_q, ec.M_theta}});
  std::printf("constants: q=%g kappa=%g alpha=%.12g A_q=%.12g M_theta=%.12g (%.0f us)\n",
              P.q, P.kappa, P.alpha, ec.A_q, ec.M_theta, us);
  Asserter as;
  const double tol = cfg.get_num("assert.tol", 1e-10);
  if (cfg.has("assert.A_q")) as.close("A_q", ec.A_q, cfg.get_num("assert.A_q", 0.0), tol);
  if (cfg.has("assert.M_theta")) {
    as.close("M_theta", ec.M_theta, cfg.get_num("assert.M_theta", 0.0), tol);
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: spectrum

int run_spectrum(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "spectrum.count", "spectrum.grid",
                   "spectrum.truncation", "assert.tol"});
  const int k = static_cast<int>(cfg.get_int("spectrum.count", 2));
  SpectrumOptions so;
  so.grid = static_cast<int>(cfg.get_int("spectrum.grid", so.grid));
  so.truncation = cfg.get_num("spectrum.truncation", so.truncation);
  const std::vector<double> evs = ou_halfline_spectrum(k, so);
  std::vector<std::vector<double>> rows;
  for (int j = 0; j < k; ++j) {
    rows.push_back({static_cast<double>(j + 1), evs[j],
                    static_cast<double>(2 * j + 1)});
  }
  write_csv(out_path(opts, "spectrum.csv"), config_stamp(cfg),
            {"index", "lambda", "exact"}, rows);
  std::printf("spectrum:");
  for (int j = 0; j < k; ++j) std::printf(" lambda_%d=%.8g", j + 1, evs[j]);
  std::printf("\n");
  Asserter as;
  if (cfg.has("assert.tol")) {
    const double tol = cfg.get_num("assert.tol", 1e-2);
    for (int j = 0; j < k; ++j) {
      char name[32];
      std::snprintf(name, sizeof name, "lambda_%d", j + 1);
      as.close(name, evs[j], 2.0 * j + 1.0, tol);
    }
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: solve

int run_solve(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "params.q", "params.n", "grid.t", "grid.x",
                   "solver.dt", "solver.scheme", "solver.reaction_floor",
                   "solve.family", "solve.perturb", "solve.perturb_center",
                   "solve.perturb_width", "io.output", "assert.max_error"});
  const double q = cfg.get_num("params.q", 0.0);
  const int n = static_cast<int>(cfg.get_int("params.n", 1));
  const Params P = make_params(q, n, 1);
  const Axis taxis = axis_from(cfg, "grid.t", make_axis(-1.0, -0.5, 51));
  const Axis xaxis = axis_from(cfg, "grid.x", make_axis(-2.0, 2.0, 257));
  SpaceAxes axes{};
  for (int a = 0; a < n; ++a) axes[a] = xaxis;

  const std::string family = cfg.get("solve.family", "halfspace");
  ExactSolution sol = ExactSolution::zero(P);
  if (family == "halfspace") {
    sol = ExactSolution::halfspace(P, unit_x(0), unit_c(0));
  } else if (family == "time_flat") {
    sol = ExactSolution::time_flat(P, unit_c(0));
  } else if (family != "zero") {
    key_error(cfg, "solve.family",
              "solve.family must be halfspace, time_flat, or zero");
  }

  const double amp = cfg.get_num("solve.perturb", 0.0);
  const double center = cfg.get_num("solve.perturb_center", 0.0);
  const double width = cfg.get_num("solve.perturb_width", 0.5);
  if (!(width > 0.0)) key_error(cfg, "solve.perturb_width", "width must be positive");

  const SpatialField init = SpatialField::sample(P, axes, [&](const Vec& x) {
    CVec v = sol.value(x, taxis.lo);
    const double s = (x[0] - center) / width;
    if (std::abs(s) < 1.0) {
      const double g = std::cos(0.5 * kPi * s);
      for (int c = 0; c < P.m; ++c) v[c] *= 1.0 + amp * g * g;
    }
    return v;
  });

  SolverConfig sc;
  sc.dt = cfg.get_num("solver.dt", 1e-4);
  const std::string scheme = cfg.get("solver.scheme", "imex");
  if (scheme == "imex") {
    sc.scheme = Scheme::imex_euler;
  } else if (scheme == "explicit") {
    sc.scheme = Scheme::explicit_euler;
  } else {
    key_error(cfg, "solver.scheme", "solver.scheme must be imex or explicit");
  }
  sc.reaction_floor = cfg.get_num("solver.reaction_floor", -1.0);
  sc.bc = [sol](const Vec& x, double t) { return sol.value(x, t); };

  const SpaceTimeField u = solve_cauchy(init, sc, taxis);

  if (cfg.has("io.output")) {
    const std::string raw = require(cfg, "io.output");
    std::filesystem::path p(raw);
    const std::string dest = p.is_absolute() ? raw : out_path(opts, raw);
    save_snapshot(u, dest);
    if (opts.verbose) std::printf("  wrote %s\n", dest.c_str());
  }

  const bool exact_cmp = amp == 0.0 && sol.solves_system();
  double worst = 0.0;
  std::vector<std::vector<double>> rows;
  for (int it = 0; it < u.nt(); ++it) {
    const double v = exact_cmp ? slice_max_err(u, it, sol) : slice_max_abs(u, it);
    worst = std::max(worst, v);
    rows.push_back({u.node_t(it), v});
  }
  write_csv(out_path(opts, "solve.csv"), config_stamp(cfg),
            {"t", exact_cmp ? "max_error" : "max_abs"}, rows);
  std::printf("solve: family=%s q=%g n=%d slices=%d %s=%.6e\n", family.c_str(),
              q, n, u.nt(), exact_cmp ? "max_error" : "max_abs", worst);

  Asserter as;
  if (cfg.has("assert.max_error")) {
    if (!exact_cmp) {
      key_error(cfg, "assert.max_error",
                "assert.max_error needs an exact family and solve.perturb = 0");
    }
    as.at_most("max_error", worst, cfg.get_num("assert.max_error", 0.0));
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: weiss

int run_weiss(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "io.input", "weiss.x0", "weiss.t0",
                   "weiss.radii", "weiss.localized", "weiss.inner",
                   "weiss.outer", "quadrature.cutoff", "quadrature.nodes",
                   "quadrature.time_subdivisions", "assert.value",
                   "assert.tol", "assert.constancy"});
  const SpaceTimeField u = load_snapshot(in_path(require(cfg, "io.input")));
  const QuadratureRule rule = rule_from(cfg);
  SpaceTimePoint X0;
  X0.x = point_from(cfg, "weiss.x0", u.params().n);
  X0.t = cfg.get_num("weiss.t0", 0.0);
  const std::vector<double> radii =
      radii_from(cfg, "weiss.radii", {0.125, 0.25, 0.5, 1.0});
  const bool localized = cfg.get_int("weiss.localized", 0) != 0;
  CutoffSpec eta;
  eta.inner = cfg.get_num("weiss.inner", eta.inner);
  eta.outer = cfg.get_num("weiss.outer", eta.outer);

  std::vector<std::vector<double>> rows;
  std::vector<double> totals;
  for (double r : radii) {
    double value = 0.0, corr = 0.0, err = 0.0;
    if (localized) {
      const LocalizedWeiss lw = weiss_localized(u, r, X0, eta, rule);
      value = lw.value;
      corr = lw.F;
      err = lw.err;
    } else {
      const Integral w = weiss(u, r, X0, rule);
      value = w.value;
      err = w.err;
    }
    rows.push_back({r, value, corr, err});
    totals.push_back(value + corr);
    if (opts.verbose) {
      std::printf("  r=%-8g value=%.8g correction=%.4g err=%.3g\n", r, value,
                  corr, err);
    }
  }
  write_csv(out_path(opts, "weiss.csv"), config_stamp(cfg),
            {"r", "value", "correction", "err"}, rows);
  const auto lohi = std::minmax_element(totals.begin(), totals.end());
  std::printf("weiss: localized=%d radii=%zu total=[%.8g, %.8g]\n",
              localized ? 1 : 0, radii.size(), *lohi.first, *lohi.second);

  Asserter as;
  if (cfg.has("assert.value")) {
    const double want = cfg.get_num("assert.value", 0.0);
    const double tol = cfg.get_num("assert.tol", 1e-2);
    for (std::size_t i = 0; i < radii.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "W(r=%g)", radii[i]);
      as.close(name, totals[i], want, tol);
    }
  }
  if (cfg.has("assert.constancy")) {
    as.at_most("constancy", *lohi.second - *lohi.first,
               cfg.get_num("assert.constancy", 0.0));
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: almgren

int run_almgren(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "almgren.poly", "almgren.radii", "grid.t",
                   "grid.x", "quadrature.cutoff", "quadrature.nodes",
                   "quadrature.time_subdivisions", "assert.value",
                   "assert.tol", "assert.monotone", "assert.defect"});
  const QuadratureRule rule = rule_from(cfg);
  const std::string poly = cfg.get("almgren.poly", "xy");
  const std::vector<double> radii =
      radii_from(cfg, "almgren.radii", {0.125, 0.25, 0.5, 1.0});

  int n = 0;
  CaloricPolynomial p;
  Axis taxis, xaxis;
  if (poly == "xy") {
    n = 2;
    MonomialTerm term;
    term.powers = {1, 1, 0};
    term.tpower = 0;
    term.coeff = 1.0;
    p = CaloricPolynomial({term}, 2);
    taxis = axis_from(cfg, "grid.t", make_axis(-4.2, -0.01, 106));
    xaxis = axis_from(cfg, "grid.x", make_axis(-33.0, 33.0, 129));
  } else if (poly == "linear_quadratic") {
    n = 1;
    p = CaloricPolynomial::extend_monomial({1, 0, 0}, 1)
            .plus(CaloricPolynomial::extend_monomial({2, 0, 0}, 1));
    taxis = axis_from(cfg, "grid.t", make_axis(-4.2, -0.01, 106));
    xaxis = axis_from(cfg, "grid.x", make_axis(-33.0, 33.0, 1025));
  } else {
    key_error(cfg, "almgren.poly",
              "almgren.poly must be xy or linear_quadratic");
  }
  const Params P = make_params(0.0, n, 1);
  SpaceAxes axes{};
  for (int a = 0; a < n; ++a) axes[a] = xaxis;
  const SpaceTimeField field =
      exact_sample(ExactSolution::caloric_poly(P, {p}), taxis, axes);

  std::vector<std::vector<double>> rows;
  std::vector<double> values;
  for (double r : radii) {
    const Frequency fr = almgren(field, r, rule);
    rows.push_back({r, fr.value, fr.err, fr.residual, fr.caloric ? 1.0 : 0.0});
    values.push_back(fr.value);
    if (opts.verbose) {
      std::printf("  r=%-8g N=%.8g err=%.3g residual=%.3g caloric=%d\n", r,
                  fr.value, fr.err, fr.residual, fr.caloric ? 1 : 0);
    }
  }
  write_csv(out_path(opts, "almgren.csv"), config_stamp(cfg),
            {"r", "N", "err", "residual", "caloric"}, rows);
  std::printf("almgren: poly=%s N=[%.6g..%.6g]\n", poly.c_str(),
              values.front(), values.back());

  Asserter as;
  if (cfg.has("assert.value")) {
    const double want = cfg.get_num("assert.value", 0.0);
    const double tol = cfg.get_num("assert.tol", 1e-3);
    for (std::size_t i = 0; i < radii.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "N(r=%g)", radii[i]);
      as.close(name, values[i], want, tol);
    }
  }
  if (cfg.get_int("assert.monotone", 0) != 0) {
    double defect = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      defect = std::max(defect, values[i] - values[i + 1]);
    }
    as.at_most("monotone defect", defect, cfg.get_num("assert.defect", 1e-3));
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: growth

int run_growth(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "io.input", "growth.x0", "growth.t0",
                   "growth.locate", "growth.radii", "assert.exponent",
                   "assert.exp_tol", "assert.c_hat", "assert.doubling"});
  const SpaceTimeField u = load_snapshot(in_path(require(cfg, "io.input")));
  const SpaceTimePoint X0 = point_of(cfg, u, "growth");
  const std::vector<double> radii = radii_from(
      cfg, "growth.radii", {0.03125, 0.0625, 0.125, 0.25, 0.5});
  const GrowthFit gf = growth_fit(u, X0, radii);
  const double c_hat = nondegeneracy_fit(u, X0, radii);

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < gf.radii.size(); ++i) {
    rows.push_back({gf.radii[i], gf.sups[i]});
  }
  write_csv(out_path(opts, "growth.csv"), config_stamp(cfg), {"r", "sup"},
            rows);
  std::printf(
      "growth: X0=(%.6g, %.6g) exponent=%.4f kappa=%g C_hat=%.5g c_hat=%.5g "
      "doubling=%d\n",
      X0.x[0], X0.t, gf.exponent, u.params().kappa, gf.C_hat, c_hat,
      gf.doubling_ok ? 1 : 0);

  Asserter as;
  if (cfg.has("assert.exponent")) {
    as.close("exponent", gf.exponent, cfg.get_num("assert.exponent", 0.0),
             cfg.get_num("assert.exp_tol", 0.1));
  }
  if (cfg.get_int("assert.c_hat", 0) != 0) as.truth("c_hat positive", c_hat > 0.0);
  if (cfg.get_int("assert.doubling", 0) != 0) as.truth("doubling", gf.doubling_ok);
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: blowup

int run_blowup(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "io.input", "blowup.x0", "blowup.t0",
                   "blowup.locate", "blowup.radii", "quadrature.cutoff",
                   "quadrature.nodes", "quadrature.time_subdivisions",
                   "assert.max_gap", "assert.dist"});
  const SpaceTimeField u = load_snapshot(in_path(require(cfg, "io.input")));
  const SpaceTimePoint X0 = point_of(cfg, u, "blowup");
  std::vector<double> radii =
      radii_from(cfg, "blowup.radii", {0.25, 0.125, 0.0625, 0.03125});
  const BlowupSequence bs = blowup_sequence(u, X0, radii);

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    rows.push_back({radii[i], radii[i + 1], bs.cauchy_rates[i]});
  }
  write_csv(out_path(opts, "blowup.csv"), config_stamp(cfg),
            {"r", "next_r", "l1_gap"}, rows);
  double max_gap = 0.0;
  for (double g : bs.cauchy_rates) max_gap = std::max(max_gap, g);
  std::printf("blowup: X0=(%.6g, %.6g) levels=%zu max_gap=%.5g rate=%.3f%s\n",
              X0.x[0], X0.t, radii.size(), max_gap, bs.fitted_rate,
              bs.rate_valid ? "" : " (rate not resolved)");

  Asserter as;
  if (cfg.has("assert.max_gap")) {
    as.at_most("max_gap", max_gap, cfg.get_num("assert.max_gap", 0.0));
  }
  if (cfg.has("assert.dist")) {
    const HalfspaceFit fit = dist_to_H(bs.fields.back(), rule_from(cfg));
    as.at_most("dist_to_H", fit.distance, cfg.get_num("assert.dist", 0.0));
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: classify

int run_classify(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "io.input", "classify.x0", "classify.t0",
                   "classify.locate", "quadrature.cutoff", "quadrature.nodes",
                   "quadrature.time_subdivisions", "assert.kind"});
  const SpaceTimeField u = load_snapshot(in_path(require(cfg, "io.input")));
  const SpaceTimePoint X0 = point_of(cfg, u, "classify");
  const Classification cl = classify_point(u, X0, rule_from(cfg));

  std::vector<std::vector<double>> rows;
  const EnergyCurve& curve = cl.weiss.curve;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    rows.push_back({curve.radii[i], curve.values[i], curve.corrections[i],
                    curve.errors[i]});
  }
  write_csv(out_path(opts, "classify.csv"), config_stamp(cfg),
            {"r", "value", "correction", "err"}, rows);
  std::printf(
      "classify: kind=%s limit=%.6g band=%.4g A_q=%.5g dist=%.4g "
      "exponent=%.3f c_hat=%.5g\n",
      point_class_name(cl.kind), cl.weiss.limit, cl.band, cl.A_q,
      cl.fit.distance, cl.growth.exponent, cl.c_hat);
  if (opts.verbose) {
    for (std::size_t i = 0; i < curve.size(); ++i) {
      std::printf("  r=%-10g W=%.8g F=%.4g err=%.3g\n", curve.radii[i],
                  curve.values[i], curve.corrections[i], curve.errors[i]);
    }
  }

  Asserter as;
  if (cfg.has("assert.kind")) {
    const std::string want = lower(require(cfg, "assert.kind"));
    if (want != "regular" && want != "nonregular" && want != "unknown") {
      key_error(cfg, "assert.kind",
                "assert.kind must be regular, nonregular, or unknown");
    }
    const std::string got = lower(point_class_name(cl.kind));
    std::printf("  assert kind: got %s want %s -> %s\n", got.c_str(),
                want.c_str(), got == want ? "ok" : "FAIL");
    if (got != want) as.status = 1;
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: epiperimetric

int run_epiperimetric(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "params.q", "params.n", "epi.scale",
                   "epi.asym", "epi.nodes", "epi.delta", "epi.descent_tol",
                   "epi.iters", "epi.oracle", "assert.eps_positive",
                   "assert.oracle_tol"});
  const double q = cfg.get_num("params.q", 0.0);
  const int n = static_cast<int>(cfg.get_int("params.n", 1));
  const Params P = make_params(q, n, 1);
  const double scale = cfg.get_num("epi.scale", 1.05);
  const double asym = cfg.get_num("epi.asym", 0.0);

  EpiperimetricOptions eo;
  eo.nodes_per_axis = static_cast<int>(cfg.get_int("epi.nodes", eo.nodes_per_axis));
  eo.delta = cfg.get_num("epi.delta", eo.delta);
  eo.descent_tol = cfg.get_num("epi.descent_tol", eo.descent_tol);
  eo.descent_iters = static_cast<int>(cfg.get_int("epi.iters", eo.descent_iters));

  HalfspaceFit fit;
  fit.nu = unit_x(0);
  fit.e = unit_c(0);
  const auto trace = [&](const Vec& dir) {
    CVec out = czero();
    out[0] = scale * P.alpha * std::pow(std::max(dir[0], 0.0), P.kappa) +
             asym * P.alpha * std::pow(std::abs(dir[0]), P.kappa);
    return out;
  };
  const EpiperimetricResult res = epiperimetric_test(P, trace, fit, eo);

  std::vector<std::string> names = {"M_c",          "M_h",
                                    "M_v",          "eps_achieved",
                                    "degenerate",   "trace_w12_gap",
                                    "trace_max_gap", "converged",
                                    "noise_floor"};
  std::vector<std::vector<double>> rows = {{res.M_c},
                                           {res.M_h},
                                           {res.M_v},
                                           {res.eps_achieved},
                                           {res.degenerate ? 1.0 : 0.0},
                                           {res.trace_w12_gap},
                                           {res.trace_max_gap},
                                           {res.converged ? 1.0 : 0.0},
                                           {res.noise_floor}};

  double oracle_gap = 0.0;
  const bool want_oracle =
      cfg.get_int("epi.oracle", 0) != 0 || cfg.has("assert.oracle_tol");
  if (want_oracle) {
    EpiperimetricOptions eo2 = eo;
    eo2.nodes_per_axis = 2 * eo.nodes_per_axis - 1;
    const EpiperimetricResult res2 = epiperimetric_test(P, trace, fit, eo2);
    oracle_gap = std::abs(res.M_v - res2.M_v);
    names.push_back("M_v_oracle");
    rows.push_back({res2.M_v});
    names.push_back("oracle_gap");
    rows.push_back({oracle_gap});
  }
  write_csv(out_path(opts, "epiperimetric.csv"), config_stamp(cfg),
            {"quantity", "value"}, names, rows);
  std::printf(
      "epiperimetric: q=%g n=%d eps=%.5g M_c=%.8g M_h=%.8g M_v=%.8g "
      "degenerate=%d converged=%d\n",
      q, n, res.eps_achieved, res.M_c, res.M_h, res.M_v,
      res.degenerate ? 1 : 0, res.converged ? 1 : 0);

  Asserter as;
  if (cfg.get_int("assert.eps_positive", 0) != 0) {
    as.truth("eps_achieved positive", res.eps_achieved > 0.0);
  }
  if (cfg.has("assert.oracle_tol")) {
    as.at_most("oracle_gap", oracle_gap, cfg.get_num("assert.oracle_tol", 0.0));
  }
  return as.status;
}

// ---------------------------------------------------------------------------
// experiment: identities

int run_identities(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment", "seed"});
  const unsigned seed = static_cast<unsigned>(cfg.get_int("seed", 1));
  const std::vector<IdentityCheck> checks = identity_suite(seed);

  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::size_t ok_count = 0;
  for (const IdentityCheck& c : checks) {
    names.push_back(c.name);
    rows.push_back({c.lhs, c.rhs, c.slack, c.ok ? 1.0 : 0.0});
    if (c.ok) {
      ++ok_count;
      if (opts.verbose) {
        std::printf("  ok   %-34s lhs=%.6g rhs=%.6g slack=%.3g\n",
                    c.name.c_str(), c.lhs, c.rhs, c.slack);
      }
    } else {
      std::printf("  FAIL %-34s lhs=%.6g rhs=%.6g slack=%.3g\n",
                  c.name.c_str(), c.lhs, c.rhs, c.slack);
    }
  }
  write_csv(out_path(opts, "identities.csv"), config_stamp(cfg),
            {"check", "lhs", "rhs", "slack", "ok"}, names, rows);
  std::printf("identities: %zu/%zu ok\n", ok_count, checks.size());
  return ok_count == checks.size() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// experiment: selftest

int run_selftest(const Config& cfg, const RunOptions& opts) {
  check_keys(cfg, {"experiment"});
  struct Check {
    const char* name;
    std::function<bool()> fn;
  };
  const QuadratureRule rule{};

  std::vector<Check> checks;
  checks.push_back({"constants q=0", [] {
    const EnergyConstants ec = energy_constants(make_params(0.0, 1, 1));
    return std::abs(ec.A_q - 3.75) <= 1e-10 && std::abs(ec.M_theta - 7.5) <= 1e-10;
  }});
  checks.push_back({"constants q=1/2", [] {
    const Params P = make_params(0.5, 1, 1);
    const EnergyConstants ec = energy_constants(P);
    return std::abs(P.kappa - 4.0) <= 1e-12 &&
           std::abs(P.alpha - 1.0 / 144.0) <= 1e-14 &&
           std::abs(ec.M_theta - 2.65625) <= 1e-10;
  }});
  checks.push_back({"kernel mass", [&rule] {
    const Integral I = gaussian_integral([](const Vec&) { return 1.0; }, -1.0,
                                         1, rule, nullptr, nullptr);
    return std::abs(I.value - 1.0) <= I.err + 1e-8;
  }});
  checks.push_back({"slab mass", [&rule] {
    const Integral I = slab_integral(
        [](const Vec&, double) { return 1.0; }, -4.0, -1.0, 1, rule);
    return std::abs(I.value - 3.0) <= 1e-6;
  }});
  checks.push_back({"half-space value", [] {
    const ExactSolution h =
        ExactSolution::halfspace(make_params(0.0, 1, 1), unit_x(0), unit_c(0));
    Vec x = vzero();
    x[0] = 1.0;
    return std::abs(h.value(x, -1.0)[0] - 0.5) <= 1e-15;
  }});
  checks.push_back({"flat profile value", [] {
    const ExactSolution th =
        ExactSolution::time_flat(make_params(0.0, 1, 1), unit_c(0));
    return std::abs(th.value(vzero(), -2.0)[0] - 2.0) <= 1e-15;
  }});
  checks.push_back({"weiss of half-space", [&rule] {
    const Params P = make_params(0.0, 1, 1);
    const ExactSolution h = ExactSolution::halfspace(P, unit_x(0), unit_c(0));
    SpaceAxes axes{};
    axes[0] = make_axis(-6.0, 6.0, 769);
    const SpaceTimeField u =
        exact_sample(h, make_axis(-1.1, -0.2, 19), axes);
    const Integral w = weiss(u, 0.5, SpaceTimePoint{}, rule);
    return std::abs(w.value - 3.75) <= 0.05;
  }});
  checks.push_back({"caloric residual", [] {
    const Params P = make_params(0.0, 1, 1);
    const CaloricPolynomial p = CaloricPolynomial::extend_monomial({2, 0, 0}, 1);
    SpaceAxes axes{};
    axes[0] = make_axis(-2.0, 2.0, 129);
    const SpaceTimeField u = exact_sample(
        ExactSolution::caloric_poly(P, {p}), make_axis(-1.0, -0.5, 11), axes);
    return interior_max_abs(apply_H(u), 1) <= 1e-9;
  }});
  checks.push_back({"snapshot round trip", [] {
    const Params P = make_params(0.25, 2, 2);
    const BumpField w = BumpField::random(P, 7, 3, 1.0, true);
    SpaceAxes axes{};
    axes[0] = make_axis(-1.5, 1.5, 17);
    axes[1] = make_axis(-1.0, 1.0, 13);
    const SpaceTimeField u = w.sample(make_axis(-1.0, -0.25, 5), axes);
    const std::string path =
        (std::filesystem::temp_directory_path() / "fblab_selftest.fbl").string();
    save_snapshot(u, path);
    const SpaceTimeField v = load_snapshot(path);
    std::filesystem::remove(path);
    return v.data() == u.data() && v.params().q == u.params().q &&
           v.nt() == u.nt() && v.nx(0) == u.nx(0) && v.nx(1) == u.nx(1);
  }});
  checks.push_back({"snapshot truncation detected", [] {
    const Params P = make_params(0.0, 1, 1);
    SpaceAxes axes{};
    axes[0] = make_axis(-1.0, 1.0, 9);
    const SpaceTimeField u = SpaceTimeField::sample(
        P, make_axis(-1.0, -0.5, 3), axes,
        [](const Vec& x, double t) {
          CVec v = czero();
          v[0] = x[0] + t;
          return v;
        });
    const auto dir = std::filesystem::temp_directory_path();
    const std::string full = (dir / "fblab_selftest_full.fbl").string();
    const std::string cut = (dir / "fblab_selftest_cut.fbl").string();
    save_snapshot(u, full);
    {
      std::FILE* in = std::fopen(full.c_str(), "rb");
      std::FILE* out = std::fopen(cut.c_str(), "wb");
      if (!in || !out) {
        if (in) std::fclose(in);
        if (out) std::fclose(out);
        return false;
      }
      char buf[48];
      const std::size_t got = std::fread(buf, 1, sizeof buf, in);
      std::fwrite(buf, 1, got, out);
      std::fclose(in);
      std::fclose(out);
    }
    bool threw = false;
    try {
      load_snapshot(cut);
    } catch (const FormatError&) {
      threw = true;
    }
    std::filesystem::remove(full);
    std::filesystem::remove(cut);
    return threw;
  }});
  checks.push_back({"config errors carry lines", [] {
    try {
      parse_config("a = 1\nnot a pair\n");
    } catch (const ContractError& e) {
      return std::string(e.what()).find("line 2") != std::string::npos;
    }
    return false;
  }});
  checks.push_back({"config sections", [] {
    const Config c = parse_config("top = 1\n[sec]\nkey = 2  # trailing\n");
    return c.has("top") && c.has("sec.key") && c.get_num("sec.key", 0.0) == 2.0;
  }});
  checks.push_back({"eigenvalue ground state", [] {
    const std::vector<double> evs = ou_halfline_spectrum(1);
    return std::abs(evs[0] - 1.0) <= 1e-2;
  }});
  checks.push_back({"curve ordering enforced", [] {
    EnergyCurve c;
    c.push(0.5, 1.0);
    c.push(0.25, 1.0);
    try {
      c.validate();
    } catch (const ContractError&) {
      return true;
    }
    return false;
  }});

  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::size_t ok_count = 0;
  for (const Check& c : checks) {
    bool ok = false;
    std::string err;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    names.push_back(c.name);
    rows.push_back({ok ? 1.0 : 0.0});
    if (ok) {
      ++ok_count;
      if (opts.verbose) std::printf("  ok   %s\n", c.name);
    } else {
      std::printf("  FAIL %s%s%s\n", c.name, err.empty() ? "" : ": ",
                  err.c_str());
    }
  }
  write_csv(out_path(opts, "selftest.csv"), config_stamp(cfg),
            {"check", "ok"}, names, rows);
  std::printf("selftest: %zu/%zu ok\n", ok_count, checks.size());
  return ok_count == checks.size() ? 0 : 1;
}

using ExperimentFn = int (*)(const Config&, const RunOptions&);

struct ExperimentRow {
  const char* name;
  ExperimentFn fn;
};

constexpr ExperimentRow kExperiments[] = {
    {"constants", run_constants},   {"solve", run_solve},
    {"weiss", run_weiss},           {"almgren", run_almgren},
    {"growth", run_growth},         {"blowup", run_blowup},
    {"classify", run_classify},     {"epiperimetric", run_epiperimetric},
    {"spectrum", run_spectrum},     {"identities", run_identities},
    {"selftest", run_selftest},
};

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const ExperimentRow& row : kExperiments) v.push_back(row.name);
    return v;
  }();
  return names;
}

int run_experiment(const std::string& name, const Config& cfg,
                   const RunOptions& opts) {
  const ExperimentRow* row = nullptr;
  for (const ExperimentRow& r : kExperiments) {
    if (name == r.name) {
      row = &r;
      break;
    }
  }
  if (!row) {
    std::printf("unknown experiment '%s'\n", name.c_str());
    return 2;
  }
  const ConfigEntry* tag = cfg.find("experiment");
  if (tag && tag->value != name) {
    std::printf("config line %d: experiment '%s' does not match '%s'\n",
                tag->line, tag->value.c_str(), name.c_str());
    return 2;
  }
  try {
    return row->fn(cfg, opts);
  } catch (const OutOfDomainError& e) {
    std::printf("invalid config: %s\n", e.what());
    return 2;
  } catch (const ContractError& e) {
    std::printf("invalid config: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::printf("invalid config: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 2;
  }
}

MarchedScenario perturbed_halfspace_scenario() {
  const Params P = make_params(0.0, 1, 1);
  const ExactSolution sol = ExactSolution::halfspace(P, unit_x(0), unit_c(0));
  SpaceAxes axes{};
  axes[0] = make_axis(-4.0, 4.0, 4097);
  const double t_start = -1.1;

  // A 5% dent in the profile ahead of the boundary; the march relaxes it
  // back toward the half-space while the boundary wanders slightly.
  const SpatialField u0 = SpatialField::sample(P, axes, [&](const Vec& x) {
    CVec v = sol.value(x, t_start);
    const double s = (x[0] - 0.2) / 0.6;
    if (std::abs(s) < 1.0) {
      const double g = std::cos(0.5 * kPi * s);
      v[0] *= 1.0 - 0.05 * g * g;
    }
    return v;
  });

  SolverConfig sc;
  sc.dt = 1e-5;
  sc.scheme = Scheme::imex_euler;
  sc.bc = [sol](const Vec& x, double t) { return sol.value(x, t); };

  // One march, three storage cadences. Cadence boundaries are slice-aligned
  // so each segment restarts from an exactly stored state.
  const SpaceTimeField warm = solve_cauchy(u0, sc, make_axis(-1.1, -1.05, 2));
  MarchedScenario out;
  out.window_half = solve_cauchy(spatial_slice(warm, warm.nt() - 1), sc,
                                 make_axis(-1.05, -0.2375, 66));
  out.window_quarter = solve_cauchy(spatial_slice(out.window_half, 63), sc,
                                    make_axis(-0.2625, -0.055, 84));
  out.window_fine = solve_cauchy(spatial_slice(out.window_quarter, 77), sc,
                                 make_axis(-0.07, 0.0, 1751));
  out.X0 = frontier_point(out.window_fine);
  return out;
}

std::vector<IdentityCheck> identity_suite(unsigned seed) {
  std::vector<IdentityCheck> out;
  const QuadratureRule rule{};
  char nb[80];

  // (a) Twin marches from identical smooth positive data at different dt.
  // With both fields positive the reaction terms coincide, so u - v obeys
  // the heat equation driven by the two truncation residuals; the maximum
  // principle gives |u-v|(t) <= (t-s)(res_u+res_v), hence
  //   phi(tau) <= n/(4|t0|) * (res_u+res_v)^2 * (tau-s)^3 / 3
  // and the decay curve can creep up by at most that much.
  {
    const Params P = make_params(0.0, 1, 1);
    SpaceAxes axes{};
    axes[0] = make_axis(-2.0, 2.0, 513);
    const auto data = [](const Vec& x) {
      CVec v = czero();
      const double s = x[0] / 1.5;
      const double g = std::abs(s) < 1.0 ? std::cos(0.5 * kPi * s) : 0.0;
      v[0] = 2.0 + 0.3 * g * g;
      return v;
    };
    const SpatialField u0 = SpatialField::sample(P, axes, data);
    SolverConfig sa;
    sa.dt = 2e-4;
    sa.bc = [&data](const Vec& x, double) { return data(x); };
    SolverConfig sb = sa;
    sb.dt = 1e-4;
    const Axis taxis = make_axis(-1.0, -0.5, 101);
    const SpaceTimeField u = solve_cauchy(u0, sa, taxis);
    const SpaceTimeField v = solve_cauchy(u0, sb, taxis);
    const double s = -0.95, t0 = -0.55;
    const DecayCheck dc = uniqueness_decay_check(u, v, s, t0, rule, 16);
    double rise = 0.0;
    for (std::size_t i = 0; i + 1 < dc.curve.values.size(); ++i) {
      rise = std::max(rise, dc.curve.values[i + 1] - dc.curve.values[i]);
    }
    double quad_err = 0.0;
    for (double e : dc.curve.errors) quad_err = std::max(quad_err, e);
    const double res = dc.residual_u + dc.residual_v;
    const double span = t0 - s;
    const double tol = 4.0 * std::sqrt(-s) * (1.0 / (4.0 * -t0)) * res * res *
                           span * span * span / 3.0 +
                       quad_err + 1e-14;
    out.push_back({"uniqueness decay", rise, 0.0, tol, rise <= tol});
  }

  // (b) Weighted Poincare inequality on seeded compactly supported fields:
  // int |w|^2 (|x|^2/-t) G <= 4 int (n|w|^2 - 4t|grad w|^2) G.
  for (int i = 0; i < 20; ++i) {
    const int n = i < 12 ? 1 : 2;
    const Params P = make_params(0.0, n, 2);
    const BumpField w = BumpField::random(P, seed + static_cast<unsigned>(i),
                                          4, 1.5, false);
    const double t = -1.0;
    const Integral lhs = gaussian_integral(
        [&](const Vec& x) {
          const CVec v = w.value(x, t);
          return cdot(v, v, P.m) * dot(x, x, n) / (-t);
        },
        t, n, rule);
    const Integral rhs = gaussian_integral(
        [&](const Vec& x) {
          const CVec v = w.value(x, t);
          const std::array<CVec, kMaxDim> g = w.gradient(x, t);
          double grad2 = 0.0;
          for (int a = 0; a < n; ++a) grad2 += cdot(g[a], g[a], P.m);
          return n * cdot(v, v, P.m) - 4.0 * t * grad2;
        },
        t, n, rule);
    const double bound = 4.0 * rhs.value;
    const double slack = lhs.err + 4.0 * rhs.err + 1e-10 * (std::abs(lhs.value) + std::abs(bound));
    std::snprintf(nb, sizeof nb, "poincare n=%d seed=%u", n,
                  seed + static_cast<unsigned>(i));
    out.push_back({nb, lhs.value, bound, slack, lhs.value <= bound + slack});
  }

  // (c) Pointwise caloric bound on the degree <= 2 caloric basis:
  // exp(|x|^2/(t+s)) |h(x,t)|^2 <= (sqrt(3) s/(s-t))^n int |h(y,s)|^2 G(y,s) dy.
  {
    const double pairs[3][2] = {{-2.0, -1.0}, {-1.5, -0.25}, {-3.0, -0.5}};
    for (int n = 1; n <= 2; ++n) {
      const std::vector<CaloricPolynomial> basis = caloric_basis(2, n);
      for (const auto& pr : pairs) {
        const double s = pr[0], t = pr[1];
        for (std::size_t b = 0; b < basis.size(); ++b) {
          const CaloricPolynomial& h = basis[b];
          const Integral mass = gaussian_integral(
              [&](const Vec& y) {
                const double v = h.value(y, s);
                return v * v;
              },
              s, n, rule);
          const double c = std::sqrt(3.0) * s / (s - t);
          const double bound = std::pow(c, n) * mass.value;
          double lhs = 0.0;
          const int grid = 161;
          GridIndex ix{};
          for (;;) {
            Vec x = vzero();
            for (int a = 0; a < n; ++a) x[a] = -4.0 + 8.0 * ix[a] / (grid - 1);
            const double v = h.value(x, t);
            lhs = std::max(lhs, std::exp(dot(x, x, n) / (t + s)) * v * v);
            int a = 0;
            for (; a < n; ++a) {
              if (++ix[a] < grid) break;
              ix[a] = 0;
            }
            if (a == n) break;
          }
          const double slack =
              std::pow(c, n) * mass.err + 1e-12 * (lhs + bound) + 1e-13;
          std::snprintf(nb, sizeof nb, "caloric bound n=%d s=%g t=%g basis=%zu",
                        n, s, t, b);
          out.push_back({nb, lhs, bound, slack, lhs <= bound + slack});
        }
      }
    }
  }

  // (d) Shift invariance of the quadratic Weiss part under the self-similar
  // caloric polynomial p = x^2 + 2t: the cross term integrates to zero, so
  // the quadratic parts of (p - u) and u agree.
  {
    const Params P = make_params(0.0, 1, 1);
    const CaloricPolynomial p = CaloricPolynomial::extend_monomial({2, 0, 0}, 1);
    for (int i = 0; i < 3; ++i) {
      const BumpField u = BumpField::random(
          P, seed + 100 + static_cast<unsigned>(i), 3, 1.2, true);
      const auto quad_u = [&](const Vec& x, double t) {
        const CVec v = u.value(x, t);
        const std::array<CVec, kMaxDim> g = u.gradient(x, t);
        return g[0][0] * g[0][0] + v[0] * v[0] / t;
      };
      const auto quad_pu = [&](const Vec& x, double t) {
        const double v = p.value(x, t) - u.value(x, t)[0];
        const double gx = p.gradient(x, t)[0] - u.gradient(x, t)[0][0];
        return gx * gx + v * v / t;
      };
      const Integral A = slab_integral(quad_u, -4.0, -1.0, 1, rule);
      const Integral B = slab_integral(quad_pu, -4.0, -1.0, 1, rule);
      const double lhs = std::abs(B.value - A.value);
      const double slack =
          A.err + B.err + 1e-9 * (std::abs(A.value) + std::abs(B.value));
      std::snprintf(nb, sizeof nb, "weiss shift seed=%u",
                    seed + 100 + static_cast<unsigned>(i));
      out.push_back({nb, lhs, 0.0, slack, lhs <= slack});
    }
  }

  return out;
}

}  // namespace fblab
