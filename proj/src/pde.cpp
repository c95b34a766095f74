#include "difcon/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace difcon {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Expression exact_residual_expression(const Expression& u, const EvolutionEquation& eq) {
  for (const auto& s : u.free_symbols())
    if (s != "t" && s != "x")
      throw pde_error("closed form contains unbound symbol '" + s + "'");
  std::map<std::string, Expression> jets;
  Expression d = u;
  jets["u0"] = d;
  for (int k = 1; k <= eq.order(); ++k) {
    d = d.diff("x");
    jets[jet_symbol(k)] = d;
  }
  Expression residual = u.diff("t") - eq.rhs().subst(jets);
  return residual.simplified();
}

ResidualReport residual_exact(const Expression& u, const EvolutionEquation& eq,
                              const SamplerConfig& cfg) {
  return check_identity(exact_residual_expression(u, eq), cfg);
}

// ---------------------------------------------------------------------------
// Method of lines.

namespace {

struct MolWorkspace {
  CompiledExpr rhs;        // over (t, x, u0, u1, u2)
  CompiledExpr diffusivity;  // dF/du2 over the same layout
  std::vector<double> u1, u2, t_col, f;
  const std::vector<double>* xs = nullptr;

  void derivatives(const std::vector<double>& u, double dx, bool reflective) {
    const std::size_t n = u.size();
    const double inv2dx = 1.0 / (2 * dx), invdx2 = 1.0 / (dx * dx);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      u1[i] = (u[i + 1] - u[i - 1]) * inv2dx;
      u2[i] = (u[i + 1] - 2 * u[i] + u[i - 1]) * invdx2;
    }
    if (reflective) {
      u1[0] = 0.0;
      u2[0] = 2 * (u[1] - u[0]) * invdx2;
      u1[n - 1] = 0.0;
      u2[n - 1] = 2 * (u[n - 2] - u[n - 1]) * invdx2;
    } else {
      // one-sided, second order; boundary nodes follow the reference anyway
      u1[0] = (-3 * u[0] + 4 * u[1] - u[2]) * inv2dx;
      u2[0] = (u[0] - 2 * u[1] + u[2]) * invdx2;
      u1[n - 1] = (3 * u[n - 1] - 4 * u[n - 2] + u[n - 3]) * inv2dx;
      u2[n - 1] = (u[n - 1] - 2 * u[n - 2] + u[n - 3]) * invdx2;
    }
  }

  void eval_rhs(double t, const std::vector<double>& u, double dx, bool reflective,
                std::vector<double>& out) {
    const std::size_t n = u.size();
    derivatives(u, dx, reflective);
    std::fill(t_col.begin(), t_col.end(), t);
    const double* cols[5] = {t_col.data(), xs->data(), u.data(), u1.data(), u2.data()};
    rhs.eval_lanes(std::span<const double* const>(cols, 5), n, out.data());
  }

  double max_diffusivity(double t, const std::vector<double>& u, double dx, bool reflective) {
    const std::size_t n = u.size();
    derivatives(u, dx, reflective);
    std::fill(t_col.begin(), t_col.end(), t);
    const double* cols[5] = {t_col.data(), xs->data(), u.data(), u1.data(), u2.data()};
    diffusivity.eval_lanes(std::span<const double* const>(cols, 5), n, f.data());
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, std::fabs(f[i]));
    return best;
  }
};

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

FieldHistory mol_evolve(const EvolutionEquation& eq, const std::vector<double>& initial,
                        const Grid1D& grid, const Expression* reference, int output_every) {
  if (eq.order() != 2) throw pde_error("method of lines supports second-order equations");
  if (grid.nx < 7) throw pde_error("grid too coarse");
  if (static_cast<int>(initial.size()) != grid.nx)
    throw pde_error("initial profile size does not match the grid");
  if (grid.dt <= 0 || grid.t1 <= grid.t0) throw pde_error("bad time window");

  const std::size_t n = initial.size();
  const double dx = grid.dx();

  FieldHistory out;
  out.xs.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.xs[i] = grid.x_at(static_cast<int>(i));
  out.dt = grid.dt;
  out.boundary = reference ? "dirichlet-reference" : "reflective";

  const std::vector<std::string> layout = {"t", "x", "u0", "u1", "u2"};
  MolWorkspace w;
  w.rhs = CompiledExpr::compile(eq.rhs(), layout);
  w.diffusivity = CompiledExpr::compile(eq.rhs().diff("u2").simplified(), layout);
  w.u1.resize(n);
  w.u2.resize(n);
  w.t_col.resize(n);
  w.f.resize(n);
  w.xs = &out.xs;

  // boundary evolution follows the reference exactly (its time derivative)
  CompiledExpr ref_dt;
  if (reference) ref_dt = CompiledExpr::compile(reference->diff("t"), {"t", "x"});
  const bool reflective = reference == nullptr;

  const long steps = std::lround(std::ceil((grid.t1 - grid.t0) / grid.dt - 1e-12));
  if (output_every <= 0) output_every = std::max<long>(1, steps / 64);

  std::vector<double> u = initial, k1(n), k2(n), k3(n), k4(n), tmp(n);

  auto snapshot = [&](double t) {
    out.times.push_back(t);
    out.fields.push_back(u);
  };
  snapshot(grid.t0);

  auto boundary_rhs = [&](double t, std::vector<double>& k) {
    if (!reference) return;
    double in[2] = {t, out.xs.front()};
    k.front() = ref_dt.eval(std::span<const double>(in, 2));
    in[1] = out.xs.back();
    k.back() = ref_dt.eval(std::span<const double>(in, 2));
  };

  double t = grid.t0;
  for (long s = 0; s < steps; ++s) {
    double D = grid.stiffness_factor * w.max_diffusivity(t, u, dx, reflective);
    double bound = 0.2 * dx * dx / std::max(D, 1e-300);
    if (grid.dt > bound)
      throw pde_error("time step " + fmt(grid.dt) + " above the stability bound " +
                      fmt(bound) + " at t = " + fmt(t));

    const double h = grid.dt;
    w.eval_rhs(t, u, dx, reflective, k1);
    boundary_rhs(t, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
    w.eval_rhs(t + 0.5 * h, tmp, dx, reflective, k2);
    boundary_rhs(t + 0.5 * h, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
    w.eval_rhs(t + 0.5 * h, tmp, dx, reflective, k3);
    boundary_rhs(t + 0.5 * h, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * k3[i];
    w.eval_rhs(t + h, tmp, dx, reflective, k4);
    boundary_rhs(t + h, k4);
    for (std::size_t i = 0; i < n; ++i)
      u[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    t += h;

    if (!all_finite(u)) {
      out.blow_up = true;
      break;
    }
    if ((s + 1) % output_every == 0 || s + 1 == steps) snapshot(t);
  }
  return out;
}

std::string field_history_csv(const FieldHistory& hist) {
  std::string out = "t,x,u\n";
  char buf[96];
  for (std::size_t s = 0; s < hist.times.size(); ++s) {
    for (std::size_t i = 0; i < hist.xs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", hist.times[s], hist.xs[i],
                    hist.fields[s][i]);
      out += buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// h evaluated on a field snapshot by central differences, interior only.
double h_inf_on_field(const CompiledExpr& h, int order, double t,
                      const std::vector<double>& xs, const std::vector<double>& u, double dx) {
  const std::size_t n = u.size();
  const std::size_t lo = order >= 3 ? 2 : 1;
  double best = 0.0;
  for (std::size_t i = lo; i + lo < n; ++i) {
    double u1 = (u[i + 1] - u[i - 1]) / (2 * dx);
    double u2 = (u[i + 1] - 2 * u[i] + u[i - 1]) / (dx * dx);
    double u3 = 0.0;
    if (order >= 3)
      u3 = (u[i + 2] - 2 * u[i + 1] + 2 * u[i - 1] - u[i - 2]) / (2 * dx * dx * dx);
    double in[6] = {t, xs[i], u[i], u1, u2, u3};
    best = std::max(best, std::fabs(h.eval(std::span<const double>(in, 6))));
  }
  return best;
}

}  // namespace

DriftReport constraint_drift(const EvolutionEquation& eq, const Expression& h,
                             const Expression& initial, const Grid1D& grid,
                             const Expression* reference) {
  const int order = std::max(max_jet_index(h), 1);
  if (order > 3) throw pde_error("constraint order above 3 not supported by the drift test");

  // precondition: the initial profile lies on the constraint manifold,
  // checked with exact symbolic derivatives of the closed-form initial data
  std::map<std::string, Expression> jets;
  Expression d = initial;
  jets["u0"] = d;
  for (int k = 1; k <= order; ++k) {
    d = d.diff("x");
    jets[jet_symbol(k)] = d;
  }
  Expression h0 = h.subst(jets).simplified();
  DriftReport rep;
  for (int i = 0; i < grid.nx; ++i) {
    EvalPoint p{{"t", grid.t0}, {"x", grid.x_at(i)}};
    rep.initial_exact = std::max(rep.initial_exact, std::fabs(h0.eval(p)));
  }
  if (rep.initial_exact >= 1e-8)
    throw pde_error("initial data violates the constraint: |h| = " + fmt(rep.initial_exact));

  std::vector<double> profile(grid.nx);
  for (int i = 0; i < grid.nx; ++i)
    profile[i] = initial.eval(EvalPoint{{"t", grid.t0}, {"x", grid.x_at(i)}});

  FieldHistory hist = mol_evolve(eq, profile, grid, reference);
  rep.boundary = hist.boundary;
  rep.blow_up = hist.blow_up;

  CompiledExpr hc = CompiledExpr::compile(h, {"t", "x", "u0", "u1", "u2", "u3"});
  double worst = 0.0;
  for (std::size_t s = 0; s < hist.times.size(); ++s) {
    double v = h_inf_on_field(hc, order, hist.times[s], hist.xs, hist.fields[s], grid.dx());
    rep.times.push_back(hist.times[s]);
    rep.h_inf.push_back(v);
    worst = std::max(worst, v);
  }
  rep.initial_fd = rep.h_inf.empty() ? 0.0 : rep.h_inf.front();
  rep.threshold = std::max(100.0 * rep.initial_fd, 1e-4);
  rep.growth_factor = worst / std::max(rep.initial_fd, 1e-300);
  rep.pass = !hist.blow_up && worst <= rep.threshold;
  return rep;
}

// ---------------------------------------------------------------------------

Expression residual_2d_expression(const Expression& field, Form2D form) {
  for (const auto& s : field.free_symbols())
    if (s != "t" && s != "x" && s != "y")
      throw pde_error("closed form contains unbound symbol '" + s + "'");
  Expression lnf = Expression::call("ln", field);
  Expression lap = (lnf.diff("x").diff("x") + lnf.diff("y").diff("y")).simplified();
  Expression residual;
  if (form == Form2D::FastU) {
    residual = field.diff("t") - lap;
  } else {
    residual = field.diff("t") - pow(field, Expression::number(2.0)) * lap;
  }
  return residual.simplified();
}

ResidualReport residual_2d(const Expression& field, Form2D form, const SamplerConfig& cfg) {
  return check_identity(residual_2d_expression(field, form), cfg);
}

// ---------------------------------------------------------------------------

Expression conformal_image_expression(const Expression& base_u,
                                      const std::vector<double>& coeffs) {
  if (coeffs.size() < 2) throw pde_error("polynomial map needs degree >= 1");
  Expression x = Expression::symbol("x");
  Expression y = Expression::symbol("y");

  // (re_k, im_k) = z^k built by the complex recurrence
  Expression re = Expression::number(1.0), im = Expression::number(0.0);
  Expression re_a = Expression::number(0.0), im_a = Expression::number(0.0);
  Expression re_da = Expression::number(0.0), im_da = Expression::number(0.0);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (coeffs[k] != 0.0) {
      Expression c = Expression::number(coeffs[k]);
      re_a = re_a + c * re;
      im_a = im_a + c * im;
    }
    Expression nre = (re * x - im * y).simplified();
    Expression nim = (re * y + im * x).simplified();
    re = nre;
    im = nim;
  }
  // derivative A'(z) = sum k coeffs[k] z^(k-1)
  re = Expression::number(1.0);
  im = Expression::number(0.0);
  for (std::size_t k = 1; k < coeffs.size(); ++k) {
    if (coeffs[k] != 0.0) {
      Expression c = Expression::number(static_cast<double>(k) * coeffs[k]);
      re_da = re_da + c * re;
      im_da = im_da + c * im;
    }
    Expression nre = (re * x - im * y).simplified();
    Expression nim = (re * y + im * x).simplified();
    re = nre;
    im = nim;
  }

  Expression jac = (pow(re_da.simplified(), Expression::number(2.0)) +
                    pow(im_da.simplified(), Expression::number(2.0)))
                       .simplified();
  Expression image =
      base_u.subst({{"x", re_a.simplified()}, {"y", im_a.simplified()}}) * jac;
  return image.simplified();
}

ResidualReport conformal_image(const Expression& base_u, const std::vector<double>& coeffs,
                               const SamplerConfig& cfg) {
  // A' must not vanish on the window; scanned on a lattice so interior
  // critical points are caught
  std::vector<double> dcoef;
  for (std::size_t k = 1; k < coeffs.size(); ++k) dcoef.push_back(k * coeffs[k]);
  auto xr = cfg.ranges.count("x") ? cfg.ranges.at("x") : std::pair<double, double>{-1, 1};
  auto yr = cfg.ranges.count("y") ? cfg.ranges.at("y") : std::pair<double, double>{-1, 1};
  double min_mod = 1e300;
  const int n = 32;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      double x = xr.first + (xr.second - xr.first) * i / n;
      double y = yr.first + (yr.second - yr.first) * j / n;
      double re = 0, im = 0, zr = 1, zi = 0;
      for (std::size_t k = 0; k < dcoef.size(); ++k) {
        re += dcoef[k] * zr;
        im += dcoef[k] * zi;
        double nr = zr * x - zi * y;
        double ni = zr * y + zi * x;
        zr = nr;
        zi = ni;
      }
      min_mod = std::min(min_mod, re * re + im * im);
    }
  }
  if (min_mod <= 1e-6)
    throw pde_error("the map derivative vanishes on the sampled window");

  return residual_2d(conformal_image_expression(base_u, coeffs), Form2D::FastU, cfg);
}

}  // namespace difcon
