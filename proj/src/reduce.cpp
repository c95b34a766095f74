#include "difcon/reduce.hpp"

#include <algorithm>
#include <cmath>

namespace difcon {

Representation representation_for(const Catalog& cat, const std::string& id,
                                  const std::map<std::string, double>& params) {
  const RepresentationEntry* entry = nullptr;
  for (const auto& r : cat.representations) {
    if (r.id == id) {
      entry = &r;
      break;
    }
  }
  if (!entry) {
    for (const auto& r : cat.representations) {
      if (!r.constraint_id.empty() && r.constraint_id == id) {
        entry = &r;
        break;
      }
    }
  }
  if (!entry) {
    // distinguish unknown ids from known but non-reducible constraints
    for (const auto& c : cat.constraints)
      if (c.id == id)
        throw reduce_error("constraint '" + id + "' has no stored representation");
    throw reduce_error("unknown representation or constraint id '" + id + "'");
  }

  std::map<std::string, double> bound = entry->default_params;
  for (const auto& [k, v] : params) bound[k] = v;

  Representation rep;
  rep.id = entry->id;
  rep.coeff_names = entry->coefficients;
  rep.params = bound;
  rep.pde = entry->pde;
  rep.ansatz = parse(entry->ansatz_src).subst_numbers(bound).simplified();
  for (const auto& src : entry->ode_srcs)
    rep.coeff_rhs.push_back(parse(src).subst_numbers(bound).simplified());
  if (!entry->h_src.empty()) rep.h = parse(entry->h_src).subst_numbers(bound).simplified();
  rep.two_dimensional = rep.ansatz.has_symbol("y");

  auto is_coeff = [&](const std::string& s) {
    return std::find(rep.coeff_names.begin(), rep.coeff_names.end(), s) !=
           rep.coeff_names.end();
  };
  for (const auto& s : rep.ansatz.free_symbols())
    if (s != "x" && s != "y" && !is_coeff(s))
      throw reduce_error(rep.id + ": ansatz symbol '" + s + "' is not bound");
  for (const auto& r : rep.coeff_rhs)
    for (const auto& s : r.free_symbols())
      if (s != "t" && !is_coeff(s))
        throw reduce_error(rep.id + ": ODE symbol '" + s + "' is not bound");
  return rep;
}

Trajectory integrate_rk4(const std::vector<Expression>& rhs,
                         const std::vector<std::string>& names,
                         const std::map<std::string, double>& params,
                         std::vector<double> y0, double t0, double t1, double step) {
  if (step <= 0.0) throw reduce_error("step must be positive");
  if (t1 <= t0) throw reduce_error("t1 must exceed t0");
  if (rhs.size() != names.size() || y0.size() != names.size())
    throw reduce_error("system dimension mismatch");
  for (double v : y0)
    if (!std::isfinite(v)) throw reduce_error("initial values must be finite");

  const std::size_t dim = names.size();
  std::vector<std::string> layout = {"t"};
  layout.insert(layout.end(), names.begin(), names.end());
  std::vector<CompiledExpr> f;
  for (const auto& r : rhs) f.push_back(CompiledExpr::compile(r.subst_numbers(params), layout));

  const long nsteps = std::max(1l, std::lround((t1 - t0) / step));
  Trajectory traj;
  traj.t0 = t0;
  traj.step = (t1 - t0) / static_cast<double>(nsteps);
  traj.names = names;

  std::vector<double> y = y0, k1(dim), k2(dim), k3(dim), k4(dim), in(dim + 1);
  auto eval = [&](double t, const std::vector<double>& state, std::vector<double>& out) {
    in[0] = t;
    for (std::size_t i = 0; i < dim; ++i) in[i + 1] = state[i];
    for (std::size_t i = 0; i < dim; ++i) out[i] = f[i].eval(in);
  };

  traj.states.push_back(y);
  std::vector<double> tmp(dim);
  const double h = traj.step;
  for (long s = 0; s < nsteps; ++s) {
    const double t = traj.time_at(s);
    eval(t, y, k1);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    eval(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    eval(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
    eval(t + h, tmp, k4);
    bool finite = true;
    for (std::size_t i = 0; i < dim; ++i) {
      y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      finite = finite && std::isfinite(y[i]);
    }
    if (!finite) {
      traj.blow_up = true;
      break;
    }
    traj.states.push_back(y);
  }
  return traj;
}

// ---------------------------------------------------------------------------

SampledSolution::SampledSolution(Representation rep, Trajectory traj)
    : rep_(std::move(rep)), traj_(std::move(traj)) {
  if (traj_.names != rep_.coeff_names)
    throw reduce_error("trajectory coefficients do not match the representation");
  dx_[0] = rep_.ansatz;
  for (int k = 1; k <= 3; ++k) dx_[k] = dx_[k - 1].diff("x");
  if (rep_.two_dimensional) {
    dy_[0] = rep_.ansatz;
    for (int k = 1; k <= 3; ++k) dy_[k] = dy_[k - 1].diff("y");
  }
  for (const auto& c : rep_.coeff_names) dcoeff_.push_back(rep_.ansatz.diff(c));
}

SampledSolution assemble_solution(Representation rep, Trajectory traj) {
  return SampledSolution(std::move(rep), std::move(traj));
}

EvalPoint SampledSolution::point(std::size_t node, double x, double y) const {
  if (node >= traj_.nodes()) throw reduce_error("time node outside the trajectory");
  EvalPoint p{{"x", x}};
  if (rep_.two_dimensional) p["y"] = y;
  const auto& state = traj_.states[node];
  for (std::size_t i = 0; i < rep_.coeff_names.size(); ++i)
    p[rep_.coeff_names[i]] = state[i];
  return p;
}

double SampledSolution::value(std::size_t node, double x, double y) const {
  return dx_[0].eval(point(node, x, y));
}

double SampledSolution::x_derivative(std::size_t node, int order, double x, double y) const {
  if (order < 0 || order > 3) throw reduce_error("x-derivative order must be 0..3");
  return dx_[order].eval(point(node, x, y));
}

double SampledSolution::y_derivative(std::size_t node, int order, double x, double y) const {
  if (!rep_.two_dimensional) throw reduce_error("representation is one-dimensional");
  if (order < 0 || order > 3) throw reduce_error("y-derivative order must be 0..3");
  return dy_[order].eval(point(node, x, y));
}

double SampledSolution::t_derivative(std::size_t node, double x, double y) const {
  EvalPoint p = point(node, x, y);
  EvalPoint ode = p;
  ode["t"] = traj_.time_at(node);
  double out = 0.0;
  for (std::size_t i = 0; i < rep_.coeff_names.size(); ++i)
    out += dcoeff_[i].eval(p) * rep_.coeff_rhs[i].eval(ode);
  return out;
}

double SampledSolution::constraint_value(std::size_t node, double x, double y) const {
  if (rep_.h.empty()) throw reduce_error("representation stores no constraint");
  EvalPoint p = point(node, x, y);
  EvalPoint jets{{"t", traj_.time_at(node)}, {"x", x}};
  for (int k = 0; k <= 3; ++k) jets[jet_symbol(k)] = dx_[k].eval(p);
  return rep_.h.eval(jets);
}

std::size_t SampledSolution::node_at(double t) const {
  double pos = (t - traj_.t0) / traj_.step;
  long i = std::lround(pos);
  if (i < 0 || i >= static_cast<long>(traj_.nodes()) || std::fabs(pos - i) > 1e-6)
    throw reduce_error("time outside the trajectory grid");
  return static_cast<std::size_t>(i);
}

// ---------------------------------------------------------------------------
// Liouville chain.

Expression liouville_T(const LiouvilleParams& p) {
  return parse("c1*tanh(m*t/4+c3)+c2")
      .subst_numbers({{"c1", p.c1}, {"m", p.m}, {"c3", p.c3}, {"c2", p.c2}})
      .simplified();
}

LiouvilleResult liouville_pipeline(const LiouvilleParams& p, std::array<double, 3> x_init,
                                   double x0, double x1, int nx, double t0, double t1,
                                   int nt) {
  if (p.m == 0.0) throw reduce_error("m must be nonzero");
  if (p.c1 * p.m <= 0.0) throw reduce_error("c1 m > 0 required for T' > 0");
  if (p.s * p.m / (2.0 * p.c1) < 0.0) throw reduce_error("s m / (2 c1) must be nonnegative");
  if (nx < 2 || nt < 2) throw reduce_error("grid too coarse");

  Expression T = liouville_T(p);
  Expression T1 = T.diff("t");
  Expression T2 = T1.diff("t");

  LiouvilleResult out;
  out.ts.resize(nt);
  out.xs.resize(nx);
  for (int i = 0; i < nt; ++i) out.ts[i] = t0 + (t1 - t0) * i / (nt - 1);
  for (int i = 0; i < nx; ++i) out.xs[i] = x0 + (x1 - x0) * i / (nx - 1);

  // X''' isolated from the printed x-equation
  const double lam = std::sqrt(p.s * p.m / (2.0 * p.c1));
  auto x3_of = [&](double X, double X1v, double X2v) {
    return 1.5 * X2v * X2v / X1v - 2.0 * p.k * X1v -
           lam * (p.c1 - p.c2 - X) * std::sqrt(X1v);
  };

  // integrate the X system across the range with fine substeps
  out.X.resize(nx);
  out.X1.resize(nx);
  out.X2.resize(nx);
  out.X3.resize(nx);
  double X = x_init[0], X1v = x_init[1], X2v = x_init[2];
  const double hx = (x1 - x0) / (nx - 1);
  const int sub = std::max(1, static_cast<int>(std::ceil(hx / 5e-5)));
  const double hs = hx / sub;
  auto store = [&](int i) {
    out.X[i] = X;
    out.X1[i] = X1v;
    out.X2[i] = X2v;
    out.X3[i] = x3_of(X, X1v, X2v);
  };
  if (X1v <= 0.0) throw reduce_error("X' > 0 required");
  store(0);
  for (int i = 1; i < nx; ++i) {
    for (int s = 0; s < sub; ++s) {
      auto f = [&](double a, double b, double c, double* k) {
        k[0] = b;
        k[1] = c;
        k[2] = x3_of(a, b, c);
      };
      double k1[3], k2[3], k3[3], k4[3];
      if (X1v <= 0.0) {
        out.domain_ok = false;
        break;
      }
      f(X, X1v, X2v, k1);
      f(X + 0.5 * hs * k1[0], X1v + 0.5 * hs * k1[1], X2v + 0.5 * hs * k1[2], k2);
      f(X + 0.5 * hs * k2[0], X1v + 0.5 * hs * k2[1], X2v + 0.5 * hs * k2[2], k3);
      f(X + hs * k3[0], X1v + hs * k3[1], X2v + hs * k3[2], k4);
      X += hs / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      X1v += hs / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      X2v += hs / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
      if (!std::isfinite(X) || !std::isfinite(X1v) || !std::isfinite(X2v))
        out.domain_ok = false;
      if (!out.domain_ok) break;
    }
    if (!out.domain_ok) throw reduce_error("X integration left the admissible domain");
    store(i);
  }

  // assemble u and the residual of u_t = (u^{-1/2} u_x)_x + m u - 2 k sqrt(u)
  out.u.assign(nt, std::vector<double>(nx));
  for (int it = 0; it < nt; ++it) {
    const double t = out.ts[it];
    EvalPoint pt{{"t", t}};
    const double Tv = T.eval(pt), T1v = T1.eval(pt), T2v = T2.eval(pt);
    if (T1v <= 0.0) throw reduce_error("T' > 0 violated on the time range");
    for (int ix = 0; ix < nx; ++ix) {
      const double L = Tv + out.X[ix];
      const double u = p.s * L * L * std::exp(p.m * t / 2) / (2 * T1v * out.X1[ix]);
      if (!(u > 0.0)) throw reduce_error("u > 0 violated on the grid");
      out.u[it][ix] = u;

      const double ut = u * (p.m / 2 + 2 * T1v / L - T2v / T1v);
      const double g = 2 * out.X1[ix] / L - out.X2[ix] / out.X1[ix];
      const double gp = 2 * out.X2[ix] / L - 2 * out.X1[ix] * out.X1[ix] / (L * L) -
                        out.X3[ix] / out.X1[ix] +
                        out.X2[ix] * out.X2[ix] / (out.X1[ix] * out.X1[ix]);
      const double u1 = u * g;
      const double u2 = u * (g * g + gp);
      const double su = std::sqrt(u);
      const double rhs = u2 / su - 0.5 * u1 * u1 / (su * u) + p.m * u - 2 * p.k * su;
      const double scale =
          1.0 + std::max({std::fabs(ut), std::fabs(u2 / su), std::fabs(p.m * u)});
      out.max_residual = std::max(out.max_residual, std::fabs(ut - rhs) / scale);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orthogonality diagnostic.

OrthoReport orthogonality_check(const OrthoParams& p, double X0, double T0, double x0,
                                double x1, int nx, double t0, double t1, int nt) {
  if (p.r >= 0.0) throw reduce_error("r < 0 required");
  if (nx < 2 || nt < 2) throw reduce_error("grid too coarse");
  const double A = std::cbrt(-2.0 * p.r);

  auto px = [&](double X) {
    return ((p.c[3] * X + p.c[2]) * X + p.c[1]) * X + p.c[0];
  };
  auto px1 = [&](double X) { return (3 * p.c[3] * X + 2 * p.c[2]) * X + p.c[1]; };
  auto px2 = [&](double X) { return 6 * p.c[3] * X + 2 * p.c[2]; };

  OrthoReport rep;
  // X' = (P^2)^{1/3}; derivatives in closed form from the cubic
  std::vector<double> Xs(nx), X1(nx), X2(nx), X3(nx);
  double X = X0;
  const double hx = (x1 - x0) / (nx - 1);
  const int sub = std::max(1, static_cast<int>(std::ceil(hx / 5e-5)));
  const double hs = hx / sub;
  auto xp = [&](double v) { return std::cbrt(px(v) * px(v)); };
  if (xp(X0) <= 1e-12) throw reduce_error("X' > 0 required");
  for (int i = 0; i < nx; ++i) {
    if (i > 0) {
      for (int s = 0; s < sub; ++s) {
        double k1 = xp(X);
        double k2 = xp(X + 0.5 * hs * k1);
        double k3 = xp(X + 0.5 * hs * k2);
        double k4 = xp(X + hs * k3);
        X += hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
    }
    Xs[i] = X;
    X1[i] = xp(X);
    X2[i] = (2.0 / 3.0) * std::cbrt(px(X)) * px1(X);
    X3[i] = (2.0 / 9.0) * px1(X) * px1(X) + (2.0 / 3.0) * px(X) * px2(X);
    rep.x_consistency =
        std::max(rep.x_consistency, std::fabs(X1[i] * X1[i] * X1[i] - px(X) * px(X)));
  }

  // T' from the separated companion cubic; the printed variant keeps the
  // x-dependent term, making T' grid-dependent
  auto pt_poly = [&](double T, double Xother) {
    double lin = p.printed_c1x_variant ? -p.c[1] * Xother : -p.c[1] * T;
    return ((-p.c[3] * T + p.c[2]) * T) * T + lin + p.c[0];
  };
  auto pt1_poly = [&](double T) {
    double lin = p.printed_c1x_variant ? 0.0 : -p.c[1];
    return (-3 * p.c[3] * T + 2 * p.c[2]) * T + lin;
  };

  const double ht = (t1 - t0) / (nt - 1);
  const int subt = std::max(1, static_cast<int>(std::ceil(ht / 5e-5)));
  const double hts = ht / subt;

  rep.values.assign(nt, std::vector<double>(nx, 0.0));
  double sum = 0.0;
  std::size_t count = 0;
  // integrate T per x-column when the printed variant couples them
  for (int ix = 0; ix < nx; ++ix) {
    double T = T0;
    for (int it = 0; it < nt; ++it) {
      const double t = t0 + ht * it;
      if (it > 0) {
        for (int s = 0; s < subt; ++s) {
          auto tp = [&](double v) {
            double P = pt_poly(v, Xs[ix]);
            return std::cbrt(A * P * P);
          };
          double k1 = tp(T);
          double k2 = tp(T + 0.5 * hts * k1);
          double k3 = tp(T + 0.5 * hts * k2);
          double k4 = tp(T + hts * k3);
          T += hts / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
      }
      const double P = pt_poly(T, Xs[ix]);
      const double T1 = std::cbrt(A * P * P);
      if (T1 <= 1e-12) throw reduce_error("T' > 0 violated");
      // T1^3 = A P^2  =>  T2 = 2 A P P' / (3 T1)
      const double T2 = 2.0 * A * P * pt1_poly(T) / (3.0 * T1);

      const double e34 = std::sqrt(-2.0 / p.r) * std::exp(3.0 * p.m * t / 4.0);
      const double C = e34 * (p.m * std::sqrt(T1) + 2.0 * T2 / std::sqrt(T1));
      const double B = X2[ix] * X2[ix] * std::pow(X1[ix], -2.5) -
                       2.0 * X3[ix] * std::pow(X1[ix], -1.5);
      const double D = 2.0 * Xs[ix] * B + 8.0 * X2[ix] / std::sqrt(X1[ix]);
      const double Q =
          e34 * (p.m * std::sqrt(T1) * T + 2.0 * T2 * T / std::sqrt(T1) -
                 4.0 * std::pow(T1, 1.5));
      const double tail = 8.0 * std::pow(X1[ix], 1.5);
      const double R = B * Xs[ix] * Xs[ix] +
                       8.0 * X2[ix] * Xs[ix] / std::sqrt(X1[ix]) +
                       (p.printed_double_minus ? tail : -tail);
      const double G = C * Xs[ix] + D * T + B * T * T + Q + R;
      rep.values[it][ix] = G;
      rep.max_abs = std::max(rep.max_abs, std::fabs(G));
      sum += std::fabs(G);
      ++count;
    }
  }
  rep.mean_abs = sum / static_cast<double>(count);
  return rep;
}

}  // namespace difcon
