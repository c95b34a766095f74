// Acceptance suite: one line per criterion, exit nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "difcon/pde.hpp"
#include "difcon/reduce.hpp"
#include "difcon/report.hpp"

using namespace difcon;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void result(int n, const std::string& label, bool ok, const std::string& detail) {
  std::printf("%s  criterion %d: %-34s %s\n", ok ? "PASS" : "FAIL", n, label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// --- criterion 1: determining-equation suite --------------------------------

void criterion_1(const Catalog& cat) {
  auto t0 = Clock::now();
  RunConfig cfg;
  cfg.command = "verify-lde";
  cfg.catalog_path = default_catalog_path();
  cfg.seed = 7;
  cfg.samples = 100;
  cfg.tolerance = 1e-8;
  Report rep = run(cfg);
  double dt = seconds_since(t0);

  bool ok = rep.summary_fail == 0 && rep.cases.size() == 42 && dt < 10.0;
  double worst = 0;
  for (const auto& c : rep.cases) worst = std::max(worst, c.max_abs);

  // the stated branch coefficients at q = 2
  FitConfig fc;
  fc.seed = 7;
  Expression f = parse("0.7*u0+1.3*u0^(-2)");
  FitResult fit = fit_b_coefficients(parse("u2+2*u1^2/u0"), 2.0, f, fc);
  std::array<double, 4> expect{4.0, 4.0, 1.0, 1.0};
  for (int i = 0; i < 4; ++i) ok = ok && std::fabs(fit.b[i] - expect[i]) < 1e-6;

  result(1, "determining-equation suite",
         ok,
         "14 entries x 3 draws, worst residual " + fmt(worst) + ", fitted b at q=2 = (" +
             fmt(fit.b[0]) + ", " + fmt(fit.b[1]) + ", " + fmt(fit.b[2]) + ", " +
             fmt(fit.b[3]) + "), " + fmt(dt) + " s");
  (void)cat;
}

// --- criterion 2: branch relations ------------------------------------------

void criterion_2() {
  bool ok = true;
  double worst = 0;
  for (double q : {2.0, 3.0, -1.0, -4.0 / 3.0}) {
    B3Roots roots = solve_b3_relations(q);
    ok = ok && std::fabs(roots.roots[0] - 1.0) < 1e-15;
    ok = ok && std::fabs(roots.roots[1] - (q + 2.0) / q) < 1e-15;
    for (double b3 : roots.roots) {
      double b2 = (b3 * b3 * q - b3 * q - 4 * b3 + 6 * q) / (2 * (q - 1));
      double r1 = std::fabs(b3_relation_first(q, b2, b3));
      double r2 = std::fabs(b3_relation_second(q, b2, b3));
      worst = std::max({worst, r1, r2});
      ok = ok && r1 < 1e-12 && r2 < 1e-12;
    }
  }
  result(2, "b3 branch relations", ok, "roots {1, (q+2)/q}, worst relation residual " + fmt(worst));
}

// --- criterion 3: classical-symmetry degeneration ----------------------------

void criterion_3(const Catalog& cat) {
  bool ok = true;
  double worst_pass = 0, weakest_fail = 1e300;
  GeneralSpec delta = GeneralSpec::classical(2);
  for (const auto& entry : cat.constraints) {
    Rng rng(1234 ^ static_cast<std::uint64_t>(entry.id.size()));
    auto params = draw_constraint_params(entry, rng);
    InstantiatedConstraint inst = instantiate_constraint(entry, params);
    if (!inst.eq.autonomous()) {
      ok = false;
      continue;
    }
    SamplerConfig sc;
    sc.seed = 5;
    sc.tolerance = 1e-12;
    ResidualReport rep = check_identity(build_residual_general(parse("u1"), inst.eq, delta), sc);
    worst_pass = std::max(worst_pass, rep.max_abs);
    ok = ok && rep.pass;

    EvolutionEquation eqx(
        (inst.eq.rhs() + Expression::number(0.1) * parse("x*u1")).simplified());
    ResidualReport repx = check_identity(build_residual_general(parse("u1"), eqx, delta), sc);
    weakest_fail = std::min(weakest_fail, repx.max_abs);
    ok = ok && repx.max_abs > 1e-2;
  }
  result(3, "classical-symmetry degeneration", ok,
         "h=u1 residual <= " + fmt(worst_pass) + " on all 14 equations; explicit-x control >= " +
             fmt(weakest_fail));
}

// --- criterion 4: closed-form solution suite ---------------------------------

void criterion_4() {
  RunConfig cfg;
  cfg.command = "verify-solution";
  cfg.catalog_path = default_catalog_path();
  cfg.seed = 11;
  cfg.samples = 100;
  cfg.tolerance = 1e-8;
  Report rep = run(cfg);

  bool ok = rep.summary_fail == 0;
  double worst_verified = 0;
  auto find = [&](const std::string& id) -> const CaseRecord* {
    for (const auto& c : rep.cases)
      if (c.id == id) return &c;
    return nullptr;
  };
  for (const auto& c : rep.cases) {
    if (c.id.find("/printed") == std::string::npos) worst_verified = std::max(worst_verified, c.max_abs);
  }
  ok = ok && worst_verified < 1e-8;

  // documented errata reproduce: tabulated forms fail visibly
  for (const char* id : {"S1/printed", "S2/printed", "S5/printed", "S6/printed", "S10/printed"}) {
    const CaseRecord* c = find(id);
    ok = ok && c && c->max_abs > 1e-3 && !c->erratum.empty();
  }
  result(4, "closed-form solution suite", ok,
         "verified forms <= " + fmt(worst_verified) + ", errata reproduced with erratum notes");
}

// --- criterion 5: reduction pipeline ------------------------------------------

void criterion_5(const Catalog& cat) {
  bool ok = true;
  double worst_agree = 0, worst_h = 0;

  auto track = [&](double agree, double h) {
    worst_agree = std::max(worst_agree, agree);
    worst_h = std::max(worst_h, h);
  };
  auto rel = [](double a, double b) { return std::fabs(a - b) / (1.0 + std::fabs(b)); };

  {  // power representation vs its closed form
    Representation rep = representation_for(cat, "rep-power");
    Trajectory traj = integrate_rk4(rep.coeff_rhs, rep.coeff_names, {}, {0.4, 1.5}, 0.0, 1.0, 1e-3);
    SampledSolution sol = assemble_solution(rep, traj);
    Expression closed =
        parse("exp(0.3*t)*(0.4*x+2-0.5*exp(-0.9*t))^(1/3)");
    for (int j = 0; j < 20; ++j) {
      std::size_t node = j * (traj.nodes() - 1) / 19;
      for (int i = 0; i < 20; ++i) {
        double x = -1.0 + 2.0 * i / 19;
        track(rel(sol.value(node, x), closed.eval({{"t", traj.time_at(node)}, {"x", x}})),
              std::fabs(sol.constraint_value(node, x)));
      }
    }
  }
  {  // exponential representation vs its closed form
    Representation rep = representation_for(cat, "rep-exponential");
    Trajectory traj = integrate_rk4(rep.coeff_rhs, rep.coeff_names, {},
                                    {std::exp(0.3), 0.4}, 0.0, 1.0, 1e-3);
    SampledSolution sol = assemble_solution(rep, traj);
    Expression closed = parse("exp((0.3+0.4*x)*exp(0.7*t))");
    for (int j = 0; j < 20; ++j) {
      std::size_t node = j * (traj.nodes() - 1) / 19;
      for (int i = 0; i < 10; ++i) {
        double x = -1.0 + 2.0 * i / 9;
        track(rel(sol.value(node, x), closed.eval({{"t", traj.time_at(node)}, {"x", x}})),
              std::fabs(sol.constraint_value(node, x)));
      }
    }
  }
  {  // exponential-subspace system vs the explicit trigonometric coefficients
    Representation rep = representation_for(cat, "rep-exp-pair");
    auto a_of = [](double t) { return std::exp(t) * std::tan(std::exp(t)); };
    auto b_of = [](double t) { return std::exp(t) / std::cos(std::exp(t)); };
    auto c_of = [](double t) { return 0.25 * std::exp(t) / std::cos(std::exp(t)); };
    Trajectory traj = integrate_rk4(rep.coeff_rhs, rep.coeff_names, {},
                                    {a_of(0), b_of(0), c_of(0)}, 0.0, 0.42, 2e-4);
    SampledSolution sol = assemble_solution(rep, traj);
    for (int j = 0; j < 22; ++j) {
      std::size_t node = j * (traj.nodes() - 1) / 21;
      double t = traj.time_at(node);
      for (double x : {-1.0, 0.0, 1.0}) {
        double ref = a_of(t) + b_of(t) * std::exp(x) + c_of(t) * std::exp(-x);
        track(rel(sol.value(node, x), ref), std::fabs(sol.constraint_value(node, x)));
      }
    }
    // first integral c2 = k c3 over unit time at step 1e-3, generic data
    Representation gen =
        representation_for(cat, "rep-exp-pair", {{"q", -1.0}, {"s", 0.5}, {"r", 0.0}});
    Trajectory g = integrate_rk4(gen.coeff_rhs, gen.coeff_names, {}, {0.2, 0.15, 0.1}, 0.0, 1.0, 1e-3);
    double k0 = g.states.front()[1] / g.states.front()[2];
    double worst_k = 0;
    for (const auto& s : g.states)
      worst_k = std::max(worst_k, std::fabs(s[1] / s[2] - k0) / (1.0 + std::fabs(k0)));
    ok = ok && worst_k <= 1e-8;
  }
  {  // separable 2-D representation vs the tanh-branch closed form
    Representation rep = representation_for(cat, "rep-separable");
    auto s3 = [](double t) { return std::tanh(t); };
    auto s0 = [&](double t) { return (1 - s3(t) * s3(t)) / s3(t); };
    Trajectory traj = integrate_rk4(
        rep.coeff_rhs, rep.coeff_names, {},
        {s0(0.5), 0.6 / s3(0.5), 0.8 / s3(0.5), s3(0.5), s3(0.5) / 4}, 0.5, 1.0, 1e-3);
    SampledSolution sol = assemble_solution(rep, traj);
    for (int j = 0; j < 11; ++j) {
      std::size_t node = j * (traj.nodes() - 1) / 10;
      double t = traj.time_at(node);
      for (double x : {0.0, 0.5, 1.0}) {
        for (double y : {-1.0, 0.0, 1.0}) {
          double ref = s0(t) + (0.6 / s3(t)) * std::cos(x) + (0.8 / s3(t)) * std::sin(x) +
                       s3(t) * std::exp(y) + (s3(t) / 4) * std::exp(-y);
          double hx = sol.x_derivative(node, 3, x, y) + sol.x_derivative(node, 1, x, y);
          double hy = sol.y_derivative(node, 3, x, y) - sol.y_derivative(node, 1, x, y);
          track(rel(sol.value(node, x, y), ref), std::max(std::fabs(hx), std::fabs(hy)));
        }
      }
    }
  }
  ok = ok && worst_agree <= 1e-6 && worst_h <= 1e-7;
  result(5, "reduction pipeline", ok,
         "closed-form agreement <= " + fmt(worst_agree) + ", constraint residual <= " +
             fmt(worst_h) + ", first integral conserved");
}

// --- criterion 6: Liouville chain ---------------------------------------------

void criterion_6() {
  bool ok = true;

  LiouvilleParams p;
  p.s = 1.0;
  p.m = 2.0;
  p.k = 0.3;
  p.c1 = 1.0;
  p.c2 = 0.4;
  p.c3 = 0.2;
  Expression T = liouville_T(p);
  Expression T1 = T.diff("t");
  Expression T2 = T1.diff("t");
  Expression T3 = T2.diff("t");
  double worst_T = 0;
  for (int i = 0; i < 50; ++i) {
    EvalPoint pt{{"t", i * 0.02}};
    double r = 2 * T3.eval(pt) * T1.eval(pt) - 3 * T2.eval(pt) * T2.eval(pt) +
               (p.m * p.m / 4) * T1.eval(pt) * T1.eval(pt);
    worst_T = std::max(worst_T, std::fabs(r));
  }
  ok = ok && worst_T < 1e-9;

  Expression a1 = parse("(1/cosh(x))^2");
  Expression a2 = parse("0.3*(1/cosh(x))^2"
                        "+0.05*(1/cosh(x))^2*(sinh(4*x)/32+sinh(2*x)/4+3*x/8)");
  Expression res_a1 = (a1.diff("x").diff("x") + Expression::number(6.0) * a1 * a1 -
                    Expression::number(4.0) * a1)
                       .simplified();
  Expression res_a2 = (a2.diff("x").diff("x") + Expression::number(6.0) * a1 * a2 -
                    Expression::number(4.0) * a2)
                       .simplified();
  double worst_pair = 0;
  for (int i = 0; i <= 40; ++i) {
    EvalPoint pt{{"x", -2.0 + 0.1 * i}};
    worst_pair = std::max({worst_pair, std::fabs(res_a1.eval(pt)), std::fabs(res_a2.eval(pt))});
  }
  ok = ok && worst_pair < 1e-8;

  // assembled u = (a1 + a2 e^{6t})^2 solves the m = 12, k = 4 equation
  EvolutionEquation eq_sqrt = diffusion_equation(-0.5, parse("12*u0-8*u0^(1/2)"));
  Expression u = parse("((1/cosh(x))^2+(0.3*(1/cosh(x))^2"
                       "+0.05*(1/cosh(x))^2*(sinh(4*x)/32+sinh(2*x)/4+3*x/8))*exp(6*t))^2");
  SamplerConfig sc;
  sc.tolerance = 1e-8;
  sc.ranges = {{"t", {0.0, 0.3}}, {"x", {-1.0, 1.0}}};
  ResidualReport rep = residual_exact(u, eq_sqrt, sc);
  ok = ok && rep.pass;

  result(6, "Liouville chain", ok,
         "T-equation residual " + fmt(worst_T) + ", coefficient pair " + fmt(worst_pair) +
             ", assembled square-of-sum residual " + fmt(rep.max_abs));
}

// --- criterion 7: compatibility drift ------------------------------------------

void criterion_7() {
  RunConfig cfg;
  cfg.command = "compat";
  cfg.catalog_path = default_catalog_path();
  Report rep = run(cfg);
  bool ok = rep.cases.size() >= 3 && rep.summary_fail == 0;
  double worst = 0;
  for (const auto& c : rep.cases) worst = std::max(worst, c.max_abs);

  // negative control: an incompatible constraint drifts past the threshold
  EvolutionEquation eq = diffusion_equation(2.0, parse("0.3*u0+0.1*u0^(-2)"));
  Grid1D grid;
  grid.nx = 401;
  grid.t1 = 0.1;
  grid.dt = 1.0e-6;
  DriftReport bad = constraint_drift(eq, parse("u2"), parse("0.2*x+1.2"), grid, nullptr);
  ok = ok && !bad.pass;

  result(7, "compatibility drift", ok,
         std::to_string(rep.cases.size()) + " compatible pairs preserved (worst " + fmt(worst) +
             "), negative control drifts to " + fmt(bad.h_inf.empty() ? 0.0 : bad.h_inf.back()) +
             " > " + fmt(bad.threshold));
}

// --- criterion 8: numerics hygiene ----------------------------------------------

void criterion_8() {
  // RK4 order through step halving
  auto rk_err = [&](double h) {
    Trajectory t = integrate_rk4({parse("c1")}, {"c1"}, {}, {1.0}, 0.0, 1.0, h);
    return std::fabs(t.states.back()[0] - std::exp(1.0));
  };
  double rk_ratio = rk_err(0.05) / rk_err(0.025);
  bool ok = rk_ratio >= 14.0;

  // MOL spatial order through grid halving
  EvolutionEquation eq = diffusion_equation(1.0, parse("0.3*u0+0.15*u0^(-1)"));
  Expression closed = parse("exp(0.3*t)*(0.4*x+2-0.5*exp(-0.6*t))^(1/2)");
  auto mol_err = [&](int nx, double dt) {
    Grid1D grid;
    grid.nx = nx;
    grid.t1 = 0.05;
    grid.dt = dt;
    std::vector<double> initial(grid.nx);
    for (int i = 0; i < grid.nx; ++i)
      initial[i] = closed.eval({{"t", 0.0}, {"x", grid.x_at(i)}});
    FieldHistory hist = mol_evolve(eq, initial, grid, &closed);
    double worst = 0.0;
    for (int i = 0; i < grid.nx; ++i)
      worst = std::max(worst, std::fabs(hist.fields.back()[i] -
                                        closed.eval({{"t", hist.times.back()},
                                                     {"x", grid.x_at(i)}})));
    return worst;
  };
  double mol_ratio = mol_err(51, 4e-5) / mol_err(101, 1e-5);
  ok = ok && mol_ratio >= 3.5;

  // derivative vs central differences across the expression corpus
  const std::vector<std::string> corpus = {
      "u2+q*u1^2/u0", "u0^q", "exp(k*q*t)*(r*x+s)", "ln(u0)*sin(x)",
      "sqrt(u0)+tanh(u1)", "u0^q*u2+q*u0^(q-1)*u1^2",
      "u3-4*u1*u2/u0+3*u1^3/u0^2+s*exp(-2*m*t)*u0^2*u1"};
  Rng rng(2024);
  VarRanges ranges = default_jet_ranges();
  bool fd_ok = true;
  for (const auto& src : corpus) {
    Expression e = parse(src);
    for (const auto& var : e.free_symbols()) {
      Expression d = e.diff(var);
      for (int i = 0; i < 100; ++i) {
        EvalPoint pnt;
        for (const auto& s : e.free_symbols()) {
          auto it = ranges.find(s);
          pnt[s] = it != ranges.end() ? rng.uniform(it->second.first, it->second.second)
                                      : rng.uniform(0.3, 1.2);
        }
        const double hstep = 1e-6;
        EvalPoint lo = pnt, hi = pnt;
        lo[var] -= hstep;
        hi[var] += hstep;
        double fd, exact;
        try {
          fd = (e.eval(hi) - e.eval(lo)) / (2 * hstep);
          exact = d.eval(pnt);
        } catch (const eval_error&) {
          continue;
        }
        fd_ok = fd_ok && std::fabs(exact - fd) <= 1e-5 * (1.0 + std::fabs(exact));
      }
    }
  }
  ok = ok && fd_ok;

  result(8, "numerics hygiene", ok,
         "RK4 halving ratio " + fmt(rk_ratio) + " >= 14, MOL halving ratio " + fmt(mol_ratio) +
             " >= 3.5, derivative-vs-difference checks " + (fd_ok ? "pass" : "fail"));
}

// --- criterion 9: determinism and runtime ----------------------------------------

void criterion_9(Clock::time_point suite_start) {
  std::string out1 = "/tmp/difcon_acc_a.json";
  std::string out2 = "/tmp/difcon_acc_b.json";
  std::string cmd1 = std::string(DIFCON_BIN) + " verify-lde --all --seed 7 --out " + out1 +
                     " 2>/dev/null";
  std::string cmd2 = std::string(DIFCON_BIN) + " verify-lde --all --seed 7 --out " + out2 +
                     " 2>/dev/null";
  int rc1 = WEXITSTATUS(std::system(cmd1.c_str()));
  int rc2 = WEXITSTATUS(std::system(cmd2.c_str()));
  std::string a = slurp(out1), b = slurp(out2);
  bool identical = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;

  double elapsed = seconds_since(suite_start);
  bool ok = identical && elapsed < 60.0;
  result(9, "determinism and runtime", ok,
         std::string("reports ") + (identical ? "byte-identical" : "DIFFER") +
             ", full suite " + fmt(elapsed) + " s < 60 s");
}

}  // namespace

template <typename Fn>
void guarded(int n, const std::string& label, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    result(n, label, false, std::string("exception: ") + e.what());
  }
}

int main() {
  auto suite_start = Clock::now();
  std::printf("acceptance suite (%s)\n", kToolVersion);
  Catalog cat;
  try {
    cat = load_catalog(default_catalog_path());
  } catch (const std::exception& e) {
    std::printf("FAIL  catalog unavailable: %s\n", e.what());
    return 1;
  }
  guarded(1, "determining-equation suite", [&] { criterion_1(cat); });
  guarded(2, "b3 branch relations", [&] { criterion_2(); });
  guarded(3, "classical-symmetry degeneration", [&] { criterion_3(cat); });
  guarded(4, "closed-form solution suite", [&] { criterion_4(); });
  guarded(5, "reduction pipeline", [&] { criterion_5(cat); });
  guarded(6, "Liouville chain", [&] { criterion_6(); });
  guarded(7, "compatibility drift", [&] { criterion_7(); });
  guarded(8, "numerics hygiene", [&] { criterion_8(); });
  guarded(9, "determinism and runtime", [&] { criterion_9(suite_start); });
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
