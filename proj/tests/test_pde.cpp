#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "difcon/pde.hpp"

using namespace difcon;

namespace {

SamplerConfig window_1d(double t0, double t1, double x0, double x1, double tol) {
  SamplerConfig cfg;
  cfg.tolerance = tol;
  cfg.ranges = {{"t", {t0, t1}}, {"x", {x0, x1}}};
  return cfg;
}

SamplerConfig window_2d(double tol) {
  SamplerConfig cfg;
  cfg.tolerance = tol;
  cfg.ranges = {{"t", {0.0, 0.4}}, {"x", {-1.0, 1.0}}, {"y", {-1.0, 1.0}}};
  return cfg;
}

}  // namespace

TEST_CASE("exact residual certifies closed forms") {
  // logarithmic-diffusivity equation, corrected separable form
  EvolutionEquation eq_log = diffusion_equation(-1.0, parse("0.7*u0*ln(u0)"));
  Expression u = parse("exp((0.3+0.5*x)*exp(0.7*t))");
  ResidualReport rep = residual_exact(u, eq_log, window_1d(0, 0.5, -1, 1, 1e-9));
  CHECK(rep.pass);
  CHECK(rep.max_abs < 1e-9);

  // the one-constant variant only solves it when that constant is 1
  Expression up = parse("1.3*exp(0.5*x*exp(0.7*t))");
  ResidualReport repp = residual_exact(up, eq_log, window_1d(0, 0.5, -1, 1, 1e-9));
  CHECK_FALSE(repp.pass);
  CHECK(repp.max_abs > 1e-3);

  // power-form solution for f = r u + s u^(1-q), hand-checked parameters
  EvolutionEquation eq = diffusion_equation(2.0, parse("0.3*u0+0.2*u0^(-1)"));
  Expression s3 =
      parse("(2*0.4*x*exp(2*0.3*t)+(0.4^2/0.3)*exp(4*0.3*t)-0.2/0.3)^(1/2)");
  ResidualReport rep3 = residual_exact(s3, eq, window_1d(0, 0.5, 0.5, 1.5, 1e-9));
  CHECK(rep3.pass);

  // sensitivity: a one-percent multiplicative dent is visible
  Expression dent = (s3 * parse("1+0.01*x")).simplified();
  ResidualReport repd = residual_exact(dent, eq, window_1d(0, 0.5, 0.5, 1.5, 1e-9));
  CHECK(repd.max_abs > 1e-3);

  CHECK_THROWS_AS(residual_exact(parse("zz*x"), eq, window_1d(0, 1, -1, 1, 1e-8)),
                  pde_error);
}

TEST_CASE("residual operations are invariant under simplify") {
  EvolutionEquation eq = diffusion_equation(2.0, parse("0.3*u0+0.2*u0^(-1)"));
  Expression raw = parse("1*((2*0.4*x*exp(2*0.3*t)+(0.4^2/0.3)*exp(4*0.3*t)-0.2/0.3)^(1/2))+0");
  SamplerConfig cfg = window_1d(0, 0.5, 0.5, 1.5, 1e-9);
  ResidualReport a = residual_exact(raw, eq, cfg);
  ResidualReport b = residual_exact(raw.simplified(), eq, cfg);
  CHECK(std::fabs(a.max_abs - b.max_abs) <= 1e-12);

  Expression raw2d = parse("1*(1+0.5*exp(x+2*y+5*t))+0");
  ResidualReport c = residual_2d(raw2d, Form2D::FastV, window_2d(1e-9));
  ResidualReport d = residual_2d(raw2d.simplified(), Form2D::FastV, window_2d(1e-9));
  CHECK(std::fabs(c.max_abs - d.max_abs) <= 1e-12);
}

TEST_CASE("method of lines: equilibrium and stability refusal") {
  EvolutionEquation eq = diffusion_equation(1.0, Expression::number(0.0));
  Grid1D grid;
  grid.nx = 101;
  grid.t1 = 0.05;
  grid.dt = 2e-5;
  std::vector<double> flat(grid.nx, 1.5);
  FieldHistory hist = mol_evolve(eq, flat, grid);
  CHECK(hist.boundary == "reflective");
  for (const auto& snap : hist.fields)
    for (double v : snap) CHECK(std::fabs(v - 1.5) <= 1e-12);

  std::string csv = field_history_csv(hist);
  CHECK(csv.rfind("t,x,u\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        1 + static_cast<long>(hist.times.size() * hist.xs.size()));

  Grid1D coarse = grid;
  coarse.dt = 1.0;
  CHECK_THROWS_WITH_AS(mol_evolve(eq, flat, coarse), doctest::Contains("stability bound"),
                       pde_error);
}

TEST_CASE("method of lines tracks a closed form on the fine grid") {
  // q = 1 member of the power-form family; boundaries follow the closed form
  const double s = 0.3, r = 0.15, a = 0.4, b = 2.0;
  EvolutionEquation eq = diffusion_equation(1.0, parse("0.3*u0+0.15*u0^(-1)"));
  Expression closed = parse("exp(s*t)*(a*x+b-(r/s)*exp(-s*2*t))^(1/2)")
                          .subst_numbers({{"s", s}, {"r", r}, {"a", a}, {"b", b}});
  Grid1D grid;
  grid.nx = 401;
  grid.t1 = 0.2;
  grid.dt = 1.2e-6;
  std::vector<double> initial(grid.nx);
  for (int i = 0; i < grid.nx; ++i)
    initial[i] = closed.eval({{"t", 0.0}, {"x", grid.x_at(i)}});
  FieldHistory hist = mol_evolve(eq, initial, grid, &closed);
  CHECK(hist.boundary == "dirichlet-reference");
  REQUIRE_FALSE(hist.blow_up);
  double worst = 0.0;
  const auto& last = hist.fields.back();
  for (int i = 0; i < grid.nx; ++i)
    worst = std::max(worst,
                     std::fabs(last[i] - closed.eval({{"t", hist.times.back()}, {"x", grid.x_at(i)}})));
  CHECK(worst < 5e-4);
}

TEST_CASE("method of lines converges at second order") {
  const double s = 0.3, r = 0.15, a = 0.4, b = 2.0;
  EvolutionEquation eq = diffusion_equation(1.0, parse("0.3*u0+0.15*u0^(-1)"));
  Expression closed = parse("exp(s*t)*(a*x+b-(r/s)*exp(-s*2*t))^(1/2)")
                          .subst_numbers({{"s", s}, {"r", r}, {"a", a}, {"b", b}});
  auto deviation = [&](int nx, double dt) {
    Grid1D grid;
    grid.nx = nx;
    grid.t1 = 0.05;
    grid.dt = dt;
    std::vector<double> initial(grid.nx);
    for (int i = 0; i < grid.nx; ++i)
      initial[i] = closed.eval({{"t", 0.0}, {"x", grid.x_at(i)}});
    FieldHistory hist = mol_evolve(eq, initial, grid, &closed);
    double worst = 0.0;
    const auto& last = hist.fields.back();
    for (int i = 0; i < grid.nx; ++i)
      worst = std::max(worst, std::fabs(last[i] - closed.eval({{"t", hist.times.back()},
                                                               {"x", grid.x_at(i)}})));
    return worst;
  };
  double coarse = deviation(51, 4e-5);
  double fine = deviation(101, 1e-5);
  CHECK(coarse / fine >= 3.5);
}

TEST_CASE("constraint drift: compatible pair is preserved") {
  const double q = 2.0, s = 0.3, r = 0.15, a = 0.4, b = 2.0;
  EvolutionEquation eq = diffusion_equation(q, parse("0.3*u0+0.15*u0^(-2)"));
  Expression h = parse("u2+2*u1^2/u0");
  Expression initial = parse("(a*x+b-r/s)^(1/3)")
                           .subst_numbers({{"a", a}, {"b", b}, {"r", r}, {"s", s}});
  Expression reference = parse("exp(s*t)*(a*x+b-(r/s)*exp(-s*3*t))^(1/3)")
                             .subst_numbers({{"a", a}, {"b", b}, {"r", r}, {"s", s}});
  Grid1D grid;
  grid.nx = 201;
  grid.t1 = 0.05;
  grid.dt = 2.4e-6;
  DriftReport rep = constraint_drift(eq, h, initial, grid, &reference);
  CHECK(rep.initial_exact < 1e-8);
  CHECK(rep.pass);
  CHECK(rep.boundary == "dirichlet-reference");

  // incompatible h on generic data drifts past the threshold
  Expression hbad = parse("u2");
  Expression linear = parse("0.3*x+1.5");
  DriftReport bad = constraint_drift(eq, hbad, linear, grid, nullptr);
  CHECK_FALSE(bad.pass);
  CHECK(bad.h_inf.back() > bad.threshold);

  // data off the manifold is rejected up front
  CHECK_THROWS_AS(constraint_drift(eq, hbad, parse("exp(x)"), grid, nullptr), pde_error);
}

TEST_CASE("two-dimensional residuals") {
  // travelling wave of the reciprocal form: corrected sign passes
  Expression good = parse("1+0.5*exp(x+2*y+5*t)");
  ResidualReport rep = residual_2d(good, Form2D::FastV, window_2d(1e-9));
  CHECK(rep.pass);

  Expression printed = parse("1+0.5*exp(x+2*y-5*t)");
  ResidualReport repp = residual_2d(printed, Form2D::FastV, window_2d(1e-9));
  CHECK_FALSE(repp.pass);
  CHECK(repp.max_abs > 1e-3);

  // separable representation, tanh branch
  Expression sep = parse("(1-tanh(t)^2)/tanh(t)+(0.6/tanh(t))*cos(x)+(0.8/tanh(t))*sin(x)"
                         "+tanh(t)*exp(y)+(tanh(t)/4)*exp(0-y)");
  SamplerConfig scfg;
  scfg.tolerance = 1e-7;
  scfg.ranges = {{"t", {0.5, 1.0}}, {"x", {0.0, 1.0}}, {"y", {-1.0, 1.0}}};
  CHECK(residual_2d(sep, Form2D::FastV, scfg).pass);

  // the u-form of the same travelling wave
  Expression base = parse("1/(1+0.5*exp(x+y+2*t))");
  CHECK(residual_2d(base, Form2D::FastU, window_2d(1e-9)).pass);
}

TEST_CASE("tan-coefficient forms: outcome recorded by the oracle") {
  SamplerConfig cfg;
  cfg.tolerance = 1e-8;
  cfg.ranges = {{"t", {0.0, 0.4}}, {"x", {1.0, 2.0}}, {"y", {1.0, 2.0}}};
  Expression printed =
      parse("0.8*x+0.6*y-t+0.1*cos(t)*exp((0.8*t-0.6)*x+(0.6*t+0.8)*y-tan(t)*t)");
  ResidualReport repp = residual_2d(printed, Form2D::FastV, cfg);
  CHECK_FALSE(repp.pass);  // recorded outcome: the linear-in-t exponents fail

  Expression fixed = parse(
      "0.8*x+0.6*y-t+0.1*cos(t)*exp((0.8*tan(t)-0.6)*x+(0.6*tan(t)+0.8)*y-tan(t)*t)");
  ResidualReport repf = residual_2d(fixed, Form2D::FastV, cfg);
  CHECK(repf.pass);
}

TEST_CASE("conformal images") {
  Expression base = parse("1/(1+0.5*exp(x+y+2*t))");

  // identity map reproduces the base expression exactly
  Expression id_image = conformal_image_expression(base, {0.0, 1.0});
  CHECK(id_image.same_as(base.simplified()));
  SamplerConfig cfg;
  cfg.tolerance = 1e-8;
  cfg.ranges = {{"t", {0.0, 0.4}}, {"x", {0.5, 1.5}}, {"y", {0.5, 1.5}}};
  ResidualReport base_rep = residual_2d(base, Form2D::FastU, cfg);
  ResidualReport id_rep = conformal_image(base, {0.0, 1.0}, cfg);
  CHECK(id_rep.max_abs == base_rep.max_abs);

  // z^2 away from the origin
  ResidualReport sq = conformal_image(base, {0.0, 0.0, 1.0}, cfg);
  CHECK(sq.pass);
  CHECK(sq.max_abs < 1e-8);

  // windows containing the critical point are refused
  SamplerConfig origin = cfg;
  origin.ranges["x"] = {-0.5, 0.5};
  origin.ranges["y"] = {-0.5, 0.5};
  CHECK_THROWS_AS(conformal_image(base, {0.0, 0.0, 1.0}, origin), pde_error);
}
