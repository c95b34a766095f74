#include "difcon/lde.hpp"

#include <algorithm>
#include <cmath>

namespace difcon {

namespace {

Expression num(double v) { return Expression::number(v); }
Expression sym(const char* s) { return Expression::symbol(s); }

}  // namespace

GeneralSpec GeneralSpec::zero(int order) {
  GeneralSpec s;
  s.order = order;
  s.b.assign(order + 1, {});
  for (int i = 0; i <= order; ++i) s.b[i].assign(i + 1, 0.0);
  return s;
}

GeneralSpec GeneralSpec::classical(int order) {
  GeneralSpec s = zero(order);
  for (int i = 0; i <= order; ++i) s.b[i][i] = 1.0;
  return s;
}

EvolutionEquation diffusion_equation(double q, const Expression& f) {
  if (q == 0.0) throw lde_error("q = 0 is not admissible");
  Expression u = sym("u0");
  Expression rhs = pow(u, num(q)) * sym("u2") +
                   num(q) * pow(u, num(q - 1.0)) * pow(sym("u1"), num(2.0)) + f;
  return EvolutionEquation(rhs.simplified());
}

Expression build_residual_general(const Expression& h, const EvolutionEquation& eq,
                                  const GeneralSpec& spec) {
  const int n = eq.order();
  if (spec.order != n) throw lde_error("determining spec order does not match equation order");
  const int p = std::max(max_jet_index(h), 0);

  // D_x^j h for j = 0..n
  std::vector<Expression> dh(n + 1);
  dh[0] = h;
  for (int j = 1; j <= n; ++j) dh[j] = total_x_derivative(dh[j - 1], p + j);

  Expression residual = total_t_derivative(h, eq);
  for (int i = 0; i <= n; ++i) {
    for (int k = 0; k <= i; ++k) {
      double bik = spec.b[i][k];
      if (bik == 0.0) continue;
      Expression fk = eq.rhs().diff(jet_symbol(n - k));
      for (int d = 0; d < i - k; ++d) fk = total_x_derivative(fk, n + d + 1);
      residual = residual - num(bik) * fk * dh[n - i];
    }
  }
  return residual.simplified();
}

DiffusionTerms build_diffusion_terms(const Expression& h, double q, const Expression& f) {
  if (q == 0.0) throw lde_error("q = 0 is not admissible");
  EvolutionEquation eq = diffusion_equation(q, f);
  const int p = std::max(max_jet_index(h), 0);
  Expression u = sym("u0");
  Expression u1 = sym("u1");
  Expression u2 = sym("u2");

  Expression dh = total_x_derivative(h, p + 1);
  Expression d2h = total_x_derivative(dh, p + 2);

  DiffusionTerms t;
  t.lhs = (total_t_derivative(h, eq) - pow(u, num(q)) * d2h).simplified();
  t.basis[0] = (num(q) * u1 * pow(u, num(q - 1.0)) * dh).simplified();
  t.basis[1] = (num(q * (q - 1.0)) * pow(u, num(q - 2.0)) * pow(u1, num(2.0)) * h).simplified();
  t.basis[2] = (num(q) * pow(u, num(q - 1.0)) * u2 * h).simplified();
  t.basis[3] = (f.diff("u0") * h).simplified();
  return t;
}

Expression build_residual_diffusion(const Expression& h, double q, const Expression& f,
                                    const DiffusionSpec& spec) {
  DiffusionTerms t = build_diffusion_terms(h, q, f);
  Expression r = t.lhs - num(spec.b1) * t.basis[0] - num(spec.b2) * t.basis[1] -
                 num(spec.b3) * t.basis[2] - num(spec.b4) * t.basis[3];
  return r.simplified();
}

// ---------------------------------------------------------------------------

namespace {

// Evaluates the flattened terms of `residual` at `point`; returns the signed
// sum and the largest term magnitude.  Throws eval_error on domain problems.
struct TermEval {
  double sum = 0.0;
  double largest = 0.0;
};

TermEval eval_terms(const std::vector<std::pair<int, Expression>>& terms, const EvalPoint& p) {
  TermEval out;
  for (const auto& [sign, term] : terms) {
    double v = term.eval(p);
    if (!std::isfinite(v)) throw eval_error("non-finite term value");
    out.sum += sign * v;
    out.largest = std::max(out.largest, std::fabs(v));
  }
  return out;
}

}  // namespace

ResidualReport check_identity(const Expression& residual, const SamplerConfig& cfg) {
  if (cfg.count < 1) throw lde_error("sample count must be at least 1");
  for (const auto& s : residual.free_symbols()) {
    if (!cfg.ranges.count(s) && !cfg.bindings.count(s))
      throw lde_error("residual symbol '" + s + "' has neither a range nor a binding");
  }

  auto terms = additive_terms(residual);
  Rng rng(cfg.seed);
  ResidualReport rep;
  rep.num_samples = cfg.count;
  rep.tolerance = cfg.tolerance;
  rep.seed = cfg.seed;

  double sq_sum = 0.0;
  for (int i = 0; i < cfg.count; ++i) {
    int attempts = 0;
    for (;;) {
      EvalPoint p = draw_point(rng, cfg.ranges);
      for (const auto& [k, v] : cfg.bindings) p[k] = v;
      try {
        TermEval te = eval_terms(terms, p);
        double rel = std::fabs(te.sum) / (1.0 + te.largest);
        if (rel > rep.max_abs) {
          rep.max_abs = rel;
          rep.worst_point = p;
        }
        sq_sum += rel * rel;
        break;
      } catch (const eval_error&) {
        ++rep.resamples;
        if (++attempts > 10) throw lde_error("sample domain errors persisted after 10 retries");
      }
    }
  }
  rep.rms = std::sqrt(sq_sum / cfg.count);
  rep.pass = rep.max_abs <= rep.tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Minimum-norm least squares through one-sided Jacobi SVD.

namespace {

struct LsqResult {
  std::array<double, 4> x{};
  std::array<double, 4> sigma{};
  int rank = 0;
};

LsqResult min_norm_lsq(std::vector<std::array<double, 4>>& rows, std::vector<double>& y) {
  const std::size_t m = rows.size();
  constexpr int nc = 4;
  // column-major copy
  std::vector<std::vector<double>> a(nc, std::vector<double>(m));
  for (std::size_t r = 0; r < m; ++r)
    for (int c = 0; c < nc; ++c) a[c][r] = rows[r][c];

  double v[nc][nc] = {};
  for (int i = 0; i < nc; ++i) v[i][i] = 1.0;

  auto dot = [&](int i, int j) {
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) s += a[i][r] * a[j][r];
    return s;
  };

  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (int i = 0; i < nc - 1; ++i) {
      for (int j = i + 1; j < nc; ++j) {
        double alpha = dot(i, i), beta = dot(j, j), gamma = dot(i, j);
        if (std::fabs(gamma) <= 1e-30 + 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        double zeta = (beta - alpha) / (2.0 * gamma);
        double t = (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          double ai = a[i][r], aj = a[j][r];
          a[i][r] = c * ai - s * aj;
          a[j][r] = s * ai + c * aj;
        }
        for (int r = 0; r < nc; ++r) {
          double vi = v[r][i], vj = v[r][j];
          v[r][i] = c * vi - s * vj;
          v[r][j] = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  LsqResult out;
  double smax = 0.0;
  for (int c = 0; c < nc; ++c) {
    out.sigma[c] = std::sqrt(std::max(dot(c, c), 0.0));
    smax = std::max(smax, out.sigma[c]);
  }
  if (smax == 0.0) return out;  // rank 0
  const double cutoff = 1e-10 * smax;
  for (int c = 0; c < nc; ++c) {
    if (out.sigma[c] <= cutoff) continue;
    ++out.rank;
    double uy = 0.0;
    for (std::size_t r = 0; r < m; ++r) uy += (a[c][r] / out.sigma[c]) * y[r];
    double coef = uy / out.sigma[c];
    for (int r = 0; r < nc; ++r) out.x[r] += coef * v[r][c];
  }
  return out;
}

}  // namespace

FitResult fit_b_coefficients(const Expression& h, double q, const Expression& f,
                             const FitConfig& cfg) {
  DiffusionTerms terms = build_diffusion_terms(h, q, f);
  auto lhs_terms = additive_terms(terms.lhs);
  std::array<std::vector<std::pair<int, Expression>>, 4> basis_terms;
  for (int j = 0; j < 4; ++j) basis_terms[j] = additive_terms(terms.basis[j]);

  const int rows_wanted = std::max(cfg.rows, 8);
  std::vector<EvalPoint> points;
  if (!cfg.points_override.empty()) {
    points = cfg.points_override;
  } else {
    Rng rng(cfg.seed);
    VarRanges ranges = default_jet_ranges();
    int guard = 0;
    while (static_cast<int>(points.size()) < rows_wanted) {
      EvalPoint p = draw_point(rng, ranges);
      for (const auto& [k, v] : cfg.bindings) p[k] = v;
      try {
        (void)eval_terms(lhs_terms, p);
        for (int j = 0; j < 4; ++j) (void)eval_terms(basis_terms[j], p);
        points.push_back(std::move(p));
      } catch (const eval_error&) {
        if (++guard > 200) throw lde_error("could not draw admissible fit samples");
      }
    }
  }

  // all-identical sample sets carry no information
  bool all_same = points.size() > 1;
  for (std::size_t i = 1; i < points.size() && all_same; ++i) all_same = points[i] == points[0];
  if (points.size() < 2 || all_same) throw lde_error("singular sampling: sample points identical");

  std::vector<std::array<double, 4>> rows;
  std::vector<double> y;
  for (auto& p0 : points) {
    EvalPoint p = p0;
    for (const auto& [k, v] : cfg.bindings) p.emplace(k, v);
    TermEval l = eval_terms(lhs_terms, p);
    std::array<double, 4> row{};
    double scale = l.largest;
    for (int j = 0; j < 4; ++j) {
      TermEval bj = eval_terms(basis_terms[j], p);
      row[j] = bj.sum;
      scale = std::max(scale, std::fabs(bj.sum));
    }
    scale = 1.0 + scale;
    for (auto& r : row) r /= scale;
    rows.push_back(row);
    y.push_back(l.sum / scale);
  }

  LsqResult lsq = min_norm_lsq(rows, y);
  if (lsq.rank == 0) {
    // lhs may still be nonzero; a zero basis cannot be fit
    bool lhs_zero = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; });
    if (!lhs_zero) throw lde_error("singular sampling: basis rows vanish at every sample");
  }

  FitResult out;
  out.b = lsq.x;
  out.rank = lsq.rank;
  out.degenerate = lsq.rank < 4;
  out.singular_values = lsq.sigma;

  DiffusionSpec spec{out.b[0], out.b[1], out.b[2], out.b[3]};
  SamplerConfig vcfg;
  vcfg.seed = cfg.seed + 1;
  vcfg.count = 100;
  vcfg.tolerance = cfg.validation_tolerance;
  vcfg.bindings = cfg.bindings;
  out.validation = check_identity(build_residual_diffusion(h, q, f, spec), vcfg);
  return out;
}

double b3_relation_first(double q, double b2, double b3) {
  return 2 * b2 * q - 2 * b2 - b3 * b3 * q + b3 * q + 4 * b3 - 6 * q;
}

double b3_relation_second(double q, double b2, double b3) {
  return 4 * b2 * q - 4 * b2 + b3 * b3 * q - 4 * b3 * q + 2 * b3 - 9 * q + 6;
}

B3Roots solve_b3_relations(double q) {
  if (q == 0.0) throw lde_error("q = 0 is not admissible");
  B3Roots out;
  out.roots = {1.0, (q + 2.0) / q};
  if (q != 1.0) out.b2_for_unit_root = (3.0 * q - 2.0) / (q - 1.0);
  return out;
}

}  // namespace difcon
