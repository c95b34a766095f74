#pragma once

#include <array>
#include <optional>

#include "difcon/jet.hpp"

namespace difcon {

struct lde_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Coefficients b_ik (0 <= k <= i <= order) of the general linear
/// determining equation for an order-n evolution equation.
struct GeneralSpec {
  int order = 2;
  std::vector<std::vector<double>> b;

  static GeneralSpec zero(int order);
  /// b_ik = delta_ik: the classical-symmetry choice.
  static GeneralSpec classical(int order);
};

/// Reduced coefficients (b1..b4) for the power-law diffusion equation;
/// the leading u^q D_x^2 h term carries an implicit coefficient 1.
struct DiffusionSpec {
  double b1 = 0, b2 = 0, b3 = 0, b4 = 0;
};

struct SamplerConfig {
  std::uint64_t seed = 0;
  int count = 100;
  double tolerance = 1e-8;
  VarRanges ranges = default_jet_ranges();
  std::map<std::string, double> bindings;  // parameter values merged into every sample
};

struct ResidualReport {
  int num_samples = 0;
  double max_abs = 0.0;
  double rms = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  EvalPoint worst_point;
  std::uint64_t seed = 0;
  int resamples = 0;
};

struct FitResult {
  std::array<double, 4> b{};
  int rank = 0;
  bool degenerate = false;
  std::array<double, 4> singular_values{};
  ResidualReport validation;
};

/// u_t = u^q u2 + q u^(q-1) u1^2 + f(u0), q != 0.
EvolutionEquation diffusion_equation(double q, const Expression& f);

/// Residual of the general determining equation:
///   D_t h - sum_{i,k} b_ik D_x^{i-k}(dF/du_{N-k}) D_x^{N-i}(h).
/// Identically zero on jet space iff h solves the determining equation.
Expression build_residual_general(const Expression& h, const EvolutionEquation& eq,
                                  const GeneralSpec& spec);

/// The reduced residual split into its affine pieces: residual =
/// lhs - b1*basis[0] - b2*basis[1] - b3*basis[2] - b4*basis[3].
struct DiffusionTerms {
  Expression lhs;
  std::array<Expression, 4> basis;
};
DiffusionTerms build_diffusion_terms(const Expression& h, double q, const Expression& f);

Expression build_residual_diffusion(const Expression& h, double q, const Expression& f,
                                    const DiffusionSpec& spec);

/// Seeded randomized jet-space identity test.  Residual values are
/// normalized by 1 + the magnitude of the largest additive term; samples
/// hitting domain errors are redrawn (at most 10 times each).
ResidualReport check_identity(const Expression& residual, const SamplerConfig& cfg);

struct FitConfig {
  std::uint64_t seed = 0;
  int rows = 8;
  std::map<std::string, double> bindings;
  std::vector<EvalPoint> points_override;  // tests may inject sample points
  double validation_tolerance = 1e-7;
};

/// Least-squares recovery of (b1..b4) from sampled jet points, with rank
/// from singular values (cutoff 1e-10 * sigma_max).  Rank-deficient systems
/// return the minimum-norm solution and set the degeneracy flag.
FitResult fit_b_coefficients(const Expression& h, double q, const Expression& f,
                             const FitConfig& cfg = {});

struct B3Roots {
  std::array<double, 2> roots;            // {1, (q+2)/q}
  std::optional<double> b2_for_unit_root; // (3q-2)/(q-1), absent at q = 1
};

/// Eliminates b2 between the two branch relations and returns the b3 roots.
B3Roots solve_b3_relations(double q);

double b3_relation_first(double q, double b2, double b3);
double b3_relation_second(double q, double b2, double b3);

}  // namespace difcon
