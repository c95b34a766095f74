#pragma once

#include "difcon/lde.hpp"

namespace difcon {

struct pde_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform 1-D space-time grid for evolution runs.
struct Grid1D {
  double x0 = -1.0;
  double x1 = 1.0;
  int nx = 401;
  double t0 = 0.0;
  double t1 = 0.1;
  double dt = 1e-6;
  /// Safety factor on the diffusivity in the stability bound; covers the
  /// gradient-squared term of the expanded divergence form.
  double stiffness_factor = 2.0;

  double dx() const { return (x1 - x0) / (nx - 1); }
  double x_at(int i) const { return x0 + dx() * i; }
};

/// Residual u_t - F evaluated with exact symbolic derivatives of the given
/// closed form; sampled over the (t, x) window in cfg.ranges.
ResidualReport residual_exact(const Expression& u, const EvolutionEquation& eq,
                              const SamplerConfig& cfg);

/// The residual expression itself (for value-preservation tests).
Expression exact_residual_expression(const Expression& u, const EvolutionEquation& eq);

struct FieldHistory {
  std::vector<double> times;
  std::vector<std::vector<double>> fields;
  std::vector<double> xs;
  double dt = 0.0;
  bool blow_up = false;
  std::string boundary;  // "dirichlet-reference" or "reflective"
};

/// One row per (t, x) node: "t,x,u".
std::string field_history_csv(const FieldHistory& hist);

/// Method of lines: second-order central differences in x, classical RK4 in
/// t.  Boundary values follow the reference solution when one is supplied,
/// otherwise reflective (u_x = 0) boundaries are used.  Refuses time steps
/// above the stability bound 0.2 dx^2 / (stiffness_factor * max |dF/du2|),
/// re-evaluated every step.
FieldHistory mol_evolve(const EvolutionEquation& eq, const std::vector<double>& initial,
                        const Grid1D& grid, const Expression* reference = nullptr,
                        int output_every = 0);

struct DriftReport {
  std::vector<double> times;
  std::vector<double> h_inf;
  double initial_exact = 0.0;  // h on the initial closed form, exact derivatives
  double initial_fd = 0.0;     // h on the initial grid data, central differences
  double threshold = 0.0;
  double growth_factor = 0.0;
  bool pass = false;
  std::string boundary;
  bool blow_up = false;
};

/// Evolves initial data lying on the constraint manifold and tracks the
/// finite-difference norm of h over the field.  Pass criterion:
/// max_t ||h||_inf <= max(100 * initial, 1e-4).
DriftReport constraint_drift(const EvolutionEquation& eq, const Expression& h,
                             const Expression& initial, const Grid1D& grid,
                             const Expression* reference = nullptr);

enum class Form2D { FastU, FastV };

/// Residual of u_t = lap ln u (FastU) or v_t = v^2 lap ln v (FastV) with all
/// derivatives taken symbolically; sampled over the (t, x, y) window.
ResidualReport residual_2d(const Expression& field, Form2D form, const SamplerConfig& cfg);

Expression residual_2d_expression(const Expression& field, Form2D form);

/// u(t, Re A, Im A) * |A'(z)|^2 for a polynomial map A(z) = sum coeffs[k] z^k.
Expression conformal_image_expression(const Expression& base_u,
                                      const std::vector<double>& coeffs);

/// Builds the image and checks it against u_t = lap ln u.  Requires A' != 0
/// over the sampled window.
ResidualReport conformal_image(const Expression& base_u, const std::vector<double>& coeffs,
                               const SamplerConfig& cfg);

}  // namespace difcon
