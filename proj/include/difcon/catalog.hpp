#pragma once

#include <optional>

#include "difcon/lde.hpp"

namespace difcon {

struct catalog_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParamSpec {
  std::string name;
  double lo = 0.2;
  double hi = 1.2;
  std::optional<double> fixed;
};

struct QSpec {
  std::optional<double> fixed;
  double lo = -3.0;
  double hi = 3.0;
  std::vector<double> excluded;  // draws stay 0.15 away from these and from 0
};

struct Condition {
  std::string expr;    // expression in q and the entry parameters
  bool must_be_zero;   // true: |value| <= 1e-12, false: |value| > 1e-9
  std::string describe;
};

/// Data for a compatibility-drift run: an initial profile on the constraint
/// manifold and the exact reference solution supplying boundary values.
struct DriftSpec {
  std::map<std::string, double> params;
  std::string initial_src;    // expression in x
  std::string reference_src;  // expression in t, x
  bool use_corrected_h = false;
};

struct ConstraintEntry {
  std::string id;
  int order = 2;
  QSpec q;
  std::string f_src;
  std::string h_src;
  std::optional<std::string> h_corrected_src;
  std::optional<std::string> erratum;
  std::vector<std::string> expected_b;  // 4 expressions in q; empty when unstated
  std::vector<ParamSpec> params;
  std::vector<Condition> conditions;
  std::string provenance;
  std::optional<DriftSpec> drift;
};

/// Equation behind a solution family or representation.
///   diffusion1d - u_t = (u^q u_x)_x + f(u), q and f from entry data
///   rhs1d       - explicit right-hand side in jet variables
///   fast2d-u    - u_t = lap ln u   (2-D, checked via residual_2d)
///   fast2d-v    - v_t = v^2 lap ln v
struct PdeSpec {
  std::string type;
  std::string q_src;    // diffusion1d: expression in parameters, e.g. "q" or "-0.5"
  std::string f_src;    // diffusion1d
  std::string rhs_src;  // rhs1d
};

struct SolutionForm {
  std::string label;
  std::string role;  // "printed" | "verified" | "extra" | "conformal"
  std::string expr_src;
  std::map<std::string, double> params;
  VarRanges window;
  std::string expect;  // "pass" | "fail" | "record"
  std::vector<double> conformal_coeffs;  // role == "conformal": polynomial map
};

struct SolutionFamily {
  std::string id;
  PdeSpec pde;
  std::vector<SolutionForm> forms;
  std::string provenance;
  std::optional<std::string> erratum;
};

struct RepresentationEntry {
  std::string id;
  std::string constraint_id;
  std::string branch;  // admissibility note, e.g. "q != -1"
  std::string ansatz_src;
  std::vector<std::string> coefficients;
  std::vector<std::string> ode_srcs;
  PdeSpec pde;
  std::string h_src;  // generating constraint in jet variables, may be empty
  std::map<std::string, double> default_params;
  std::vector<double> default_init;
  double default_t0 = 0.0;
  std::string provenance;
};

struct Catalog {
  std::vector<ConstraintEntry> constraints;
  std::vector<SolutionFamily> solutions;
  std::vector<RepresentationEntry> representations;

  const ConstraintEntry& constraint(const std::string& id) const;
  const SolutionFamily& solution(const std::string& id) const;
  const RepresentationEntry& representation(const std::string& id) const;
};

Catalog load_catalog(const std::string& path);
Catalog load_catalog_string(const std::string& text);
std::string serialize_catalog(const Catalog& c);

/// DIFCON_CATALOG env var when set, else the build-time data directory.
std::string default_catalog_path();

struct InstantiatedConstraint {
  EvolutionEquation eq;
  Expression h;
  std::optional<Expression> h_corrected;
  double q = 0.0;
  std::map<std::string, double> params;
};

/// Substitutes numeric parameters; rejects inadmissible values naming the
/// violated constraint.
InstantiatedConstraint instantiate_constraint(const ConstraintEntry& entry,
                                              std::map<std::string, double> params);

std::map<std::string, double> draw_constraint_params(const ConstraintEntry& entry, Rng& rng);

/// Expected b values at the given q, when the entry states them.
std::optional<std::array<double, 4>> expected_b_values(const ConstraintEntry& entry, double q);

/// Builds the 1-D evolution equation of a PdeSpec ("diffusion1d" or "rhs1d").
EvolutionEquation pde_equation_1d(const PdeSpec& pde,
                                  const std::map<std::string, double>& params);

}  // namespace difcon
