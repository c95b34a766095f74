#include "difcon/catalog.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace difcon {

using json = nlohmann::ordered_json;

namespace {

constexpr double kExclusionRadius = 0.15;

json ranges_to_json(const VarRanges& w) {
  json out = json::object();
  for (const auto& [k, v] : w) out[k] = json::array({v.first, v.second});
  return out;
}

VarRanges ranges_from_json(const json& j) {
  VarRanges out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = {it.value().at(0).get<double>(), it.value().at(1).get<double>()};
  return out;
}

json params_map_to_json(const std::map<std::string, double>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

std::map<std::string, double> params_map_from_json(const json& j) {
  std::map<std::string, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value().get<double>();
  return out;
}

void validate_expr(const std::string& src, const std::string& where) {
  try {
    (void)parse(src);
  } catch (const parse_error& e) {
    throw catalog_error("bad expression in " + where + ": " + e.what() + " [" + src + "]");
  }
}

PdeSpec pde_from_json(const json& j) {
  PdeSpec p;
  p.type = j.at("type").get<std::string>();
  if (p.type == "diffusion1d") {
    p.q_src = j.at("q").get<std::string>();
    p.f_src = j.at("f").get<std::string>();
    validate_expr(p.q_src, "pde.q");
    validate_expr(p.f_src, "pde.f");
  } else if (p.type == "rhs1d") {
    p.rhs_src = j.at("rhs").get<std::string>();
    validate_expr(p.rhs_src, "pde.rhs");
  } else if (p.type != "fast2d-u" && p.type != "fast2d-v") {
    throw catalog_error("unknown pde type '" + p.type + "'");
  }
  return p;
}

json pde_to_json(const PdeSpec& p) {
  json out = json::object();
  out["type"] = p.type;
  if (p.type == "diffusion1d") {
    out["q"] = p.q_src;
    out["f"] = p.f_src;
  } else if (p.type == "rhs1d") {
    out["rhs"] = p.rhs_src;
  }
  return out;
}

}  // namespace

const ConstraintEntry& Catalog::constraint(const std::string& id) const {
  for (const auto& c : constraints)
    if (c.id == id) return c;
  throw catalog_error("unknown constraint id '" + id + "'");
}

const SolutionFamily& Catalog::solution(const std::string& id) const {
  for (const auto& s : solutions)
    if (s.id == id) return s;
  throw catalog_error("unknown solution id '" + id + "'");
}

const RepresentationEntry& Catalog::representation(const std::string& id) const {
  for (const auto& r : representations)
    if (r.id == id) return r;
  throw catalog_error("unknown representation id '" + id + "'");
}

Catalog load_catalog_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    throw catalog_error(std::string("catalog is not valid JSON: ") + e.what());
  }

  Catalog cat;
  for (const auto& j : root.at("constraints")) {
    ConstraintEntry e;
    e.id = j.at("id").get<std::string>();
    e.order = j.at("order").get<int>();
    const json& q = j.at("q");
    if (q.contains("fixed")) {
      e.q.fixed = q.at("fixed").get<double>();
    } else {
      e.q.lo = q.at("range").at(0).get<double>();
      e.q.hi = q.at("range").at(1).get<double>();
      for (const auto& x : q.value("excluded", json::array())) e.q.excluded.push_back(x);
    }
    e.f_src = j.at("f").get<std::string>();
    e.h_src = j.at("h").get<std::string>();
    validate_expr(e.f_src, e.id + ".f");
    validate_expr(e.h_src, e.id + ".h");
    if (j.contains("h_corrected")) {
      e.h_corrected_src = j.at("h_corrected").get<std::string>();
      validate_expr(*e.h_corrected_src, e.id + ".h_corrected");
    }
    if (j.contains("erratum")) e.erratum = j.at("erratum").get<std::string>();
    for (const auto& b : j.value("expected_b", json::array())) {
      e.expected_b.push_back(b.get<std::string>());
      validate_expr(e.expected_b.back(), e.id + ".expected_b");
    }
    if (!e.expected_b.empty() && e.expected_b.size() != 4)
      throw catalog_error(e.id + ": expected_b must have exactly 4 entries");
    for (const auto& p : j.value("params", json::array())) {
      ParamSpec ps;
      ps.name = p.at("name").get<std::string>();
      if (p.contains("fixed")) {
        ps.fixed = p.at("fixed").get<double>();
      } else if (p.contains("range")) {
        ps.lo = p.at("range").at(0).get<double>();
        ps.hi = p.at("range").at(1).get<double>();
      }
      e.params.push_back(ps);
    }
    for (const auto& c : j.value("conditions", json::array())) {
      Condition cond;
      cond.expr = c.at("expr").get<std::string>();
      cond.must_be_zero = c.at("require").get<std::string>() == "zero";
      cond.describe = c.at("desc").get<std::string>();
      validate_expr(cond.expr, e.id + ".condition");
      e.conditions.push_back(cond);
    }
    e.provenance = j.at("provenance").get<std::string>();
    if (j.contains("drift")) {
      DriftSpec d;
      const json& dj = j.at("drift");
      d.params = params_map_from_json(dj.at("params"));
      d.initial_src = dj.at("initial").get<std::string>();
      d.reference_src = dj.at("reference").get<std::string>();
      d.use_corrected_h = dj.value("use_corrected_h", false);
      validate_expr(d.initial_src, e.id + ".drift.initial");
      validate_expr(d.reference_src, e.id + ".drift.reference");
      e.drift = d;
    }
    cat.constraints.push_back(std::move(e));
  }

  for (const auto& j : root.at("solutions")) {
    SolutionFamily s;
    s.id = j.at("id").get<std::string>();
    s.pde = pde_from_json(j.at("pde"));
    for (const auto& fj : j.at("forms")) {
      SolutionForm f;
      f.label = fj.at("label").get<std::string>();
      f.role = fj.at("role").get<std::string>();
      f.expr_src = fj.at("expr").get<std::string>();
      validate_expr(f.expr_src, s.id + "." + f.label);
      f.params = params_map_from_json(fj.value("params", json::object()));
      f.window = ranges_from_json(fj.at("window"));
      f.expect = fj.at("expect").get<std::string>();
      for (const auto& c : fj.value("conformal_coeffs", json::array()))
        f.conformal_coeffs.push_back(c.get<double>());
      s.forms.push_back(std::move(f));
    }
    s.provenance = j.at("provenance").get<std::string>();
    if (j.contains("erratum")) s.erratum = j.at("erratum").get<std::string>();
    cat.solutions.push_back(std::move(s));
  }

  for (const auto& j : root.at("representations")) {
    RepresentationEntry r;
    r.id = j.at("id").get<std::string>();
    r.constraint_id = j.value("constraint", "");
    r.branch = j.value("branch", "");
    r.ansatz_src = j.at("ansatz").get<std::string>();
    validate_expr(r.ansatz_src, r.id + ".ansatz");
    for (const auto& c : j.at("coefficients")) r.coefficients.push_back(c.get<std::string>());
    for (const auto& o : j.at("odes")) {
      r.ode_srcs.push_back(o.get<std::string>());
      validate_expr(r.ode_srcs.back(), r.id + ".ode");
    }
    if (r.ode_srcs.size() != r.coefficients.size())
      throw catalog_error(r.id + ": one ODE per coefficient required");
    r.pde = pde_from_json(j.at("pde"));
    r.h_src = j.value("h", "");
    if (!r.h_src.empty()) validate_expr(r.h_src, r.id + ".h");
    r.default_params = params_map_from_json(j.value("params", json::object()));
    for (const auto& v : j.value("init", json::array())) r.default_init.push_back(v.get<double>());
    r.default_t0 = j.value("t0", 0.0);
    r.provenance = j.at("provenance").get<std::string>();
    cat.representations.push_back(std::move(r));
  }

  return cat;
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw catalog_error("cannot open catalog file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_catalog_string(ss.str());
}

std::string serialize_catalog(const Catalog& cat) {
  json root;
  root["constraints"] = json::array();
  for (const auto& e : cat.constraints) {
    json j;
    j["id"] = e.id;
    j["order"] = e.order;
    if (e.q.fixed) {
      j["q"] = json{{"fixed", *e.q.fixed}};
    } else {
      json q;
      q["range"] = json::array({e.q.lo, e.q.hi});
      q["excluded"] = e.q.excluded;
      j["q"] = q;
    }
    j["f"] = e.f_src;
    j["h"] = e.h_src;
    if (e.h_corrected_src) j["h_corrected"] = *e.h_corrected_src;
    if (e.erratum) j["erratum"] = *e.erratum;
    if (!e.expected_b.empty()) j["expected_b"] = e.expected_b;
    json params = json::array();
    for (const auto& p : e.params) {
      json pj;
      pj["name"] = p.name;
      if (p.fixed)
        pj["fixed"] = *p.fixed;
      else
        pj["range"] = json::array({p.lo, p.hi});
      params.push_back(pj);
    }
    j["params"] = params;
    if (!e.conditions.empty()) {
      json conds = json::array();
      for (const auto& c : e.conditions)
        conds.push_back(json{{"expr", c.expr},
                             {"require", c.must_be_zero ? "zero" : "nonzero"},
                             {"desc", c.describe}});
      j["conditions"] = conds;
    }
    j["provenance"] = e.provenance;
    if (e.drift) {
      json dj;
      dj["params"] = params_map_to_json(e.drift->params);
      dj["initial"] = e.drift->initial_src;
      dj["reference"] = e.drift->reference_src;
      dj["use_corrected_h"] = e.drift->use_corrected_h;
      j["drift"] = dj;
    }
    root["constraints"].push_back(j);
  }

  root["solutions"] = json::array();
  for (const auto& s : cat.solutions) {
    json j;
    j["id"] = s.id;
    j["pde"] = pde_to_json(s.pde);
    json forms = json::array();
    for (const auto& f : s.forms) {
      json fj;
      fj["label"] = f.label;
      fj["role"] = f.role;
      fj["expr"] = f.expr_src;
      fj["params"] = params_map_to_json(f.params);
      fj["window"] = ranges_to_json(f.window);
      fj["expect"] = f.expect;
      if (!f.conformal_coeffs.empty()) fj["conformal_coeffs"] = f.conformal_coeffs;
      forms.push_back(fj);
    }
    j["forms"] = forms;
    j["provenance"] = s.provenance;
    if (s.erratum) j["erratum"] = *s.erratum;
    root["solutions"].push_back(j);
  }

  root["representations"] = json::array();
  for (const auto& r : cat.representations) {
    json j;
    j["id"] = r.id;
    if (!r.constraint_id.empty()) j["constraint"] = r.constraint_id;
    if (!r.branch.empty()) j["branch"] = r.branch;
    j["ansatz"] = r.ansatz_src;
    j["coefficients"] = r.coefficients;
    j["odes"] = r.ode_srcs;
    j["pde"] = pde_to_json(r.pde);
    if (!r.h_src.empty()) j["h"] = r.h_src;
    j["params"] = params_map_to_json(r.default_params);
    j["init"] = r.default_init;
    j["t0"] = r.default_t0;
    j["provenance"] = r.provenance;
    root["representations"].push_back(j);
  }

  return root.dump(2) + "\n";
}

std::string default_catalog_path() {
  if (const char* env = std::getenv("DIFCON_CATALOG")) return env;
  return std::string(DIFCON_DATA_DIR) + "/catalog.json";
}

InstantiatedConstraint instantiate_constraint(const ConstraintEntry& entry,
                                              std::map<std::string, double> params) {
  double q;
  if (entry.q.fixed) {
    q = *entry.q.fixed;
    params["q"] = q;
  } else {
    auto it = params.find("q");
    if (it == params.end()) throw catalog_error(entry.id + ": parameter q required");
    q = it->second;
  }
  for (const auto& ex : entry.q.excluded) {
    if (std::fabs(q - ex) < 1e-9)
      throw catalog_error(entry.id + ": inadmissible parameters (q != " +
                          std::to_string(ex) + " required)");
  }
  if (std::fabs(q) < 1e-9)
    throw catalog_error(entry.id + ": inadmissible parameters (q != 0 required)");

  for (const auto& p : entry.params) {
    if (p.fixed && !params.count(p.name)) params[p.name] = *p.fixed;
    if (!params.count(p.name))
      throw catalog_error(entry.id + ": parameter '" + p.name + "' required");
  }

  EvalPoint pt(params.begin(), params.end());
  for (const auto& cond : entry.conditions) {
    double v;
    try {
      v = parse(cond.expr).eval(pt);
    } catch (const eval_error& e) {
      throw catalog_error(entry.id + ": condition '" + cond.describe +
                          "' not evaluable: " + e.what());
    }
    bool ok = cond.must_be_zero ? std::fabs(v) <= 1e-12 : std::fabs(v) > 1e-9;
    if (!ok)
      throw catalog_error(entry.id + ": inadmissible parameters (" + cond.describe + ")");
  }

  InstantiatedConstraint out{
      diffusion_equation(q, parse(entry.f_src).subst_numbers(params).simplified()),
      parse(entry.h_src).subst_numbers(params).simplified(),
      std::nullopt,
      q,
      params};
  if (entry.h_corrected_src)
    out.h_corrected = parse(*entry.h_corrected_src).subst_numbers(params).simplified();

  for (const auto& sym : out.h.free_symbols()) {
    if (sym != "t" && sym != "x" && !jet_index(sym))
      throw catalog_error(entry.id + ": unbound symbol '" + sym + "' after instantiation");
  }
  return out;
}

std::map<std::string, double> draw_constraint_params(const ConstraintEntry& entry, Rng& rng) {
  std::map<std::string, double> params;
  if (entry.q.fixed) {
    params["q"] = *entry.q.fixed;
  } else {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      double q = rng.uniform(entry.q.lo, entry.q.hi);
      bool ok = std::fabs(q) >= kExclusionRadius;
      for (double ex : entry.q.excluded) ok = ok && std::fabs(q - ex) >= kExclusionRadius;
      if (ok) {
        params["q"] = q;
        break;
      }
    }
    if (!params.count("q")) throw catalog_error(entry.id + ": could not draw admissible q");
  }
  for (const auto& p : entry.params)
    params[p.name] = p.fixed ? *p.fixed : rng.uniform(p.lo, p.hi);
  return params;
}

std::optional<std::array<double, 4>> expected_b_values(const ConstraintEntry& entry, double q) {
  if (entry.expected_b.size() != 4) return std::nullopt;
  std::array<double, 4> out{};
  EvalPoint pt{{"q", q}};
  for (int i = 0; i < 4; ++i) {
    try {
      out[i] = parse(entry.expected_b[i]).eval(pt);
    } catch (const eval_error&) {
      return std::nullopt;  // e.g. (3q-2)/(q-1) at q = 1
    }
  }
  return out;
}

EvolutionEquation pde_equation_1d(const PdeSpec& pde,
                                  const std::map<std::string, double>& params) {
  EvalPoint pt(params.begin(), params.end());
  if (pde.type == "diffusion1d") {
    double q = parse(pde.q_src).eval(pt);
    Expression f = parse(pde.f_src).subst_numbers(params).simplified();
    return diffusion_equation(q, f);
  }
  if (pde.type == "rhs1d") {
    return EvolutionEquation(parse(pde.rhs_src).subst_numbers(params).simplified());
  }
  throw catalog_error("pde type '" + pde.type + "' is not a 1-D evolution equation");
}

}  // namespace difcon
