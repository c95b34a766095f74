#include "difcon/jet.hpp"

namespace difcon {

std::optional<int> jet_index(const std::string& symbol) {
  if (symbol.size() < 2 || symbol[0] != 'u') return std::nullopt;
  if (symbol.size() == 2 && symbol[1] >= '0' && symbol[1] <= '9') return symbol[1] - '0';
  return std::nullopt;
}

std::string jet_symbol(int k) { return "u" + std::to_string(k); }

int max_jet_index(const Expression& e) {
  int best = -1;
  for (const auto& s : e.free_symbols()) {
    if (auto k = jet_index(s)) best = std::max(best, *k);
  }
  return best;
}

EvolutionEquation::EvolutionEquation(Expression rhs) : rhs_(std::move(rhs)) {
  if (rhs_.has_symbol("ut"))
    throw jet_error("equation right-hand side must not contain a u_t symbol");
  order_ = max_jet_index(rhs_);
  if (order_ < 1) throw jet_error("equation right-hand side must involve at least u1");
}

Expression total_x_derivative(const Expression& e, int cap) {
  if (cap < 1 || cap > kMaxJetIndex)
    throw jet_error("jet cap " + std::to_string(cap) + " out of range [1, 9]");
  int p = max_jet_index(e);
  if (p >= cap)
    throw jet_error("expression of jet order " + std::to_string(p) +
                    " exceeds cap " + std::to_string(cap));
  Expression out = e.diff("x");
  for (int k = 0; k < cap; ++k) {
    Expression de = e.diff(jet_symbol(k));
    if (de.is_number(0.0)) continue;
    out = out + Expression::symbol(jet_symbol(k + 1)) * de;
  }
  return out.simplified();
}

Expression prolong_rhs(const EvolutionEquation& eq, int k) {
  if (k < 0) throw jet_error("negative prolongation order");
  if (eq.order() + k > kMaxJetIndex)
    throw jet_error("prolongation to order " + std::to_string(eq.order() + k) +
                    " exceeds the jet cap");
  Expression e = eq.rhs();
  for (int i = 1; i <= k; ++i) e = total_x_derivative(e, eq.order() + i);
  return e;
}

Expression total_t_derivative(const Expression& e, const EvolutionEquation& eq) {
  int p = max_jet_index(e);
  if (p + eq.order() > kMaxJetIndex)
    throw jet_error("total t-derivative would exceed the jet cap");
  Expression out = e.diff("t");
  for (int k = 0; k <= std::max(p, 0); ++k) {
    Expression de = e.diff(jet_symbol(k));
    if (de.is_number(0.0)) continue;
    out = out + prolong_rhs(eq, k) * de;
  }
  return out.simplified();
}

VarRanges default_jet_ranges() {
  VarRanges r;
  r["t"] = {0.0, 1.0};
  r["x"] = {-1.0, 1.0};
  r["u0"] = {0.5, 2.0};
  for (int k = 1; k <= kMaxJetIndex; ++k) r[jet_symbol(k)] = {-2.0, 2.0};
  return r;
}

EvalPoint draw_point(Rng& rng, const VarRanges& ranges) {
  EvalPoint p;
  for (const auto& [name, lohi] : ranges) p[name] = rng.uniform(lohi.first, lohi.second);
  return p;
}

}  // namespace difcon
