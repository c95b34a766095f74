#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "difcon/expr.hpp"

namespace difcon {

/// Highest admissible jet index; u10 and above never appear.
constexpr int kMaxJetIndex = 9;

struct jet_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<int> jet_index(const std::string& symbol);
std::string jet_symbol(int k);

/// Highest jet index free in e, or -1 when none.
int max_jet_index(const Expression& e);

/// Right-hand side F of u_t = F(t, x, u0..un) together with its order n.
/// The order is derived from the expression; an explicit u_t symbol or an
/// order below 1 is rejected.
class EvolutionEquation {
 public:
  explicit EvolutionEquation(Expression rhs);

  const Expression& rhs() const { return rhs_; }
  int order() const { return order_; }
  bool autonomous() const { return !rhs_.has_symbol("x") && !rhs_.has_symbol("t"); }

 private:
  Expression rhs_;
  int order_;
};

/// D_x e = de/dx + sum_{k<cap} u_{k+1} de/du_k.  Requires the highest jet
/// index of e to lie below cap and cap <= 9.
Expression total_x_derivative(const Expression& e, int cap);

/// D_x^k applied to the equation right-hand side: the evolution of u_k.
Expression prolong_rhs(const EvolutionEquation& eq, int k);

/// Total t-derivative restricted to solutions of eq: t-derivatives of jets
/// are eliminated through prolongations of the right-hand side.
Expression total_t_derivative(const Expression& e, const EvolutionEquation& eq);

// --- deterministic sampling ------------------------------------------------

/// splitmix64; the sole PRNG so reports are reproducible bit for bit.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

using VarRanges = std::map<std::string, std::pair<double, double>>;

/// Sampling windows keeping powers, logs and denominators in safe domains:
/// u0 in [0.5, 2], u1..u9 in [-2, 2], t in [0, 1], x in [-1, 1].
VarRanges default_jet_ranges();

/// Draws one point; iteration order of the map fixes the draw order.
EvalPoint draw_point(Rng& rng, const VarRanges& ranges);

}  // namespace difcon
