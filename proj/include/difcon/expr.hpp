#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace difcon {

struct parse_error : std::runtime_error {
  parse_error(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte " + std::to_string(offset) + ")"), offset(offset) {}
  std::size_t offset;
};

struct eval_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class NodeKind { Number, Symbol, Add, Sub, Mul, Div, Pow, Call };

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  NodeKind kind;
  double number = 0.0;  // Number
  std::string name;     // Symbol name or Call function name
  NodePtr a, b;         // operands; Call uses a only
};

/// Point binding symbol names to real values.
using EvalPoint = std::map<std::string, double>;

/// Immutable expression tree over independent variables (t, x, y), jet
/// variables u0..u9 ("u" parses as u0) and free parameters.  All operations
/// are pure; trees are shared and never mutated after construction.
class Expression {
 public:
  Expression() = default;

  static Expression number(double v);
  static Expression symbol(std::string name);
  static Expression call(const std::string& fn, Expression arg);

  bool empty() const { return node_ == nullptr; }
  const ExprNode& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }

  std::string str() const;
  std::set<std::string> free_symbols() const;
  bool has_symbol(const std::string& name) const;

  /// Exact structural partial derivative; jet variables are independent
  /// coordinates.  The result is passed through simplify().
  Expression diff(const std::string& var) const;

  double eval(const EvalPoint& point) const;

  /// Simultaneous, non-recursive replacement of symbols.
  Expression subst(const std::map<std::string, Expression>& bindings) const;
  Expression subst_numbers(const std::map<std::string, double>& bindings) const;

  /// Constant folding, 0/1 identities and flattening of sums/products.
  /// Value-preserving at every point where the input evaluates.
  Expression simplified() const;

  bool same_as(const Expression& other) const;
  bool is_number(double v) const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);

 private:
  explicit Expression(NodePtr n) : node_(std::move(n)) {}
  NodePtr node_;
  friend Expression make(NodeKind, Expression, Expression);
  friend Expression from_node(NodePtr);
  friend class Parser;
};

Expression pow(const Expression& base, const Expression& exponent);
Expression from_node(NodePtr p);
inline Expression operator+(const Expression& a, double b) { return a + Expression::number(b); }
inline Expression operator*(double a, const Expression& b) { return Expression::number(a) * b; }

/// Parse source text in the published grammar.  Throws parse_error with the
/// byte offset of the failure; unknown function names are rejected.
Expression parse(std::string_view source);

const std::vector<std::string>& known_functions();

/// Flattens an expression through top-level +/- into signed terms
/// (+1 or -1).  Used for scale-aware residual normalization.
std::vector<std::pair<int, Expression>> additive_terms(const Expression& e);

/// Expression flattened to a postfix program over a fixed variable layout,
/// for tight evaluation loops (method of lines, trajectory sampling).
class CompiledExpr {
 public:
  CompiledExpr() = default;
  static CompiledExpr compile(const Expression& e, const std::vector<std::string>& vars);

  double eval(std::span<const double> vars) const;
  /// Evaluates n points at once; columns[i] points at n values of vars[i].
  void eval_lanes(std::span<const double* const> columns, std::size_t n, double* out) const;

 private:
  enum class Op : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Pow, PowConst, Fn };
  struct Instr {
    Op op;
    std::int32_t arg = 0;  // const index, var index, or function id
    double value = 0.0;    // PowConst exponent
  };
  std::vector<Instr> prog_;
  std::vector<double> consts_;
  std::size_t stack_need_ = 0;
  mutable std::vector<std::vector<double>> lanes_;  // scratch, resized on use
};

}  // namespace difcon
