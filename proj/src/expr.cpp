#include "difcon/expr.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <functional>

namespace difcon {

namespace {

const std::vector<std::string> kFunctions = {"exp", "ln",   "sin",  "cos", "tan",
                                             "sinh", "cosh", "tanh", "sqrt"};

bool is_known_function(const std::string& name) {
  return std::find(kFunctions.begin(), kFunctions.end(), name) != kFunctions.end();
}

int function_id(const std::string& name) {
  auto it = std::find(kFunctions.begin(), kFunctions.end(), name);
  return static_cast<int>(it - kFunctions.begin());
}

double apply_function(int id, double x, bool* domain_ok) {
  *domain_ok = true;
  switch (id) {
    case 0: return std::exp(x);
    case 1:
      if (x <= 0.0) { *domain_ok = false; return 0.0; }
      return std::log(x);
    case 2: return std::sin(x);
    case 3: return std::cos(x);
    case 4: return std::tan(x);
    case 5: return std::sinh(x);
    case 6: return std::cosh(x);
    case 7: return std::tanh(x);
    case 8:
      if (x <= 0.0) { *domain_ok = false; return 0.0; }
      return std::sqrt(x);
  }
  *domain_ok = false;
  return 0.0;
}

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15; }

double checked_pow(double base, double expo, bool* ok) {
  *ok = true;
  if (base == 0.0) {
    if (expo > 0.0) return 0.0;
    *ok = false;  // 0^0 and negative exponents
    return 0.0;
  }
  if (base < 0.0 && !is_integral(expo)) {
    *ok = false;
    return 0.0;
  }
  return std::pow(base, expo);
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

NodePtr mk(NodeKind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr mk_num(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Number;
  n->number = v;
  return n;
}

NodePtr mk_sym(std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Symbol;
  n->name = std::move(name);
  return n;
}

NodePtr mk_call(const std::string& fn, NodePtr arg) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Call;
  n->name = fn;
  n->a = std::move(arg);
  return n;
}

bool node_is_number(const NodePtr& n, double v) {
  return n && n->kind == NodeKind::Number && n->number == v;
}

bool same_node(const NodePtr& a, const NodePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Number:
      return std::bit_cast<std::uint64_t>(a->number) == std::bit_cast<std::uint64_t>(b->number);
    case NodeKind::Symbol:
      return a->name == b->name;
    case NodeKind::Call:
      return a->name == b->name && same_node(a->a, b->a);
    default:
      return same_node(a->a, b->a) && same_node(a->b, b->b);
  }
}

}  // namespace

const std::vector<std::string>& known_functions() { return kFunctions; }

Expression make(NodeKind k, Expression a, Expression b) {
  Expression e;
  e.node_ = mk(k, a.ptr(), b.ptr());
  return Expression(e.node_);
}

Expression Expression::number(double v) { return Expression(mk_num(v)); }
Expression Expression::symbol(std::string name) { return Expression(mk_sym(std::move(name))); }

Expression Expression::call(const std::string& fn, Expression arg) {
  if (!is_known_function(fn)) throw eval_error("unknown function '" + fn + "'");
  return Expression(mk_call(fn, arg.ptr()));
}

Expression operator+(const Expression& a, const Expression& b) { return make(NodeKind::Add, a, b); }
Expression operator-(const Expression& a, const Expression& b) { return make(NodeKind::Sub, a, b); }
Expression operator*(const Expression& a, const Expression& b) { return make(NodeKind::Mul, a, b); }
Expression operator/(const Expression& a, const Expression& b) { return make(NodeKind::Div, a, b); }
Expression pow(const Expression& a, const Expression& b) { return make(NodeKind::Pow, a, b); }

bool Expression::same_as(const Expression& other) const { return same_node(node_, other.node_); }

bool Expression::is_number(double v) const { return node_is_number(node_, v); }

// ---------------------------------------------------------------------------
// Parser.  Grammar (see docs/grammar.md):
//   expression = term { ("+"|"-") term }
//   term       = unary { ("*"|"/") unary }
//   unary      = "-" unary | power
//   power      = atom [ "^" unary ]          (right associative)
//   atom       = number | ident | ident "(" expression ")" | "(" expression ")"
// "u" is an alias for the jet variable u0; unary minus applied directly to a
// numeric literal folds into a negative literal so printing round-trips.

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expression run() {
    skip_ws();
    if (pos_ >= src_.size()) throw parse_error("empty expression", 0);
    NodePtr e = expression();
    skip_ws();
    if (pos_ != src_.size()) throw parse_error("unexpected trailing input", pos_);
    return Expression(std::move(e));
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  NodePtr expression() {
    NodePtr left = term();
    for (;;) {
      if (eat('+')) {
        left = mk(NodeKind::Add, std::move(left), term());
      } else if (eat('-')) {
        left = mk(NodeKind::Sub, std::move(left), term());
      } else {
        return left;
      }
    }
  }

  NodePtr term() {
    NodePtr left = unary();
    for (;;) {
      if (eat('*')) {
        left = mk(NodeKind::Mul, std::move(left), unary());
      } else if (eat('/')) {
        left = mk(NodeKind::Div, std::move(left), unary());
      } else {
        return left;
      }
    }
  }

  NodePtr unary() {
    if (eat('-')) {
      NodePtr operand = unary();
      if (operand->kind == NodeKind::Number) return mk_num(-operand->number);
      return mk(NodeKind::Sub, mk_num(0.0), std::move(operand));
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return mk(NodeKind::Pow, std::move(base), unary());
    return base;
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= src_.size()) throw parse_error("unexpected end of input", pos_);
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expression();
      if (!eat(')')) throw parse_error("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw parse_error(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr number_literal() {
    double value = 0.0;
    const char* first = src_.data() + pos_;
    const char* last = src_.data() + src_.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{}) throw parse_error("malformed number", pos_);
    // from_chars accepts "1e+5"; stop before a '+'/'-' only when no exponent
    pos_ = static_cast<std::size_t>(res.ptr - src_.data());
    return mk_num(value);
  }

  NodePtr identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string name(src_.substr(start, pos_ - start));
    if (peek() == '(') {
      if (!is_known_function(name)) throw parse_error("unknown function '" + name + "'", start);
      eat('(');
      NodePtr arg = expression();
      if (!eat(')')) throw parse_error("expected ')'", pos_);
      return mk_call(name, std::move(arg));
    }
    if (name == "u") name = "u0";
    return mk_sym(std::move(name));
  }
};

Expression parse(std::string_view source) { return Parser(source).run(); }

// ---------------------------------------------------------------------------
// Printing with minimal parentheses; parse(str()) reproduces the tree.

namespace {

void render(const NodePtr& n, int min_prec, std::string& out) {
  auto wrap = [&](int prec, auto&& body) {
    if (prec < min_prec) {
      out += '(';
      body();
      out += ')';
    } else {
      body();
    }
  };
  switch (n->kind) {
    case NodeKind::Number:
      if (std::signbit(n->number)) {
        wrap(1, [&] { out += format_double(n->number); });
      } else {
        out += format_double(n->number);
      }
      return;
    case NodeKind::Symbol:
      out += n->name;
      return;
    case NodeKind::Call:
      out += n->name;
      out += '(';
      render(n->a, 0, out);
      out += ')';
      return;
    case NodeKind::Sub:
      if (node_is_number(n->a, 0.0) && !std::signbit(n->a->number)) {
        // unary minus form
        wrap(1, [&] {
          out += '-';
          render(n->b, 3, out);
        });
        return;
      }
      wrap(1, [&] {
        render(n->a, 1, out);
        out += '-';
        render(n->b, 2, out);
      });
      return;
    case NodeKind::Add:
      wrap(1, [&] {
        render(n->a, 1, out);
        out += '+';
        render(n->b, 2, out);
      });
      return;
    case NodeKind::Mul:
      wrap(2, [&] {
        render(n->a, 2, out);
        out += '*';
        render(n->b, 3, out);
      });
      return;
    case NodeKind::Div:
      wrap(2, [&] {
        render(n->a, 2, out);
        out += '/';
        render(n->b, 3, out);
      });
      return;
    case NodeKind::Pow:
      wrap(3, [&] {
        render(n->a, 4, out);
        out += '^';
        render(n->b, 3, out);
      });
      return;
  }
}

}  // namespace

std::string Expression::str() const {
  if (!node_) return "<empty>";
  std::string out;
  render(node_, 0, out);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void collect_symbols(const NodePtr& n, std::set<std::string>& out) {
  if (!n) return;
  if (n->kind == NodeKind::Symbol) out.insert(n->name);
  collect_symbols(n->a, out);
  collect_symbols(n->b, out);
}

bool contains_symbol(const NodePtr& n, const std::string& name) {
  if (!n) return false;
  if (n->kind == NodeKind::Symbol) return n->name == name;
  return contains_symbol(n->a, name) || contains_symbol(n->b, name);
}

}  // namespace

std::set<std::string> Expression::free_symbols() const {
  std::set<std::string> out;
  collect_symbols(node_, out);
  return out;
}

bool Expression::has_symbol(const std::string& name) const {
  return contains_symbol(node_, name);
}

double Expression::eval(const EvalPoint& point) const {
  const ExprNode& n = *node_;
  switch (n.kind) {
    case NodeKind::Number:
      return n.number;
    case NodeKind::Symbol: {
      auto it = point.find(n.name);
      if (it == point.end()) throw eval_error("unbound symbol '" + n.name + "'");
      return it->second;
    }
    case NodeKind::Add:
      return Expression(n.a).eval(point) + Expression(n.b).eval(point);
    case NodeKind::Sub:
      return Expression(n.a).eval(point) - Expression(n.b).eval(point);
    case NodeKind::Mul:
      return Expression(n.a).eval(point) * Expression(n.b).eval(point);
    case NodeKind::Div: {
      double num = Expression(n.a).eval(point);
      double den = Expression(n.b).eval(point);
      if (den == 0.0) throw eval_error("division by zero");
      return num / den;
    }
    case NodeKind::Pow: {
      double base = Expression(n.a).eval(point);
      double expo = Expression(n.b).eval(point);
      bool ok = true;
      double r = checked_pow(base, expo, &ok);
      if (!ok) throw eval_error("domain error in power: base " + format_double(base) +
                                ", exponent " + format_double(expo));
      return r;
    }
    case NodeKind::Call: {
      double arg = Expression(n.a).eval(point);
      bool ok = true;
      double r = apply_function(function_id(n.name), arg, &ok);
      if (!ok) throw eval_error("domain error in " + n.name + "(" + format_double(arg) + ")");
      return r;
    }
  }
  throw eval_error("corrupt expression");
}

namespace {

NodePtr subst_walk(const NodePtr& n, const std::map<std::string, NodePtr>& bindings) {
  if (n->kind == NodeKind::Symbol) {
    auto it = bindings.find(n->name);
    return it != bindings.end() ? it->second : n;
  }
  if (n->kind == NodeKind::Number) return n;
  NodePtr a = n->a ? subst_walk(n->a, bindings) : nullptr;
  NodePtr b = n->b ? subst_walk(n->b, bindings) : nullptr;
  if (a == n->a && b == n->b) return n;
  auto copy = std::make_shared<ExprNode>(*n);
  copy->a = std::move(a);
  copy->b = std::move(b);
  return copy;
}

}  // namespace

Expression Expression::subst(const std::map<std::string, Expression>& bindings) const {
  std::map<std::string, NodePtr> nodes;
  for (const auto& [k, v] : bindings) nodes.emplace(k == "u" ? "u0" : k, v.ptr());
  Expression out;
  out.node_ = subst_walk(node_, nodes);
  return out;
}

Expression Expression::subst_numbers(const std::map<std::string, double>& bindings) const {
  std::map<std::string, Expression> exprs;
  for (const auto& [k, v] : bindings) exprs.emplace(k, Expression::number(v));
  return subst(exprs);
}

// ---------------------------------------------------------------------------
// simplify: bottom-up folding and flattening.

namespace {

NodePtr simplify_node(const NodePtr& n);

// Walks an already-simplified node, flattening any +/- spine it may be.
void spread_sum(const NodePtr& s, int sign, std::vector<std::pair<int, NodePtr>>& terms) {
  if (s->kind == NodeKind::Add) {
    spread_sum(s->a, sign, terms);
    spread_sum(s->b, sign, terms);
  } else if (s->kind == NodeKind::Sub) {
    spread_sum(s->a, sign, terms);
    spread_sum(s->b, -sign, terms);
  } else {
    terms.emplace_back(sign, s);
  }
}

// Flattens a +/- spine into signed simplified terms.
void flatten_sum(const NodePtr& n, int sign, std::vector<std::pair<int, NodePtr>>& terms) {
  if (n->kind == NodeKind::Add) {
    flatten_sum(n->a, sign, terms);
    flatten_sum(n->b, sign, terms);
  } else if (n->kind == NodeKind::Sub) {
    flatten_sum(n->a, sign, terms);
    flatten_sum(n->b, -sign, terms);
  } else {
    spread_sum(simplify_node(n), sign, terms);
  }
}

void spread_product(const NodePtr& s, std::vector<NodePtr>& factors) {
  if (s->kind == NodeKind::Mul) {
    spread_product(s->a, factors);
    spread_product(s->b, factors);
  } else {
    factors.push_back(s);
  }
}

void flatten_product(const NodePtr& n, std::vector<NodePtr>& factors) {
  if (n->kind == NodeKind::Mul) {
    flatten_product(n->a, factors);
    flatten_product(n->b, factors);
  } else {
    spread_product(simplify_node(n), factors);
  }
}

NodePtr rebuild_sum(const NodePtr& n) {
  std::vector<std::pair<int, NodePtr>> terms;
  flatten_sum(n, 1, terms);
  double constant = 0.0;
  std::vector<std::pair<int, NodePtr>> rest;
  for (auto& [sign, t] : terms) {
    if (t->kind == NodeKind::Number) {
      constant += sign * t->number;
    } else {
      rest.emplace_back(sign, t);
    }
  }
  NodePtr acc;
  for (auto& [sign, t] : rest) {
    if (!acc) {
      acc = sign > 0 ? t : mk(NodeKind::Sub, mk_num(0.0), t);
    } else {
      acc = mk(sign > 0 ? NodeKind::Add : NodeKind::Sub, std::move(acc), t);
    }
  }
  if (!acc) return mk_num(constant);
  if (constant > 0.0) return mk(NodeKind::Add, std::move(acc), mk_num(constant));
  if (constant < 0.0) return mk(NodeKind::Sub, std::move(acc), mk_num(-constant));
  return acc;
}

NodePtr rebuild_product(const NodePtr& n) {
  std::vector<NodePtr> factors;
  flatten_product(n, factors);
  double constant = 1.0;
  std::vector<NodePtr> rest;
  for (auto& f : factors) {
    if (f->kind == NodeKind::Number) {
      constant *= f->number;
    } else {
      rest.push_back(f);
    }
  }
  if (constant == 0.0) return mk_num(0.0);
  NodePtr acc;
  if (constant != 1.0) acc = mk_num(constant);
  for (auto& f : rest) acc = acc ? mk(NodeKind::Mul, std::move(acc), f) : f;
  return acc ? acc : mk_num(1.0);
}

NodePtr simplify_node(const NodePtr& n) {
  switch (n->kind) {
    case NodeKind::Number:
    case NodeKind::Symbol:
      return n;
    case NodeKind::Add:
    case NodeKind::Sub:
      return rebuild_sum(n);
    case NodeKind::Mul:
      return rebuild_product(n);
    case NodeKind::Div: {
      NodePtr a = simplify_node(n->a);
      NodePtr b = simplify_node(n->b);
      if (node_is_number(a, 0.0)) return mk_num(0.0);
      if (node_is_number(b, 1.0)) return a;
      if (a->kind == NodeKind::Number && b->kind == NodeKind::Number && b->number != 0.0) {
        double v = a->number / b->number;
        if (std::isfinite(v)) return mk_num(v);
      }
      return (a == n->a && b == n->b) ? n : mk(NodeKind::Div, std::move(a), std::move(b));
    }
    case NodeKind::Pow: {
      NodePtr a = simplify_node(n->a);
      NodePtr b = simplify_node(n->b);
      if (node_is_number(b, 1.0)) return a;
      if (node_is_number(b, 0.0)) return mk_num(1.0);
      if (node_is_number(a, 1.0)) return mk_num(1.0);
      if (a->kind == NodeKind::Number && b->kind == NodeKind::Number) {
        bool ok = true;
        double v = checked_pow(a->number, b->number, &ok);
        if (ok && std::isfinite(v)) return mk_num(v);
      }
      return (a == n->a && b == n->b) ? n : mk(NodeKind::Pow, std::move(a), std::move(b));
    }
    case NodeKind::Call: {
      NodePtr a = simplify_node(n->a);
      if (a->kind == NodeKind::Number) {
        bool ok = true;
        double v = apply_function(function_id(n->name), a->number, &ok);
        if (ok && std::isfinite(v)) return mk_num(v);
      }
      return a == n->a ? n : mk_call(n->name, std::move(a));
    }
  }
  return n;
}

}  // namespace

Expression Expression::simplified() const {
  Expression out;
  out.node_ = simplify_node(node_);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiation.

namespace {

NodePtr diff_node(const NodePtr& n, const std::string& var);

NodePtr d_call(const NodePtr& n, const std::string& var) {
  NodePtr arg = n->a;
  NodePtr da = diff_node(arg, var);
  const std::string& fn = n->name;
  NodePtr outer;
  if (fn == "exp") {
    outer = mk_call("exp", arg);
  } else if (fn == "ln") {
    return mk(NodeKind::Div, std::move(da), arg);
  } else if (fn == "sin") {
    outer = mk_call("cos", arg);
  } else if (fn == "cos") {
    outer = mk(NodeKind::Mul, mk_num(-1.0), mk_call("sin", arg));
  } else if (fn == "tan") {
    return mk(NodeKind::Div, std::move(da), mk(NodeKind::Pow, mk_call("cos", arg), mk_num(2.0)));
  } else if (fn == "sinh") {
    outer = mk_call("cosh", arg);
  } else if (fn == "cosh") {
    outer = mk_call("sinh", arg);
  } else if (fn == "tanh") {
    return mk(NodeKind::Div, std::move(da), mk(NodeKind::Pow, mk_call("cosh", arg), mk_num(2.0)));
  } else if (fn == "sqrt") {
    return mk(NodeKind::Div, std::move(da),
              mk(NodeKind::Mul, mk_num(2.0), mk_call("sqrt", arg)));
  } else {
    throw eval_error("unknown function '" + fn + "'");
  }
  return mk(NodeKind::Mul, std::move(outer), std::move(da));
}

NodePtr diff_node(const NodePtr& n, const std::string& var) {
  switch (n->kind) {
    case NodeKind::Number:
      return mk_num(0.0);
    case NodeKind::Symbol:
      return mk_num(n->name == var ? 1.0 : 0.0);
    case NodeKind::Add:
      return mk(NodeKind::Add, diff_node(n->a, var), diff_node(n->b, var));
    case NodeKind::Sub:
      return mk(NodeKind::Sub, diff_node(n->a, var), diff_node(n->b, var));
    case NodeKind::Mul:
      return mk(NodeKind::Add, mk(NodeKind::Mul, diff_node(n->a, var), n->b),
                mk(NodeKind::Mul, n->a, diff_node(n->b, var)));
    case NodeKind::Div:
      // (a/b)' = a'/b - a b'/b^2
      return mk(NodeKind::Sub, mk(NodeKind::Div, diff_node(n->a, var), n->b),
                mk(NodeKind::Div, mk(NodeKind::Mul, n->a, diff_node(n->b, var)),
                   mk(NodeKind::Pow, n->b, mk_num(2.0))));
    case NodeKind::Pow: {
      bool base_dep = contains_symbol(n->a, var);
      bool expo_dep = contains_symbol(n->b, var);
      if (!base_dep && !expo_dep) return mk_num(0.0);
      if (!expo_dep) {
        // g * f^(g-1) * f'
        NodePtr gm1 = mk(NodeKind::Sub, n->b, mk_num(1.0));
        return mk(NodeKind::Mul,
                  mk(NodeKind::Mul, n->b, mk(NodeKind::Pow, n->a, std::move(gm1))),
                  diff_node(n->a, var));
      }
      if (!base_dep) {
        // f^g * ln(f) * g'
        return mk(NodeKind::Mul, mk(NodeKind::Mul, n, mk_call("ln", n->a)),
                  diff_node(n->b, var));
      }
      // f^g * (g' ln f + g f'/f)
      NodePtr bracket =
          mk(NodeKind::Add, mk(NodeKind::Mul, diff_node(n->b, var), mk_call("ln", n->a)),
             mk(NodeKind::Div, mk(NodeKind::Mul, n->b, diff_node(n->a, var)), n->a));
      return mk(NodeKind::Mul, n, std::move(bracket));
    }
    case NodeKind::Call:
      return d_call(n, var);
  }
  return mk_num(0.0);
}

}  // namespace

Expression Expression::diff(const std::string& var) const {
  const std::string v = (var == "u") ? "u0" : var;
  Expression out;
  out.node_ = simplify_node(diff_node(node_, v));
  return out;
}

Expression from_node(NodePtr p) { return Expression(std::move(p)); }

std::vector<std::pair<int, Expression>> additive_terms(const Expression& e) {
  std::vector<std::pair<int, Expression>> out;
  std::function<void(const NodePtr&, int)> walk = [&](const NodePtr& n, int sign) {
    if (n->kind == NodeKind::Add) {
      walk(n->a, sign);
      walk(n->b, sign);
    } else if (n->kind == NodeKind::Sub) {
      walk(n->a, sign);
      walk(n->b, -sign);
    } else {
      out.emplace_back(sign, from_node(n));
    }
  };
  walk(e.ptr(), 1);
  return out;
}

// ---------------------------------------------------------------------------
// CompiledExpr

CompiledExpr CompiledExpr::compile(const Expression& e, const std::vector<std::string>& vars) {
  CompiledExpr c;
  std::map<std::string, std::int32_t> index;
  for (std::size_t i = 0; i < vars.size(); ++i) index[vars[i]] = static_cast<std::int32_t>(i);

  std::size_t depth = 0;
  std::function<void(const NodePtr&)> emit = [&](const NodePtr& n) {
    switch (n->kind) {
      case NodeKind::Number: {
        c.prog_.push_back({Op::Const, static_cast<std::int32_t>(c.consts_.size()), 0.0});
        c.consts_.push_back(n->number);
        ++depth;
        c.stack_need_ = std::max(c.stack_need_, depth);
        return;
      }
      case NodeKind::Symbol: {
        auto it = index.find(n->name);
        if (it == index.end()) throw eval_error("unbound symbol '" + n->name + "' in compile");
        c.prog_.push_back({Op::Var, it->second, 0.0});
        ++depth;
        c.stack_need_ = std::max(c.stack_need_, depth);
        return;
      }
      case NodeKind::Call:
        emit(n->a);
        c.prog_.push_back({Op::Fn, function_id(n->name), 0.0});
        return;
      case NodeKind::Pow:
        if (n->b->kind == NodeKind::Number) {
          emit(n->a);
          c.prog_.push_back({Op::PowConst, 0, n->b->number});
          return;
        }
        [[fallthrough]];
      default: {
        emit(n->a);
        emit(n->b);
        --depth;
        Op op = Op::Add;
        switch (n->kind) {
          case NodeKind::Add: op = Op::Add; break;
          case NodeKind::Sub: op = Op::Sub; break;
          case NodeKind::Mul: op = Op::Mul; break;
          case NodeKind::Div: op = Op::Div; break;
          case NodeKind::Pow: op = Op::Pow; break;
          default: throw eval_error("corrupt expression");
        }
        c.prog_.push_back({op, 0, 0.0});
        return;
      }
    }
  };
  emit(e.ptr());
  return c;
}

namespace {

inline double pow_const(double x, double e) {
  if (e == 2.0) return x * x;
  if (e == 1.0) return x;
  if (e == -1.0) return 1.0 / x;
  if (e == 3.0) return x * x * x;
  if (e == -2.0) return 1.0 / (x * x);
  if (e == 0.5) return std::sqrt(x);
  if (e == -0.5) return 1.0 / std::sqrt(x);
  if (e == 1.5) return x * std::sqrt(x);
  if (e == -1.5) return 1.0 / (x * std::sqrt(x));
  return std::pow(x, e);
}

inline double apply_fn_fast(int id, double x) {
  switch (id) {
    case 0: return std::exp(x);
    case 1: return std::log(x);
    case 2: return std::sin(x);
    case 3: return std::cos(x);
    case 4: return std::tan(x);
    case 5: return std::sinh(x);
    case 6: return std::cosh(x);
    case 7: return std::tanh(x);
    case 8: return std::sqrt(x);
  }
  return 0.0;
}

}  // namespace

double CompiledExpr::eval(std::span<const double> vars) const {
  double fixed[64] = {};
  std::vector<double> spill;
  double* stack = fixed;
  if (stack_need_ > 64) {
    spill.resize(stack_need_);
    stack = spill.data();
  }
  std::size_t sp = 0;
  for (const Instr& ins : prog_) {
    switch (ins.op) {
      case Op::Const: stack[sp++] = consts_[ins.arg]; break;
      case Op::Var: stack[sp++] = vars[ins.arg]; break;
      case Op::Add: --sp; stack[sp - 1] += stack[sp]; break;
      case Op::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
      case Op::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
      case Op::Div: --sp; stack[sp - 1] /= stack[sp]; break;
      case Op::Pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
      case Op::PowConst: stack[sp - 1] = pow_const(stack[sp - 1], ins.value); break;
      case Op::Fn: stack[sp - 1] = apply_fn_fast(ins.arg, stack[sp - 1]); break;
    }
  }
  return stack[0];
}

void CompiledExpr::eval_lanes(std::span<const double* const> columns, std::size_t n,
                              double* out) const {
  if (lanes_.size() < stack_need_) lanes_.resize(stack_need_);
  for (auto& l : lanes_)
    if (l.size() < n) l.resize(n);
  std::size_t sp = 0;
  for (const Instr& ins : prog_) {
    switch (ins.op) {
      case Op::Const: {
        double v = consts_[ins.arg];
        double* dst = lanes_[sp++].data();
        for (std::size_t i = 0; i < n; ++i) dst[i] = v;
        break;
      }
      case Op::Var: {
        const double* src = columns[ins.arg];
        double* dst = lanes_[sp++].data();
        std::memcpy(dst, src, n * sizeof(double));
        break;
      }
      case Op::Add: {
        --sp;
        double* a = lanes_[sp - 1].data();
        const double* b = lanes_[sp].data();
        for (std::size_t i = 0; i < n; ++i) a[i] += b[i];
        break;
      }
      case Op::Sub: {
        --sp;
        double* a = lanes_[sp - 1].data();
        const double* b = lanes_[sp].data();
        for (std::size_t i = 0; i < n; ++i) a[i] -= b[i];
        break;
      }
      case Op::Mul: {
        --sp;
        double* a = lanes_[sp - 1].data();
        const double* b = lanes_[sp].data();
        for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
        break;
      }
      case Op::Div: {
        --sp;
        double* a = lanes_[sp - 1].data();
        const double* b = lanes_[sp].data();
        for (std::size_t i = 0; i < n; ++i) a[i] /= b[i];
        break;
      }
      case Op::Pow: {
        --sp;
        double* a = lanes_[sp - 1].data();
        const double* b = lanes_[sp].data();
        for (std::size_t i = 0; i < n; ++i) a[i] = std::pow(a[i], b[i]);
        break;
      }
      case Op::PowConst: {
        double* a = lanes_[sp - 1].data();
        double e = ins.value;
        if (e == 2.0) {
          for (std::size_t i = 0; i < n; ++i) a[i] *= a[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) a[i] = pow_const(a[i], e);
        }
        break;
      }
      case Op::Fn: {
        double* a = lanes_[sp - 1].data();
        for (std::size_t i = 0; i < n; ++i) a[i] = apply_fn_fast(ins.arg, a[i]);
        break;
      }
    }
  }
  std::memcpy(out, lanes_[0].data(), n * sizeof(double));
}

}  // namespace difcon
