#include "bifurc/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace bifurc {

const char* op_name(Op op) {
  switch (op) {
    case Op::constant: return "const";
    case Op::variable: return "var";
    case Op::negate: return "neg";
    case Op::fn_exp: return "exp";
    case Op::fn_log: return "log";
    case Op::fn_sin: return "sin";
    case Op::fn_cos: return "cos";
    case Op::fn_sqrt: return "sqrt";
    case Op::add: return "+";
    case Op::sub: return "-";
    case Op::mul: return "*";
    case Op::divide: return "/";
    case Op::power: return "^";
  }
  return "?";
}

namespace detail {
void throw_domain(const char* what, Op op, std::uint32_t pos) {
  throw EvalError(what, op_name(op), pos);
}
}  // namespace detail

namespace {

struct Parser {
  const std::string& text;
  int arity;
  std::size_t p = 0;
  Expression out;

  Parser(const std::string& t, int n) : text(t), arity(n) { out.arity = n; }

  void skip_ws() {
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
  }

  bool peek(char c) {
    skip_ws();
    return p < text.size() && text[p] == c;
  }

  bool accept(char c) {
    if (!peek(c)) return false;
    ++p;
    return true;
  }

  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", p);
  }

  std::int32_t push(Node n) {
    out.nodes.push_back(n);
    return static_cast<std::int32_t>(out.nodes.size() - 1);
  }

  std::int32_t parse_expression() {
    std::int32_t lhs = parse_term();
    for (;;) {
      skip_ws();
      std::size_t at = p;
      if (accept('+')) {
        std::int32_t rhs = parse_term();
        lhs = push({Op::add, lhs, rhs, 0, 0, false, 0, std::uint32_t(at)});
      } else if (accept('-')) {
        std::int32_t rhs = parse_term();
        lhs = push({Op::sub, lhs, rhs, 0, 0, false, 0, std::uint32_t(at)});
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_term() {
    std::int32_t lhs = parse_unary();
    for (;;) {
      skip_ws();
      std::size_t at = p;
      if (accept('*')) {
        std::int32_t rhs = parse_unary();
        lhs = push({Op::mul, lhs, rhs, 0, 0, false, 0, std::uint32_t(at)});
      } else if (accept('/')) {
        std::int32_t rhs = parse_unary();
        lhs = push({Op::divide, lhs, rhs, 0, 0, false, 0, std::uint32_t(at)});
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_unary() {
    skip_ws();
    std::size_t at = p;
    if (accept('-')) {
      std::int32_t c = parse_unary();
      return push({Op::negate, c, -1, 0, 0, false, 0, std::uint32_t(at)});
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  std::int32_t parse_power() {
    std::int32_t base = parse_atom();
    skip_ws();
    std::size_t at = p;
    if (!accept('^')) return base;
    // The exponent must fold to a real constant; parse it as a unary
    // subexpression, fold, and discard the temporary nodes.
    std::size_t mark = out.nodes.size();
    std::size_t expos = p;
    std::int32_t eroot = parse_unary();
    double value = fold_constant(mark, eroot, expos);
    out.nodes.resize(mark);
    Node n{Op::power, base, -1, value, 0, false, 0, std::uint32_t(at)};
    double r = std::nearbyint(value);
    if (r == value && std::fabs(value) <= 2147483647.0) {
      n.int_exponent = true;
      n.exponent = static_cast<long long>(r);
    }
    return push(n);
  }

  double fold_constant(std::size_t mark, std::int32_t root, std::size_t expos) {
    std::vector<double> v(out.nodes.size());
    for (std::size_t i = mark; i < out.nodes.size(); ++i) {
      const Node& n = out.nodes[i];
      switch (n.op) {
        case Op::constant: v[i] = n.value; break;
        case Op::variable:
          throw ParseError("exponent must be a constant expression", expos);
        case Op::negate: v[i] = -v[n.a]; break;
        case Op::add: v[i] = v[n.a] + v[n.b]; break;
        case Op::sub: v[i] = v[n.a] - v[n.b]; break;
        case Op::mul: v[i] = v[n.a] * v[n.b]; break;
        case Op::divide: v[i] = v[n.a] / v[n.b]; break;
        case Op::power:
          v[i] = n.int_exponent ? pow_int(v[n.a], n.exponent) : std::pow(v[n.a], n.value);
          break;
        default:
          throw ParseError("exponent must be a constant arithmetic expression", expos);
      }
    }
    return v[root];
  }

  std::int32_t parse_atom() {
    skip_ws();
    if (p >= text.size()) throw ParseError("unexpected end of input", p);
    std::size_t at = p;
    char c = text[p];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    if (accept('(')) {
      std::int32_t e = parse_expression();
      expect(')');
      return e;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", at);
  }

  std::int32_t parse_number() {
    std::size_t at = p;
    const char* begin = text.data() + p;
    const char* end = text.data() + text.size();
    double value = 0.0;
    auto res = std::from_chars(begin, end, value, std::chars_format::general);
    if (res.ec != std::errc() || res.ptr == begin)
      throw ParseError("malformed number", at);
    p += static_cast<std::size_t>(res.ptr - begin);
    return push({Op::constant, -1, -1, value, 0, false, 0, std::uint32_t(at)});
  }

  std::int32_t parse_ident() {
    std::size_t at = p;
    while (p < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[p])) || text[p] == '_'))
      ++p;
    std::string id = text.substr(at, p - at);

    if (id == "exp" || id == "log" || id == "sin" || id == "cos" || id == "sqrt") {
      expect('(');
      std::int32_t argn = parse_expression();
      expect(')');
      Op op = id == "exp"   ? Op::fn_exp
              : id == "log" ? Op::fn_log
              : id == "sin" ? Op::fn_sin
              : id == "cos" ? Op::fn_cos
                            : Op::fn_sqrt;
      return push({op, argn, -1, 0, 0, false, 0, std::uint32_t(at)});
    }

    int index = 0;
    if (arity <= 3 && id.size() == 1 && (id[0] == 'x' || id[0] == 'y' || id[0] == 'z')) {
      index = id[0] - 'x' + 1;
    } else if (id.size() >= 2 && id[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < id.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(id[i]))) digits = false;
      if (digits) index = std::atoi(id.c_str() + 1);
    }
    if (index == 0) throw ParseError("unknown identifier '" + id + "'", at);
    if (index > arity)
      throw ParseError("variable '" + id + "' exceeds dimension " + std::to_string(arity), at);
    return push({Op::variable, -1, -1, 0, index, false, 0, std::uint32_t(at)});
  }
};

int precedence(Op op) {
  switch (op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::divide: return 2;
    case Op::negate: return 3;
    case Op::power: return 4;
    default: return 9;  // atoms and function calls are self-delimiting
  }
}

std::string fmt_double(double v) {
  double r = std::nearbyint(v);
  if (r == v && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(r));
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Printer {
  const Expression& e;

  std::string render(std::int32_t i) const {
    const Node& n = e.nodes[i];
    switch (n.op) {
      case Op::constant: return fmt_double(n.value);
      case Op::variable: {
        if (e.arity <= 3) {
          static const char* alias[] = {"x", "y", "z"};
          return alias[n.var - 1];
        }
        return "x" + std::to_string(n.var);
      }
      case Op::negate: return "-" + child(n.a, 3);
      case Op::fn_exp: return "exp(" + render(n.a) + ")";
      case Op::fn_log: return "log(" + render(n.a) + ")";
      case Op::fn_sin: return "sin(" + render(n.a) + ")";
      case Op::fn_cos: return "cos(" + render(n.a) + ")";
      case Op::fn_sqrt: return "sqrt(" + render(n.a) + ")";
      case Op::add: return child(n.a, 1) + " + " + child(n.b, 1);
      case Op::sub: return child(n.a, 1) + " - " + child(n.b, 2);
      case Op::mul: return child(n.a, 2) + "*" + child(n.b, 2);
      case Op::divide: return child(n.a, 2) + "/" + child(n.b, 3);
      case Op::power: {
        std::string base = child(n.a, 9);
        double ev = n.int_exponent ? double(n.exponent) : n.value;
        std::string es = fmt_double(ev);
        if (ev < 0) es = "(" + es + ")";
        return base + "^" + es;
      }
    }
    return "?";
  }

  std::string child(std::int32_t i, int need) const {
    std::string s = render(i);
    if (precedence(e.nodes[i].op) < need) return "(" + s + ")";
    return s;
  }
};

bool nodes_equal(const Expression& a, std::int32_t ia, const Expression& b, std::int32_t ib) {
  const Node& na = a.nodes[ia];
  const Node& nb = b.nodes[ib];
  if (na.op != nb.op) return false;
  switch (na.op) {
    case Op::constant: return na.value == nb.value;
    case Op::variable: return na.var == nb.var;
    case Op::power:
      if (na.int_exponent != nb.int_exponent) return false;
      if (na.int_exponent ? (na.exponent != nb.exponent) : (na.value != nb.value)) return false;
      return nodes_equal(a, na.a, b, nb.a);
    case Op::negate:
    case Op::fn_exp:
    case Op::fn_log:
    case Op::fn_sin:
    case Op::fn_cos:
    case Op::fn_sqrt:
      return nodes_equal(a, na.a, b, nb.a);
    default:
      return nodes_equal(a, na.a, b, nb.a) && nodes_equal(a, na.b, b, nb.b);
  }
}

}  // namespace

Expression parse_expression(const std::string& text, int arity) {
  if (arity < 1) throw DimensionError("expression arity must be positive");
  Parser parser(text, arity);
  parser.out.root = parser.parse_expression();
  parser.skip_ws();
  if (parser.p != text.size())
    throw ParseError("unexpected trailing input", parser.p);
  return std::move(parser.out);
}

std::string to_string(const Expression& e) {
  if (e.root < 0) return "";
  return Printer{e}.render(e.root);
}

bool structurally_equal(const Expression& a, const Expression& b) {
  if (a.arity != b.arity) return false;
  if (a.root < 0 || b.root < 0) return a.root == b.root;
  return nodes_equal(a, a.root, b, b.root);
}

double eval(const Expression& e, const Vec& x) {
  if (x.size() != e.arity) throw DimensionError("point dimension does not match expression arity");
  EvalBuffer<double> buf;
  return eval_with(e, x.data(), buf);
}

Vec grad(const Expression& e, const Vec& x) {
  Vec out(e.arity);
  GradWorkspace<double> ws;
  grad_into(e, x, out, ws);
  return out;
}

void grad_into(const Expression& e, const Vec& x, Vec& out, GradWorkspace<double>& ws) {
  if (x.size() != e.arity) throw DimensionError("point dimension does not match expression arity");
  out.resize(e.arity);
  grad_with(e, x.data(), out.data(), ws);
}

double jacobian2(const Expression& f1, const Expression& f2, const Vec& x) {
  if (f1.arity != 2 || f2.arity != 2)
    throw DimensionError("jacobian2 requires a pair of two-variable expressions");
  Vec g1 = grad(f1, x);
  Vec g2 = grad(f2, x);
  return g1[0] * g2[1] - g1[1] * g2[0];
}

}  // namespace bifurc
