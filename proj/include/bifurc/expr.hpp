#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bifurc/dual.hpp"
#include "bifurc/types.hpp"

namespace bifurc {

enum class Op : std::uint8_t {
  constant,
  variable,
  negate,
  fn_exp,
  fn_log,
  fn_sin,
  fn_cos,
  fn_sqrt,
  add,
  sub,
  mul,
  divide,
  power,
};

const char* op_name(Op op);

struct Node {
  Op op;
  std::int32_t a = -1;  // child indices; children always precede parents
  std::int32_t b = -1;
  double value = 0.0;        // constant payload, or the (real) exponent for power
  std::int32_t var = 0;      // 1-based variable index
  bool int_exponent = false; // exponent is an exact integer -> repeated multiplication
  long long exponent = 0;
  std::uint32_t pos = 0;     // source offset for diagnostics
};

/// Smooth scalar expression in variables x1..xn, stored as a flat
/// topologically-ordered node list (children before parents).
struct Expression {
  int arity = 0;
  std::vector<Node> nodes;
  std::int32_t root = -1;
};

/// Parses the fixed grammar: +,-,*,/,^ (constant real exponent), unary minus,
/// exp/log/sin/cos/sqrt, numeric literals, variables x1..xn (aliases x,y,z for n<=3).
Expression parse_expression(const std::string& text, int arity);

/// Minimal-parenthesis rendering; parse(print(e)) is structurally equal to e.
std::string to_string(const Expression& e);

bool structurally_equal(const Expression& a, const Expression& b);

// --- evaluation ---

template <class T>
struct EvalBuffer {
  std::vector<T> slot;
  std::uint64_t evals = 0;
};

namespace detail {
[[noreturn]] void throw_domain(const char* what, Op op, std::uint32_t pos);
}

/// Evaluates over any scalar ring T carrying a double primal part.
/// Domain guards (division by zero, log/sqrt of non-positive, real power of a
/// non-positive base) inspect primal parts and throw EvalError.
template <class T>
T eval_with(const Expression& e, const T* x, EvalBuffer<T>& buf) {
  buf.slot.resize(e.nodes.size());
  T* s = buf.slot.data();
  for (std::size_t i = 0; i < e.nodes.size(); ++i) {
    const Node& n = e.nodes[i];
    switch (n.op) {
      case Op::constant: s[i] = T(n.value); break;
      case Op::variable: s[i] = x[n.var - 1]; break;
      case Op::negate: s[i] = -s[n.a]; break;
      case Op::add: s[i] = s[n.a] + s[n.b]; break;
      case Op::sub: s[i] = s[n.a] - s[n.b]; break;
      case Op::mul: s[i] = s[n.a] * s[n.b]; break;
      case Op::divide:
        if (primal(s[n.b]) == 0.0) detail::throw_domain("division by zero", n.op, n.pos);
        s[i] = s[n.a] / s[n.b];
        break;
      case Op::fn_exp: s[i] = exp(s[n.a]); break;
      case Op::fn_log:
        if (primal(s[n.a]) <= 0.0) detail::throw_domain("log of non-positive argument", n.op, n.pos);
        s[i] = log(s[n.a]);
        break;
      case Op::fn_sin: s[i] = sin(s[n.a]); break;
      case Op::fn_cos: s[i] = cos(s[n.a]); break;
      case Op::fn_sqrt:
        if (primal(s[n.a]) <= 0.0) detail::throw_domain("sqrt of non-positive argument", n.op, n.pos);
        s[i] = sqrt(s[n.a]);
        break;
      case Op::power:
        if (n.int_exponent) {
          if (n.exponent < 0 && primal(s[n.a]) == 0.0)
            detail::throw_domain("zero base with negative exponent", n.op, n.pos);
          s[i] = pow_int(s[n.a], n.exponent);
        } else {
          if (primal(s[n.a]) <= 0.0)
            detail::throw_domain("real power of non-positive base", n.op, n.pos);
          s[i] = pow_real(s[n.a], n.value);
        }
        break;
    }
  }
  ++buf.evals;
  return s[e.root];
}

template <class T>
struct GradWorkspace {
  EvalBuffer<Dual<T>> buf;
  std::vector<Dual<T>> xs;
};

/// Forward-mode gradient: one dual pass per coordinate.
template <class T>
void grad_with(const Expression& e, const T* x, T* out, GradWorkspace<T>& ws) {
  const int n = e.arity;
  ws.xs.resize(n);
  for (int i = 0; i < n; ++i) ws.xs[i] = Dual<T>{x[i], T(0.0)};
  for (int j = 0; j < n; ++j) {
    ws.xs[j].d = T(1.0);
    out[j] = eval_with(e, ws.xs.data(), ws.buf).d;
    ws.xs[j].d = T(0.0);
  }
}

// convenience double front-ends (allocate internally)
double eval(const Expression& e, const Vec& x);
Vec grad(const Expression& e, const Vec& x);
void grad_into(const Expression& e, const Vec& x, Vec& out, GradWorkspace<double>& ws);

/// 2x2 Jacobian determinant of the pair (f1, f2) at x; both must have arity 2.
double jacobian2(const Expression& f1, const Expression& f2, const Vec& x);

}  // namespace bifurc
