#include "bifurc/geometry.hpp"

#include <cmath>

namespace bifurc {

ProblemPair make_problem(Expression f, Expression g) {
  if (f.arity != g.arity)
    throw DimensionError("f and g must share the same arity");
  if (f.arity < 2)
    throw DimensionError("problem pair requires arity >= 2");
  ProblemPair p;
  p.arity = f.arity;
  p.f = std::move(f);
  p.g = std::move(g);
  return p;
}

ProblemPair make_problem(const std::string& f_text, const std::string& g_text, int arity) {
  return make_problem(parse_expression(f_text, arity), parse_expression(g_text, arity));
}

namespace {

// e(t) = exp(-1/t) on t > 0; the standard smooth-step ingredient.
double mollifier(double t) {
  if (t <= 0.0) return 0.0;
  return std::exp(-1.0 / t);
}

double smooth_step(double t) {
  double a = mollifier(t);
  double b = mollifier(1.0 - t);
  return a / (a + b);
}

// Squared norm of the wedge a ^ b via the Lagrange identity:
// ||a||^2 ||b||^2 - <a,b>^2 as an explicit sum of squares.
double cross_norm2(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i)
    for (int j = i + 1; j < a.size(); ++j) {
      double m = a[i] * b[j] - a[j] * b[i];
      s += m * m;
    }
  return s;
}

void check_dim(const ProblemPair& p, const Vec& x) {
  if (x.size() != p.arity) throw DimensionError("point dimension does not match problem arity");
}

void grads(const ProblemPair& p, const Vec& x, GeomWorkspace& ws) {
  ws.gf.resize(p.arity);
  ws.gg.resize(p.arity);
  grad_with(p.f, x.data(), ws.gf.data(), ws.gw);
  grad_with(p.g, x.data(), ws.gg.data(), ws.gw);
}

void check_grad_g(const Vec& gg, const Vec& gf, double degeneracy) {
  double ngg = gg.norm();
  if (ngg < degeneracy * (1.0 + gf.norm()))
    throw DegenerateError(Degeneracy::gradient, "grad g degenerate relative to grad f", ngg);
}

void tangential_into(const ProblemPair& p, const Vec& x, GeomWorkspace& ws,
                     const GeometryTolerances& tol) {
  grads(p, x, ws);
  check_grad_g(ws.gg, ws.gf, tol.degeneracy);
  double c = ws.gf.dot(ws.gg) / ws.gg.squaredNorm();
  ws.tan = ws.gf - c * ws.gg;
}

}  // namespace

BumpPair bump_pair_rho(double rho, double R) {
  if (!(R > 0.0)) throw Error("bump radius must be positive");
  double s = (rho - R * R) / ((R + 1.0) * (R + 1.0) - R * R);
  double beta = smooth_step(s);
  return {1.0 - beta, beta};
}

BumpPair bump_pair(const Vec& x, double R) { return bump_pair_rho(x.squaredNorm(), R); }

Vec project_orthogonal(const Vec& w, const Vec& axis) {
  if (w.size() != axis.size()) throw DimensionError("projection arguments differ in dimension");
  double a2 = axis.squaredNorm();
  if (a2 <= 0.0)
    throw DegenerateError(Degeneracy::zero_axis, "projection axis is zero", std::sqrt(a2));
  return w - (w.dot(axis) / a2) * axis;
}

Vec tangential_gradient(const ProblemPair& p, const Vec& x, const GeometryTolerances& tol) {
  check_dim(p, x);
  GeomWorkspace ws;
  tangential_into(p, x, ws, tol);
  return ws.tan;
}

Vec field_w(const ProblemPair& p, const Vec& x, double R, const GeometryTolerances& tol) {
  check_dim(p, x);
  GeomWorkspace ws;
  BumpPair ab = bump_pair(x, R);
  if (ab.beta == 0.0) {
    // inner plateau: pure grad f, g is never evaluated
    ws.gf.resize(p.arity);
    grad_with(p.f, x.data(), ws.gf.data(), ws.gw);
    return ab.alpha * ws.gf;
  }
  tangential_into(p, x, ws, tol);
  return ab.alpha * ws.gf + ab.beta * ws.tan;
}

void field_u_into(const ProblemPair& p, const Vec& x, double R, GeomWorkspace& ws, Vec& out,
                  const GeometryTolerances& tol) {
  BumpPair ab = bump_pair_rho(x.squaredNorm(), R);
  if (ab.beta == 0.0) {
    ws.gf.resize(p.arity);
    grad_with(p.f, x.data(), ws.gf.data(), ws.gw);
    ws.tan = ab.alpha * ws.gf;  // w
  } else {
    tangential_into(p, x, ws, tol);
    ws.tan = ab.alpha * ws.gf + ab.beta * ws.tan;  // w
  }
  double pairing = ws.tan.dot(ws.gf);
  if (std::fabs(pairing) < tol.degeneracy * ws.tan.norm() * ws.gf.norm() || pairing == 0.0)
    throw DegenerateError(Degeneracy::pairing, "<w, grad f> degenerate", pairing);
  out = ws.tan / pairing;
}

Vec field_u(const ProblemPair& p, const Vec& x, double R, const GeometryTolerances& tol) {
  check_dim(p, x);
  GeomWorkspace ws;
  Vec out;
  field_u_into(p, x, R, ws, out, tol);
  return out;
}

void field_v_into(const ProblemPair& p, const Vec& x, GeomWorkspace& ws, Vec& out,
                  double* pairing, const GeometryTolerances& tol) {
  double gval = eval_with(p.g, x.data(), ws.eb);
  if (std::fabs(gval) > tol.on_manifold)
    throw DegenerateError(Degeneracy::off_manifold, "point is not on g = 0", gval);
  grads(p, x, ws);
  check_grad_g(ws.gg, ws.gf, tol.degeneracy);
  double nx2 = x.squaredNorm();
  double gg2 = ws.gg.squaredNorm();
  double den = cross_norm2(x, ws.gg);  // ||x||^2 ||gg||^2 - <x,gg>^2, stably
  if (den <= tol.degeneracy * nx2 * gg2)
    throw DegenerateError(Degeneracy::v_denominator,
                          "position vector parallel to grad g", den);
  double xgg = x.dot(ws.gg);
  double xgf = x.dot(ws.gf);
  double gfgg = ws.gf.dot(ws.gg);
  double A = (xgg * gfgg - gg2 * xgf) / den;
  double B = (xgg * xgf - nx2 * gfgg) / den;
  out = ws.gf + A * x + B * ws.gg;
  if (pairing) {
    double c = gfgg / gg2;
    ws.tan = ws.gf - c * ws.gg;
    *pairing = out.dot(ws.tan);
  }
}

Vec field_v(const ProblemPair& p, const Vec& x, const GeometryTolerances& tol) {
  check_dim(p, x);
  GeomWorkspace ws;
  Vec out;
  field_v_into(p, x, ws, out, nullptr, tol);
  return out;
}

Vec field_v_by_projection(const ProblemPair& p, const Vec& x, const GeometryTolerances& tol) {
  check_dim(p, x);
  GeomWorkspace ws;
  double gval = eval_with(p.g, x.data(), ws.eb);
  if (std::fabs(gval) > tol.on_manifold)
    throw DegenerateError(Degeneracy::off_manifold, "point is not on g = 0", gval);
  tangential_into(p, x, ws, tol);
  double gg2 = ws.gg.squaredNorm();
  ws.pi = x - (x.dot(ws.gg) / gg2) * ws.gg;
  double pi2 = ws.pi.squaredNorm();
  if (pi2 <= tol.degeneracy * x.squaredNorm())
    throw DegenerateError(Degeneracy::v_denominator,
                          "position vector parallel to grad g", pi2);
  return ws.tan - (ws.tan.dot(ws.pi) / pi2) * ws.pi;
}

MilnorResidual milnor_residual(const ProblemPair& p, const Vec& x,
                               const GeometryTolerances& tol) {
  check_dim(p, x);
  GeomWorkspace ws;
  double gval = eval_with(p.g, x.data(), ws.eb);
  if (std::fabs(gval) > tol.on_manifold)
    throw DegenerateError(Degeneracy::off_manifold, "point is not on g = 0", gval);
  grads(p, x, ws);
  check_grad_g(ws.gg, ws.gf, tol.degeneracy);
  double gg2 = ws.gg.squaredNorm();
  ws.tan = ws.gf - (ws.gf.dot(ws.gg) / gg2) * ws.gg;
  ws.pi = x - (x.dot(ws.gg) / gg2) * ws.gg;
  double raw = cross_norm2(ws.tan, ws.pi);
  double denom = ws.tan.squaredNorm() * ws.pi.squaredNorm() + DBL_EPSILON;
  MilnorResidual r;
  r.value = raw / denom;
  r.v_set = ws.pi.squaredNorm() <= tol.degeneracy * x.squaredNorm();
  return r;
}

double eval_f(const ProblemPair& p, const Vec& x, GeomWorkspace& ws) {
  return eval_with(p.f, x.data(), ws.eb);
}

double eval_g(const ProblemPair& p, const Vec& x, GeomWorkspace& ws) {
  return eval_with(p.g, x.data(), ws.eb);
}

FieldSample sample_fields(const ProblemPair& p, const Vec& x, const GeometryTolerances& tol) {
  check_dim(p, x);
  FieldSample s;
  s.x = x;
  GeomWorkspace ws;
  try {
    s.f_value = eval_f(p, x, ws);
    s.g_value = eval_g(p, x, ws);
    grads(p, x, ws);
    s.grad_f = ws.gf;
    s.grad_g = ws.gg;
    s.malgrange = x.norm() * ws.gf.norm();
    check_grad_g(ws.gg, ws.gf, tol.degeneracy);
    double gg2 = ws.gg.squaredNorm();
    s.tangential = ws.gf - (ws.gf.dot(ws.gg) / gg2) * ws.gg;
    s.fiber_malgrange = x.norm() * s.tangential.norm();
    if (std::fabs(s.g_value) <= tol.on_manifold) {
      MilnorResidual r = milnor_residual(p, x, tol);
      s.milnor = r.value;
      s.v_set = r.v_set;
    }
  } catch (const DegenerateError& e) {
    s.degenerate = std::string(degeneracy_name(e.kind)) + ": " + e.what();
  } catch (const EvalError& e) {
    s.degenerate = std::string("domain: ") + e.what();
  }
  return s;
}

}  // namespace bifurc
