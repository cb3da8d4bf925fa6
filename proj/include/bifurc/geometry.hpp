#pragma once

#include <cfloat>
#include <optional>
#include <string>

#include "bifurc/expr.hpp"
#include "bifurc/types.hpp"

namespace bifurc {

/// A scalar function f together with the hypersurface map g (same arity n >= 2).
struct ProblemPair {
  Expression f;
  Expression g;
  int arity = 0;
};

ProblemPair make_problem(Expression f, Expression g);
ProblemPair make_problem(const std::string& f_text, const std::string& g_text, int arity);

struct GeometryTolerances {
  double degeneracy = 1e-12;   // relative floor for gradients / pairings / denominators
  double on_manifold = 1e-8;   // |g(x)| admissible when a point claims to sit on g = 0
};

/// alpha/beta plateau pair: alpha = 1 inside ||x|| <= R, beta = 1 outside
/// ||x|| >= R+1, smooth partition in between (both smooth in ||x||^2).
struct BumpPair {
  double alpha;
  double beta;
};

BumpPair bump_pair(const Vec& x, double R);
BumpPair bump_pair_rho(double rho, double R);  // rho = ||x||^2

/// Component of w orthogonal to axis: w - (<w,axis>/||axis||^2) axis.
Vec project_orthogonal(const Vec& w, const Vec& axis);

/// Gradient of f restricted to the level set of g through x (projection of
/// grad f onto the tangent space of the g-fiber).
Vec tangential_gradient(const ProblemPair& p, const Vec& x,
                        const GeometryTolerances& tol = {});

/// Blended field alpha*grad f + beta*tangential_gradient; the beta term is not
/// evaluated (and g never touched) on the inner plateau.
Vec field_w(const ProblemPair& p, const Vec& x, double R,
            const GeometryTolerances& tol = {});

/// w normalized so that <grad f, u> = 1.
Vec field_u(const ProblemPair& p, const Vec& x, double R,
            const GeometryTolerances& tol = {});

/// Field tangent to M = g^{-1}(0) and to the sphere through x, transverse to
/// fibers of f|M away from the Milnor set.
Vec field_v(const ProblemPair& p, const Vec& x, const GeometryTolerances& tol = {});

/// Same field via the double projection route (cross-validation path).
Vec field_v_by_projection(const ProblemPair& p, const Vec& x,
                          const GeometryTolerances& tol = {});

struct MilnorResidual {
  double value = 0.0;  // in [0,1]; 0 exactly on the critical set of (f|M, ||.||^2)
  bool v_set = false;  // position vector parallel to grad g (residual 0 by convention)
};

MilnorResidual milnor_residual(const ProblemPair& p, const Vec& x,
                               const GeometryTolerances& tol = {});

/// Everything the reporting layer wants to know at one point, degeneracies
/// flagged instead of thrown.
struct FieldSample {
  Vec x;
  double f_value = kNaN;
  double g_value = kNaN;
  Vec grad_f;
  Vec grad_g;
  Vec tangential;
  double malgrange = kNaN;        // ||x|| * ||grad f||
  double fiber_malgrange = kNaN;  // ||x|| * ||tangential||
  std::optional<double> milnor;   // only when |g| within the on-manifold tolerance
  bool v_set = false;
  std::string degenerate;         // empty when the sample is clean
};

FieldSample sample_fields(const ProblemPair& p, const Vec& x,
                          const GeometryTolerances& tol = {});

// --- reusable buffers for tight loops ---

struct GeomWorkspace {
  GradWorkspace<double> gw;
  EvalBuffer<double> eb;
  Vec gf, gg, tan, pi;

  std::uint64_t evals() const { return gw.buf.evals + eb.evals; }
};

double eval_f(const ProblemPair& p, const Vec& x, GeomWorkspace& ws);
double eval_g(const ProblemPair& p, const Vec& x, GeomWorkspace& ws);

/// u with preallocated buffers; pairing receives <w, grad f> when non-null.
void field_u_into(const ProblemPair& p, const Vec& x, double R, GeomWorkspace& ws,
                  Vec& out, const GeometryTolerances& tol = {});

/// v with preallocated buffers; pairing receives <v, grad f|M> when non-null.
void field_v_into(const ProblemPair& p, const Vec& x, GeomWorkspace& ws, Vec& out,
                  double* pairing = nullptr, const GeometryTolerances& tol = {});

// --- generic-scalar kernels (nested duals differentiate through these) ---

template <class T>
struct PairWorkspace {
  GradWorkspace<T> gw;
  std::vector<T> gf, gg, t1, t2;
};

/// ||tangential_gradient||^2 over any scalar ring.
template <class T>
T tangential_norm2(const ProblemPair& p, const T* x, PairWorkspace<T>& ws) {
  const int n = p.arity;
  ws.gf.resize(n);
  ws.gg.resize(n);
  grad_with(p.f, x, ws.gf.data(), ws.gw);
  grad_with(p.g, x, ws.gg.data(), ws.gw);
  T gg2(0.0), gfgg(0.0);
  for (int i = 0; i < n; ++i) {
    gg2 = gg2 + ws.gg[i] * ws.gg[i];
    gfgg = gfgg + ws.gf[i] * ws.gg[i];
  }
  if (primal(gg2) <= 0.0)
    throw DegenerateError(Degeneracy::gradient, "grad g vanishes", std::sqrt(primal(gg2)));
  T result(0.0);
  for (int i = 0; i < n; ++i) {
    T t = ws.gf[i] - (gfgg / gg2) * ws.gg[i];
    result = result + t * t;
  }
  return result;
}

/// ||grad f||^2 over any scalar ring.
template <class T>
T grad_norm2(const Expression& f, const T* x, GradWorkspace<T>& gw, std::vector<T>& scratch) {
  const int n = f.arity;
  scratch.resize(n);
  grad_with(f, x, scratch.data(), gw);
  T r(0.0);
  for (int i = 0; i < n; ++i) r = r + scratch[i] * scratch[i];
  return r;
}

template <class T>
struct MilnorParts {
  T raw;       // sum of squared 2x2 minors of (tangential, sphere-tangent position)
  T tan_norm2;
  T pi_norm2;
};

/// Gram-form residual ingredients. raw vanishes exactly on the critical set of
/// the pair (f|M, ||.||^2); computed by the Lagrange identity so it is a sum of
/// squares with no cancellation.
template <class T>
MilnorParts<T> milnor_parts(const ProblemPair& p, const T* x, PairWorkspace<T>& ws) {
  const int n = p.arity;
  ws.gf.resize(n);
  ws.gg.resize(n);
  ws.t1.resize(n);
  ws.t2.resize(n);
  grad_with(p.f, x, ws.gf.data(), ws.gw);
  grad_with(p.g, x, ws.gg.data(), ws.gw);
  T gg2(0.0), gfgg(0.0), xgg(0.0);
  for (int i = 0; i < n; ++i) {
    gg2 = gg2 + ws.gg[i] * ws.gg[i];
    gfgg = gfgg + ws.gf[i] * ws.gg[i];
    xgg = xgg + x[i] * ws.gg[i];
  }
  if (primal(gg2) <= 0.0)
    throw DegenerateError(Degeneracy::gradient, "grad g vanishes", std::sqrt(primal(gg2)));
  T cf = gfgg / gg2;
  T cx = xgg / gg2;
  for (int i = 0; i < n; ++i) {
    ws.t1[i] = ws.gf[i] - cf * ws.gg[i];  // tangential gradient
    ws.t2[i] = x[i] - cx * ws.gg[i];      // tangent part of the position vector
  }
  MilnorParts<T> parts{T(0.0), T(0.0), T(0.0)};
  for (int i = 0; i < n; ++i) {
    parts.tan_norm2 = parts.tan_norm2 + ws.t1[i] * ws.t1[i];
    parts.pi_norm2 = parts.pi_norm2 + ws.t2[i] * ws.t2[i];
    for (int j = i + 1; j < n; ++j) {
      T m = ws.t1[i] * ws.t2[j] - ws.t1[j] * ws.t2[i];
      parts.raw = parts.raw + m * m;
    }
  }
  return parts;
}

}  // namespace bifurc
