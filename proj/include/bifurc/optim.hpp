#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bifurc/expr.hpp"
#include "bifurc/types.hpp"

namespace bifurc {

/// Deterministic low-discrepancy unit directions; the set depends only on
/// (dim, count, seed, level), never on how many levels a sweep ends up using.
std::vector<Vec> sphere_directions(int dim, int count, std::uint64_t seed, int level);

/// value callback; returns false on a domain error at that point.
using ValueFn = std::function<bool(const Vec&, double&)>;
/// value + ambient gradient callback.
using ValueGradFn = std::function<bool(const Vec&, double&, Vec&)>;

struct DescentResult {
  Vec x;
  double value = kInf;
  int iters = 0;
  bool converged = false;  // stationary point or stop_below reached
  std::uint64_t probes = 0;
};

struct DescentOptions {
  int max_iters = 100;
  double stop_below = -kInf;  // early exit once the value drops this low
  double armijo = 1e-4;
};

/// Projected gradient descent with Armijo backtracking on the sphere ||x|| = r.
DescentResult minimize_on_sphere(const ValueFn& value, const ValueGradFn& value_grad,
                                 const Vec& start, double radius,
                                 const DescentOptions& opt);

/// Gauss-Newton correction onto {g = s} ∩ {||x|| = radius}. Mutates x;
/// returns false when it fails to converge.
bool correct_to_slice(const Expression& g, double s, double radius, Vec& x,
                      GradWorkspace<double>& gw, int max_iters = 50,
                      double tol_g = 1e-13, double tol_r = 1e-13);

/// Descent along the codimension-two intersection {g = s} ∩ {||x|| = radius};
/// every trial point is re-corrected onto the intersection.
DescentResult minimize_on_slice(const ValueFn& value, const ValueGradFn& value_grad,
                                const Expression& g, double s, double radius,
                                const Vec& start, GradWorkspace<double>& gw,
                                const DescentOptions& opt);

}  // namespace bifurc
