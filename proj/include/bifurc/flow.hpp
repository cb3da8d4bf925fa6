#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bifurc/geometry.hpp"
#include "bifurc/types.hpp"

namespace bifurc {

enum class Termination {
  completed,
  escaped_window,
  degenerate_field,
  step_underflow,
  max_steps,
  entered_milnor_set,
  projection_failed,
};

const char* termination_name(Termination t);

struct StepControls {
  double rtol = 0.0;    // 0 -> 1e-9 (or derived from the transport tolerance)
  double atol = 0.0;    // 0 -> 1e-12
  int max_steps = 100000;
  double h_init = 0.0;  // 0 -> 1% of the span
  double h_max = 0.0;   // 0 -> full span
};

struct FieldFailure {
  Termination cause = Termination::degenerate_field;
  std::string detail;
};

/// Right-hand side callback; returning false aborts the flow with the cause
/// recorded in the failure slot.
using FieldFn = std::function<bool(double t, const Vec& x, Vec& dx, FieldFailure& fail)>;

struct IntegrateCallbacks {
  /// Runs after every accepted step (e.g. constraint projection); returning
  /// false terminates with projection_failed.
  std::function<bool(double t, Vec& x, std::string* why)> post_step;
  /// Checked after every accepted step; returning true terminates with
  /// escaped_window.
  std::function<bool(double t, const Vec& x)> stop;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> points;
  // filled by the transport layer:
  std::vector<double> f_values, g_values, norms, affine_residuals;
  Termination termination = Termination::completed;
  std::string detail;
  std::uint64_t rhs_evals = 0;
  int steps_accepted = 0;
  int steps_rejected = 0;
};

/// Adaptive Dormand-Prince 4(5) over [t0, t1], t1 > t0. Every accepted step's
/// local error satisfies the componentwise scaled bound from rtol/atol.
Trajectory integrate_field(const FieldFn& rhs, const Vec& x0, double t0, double t1,
                           const StepControls& ctl, const IntegrateCallbacks& cb = {});

enum class TransportMode { ambient, on_manifold };

struct TransportOptions {
  double R = 1.0;                    // inner plateau radius for the ambient field
  double tol = 1e-8;                 // target accuracy of the fiber-to-fiber map
  StepControls steps;                // zero entries are derived from tol
  std::optional<Interval> window;    // admissible f-range; default hull(mu, lambda) inflated
  GeometryTolerances geom;
};

struct TransportResult {
  bool success = false;
  double mu = kNaN;      // f at the start
  double lambda = kNaN;  // target value
  Vec endpoint;
  double f_error = kNaN;
  double g_error = kNaN;              // manifold mode: max |g| along the flow
  double norm_drift = kNaN;           // manifold mode: | ||end|| - ||start|| |
  double max_norm_drift = kNaN;       // manifold mode: max over recorded steps
  double max_affine_residual = kNaN;  // max |f(x(t)) - (f0 + (lambda-mu) t)|
  Trajectory trajectory;
};

/// Integrates x' = (lambda - mu) u(x) from t=0 to t=1, carrying x from the
/// fiber f = mu to f = lambda.
TransportResult transport_ambient(const ProblemPair& p, const Vec& x0, double lambda,
                                  const TransportOptions& opts = {});

/// Same, along the hypersurface g = 0 with the sphere-preserving field v;
/// every accepted step is re-projected onto g = 0.
TransportResult transport_on_manifold(const ProblemPair& p, const Vec& x0, double lambda,
                                      const TransportOptions& opts = {});

/// Forward transport to lambda, then the frozen reverse flow back; returns the
/// distance between the return point and the start (NaN when a leg aborts).
double round_trip(const ProblemPair& p, const Vec& x0, double lambda, TransportMode mode,
                  const TransportOptions& opts = {}, TransportResult* leg_out = nullptr,
                  TransportResult* leg_back = nullptr);

}  // namespace bifurc
