#include "bifurc/flow.hpp"

#include <algorithm>
#include <cmath>

namespace bifurc {

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::escaped_window: return "escaped_window";
    case Termination::degenerate_field: return "degenerate_field";
    case Termination::step_underflow: return "step_underflow";
    case Termination::max_steps: return "max_steps";
    case Termination::entered_milnor_set: return "entered_milnor_set";
    case Termination::projection_failed: return "projection_failed";
  }
  return "?";
}

namespace {

// Dormand-Prince 4(5) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat (error weights, 7 stages)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Trajectory integrate_field(const FieldFn& rhs, const Vec& x0, double t0, double t1,
                           const StepControls& ctl, const IntegrateCallbacks& cb) {
  Trajectory tr;
  if (!(t1 > t0)) throw Error("integrate_field requires t1 > t0");
  const double rtol = ctl.rtol > 0 ? ctl.rtol : 1e-9;
  const double atol = ctl.atol > 0 ? ctl.atol : 1e-12;
  const double span = t1 - t0;
  const double hmax = ctl.h_max > 0 ? ctl.h_max : span;
  double h = ctl.h_init > 0 ? ctl.h_init : std::min(0.01 * span, hmax);

  const int n = int(x0.size());
  Vec x = x0, xt(n), xnew(n), err(n);
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  double t = t0;
  FieldFailure fail;

  tr.times.push_back(t);
  tr.points.push_back(x);

  auto call = [&](double tt, const Vec& xx, Vec& out) {
    ++tr.rhs_evals;
    return rhs(tt, xx, out, fail);
  };

  int attempts = 0;
  while (t < t1) {
    if (attempts++ >= ctl.max_steps) {
      tr.termination = Termination::max_steps;
      return tr;
    }
    h = std::min(h, std::min(hmax, t1 - t));
    if (h < 1e-14 * std::max(1.0, std::fabs(t))) {
      tr.termination = Termination::step_underflow;
      tr.detail = "step size collapsed";
      return tr;
    }

    if (!call(t, x, k1)) goto field_failure;
    xt = x + h * (a21 * k1);
    if (!call(t + c2 * h, xt, k2)) goto field_failure;
    xt = x + h * (a31 * k1 + a32 * k2);
    if (!call(t + c3 * h, xt, k3)) goto field_failure;
    xt = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
    if (!call(t + c4 * h, xt, k4)) goto field_failure;
    xt = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    if (!call(t + c5 * h, xt, k5)) goto field_failure;
    xt = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    if (!call(t + h, xt, k6)) goto field_failure;
    xnew = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    if (!call(t + h, xnew, k7)) goto field_failure;

    {
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        double sc = atol + rtol * std::max(std::fabs(x[i]), std::fabs(xnew[i]));
        double q = err[i] / sc;
        sum += q * q;
      }
      double enorm = std::sqrt(sum / n);
      if (!std::isfinite(enorm)) enorm = 1e10;

      if (enorm <= 1.0) {
        t += h;
        x.swap(xnew);
        ++tr.steps_accepted;
        if (cb.post_step) {
          std::string why;
          if (!cb.post_step(t, x, &why)) {
            tr.termination = Termination::projection_failed;
            tr.detail = why;
            tr.times.push_back(t);
            tr.points.push_back(x);
            return tr;
          }
        }
        tr.times.push_back(t);
        tr.points.push_back(x);
        if (cb.stop && cb.stop(t, x)) {
          tr.termination = Termination::escaped_window;
          return tr;
        }
        double fac = enorm > 0.0 ? 0.9 * std::pow(enorm, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
      } else {
        ++tr.steps_rejected;
        h *= std::clamp(0.9 * std::pow(enorm, -0.2), 0.1, 0.9);
      }
    }
    continue;

  field_failure:
    tr.termination = fail.cause;
    tr.detail = fail.detail;
    return tr;
  }
  tr.termination = Termination::completed;
  return tr;
}

namespace {

StepControls derived_controls(const TransportOptions& opts) {
  StepControls c = opts.steps;
  if (c.rtol <= 0) c.rtol = std::clamp(opts.tol * 1e-2, 1e-13, 1e-9);
  if (c.atol <= 0) c.atol = std::clamp(opts.tol * 1e-4, 1e-14, 1e-12);
  return c;
}

Interval default_window(double mu, double lambda) {
  double lo = std::min(mu, lambda), hi = std::max(mu, lambda);
  double margin = std::max(1.0, 0.5 * (hi - lo));
  return {lo - margin, hi + margin};
}

void annotate(const ProblemPair& p, GeomWorkspace& ws, TransportResult& res, double f0,
              double coeff, bool manifold) {
  Trajectory& tr = res.trajectory;
  const std::size_t m = tr.points.size();
  tr.f_values.resize(m);
  tr.g_values.resize(m);
  tr.norms.resize(m);
  tr.affine_residuals.resize(m);
  double start_norm = m ? tr.points.front().norm() : kNaN;
  double max_aff = 0.0, max_g = 0.0, max_drift = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double fv = kNaN, gv = kNaN;
    try {
      fv = eval_f(p, tr.points[i], ws);
    } catch (const Error&) {
    }
    try {
      gv = eval_g(p, tr.points[i], ws);
    } catch (const Error&) {
    }
    tr.f_values[i] = fv;
    tr.g_values[i] = gv;
    tr.norms[i] = tr.points[i].norm();
    tr.affine_residuals[i] = std::fabs(fv - (f0 + coeff * tr.times[i]));
    max_aff = std::max(max_aff, tr.affine_residuals[i]);
    if (std::isfinite(gv)) max_g = std::max(max_g, std::fabs(gv));
    max_drift = std::max(max_drift, std::fabs(tr.norms[i] - start_norm));
  }
  res.max_affine_residual = m ? max_aff : kNaN;
  if (manifold) {
    res.g_error = m ? max_g : kNaN;
    res.norm_drift = m ? std::fabs(tr.norms.back() - start_norm) : kNaN;
    res.max_norm_drift = m ? max_drift : kNaN;
  }
}

/// Shared core: integrates x' = coeff * u(x) (or the manifold analogue) over
/// t in [0,1]; `target` is the f-value the endpoint is checked against and
/// `mu_label`/`lambda_label` only name the fibers in the result.
TransportResult transport_core(const ProblemPair& p, const Vec& x0, double mu_label,
                               double lambda_label, double coeff, double target,
                               TransportMode mode, const TransportOptions& opts) {
  if (x0.size() != p.arity) throw DimensionError("start point dimension mismatch");
  TransportResult res;
  res.mu = mu_label;
  res.lambda = lambda_label;
  GeomWorkspace ws;
  Vec start = x0;

  if (mode == TransportMode::on_manifold) {
    double g0 = eval_g(p, start, ws);
    if (std::fabs(g0) > std::max(opts.tol, opts.geom.on_manifold))
      throw DegenerateError(Degeneracy::off_manifold, "transport start is off g = 0", g0);
  }

  const double f0 = eval_f(p, start, ws);
  Interval window = opts.window ? *opts.window : default_window(f0, f0 + coeff);

  // tighten the start onto the constraint before flying
  auto project = [&](double, Vec& x, std::string* why) {
    for (int it = 0; it < 12; ++it) {
      double gv;
      try {
        gv = eval_g(p, x, ws);
      } catch (const Error& e) {
        if (why) *why = e.what();
        return false;
      }
      if (std::fabs(gv) <= 1e-13) return true;
      ws.gg.resize(p.arity);
      grad_with(p.g, x.data(), ws.gg.data(), ws.gw);
      double gg2 = ws.gg.squaredNorm();
      if (!(gg2 > 0.0)) {
        if (why) *why = "grad g vanished during projection";
        return false;
      }
      x -= (gv / gg2) * ws.gg;
      if (!x.allFinite()) {
        if (why) *why = "projection diverged";
        return false;
      }
    }
    if (why) *why = "projection did not reach |g| <= 1e-13";
    return false;
  };

  if (mode == TransportMode::on_manifold) {
    std::string why;
    if (!project(0.0, start, &why))
      throw DegenerateError(Degeneracy::off_manifold, "start projection failed: " + why, kNaN);
  }

  if (coeff == 0.0) {
    // rhs identically zero: the map is the identity
    res.endpoint = start;
    res.trajectory.times = {0.0, 1.0};
    res.trajectory.points = {start, start};
    res.trajectory.termination = Termination::completed;
    annotate(p, ws, res, f0, coeff, mode == TransportMode::on_manifold);
    res.f_error = std::fabs(eval_f(p, start, ws) - target);
    res.success = res.f_error <= opts.tol;
    return res;
  }

  Vec fbuf(p.arity);
  FieldFn rhs;
  if (mode == TransportMode::ambient) {
    rhs = [&](double, const Vec& x, Vec& dx, FieldFailure& fl) {
      try {
        field_u_into(p, x, opts.R, ws, fbuf, opts.geom);
      } catch (const DegenerateError& e) {
        fl.cause = Termination::degenerate_field;
        fl.detail = e.what();
        return false;
      } catch (const EvalError& e) {
        fl.cause = Termination::degenerate_field;
        fl.detail = e.what();
        return false;
      }
      dx = coeff * fbuf;
      if (!dx.allFinite()) {
        fl.cause = Termination::degenerate_field;
        fl.detail = "non-finite field value";
        return false;
      }
      return true;
    };
  } else {
    // Runge-Kutta stage points drift off the surface by O(h^2) before the
    // accepted-step projection pulls them back, so the stage evaluations must
    // not enforce the on-manifold band; the field formula is smooth in an
    // ambient neighbourhood and the projection plus the recorded g-values
    // keep the actual trajectory honest.
    GeometryTolerances stage_tol = opts.geom;
    stage_tol.on_manifold = kInf;
    rhs = [&, stage_tol](double, const Vec& x, Vec& dx, FieldFailure& fl) {
      double pairing = 0.0;
      try {
        field_v_into(p, x, ws, fbuf, &pairing, stage_tol);
      } catch (const DegenerateError& e) {
        fl.cause = e.kind == Degeneracy::pairing ? Termination::entered_milnor_set
                                                 : Termination::degenerate_field;
        fl.detail = e.what();
        return false;
      } catch (const EvalError& e) {
        fl.cause = Termination::degenerate_field;
        fl.detail = e.what();
        return false;
      }
      if (std::fabs(pairing) < opts.geom.degeneracy * fbuf.norm() * ws.tan.norm() ||
          pairing == 0.0) {
        fl.cause = Termination::entered_milnor_set;
        fl.detail = "<v, grad f|M> below threshold";
        return false;
      }
      dx = (coeff / pairing) * fbuf;
      if (!dx.allFinite()) {
        fl.cause = Termination::degenerate_field;
        fl.detail = "non-finite field value";
        return false;
      }
      return true;
    };
  }

  IntegrateCallbacks cb;
  if (mode == TransportMode::on_manifold) cb.post_step = project;
  cb.stop = [&](double, const Vec& x) {
    double fv;
    try {
      fv = eval_f(p, x, ws);
    } catch (const Error&) {
      return true;
    }
    return !window.contains(fv);
  };

  res.trajectory = integrate_field(rhs, start, 0.0, 1.0, derived_controls(opts), cb);
  res.endpoint = res.trajectory.points.back();
  annotate(p, ws, res, f0, coeff, mode == TransportMode::on_manifold);
  res.f_error = std::fabs(res.trajectory.f_values.back() - target);

  bool ok = res.trajectory.termination == Termination::completed &&
            res.f_error <= opts.tol && res.max_affine_residual <= 10.0 * opts.tol;
  if (mode == TransportMode::on_manifold)
    ok = ok && res.g_error <= 1e-10 && res.max_norm_drift <= 10.0 * opts.tol;
  res.success = ok;
  return res;
}

}  // namespace

TransportResult transport_ambient(const ProblemPair& p, const Vec& x0, double lambda,
                                  const TransportOptions& opts) {
  GeomWorkspace ws;
  double mu = eval_f(p, x0, ws);
  return transport_core(p, x0, mu, lambda, lambda - mu, lambda, TransportMode::ambient, opts);
}

TransportResult transport_on_manifold(const ProblemPair& p, const Vec& x0, double lambda,
                                      const TransportOptions& opts) {
  GeomWorkspace ws;
  double mu = eval_f(p, x0, ws);
  return transport_core(p, x0, mu, lambda, lambda - mu, lambda, TransportMode::on_manifold,
                        opts);
}

double round_trip(const ProblemPair& p, const Vec& x0, double lambda, TransportMode mode,
                  const TransportOptions& opts, TransportResult* leg_out,
                  TransportResult* leg_back) {
  GeomWorkspace ws;
  double mu = eval_f(p, x0, ws);
  TransportResult out =
      transport_core(p, x0, mu, lambda, lambda - mu, lambda, mode, opts);
  if (leg_out) *leg_out = out;
  if (out.trajectory.termination != Termination::completed) return kNaN;
  TransportResult back = transport_core(p, out.endpoint, lambda, mu, mu - lambda, mu, mode,
                                        opts);
  if (leg_back) *leg_back = back;
  if (back.trajectory.termination != Termination::completed) return kNaN;
  return (back.endpoint - x0).norm();
}

}  // namespace bifurc
