#include "bifurc/optim.hpp"

#include <cmath>

namespace bifurc {

namespace {

constexpr int kPrimes[16] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(int base, std::uint64_t index) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * double(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

double frac(double x) { return x - std::floor(x); }

// Acklam's rational approximation to the standard normal quantile.
double inverse_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

std::vector<Vec> sphere_directions(int dim, int count, std::uint64_t seed, int level) {
  if (dim < 1) throw DimensionError("direction dimension must be positive");
  std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(level + 1));
  // digital shifts decorrelate levels while keeping each level reproducible
  double shift[16];
  for (int i = 0; i < 16; ++i) shift[i] = double(splitmix64(state) >> 11) * 0x1.0p-53;

  std::vector<Vec> dirs;
  dirs.reserve(count);
  Rng fallback(state);
  for (int j = 0; j < count; ++j) {
    Vec d(dim);
    if (dim == 1) {
      d[0] = (j % 2 == 0) ? 1.0 : -1.0;
    } else if (dim == 2) {
      double t = 2.0 * M_PI * frac(radical_inverse(2, j + 1) + shift[0]);
      d[0] = std::cos(t);
      d[1] = std::sin(t);
    } else if (dim == 3) {
      double z = 2.0 * frac(radical_inverse(2, j + 1) + shift[0]) - 1.0;
      double t = 2.0 * M_PI * frac(radical_inverse(3, j + 1) + shift[1]);
      double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      d[0] = rho * std::cos(t);
      d[1] = rho * std::sin(t);
      d[2] = z;
    } else {
      for (int i = 0; i < dim; ++i) {
        double u = (i < 16) ? frac(radical_inverse(kPrimes[i], j + 1) + shift[i])
                            : fallback.uniform();
        u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
        d[i] = inverse_normal_cdf(u);
      }
      double n = d.norm();
      if (n < 1e-8) {
        d.setZero();
        d[0] = 1.0;
        n = 1.0;
      }
      d /= n;
      dirs.push_back(d);
      continue;
    }
    dirs.push_back(d);
  }
  return dirs;
}

namespace {

// Shared Armijo loop. tangent() projects the ambient gradient onto the
// feasible directions at x; retract() maps a trial step back to the feasible
// set (returns false when it cannot).
template <class TangentFn, class RetractFn>
DescentResult descend(const ValueFn& value, const ValueGradFn& value_grad, Vec x,
                      double scale, const DescentOptions& opt, TangentFn&& tangent,
                      RetractFn&& retract) {
  DescentResult res;
  double fx;
  Vec gx, tan, trial;
  if (!value_grad(x, fx, gx)) return res;  // seed already invalid
  ++res.probes;
  double alpha = -1.0;
  for (int it = 0; it < opt.max_iters; ++it) {
    res.iters = it;
    if (fx <= opt.stop_below) {
      res.converged = true;
      break;
    }
    tangent(x, gx, tan);
    double t2 = tan.squaredNorm();
    double tn = std::sqrt(t2);
    if (!(tn > 1e-16 * (1.0 + std::fabs(fx)) / scale)) {
      res.converged = true;
      break;
    }
    if (alpha <= 0.0) alpha = 0.1 * scale / tn;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = x - alpha * tan;
      double ft;
      if (retract(trial) && value(trial, ft) && std::isfinite(ft)) {
        ++res.probes;
        if (ft <= fx - opt.armijo * alpha * t2) {
          x = trial;
          fx = ft;
          accepted = true;
          alpha = std::min(alpha * 2.0, 1e6 * scale / tn);
          break;
        }
      } else {
        ++res.probes;
      }
      alpha *= 0.5;
      if (alpha * tn < 1e-17 * scale) break;
    }
    if (!accepted) {
      res.converged = true;  // no descent direction at working precision
      break;
    }
    if (!value_grad(x, fx, gx)) break;
    ++res.probes;
  }
  res.x = std::move(x);
  res.value = fx;
  return res;
}

}  // namespace

DescentResult minimize_on_sphere(const ValueFn& value, const ValueGradFn& value_grad,
                                 const Vec& start, double radius, const DescentOptions& opt) {
  Vec x0 = start;
  double n = x0.norm();
  if (n <= 0.0) throw DegenerateError(Degeneracy::zero_axis, "zero start direction", 0.0);
  x0 *= radius / n;
  auto tangent = [](const Vec& x, const Vec& g, Vec& out) {
    out = g - (g.dot(x) / x.squaredNorm()) * x;
  };
  auto retract = [radius](Vec& x) {
    double nn = x.norm();
    if (!(nn > 0.0)) return false;
    x *= radius / nn;
    return true;
  };
  return descend(value, value_grad, std::move(x0), radius, opt, tangent, retract);
}

bool correct_to_slice(const Expression& g, double s, double radius, Vec& x,
                      GradWorkspace<double>& gw, int max_iters, double tol_g, double tol_r) {
  const int n = g.arity;
  Vec gg(n);
  EvalBuffer<double> eb;
  for (int it = 0; it < max_iters; ++it) {
    double gv = eval_with(g, x.data(), eb) - s;
    double rv = (x.squaredNorm() - radius * radius) / (2.0 * radius);
    if (std::fabs(gv) <= tol_g && std::fabs(rv) <= tol_r * radius) return true;
    grad_with(g, x.data(), gg.data(), gw);
    // residuals F = (g - s, (||x||^2 - r^2)/2r), J rows (grad g, x/r);
    // least-norm step dx = -J^T (J J^T)^{-1} F
    double a = gg.squaredNorm();
    double b = gg.dot(x) / radius;
    double c = x.squaredNorm() / (radius * radius);
    double det = a * c - b * b;
    if (!(std::fabs(det) > 1e-300)) return false;
    double l1 = (c * gv - b * rv) / det;
    double l2 = (a * rv - b * gv) / det;
    x -= l1 * gg + (l2 / radius) * x;
    if (!x.allFinite()) return false;
  }
  return false;
}

DescentResult minimize_on_slice(const ValueFn& value, const ValueGradFn& value_grad,
                                const Expression& g, double s, double radius,
                                const Vec& start, GradWorkspace<double>& gw,
                                const DescentOptions& opt) {
  Vec x0 = start;
  if (!correct_to_slice(g, s, radius, x0, gw)) return {};
  Vec gg(g.arity);
  auto tangent = [&](const Vec& x, const Vec& grad_obj, Vec& out) {
    grad_with(g, x.data(), gg.data(), gw);
    // orthonormalize the two constraint normals {x, grad g}, then strip both
    Vec n1 = x / x.norm();
    Vec n2 = gg - gg.dot(n1) * n1;
    double n2n = n2.norm();
    out = grad_obj - grad_obj.dot(n1) * n1;
    if (n2n > 1e-14 * gg.norm()) {
      n2 /= n2n;
      out -= out.dot(n2) * n2;
    }
  };
  auto retract = [&](Vec& x) { return correct_to_slice(g, s, radius, x, gw); };
  return descend(value, value_grad, std::move(x0), radius, opt, tangent, retract);
}

}  // namespace bifurc
