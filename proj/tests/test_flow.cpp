#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "bifurc/flow.hpp"

using namespace bifurc;

namespace {

Vec pt2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

Vec pt3(double a, double b, double c) {
  Vec x(3);
  x << a, b, c;
  return x;
}

}  // namespace

TEST_CASE("integrator reproduces the exponential") {
  FieldFn rhs = [](double, const Vec& x, Vec& dx, FieldFailure&) {
    dx = x;
    return true;
  };
  Vec x0(1);
  x0[0] = 1.0;
  StepControls ctl;
  ctl.rtol = 1e-10;
  ctl.atol = 1e-12;
  Trajectory tr = integrate_field(rhs, x0, 0.0, 1.0, ctl);
  REQUIRE(tr.termination == Termination::completed);
  CHECK(tr.points.back()[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
  CHECK(tr.times.back() == 1.0);
  CHECK(tr.steps_accepted > 0);
  CHECK(tr.rhs_evals >= std::uint64_t(7 * tr.steps_accepted));
}

TEST_CASE("integrator reproduces a full rotation") {
  // x' = 2*pi*(-y, x): period-one rotation, return to start
  FieldFn rhs = [](double, const Vec& x, Vec& dx, FieldFailure&) {
    dx.resize(2);
    dx[0] = -2.0 * M_PI * x[1];
    dx[1] = 2.0 * M_PI * x[0];
    return true;
  };
  Vec x0 = pt2(1.0, 0.0);
  StepControls ctl;
  ctl.rtol = 1e-11;
  ctl.atol = 1e-13;
  Trajectory tr = integrate_field(rhs, x0, 0.0, 1.0, ctl);
  REQUIRE(tr.termination == Termination::completed);
  CHECK((tr.points.back() - x0).norm() <= 1e-8);
  CHECK(tr.steps_rejected < tr.steps_accepted);
}

TEST_CASE("tighter tolerance means smaller error") {
  FieldFn rhs = [](double t, const Vec& x, Vec& dx, FieldFailure&) {
    dx.resize(1);
    dx[0] = std::cos(8.0 * t) * x[0];
    return true;
  };
  Vec x0(1);
  x0[0] = 1.0;
  double exact = std::exp(std::sin(8.0) / 8.0);
  double err_loose, err_tight;
  {
    StepControls c;
    c.rtol = 1e-5;
    c.atol = 1e-8;
    err_loose = std::fabs(integrate_field(rhs, x0, 0.0, 1.0, c).points.back()[0] - exact);
  }
  {
    StepControls c;
    c.rtol = 1e-12;
    c.atol = 1e-14;
    err_tight = std::fabs(integrate_field(rhs, x0, 0.0, 1.0, c).points.back()[0] - exact);
  }
  CHECK(err_tight <= err_loose + 1e-14);
  CHECK(err_tight <= 1e-10);
}

TEST_CASE("field failure stops the flow honestly") {
  FieldFn rhs = [](double, const Vec& x, Vec& dx, FieldFailure& fl) {
    if (x[0] > 2.0) {
      fl.cause = Termination::degenerate_field;
      fl.detail = "wall at x = 2";
      return false;
    }
    dx.resize(1);
    dx[0] = 4.0;
    return true;
  };
  Vec x0(1);
  x0[0] = 0.0;
  Trajectory tr = integrate_field(rhs, x0, 0.0, 1.0, {});
  CHECK(tr.termination == Termination::degenerate_field);
  CHECK(tr.detail == "wall at x = 2");
  CHECK(tr.points.back()[0] <= 2.0 + 1e-9);
  CHECK(tr.times.back() < 1.0);
}

TEST_CASE("stop callback ends with escaped_window") {
  FieldFn rhs = [](double, const Vec&, Vec& dx, FieldFailure&) {
    dx.resize(1);
    dx[0] = 1.0;
    return true;
  };
  IntegrateCallbacks cb;
  cb.stop = [](double, const Vec& x) { return x[0] > 0.5; };
  Vec x0(1);
  x0[0] = 0.0;
  StepControls ctl;
  ctl.h_max = 0.05;  // keep steps small so the exit fires mid-span
  Trajectory tr = integrate_field(rhs, x0, 0.0, 1.0, ctl, cb);
  CHECK(tr.termination == Termination::escaped_window);
  CHECK(tr.times.back() < 1.0);
  CHECK(tr.points.back()[0] > 0.5);
}

TEST_CASE("max step budget is respected") {
  FieldFn rhs = [](double, const Vec& x, Vec& dx, FieldFailure&) {
    dx = x;
    return true;
  };
  Vec x0(1);
  x0[0] = 1.0;
  StepControls ctl;
  ctl.max_steps = 3;
  Trajectory tr = integrate_field(rhs, x0, 0.0, 1.0, ctl);
  CHECK(tr.termination == Termination::max_steps);
  CHECK(tr.steps_accepted <= 3);
}

TEST_CASE("vertical fiber transport is exact in the frozen coordinate") {
  // f = y/(1+x^2), g = x: outside the collar u = (0, 1+x^2), so the flow moves
  // straight up the fiber line x = const and f moves affinely
  ProblemPair p = make_problem("y/(1+x^2)", "x", 2);
  Vec x0 = pt2(2.0, 1.0);  // f = 0.2, radius sqrt(5) > R+1
  TransportResult tr = transport_ambient(p, x0, 0.8);
  REQUIRE(tr.success);
  CHECK(tr.endpoint[0] == 2.0);  // the field's first component is exactly zero
  CHECK(tr.endpoint[1] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(tr.f_error <= 1e-8);
  CHECK(tr.max_affine_residual <= 1e-7);
  CHECK(tr.mu == doctest::Approx(0.2));
  CHECK(tr.lambda == 0.8);
}

TEST_CASE("transport to the start value is the identity") {
  ProblemPair p = make_problem("y/(1+x^2)", "x", 2);
  Vec x0 = pt2(2.0, 1.0);
  TransportResult tr = transport_ambient(p, x0, 0.2);
  REQUIRE(tr.success);
  CHECK((tr.endpoint - x0).norm() == 0.0);
  CHECK(tr.f_error == 0.0);
}

TEST_CASE("window exit aborts the transport") {
  ProblemPair p = make_problem("y/(1+x^2)", "x", 2);
  TransportOptions opts;
  opts.window = Interval{0.0, 0.5};  // but we ask for f = 1
  TransportResult tr = transport_ambient(p, pt2(2.0, 1.0), 1.0, opts);
  CHECK_FALSE(tr.success);
  CHECK(tr.trajectory.termination == Termination::escaped_window);
}

TEST_CASE("ambient round trip returns to the start") {
  ProblemPair p = make_problem("x - 3*x^5*y^2 + 2*x^7*y^3 + y*z", "y", 3);
  Vec x0 = pt3(0.9, 1.0, 7.0);
  TransportResult out, back;
  double trip = round_trip(p, x0, eval(p.f, x0) + 0.5, TransportMode::ambient, {}, &out,
                           &back);
  REQUIRE(out.success);
  REQUIRE(back.success);
  CHECK(trip == (back.endpoint - x0).norm());
  CHECK(trip <= 1e-5 * (1.0 + x0.norm()));
  CHECK(out.max_affine_residual <= 1e-7);
  CHECK(back.max_affine_residual <= 1e-7);
}

TEST_CASE("manifold transport conserves the sphere radius") {
  ProblemPair p = make_problem("y", "0.5*x^2 + y^2 - 0.5", 3);
  Vec x0 = pt3(1.0, 0.0, 2.0);
  TransportResult tr = transport_on_manifold(p, x0, 0.3);
  REQUIRE(tr.success);
  CHECK(tr.f_error <= 1e-8);
  CHECK(tr.endpoint[1] == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(tr.g_error <= 1e-10);
  CHECK(std::fabs(tr.endpoint.norm() - x0.norm()) <= 1e-7);
  CHECK(tr.max_norm_drift <= 1e-7);
  // the endpoint solves the surface + radius + fiber system:
  // x^2 = 1 - 2 y^2, z^2 = ||x0||^2 - x^2 - y^2
  double y = 0.3;
  double xx = std::sqrt(1.0 - 2.0 * y * y);
  double zz = std::sqrt(5.0 - xx * xx - y * y);
  CHECK(std::fabs(tr.endpoint[0]) == doctest::Approx(xx).epsilon(1e-7));
  CHECK(std::fabs(tr.endpoint[2]) == doctest::Approx(zz).epsilon(1e-7));
}

TEST_CASE("manifold round trip") {
  ProblemPair p = make_problem("y", "0.5*x^2 + y^2 - 0.5", 3);
  Vec x0 = pt3(-std::sqrt(1.0 - 2.0 * 0.25 * 0.25), 0.25, 4.0);
  TransportResult out, back;
  double trip = round_trip(p, x0, -0.4, TransportMode::on_manifold, {}, &out, &back);
  REQUIRE(out.success);
  REQUIRE(back.success);
  CHECK(trip <= 1e-5 * (1.0 + x0.norm()));
  CHECK(out.g_error <= 1e-10);
  CHECK(back.g_error <= 1e-10);
}

TEST_CASE("manifold transport rejects off-surface starts") {
  ProblemPair p = make_problem("y", "0.5*x^2 + y^2 - 0.5", 3);
  CHECK_THROWS_AS(transport_on_manifold(p, pt3(1.0, 1.0, 1.0), 0.2), DegenerateError);
}

TEST_CASE("transport records the whole trajectory consistently") {
  ProblemPair p = make_problem("y/(1+x^2)", "x", 2);
  TransportResult tr = transport_ambient(p, pt2(3.0, 2.0), 1.0);
  REQUIRE(tr.success);
  const Trajectory& t = tr.trajectory;
  REQUIRE(t.points.size() == t.times.size());
  REQUIRE(t.f_values.size() == t.times.size());
  REQUIRE(t.affine_residuals.size() == t.times.size());
  double mu = tr.mu;
  for (std::size_t i = 0; i < t.times.size(); ++i) {
    double expect = mu + (tr.lambda - mu) * t.times[i];
    CHECK(std::fabs(t.f_values[i] - expect) == doctest::Approx(t.affine_residuals[i]));
    CHECK(t.affine_residuals[i] <= 1e-7);
  }
  CHECK(t.times.front() == 0.0);
  CHECK(t.times.back() == 1.0);
  for (std::size_t i = 1; i < t.times.size(); ++i) CHECK(t.times[i] > t.times[i - 1]);
}

TEST_CASE("transport tolerance scales the achieved accuracy") {
  ProblemPair p = make_problem("x - 3*x^5*y^2 + 2*x^7*y^3 + y*z", "y", 3);
  Vec x0 = pt3(0.9, 1.0, 7.0);
  TransportOptions loose, tight;
  loose.tol = 1e-6;
  tight.tol = 1e-10;
  TransportResult a = transport_ambient(p, x0, 0.0, loose);
  TransportResult b = transport_ambient(p, x0, 0.0, tight);
  REQUIRE(a.success);
  REQUIRE(b.success);
  CHECK(b.f_error <= a.f_error + 1e-14);
  CHECK(b.f_error <= 1e-10);
}

TEST_CASE("degenerate start is reported, not hidden") {
  // at a fiberwise-critical point outside the collar the field u has no value
  ProblemPair p = make_problem("x - x^3*y^2", "y", 2);
  Vec bad = pt2(5.0, 2.0 / (std::sqrt(3.0) * 10.0));
  TransportResult tr = transport_ambient(p, bad, 1.0);
  CHECK_FALSE(tr.success);
  CHECK(tr.trajectory.termination != Termination::completed);
}
