#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "bifurc/report.hpp"
#include "bifurc/scan.hpp"

using namespace bifurc;

namespace {

SweepConfig small_cfg(int levels = 6, int dirs = 256) {
  SweepConfig c;
  c.levels = levels;
  c.directions = dirs;
  c.refine_iters = 80;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("sphere directions are unit, deterministic, and level-dependent") {
  auto a = sphere_directions(3, 64, 5, 2);
  auto b = sphere_directions(3, 64, 5, 2);
  auto c = sphere_directions(3, 64, 5, 3);
  auto d = sphere_directions(3, 64, 6, 2);
  REQUIRE(a.size() == 64);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((a[i] - b[i]).norm() == 0.0);
  }
  double dc = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dc = std::max(dc, (a[i] - c[i]).norm());
    dd = std::max(dd, (a[i] - d[i]).norm());
  }
  CHECK(dc > 1e-3);
  CHECK(dd > 1e-3);
  // high-dimensional sets stay reasonably spread
  auto e = sphere_directions(6, 128, 1, 0);
  double closest = kInf;
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i + 1; j < e.size(); ++j)
      closest = std::min(closest, (e[i] - e[j]).norm());
  CHECK(closest > 1e-4);
}

TEST_CASE("sphere descent solves the linear objective") {
  // min <a, x> on ||x|| = r is -r||a|| at x = -r a/||a||
  Vec a(3);
  a << 1.0, -2.0, 2.0;
  ValueFn value = [&](const Vec& x, double& out) {
    out = a.dot(x);
    return true;
  };
  ValueGradFn value_grad = [&](const Vec& x, double& out, Vec& g) {
    out = a.dot(x);
    g = a;
    return true;
  };
  for (int s = 0; s < 8; ++s) {
    Vec start = sphere_directions(3, 8, 11, 0)[s] * 5.0;
    DescentResult r = minimize_on_sphere(value, value_grad, start, 5.0, {});
    CHECK(r.value == doctest::Approx(-15.0).epsilon(1e-6));
    CHECK((r.x + 5.0 / 3.0 * a).norm() <= 1e-3);
  }
}

TEST_CASE("slice correction lands on both constraints") {
  Expression g = parse_expression("x1 + 2*x2 - x3", 3);
  GradWorkspace<double> gw;
  Vec x(3);
  x << 4.0, 1.0, 1.0;
  REQUIRE(correct_to_slice(g, 0.5, 5.0, x, gw));
  CHECK(std::fabs(eval(g, x) - 0.5) <= 1e-12);
  CHECK(std::fabs(x.norm() - 5.0) <= 1e-12 * 5.0);
  // infeasible: the sphere r=1 never meets g = 10 (|g| <= ||(1,2,-1)|| on it)
  Vec y(3);
  y << 0.5, 0.5, 0.5;
  CHECK_FALSE(correct_to_slice(g, 10.0, 1.0, y, gw));
}

TEST_CASE("linear functions have no asymptotic critical values") {
  AsymptoticReport rep = scan_k_infinity(parse_expression("x1", 2), small_cfg());
  CHECK(rep.candidates.empty());
  CHECK(rep.kind == ScanKind::k_infinity);
  REQUIRE(rep.non_candidates_floor.has_value());
  // the Malgrange quantity is exactly the radius, so the floor is the first one
  CHECK(*rep.non_candidates_floor == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(rep.evaluations > 0);
  CHECK_FALSE(rep.partial);
}

TEST_CASE("the plane quadratic picks up its value at infinity") {
  // f = x + x^2 y: along x = -1/(2y), y -> 0 the gradient collapses and
  // f -> -1/(4y) * ... -> 0; the scan must surface the candidate 0
  AsymptoticReport rep = scan_k_infinity(parse_expression("x + x^2*y", 2), small_cfg(8));
  REQUIRE(rep.candidates.size() >= 1);
  double best = kInf;
  for (const CandidateValue& c : rep.candidates) best = std::min(best, std::fabs(c.value));
  CHECK(best <= 1e-3);
  // witness structure: at least three strictly increasing radii, decaying slope
  const CandidateValue& c = rep.candidates.front();
  REQUIRE(c.witnesses.size() >= 1);
  const WitnessSequence& w = c.witnesses.front();
  REQUIRE(w.radii.size() >= 3);
  for (std::size_t i = 1; i < w.radii.size(); ++i) CHECK(w.radii[i] > w.radii[i - 1]);
  CHECK(w.slope <= -0.25);
  CHECK(c.confidence > 0.5);
  // soundness: each witness point reproduces its recorded quantity
  for (std::size_t i = 0; i < w.points.size(); ++i) {
    Vec gf = grad(rep.f, w.points[i]);
    CHECK(w.points[i].norm() * gf.norm() ==
          doctest::Approx(w.quantity_values[i]).epsilon(1e-9));
    CHECK(eval(rep.f, w.points[i]) == doctest::Approx(w.f_values[i]).epsilon(1e-12));
  }
}

TEST_CASE("windowing filters but never invents") {
  Expression f = parse_expression("x + x^2*y", 2);
  SweepConfig cfg = small_cfg(8);
  AsymptoticReport plain = scan_k_infinity(f, cfg);
  SweepConfig inside = cfg;
  inside.f_window = Interval{-1.0, 1.0};
  SweepConfig outside = cfg;
  outside.f_window = Interval{5.0, 9.0};
  AsymptoticReport rin = scan_k_infinity(f, inside);
  AsymptoticReport rout = scan_k_infinity(f, outside);
  CHECK(rin.candidates.size() == plain.candidates.size());
  CHECK(rout.candidates.empty());
  for (std::size_t i = 0; i < rin.candidates.size(); ++i)
    CHECK(rin.candidates[i].value == doctest::Approx(plain.candidates[i].value));
}

TEST_CASE("budget exhaustion is reported as partial") {
  SweepConfig cfg = small_cfg();
  cfg.max_evaluations = 200;
  AsymptoticReport rep = scan_k_infinity(parse_expression("x + x^2*y", 2), cfg);
  CHECK(rep.partial);
  REQUIRE(!rep.notes.empty());
  CHECK(rep.evaluations <= 2 * cfg.max_evaluations);  // one in-flight batch of slack
}

TEST_CASE("more radii extend, never erase, the early witnesses") {
  Expression f = parse_expression("x + x^2*y", 2);
  AsymptoticReport shorter = scan_k_infinity(f, small_cfg(6));
  AsymptoticReport longer = scan_k_infinity(f, small_cfg(9));
  REQUIRE(shorter.candidates.size() >= 1);
  REQUIRE(longer.candidates.size() >= 1);
  const WitnessSequence& ws = shorter.candidates.front().witnesses.front();
  const WitnessSequence& wl = longer.candidates.front().witnesses.front();
  REQUIRE(wl.radii.size() >= ws.radii.size());
  for (std::size_t i = 0; i < ws.radii.size(); ++i) {
    CHECK(wl.radii[i] == doctest::Approx(ws.radii[i]));
    CHECK((wl.points[i] - ws.points[i]).norm() <= 1e-9 * (1.0 + ws.radii[i]));
  }
}

TEST_CASE("refine extends one candidate and can demote a fake plateau") {
  // a linear perturbation fakes decay at moderate radii, then the quantity
  // turns around: r/(1+r^2) + 1e-4 r; refinement must lower the confidence
  Expression f = parse_expression("y/(1+x^2) + 0.0001*x", 2);
  SweepConfig cfg;
  cfg.r0 = 10.0;
  cfg.q = 1.5;
  cfg.levels = 4;
  cfg.directions = 256;
  cfg.refine_iters = 80;
  cfg.seed = 3;
  AsymptoticReport rep = scan_k_infinity(f, cfg);
  REQUIRE(rep.candidates.size() >= 1);
  double conf_before = rep.candidates.front().confidence;
  std::size_t len_before = rep.candidates.front().witnesses.front().radii.size();
  AsymptoticReport refined = refine_candidate(rep, 0, 5);
  REQUIRE(refined.candidates.size() == rep.candidates.size());
  const WitnessSequence& w = refined.candidates.front().witnesses.front();
  CHECK(w.radii.size() > len_before);
  CHECK(refined.candidates.front().confidence < conf_before);
  CHECK(refined.evaluations > rep.evaluations);
  REQUIRE(!refined.notes.empty());

  CHECK_THROWS_AS(refine_candidate(rep, 99, 2), std::out_of_range);
  CHECK_THROWS_AS(refine_candidate(rep, 0, -1), Error);
  // zero extra radii is the identity on the candidate list
  AsymptoticReport same = refine_candidate(rep, 0, 0);
  CHECK(same.candidates.front().witnesses.front().radii.size() == len_before);
}

TEST_CASE("fiberwise check passes the benchmark rational function") {
  ProblemPair p = make_problem("y/(1+x^2)", "x", 2);
  SweepConfig cfg = small_cfg();
  cfg.slice_count = 9;
  cfg.slice_seeds = 8;
  GsVerdict v = check_gs(p, whole_line_set(), Interval{}, 1.0, cfg);
  CHECK(v.pass);
  CHECK(v.grad_ok);
  CHECK(v.containment_ok);
  CHECK(v.slices_ok);
  CHECK(v.min_grad_g_norm == doctest::Approx(1.0));  // grad g = (1,0) everywhere
  CHECK(v.violations.empty());
  REQUIRE(!v.slices.empty());
  for (const SliceRecord& rec : v.slices) {
    if (rec.empty) continue;
    CHECK_FALSE(rec.decays);
    // closed form: inf over the slice of ||x|| ||grad_g f|| at radius r is
    // r/(1+s^2)
    for (std::size_t i = 0; i < rec.radii.size(); ++i)
      CHECK(rec.inf_quantity[i] ==
            doctest::Approx(rec.radii[i] / (1.0 + rec.s * rec.s)).epsilon(1e-6));
  }
}

TEST_CASE("sharing fibers with g defeats the fiberwise condition") {
  // g = f makes the tangential gradient vanish identically on every slice
  Expression f = parse_expression("y/(1+x^2)", 2);
  ProblemPair p = make_problem(f, f);
  SweepConfig cfg = small_cfg(4, 128);
  cfg.slice_count = 5;
  cfg.slice_seeds = 4;
  GsVerdict v = check_gs(p, whole_line_set(), Interval{}, 1.0, cfg);
  CHECK_FALSE(v.pass);
  CHECK_FALSE(v.slices_ok);
  CHECK(v.grad_ok);         // grad g itself never vanishes out there
  CHECK(v.containment_ok);  // S is the whole line
  bool some_decay = false;
  for (const SliceRecord& rec : v.slices) some_decay = some_decay || rec.decays;
  CHECK(some_decay);
  // the failure report carries reusable witness evidence
  CHECK(v.failure_report.kind == ScanKind::k_infinity_gs);
  REQUIRE(!v.failure_report.candidates.empty());
  for (const CandidateValue& c : v.failure_report.candidates)
    for (const WitnessSequence& w : c.witnesses) CHECK(w.radii.size() >= 3);
}

TEST_CASE("containment violations are collected") {
  // g = x on U = R with S = [0, inf): the x < 0 half fails containment
  ProblemPair p = make_problem("y/(1+x^2)", "x", 2);
  SweepConfig cfg = small_cfg(3, 64);
  cfg.slice_count = 3;
  cfg.slice_seeds = 4;
  IntervalSet S{Interval{0.0, kInf}};
  GsVerdict v = check_gs(p, S, Interval{}, 1.0, cfg);
  CHECK_FALSE(v.containment_ok);
  CHECK_FALSE(v.pass);
  REQUIRE(!v.violations.empty());
  CHECK(v.violations.size() <= 16);
  for (const ContainmentViolation& viol : v.violations) CHECK(viol.g < 0.0);
}

TEST_CASE("milnor sweep on the parabolic cylinder finds both branch values") {
  ProblemPair p = make_problem("y", "0.5*x^2 + y^2 - 0.5", 3);
  SweepConfig cfg = small_cfg(5, 256);
  AsymptoticReport rep = scan_s_zero(p, cfg);
  REQUIRE(rep.candidates.size() == 2);
  double lo = rep.candidates.front().value;
  double hi = rep.candidates.back().value;
  double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(lo == doctest::Approx(-inv_sqrt2).epsilon(1e-6));
  CHECK(hi == doctest::Approx(inv_sqrt2).epsilon(1e-6));
  for (const CandidateValue& c : rep.candidates) {
    CHECK(c.confidence > 0.5);
    for (const WitnessSequence& w : c.witnesses)
      for (const Vec& x : w.points) {
        // soundness: every witness still passes the recording-time screen
        MilnorResidual r = milnor_residual(p, x);
        CHECK(r.value < 1e-8);
      }
  }
}

TEST_CASE("milnor sweep is empty for a hyperplane slice of a linear function") {
  ProblemPair p = make_problem("x1", "x3", 3);
  AsymptoticReport rep = scan_s_zero(p, small_cfg(4, 128));
  CHECK(rep.candidates.empty());
}

TEST_CASE("compact surfaces yield an empty milnor sweep") {
  // the unit circle never meets spheres of radius >= 10
  ProblemPair p = make_problem("x", "x^2 + y^2 - 1", 2);
  AsymptoticReport rep = scan_s_zero(p, small_cfg(3, 64));
  CHECK(rep.candidates.empty());
  CHECK(rep.skipped > 0);  // every correction attempt fails feasibility
}

TEST_CASE("scan reports serialize deterministically") {
  Expression f = parse_expression("x + x^2*y", 2);
  SweepConfig cfg = small_cfg(5);
  std::string a = to_json(scan_k_infinity(f, cfg)).dump(2);
  std::string b = to_json(scan_k_infinity(f, cfg)).dump(2);
  CHECK(a == b);
  SweepConfig other = cfg;
  other.seed = 8;
  std::string c = to_json(scan_k_infinity(f, other)).dump(2);
  CHECK(a != c);  // the seed is echoed in the config block
}

TEST_CASE("sweep config validation") {
  Expression f = parse_expression("x", 2);
  SweepConfig bad;
  bad.r0 = -1.0;
  CHECK_THROWS_AS(scan_k_infinity(f, bad), Error);
  bad = SweepConfig{};
  bad.q = 1.0;
  CHECK_THROWS_AS(scan_k_infinity(f, bad), Error);
  bad = SweepConfig{};
  bad.directions = 0;
  CHECK_THROWS_AS(scan_k_infinity(f, bad), Error);
  bad = SweepConfig{};
  bad.levels = -2;
  CHECK_THROWS_AS(scan_k_infinity(f, bad), Error);
}

TEST_CASE("radius schedule is geometric") {
  SweepConfig cfg;
  cfg.r0 = 10.0;
  cfg.q = 2.0;
  cfg.levels = 3;
  auto rs = cfg.radii();
  REQUIRE(rs.size() == 4);
  CHECK(rs[0] == 10.0);
  CHECK(rs[3] == 80.0);
  CHECK(cfg.radius(2) == 40.0);
}
