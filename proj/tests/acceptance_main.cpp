// Acceptance gate: one line per criterion, exit code = number of failures.
// Usage: acceptance <path-to-bifurcat-binary>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bifurc/examples.hpp"
#include "bifurc/flow.hpp"
#include "bifurc/problem.hpp"
#include "bifurc/report.hpp"
#include "bifurc/scan.hpp"

using namespace bifurc;

namespace {

struct Criterion {
  int id;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  // 0 -> no runtime bound
};

double now_seconds() {
  using clk = std::chrono::steady_clock;
  static const clk::time_point t0 = clk::now();
  return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------- criterion 1 ----------

Criterion criterion1() {
  Criterion c{1, "tangential zeros and exact axis gradient of x - x^3 y^2"};
  c.budget = 1.0;
  ProblemPair p = ex1_pair();
  double worst = 0.0;
  for (int n = 1; n <= 10; ++n) {
    Vec x(2);
    x << n / 2.0, 2.0 / (std::sqrt(3.0) * n);
    worst = std::max(worst, tangential_gradient(p, x).norm());
  }
  bool axis_exact = true;
  for (double a : {-4.0, -1.0, -0.25, 0.25, 1.0, 4.0, 9.0}) {
    Vec x(2);
    x << a, 0.0;
    Vec t = tangential_gradient(p, x);
    axis_exact = axis_exact && t[0] == 1.0 && t[1] == 0.0;
  }
  c.pass = worst <= 1e-12 && axis_exact;
  c.detail = "max ||grad_g f|| = " + fmt(worst) +
             (axis_exact ? ", axis gradient exactly (1,0)" : ", axis gradient NOT exact");
  return c;
}

// ---------- criterion 2 ----------

Criterion criterion2() {
  Criterion c{2, "rational benchmark: fiberwise check passes, K-infinity candidate 0"};
  c.budget = 60.0;
  ProblemPair p = exa2_pair();
  SweepConfig defaults;  // the documented default sweep, untouched
  GsVerdict v = check_gs(p, whole_line_set(), Interval{}, 1.0, defaults);
  double worst_slice = 0.0;
  std::size_t samples = 0;
  for (const SliceRecord& rec : v.slices)
    for (const SliceSample& smp : rec.samples) {
      worst_slice = std::max(
          worst_slice, std::fabs(smp.tangential_norm - 1.0 / (1.0 + rec.s * rec.s)));
      ++samples;
    }
  AsymptoticReport rep = scan_k_infinity(p.f, defaults);
  bool cand_ok = false;
  double conf = 0.0, value = kNaN;
  for (const CandidateValue& cv : rep.candidates)
    if (std::fabs(cv.value) <= 1e-3 && cv.confidence >= 0.9) {
      cand_ok = true;
      conf = cv.confidence;
      value = cv.value;
    }
  c.pass = v.pass && samples > 0 && worst_slice <= 1e-12 && cand_ok;
  c.detail = std::string("verdict ") + (v.pass ? "pass" : "FAIL") + ", slice dev " +
             fmt(worst_slice) + " over " + std::to_string(samples) + " samples, candidate " +
             (cand_ok ? fmt(value) + " conf " + fmt(conf) : std::string("MISSING"));
  return c;
}

// ---------- criterion 3 ----------

// root of f(., y, z) = target for the degree-(2,1) two-parameter polynomial,
// by expanding bracket + bisection
double solve_fiber_x(const Expression& f, double y, double z, double target) {
  Vec at(3);
  auto F = [&](double x) {
    at << x, y, z;
    return eval(f, at) - target;
  };
  double lo = -1.0, hi = 1.0;
  double flo = F(lo), fhi = F(hi);
  for (int k = 0; k < 60 && flo * fhi > 0.0; ++k) {
    lo *= 1.5;
    hi *= 1.5;
    flo = F(lo);
    fhi = F(hi);
  }
  if (flo * fhi > 0.0) return kNaN;
  for (int k = 0; k < 200; ++k) {
    double mid = 0.5 * (lo + hi);
    double fm = F(mid);
    if (fm == 0.0) return mid;
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

Criterion criterion3() {
  Criterion c{3, "degree-(2,1) polynomial: fiberwise pass, slice floors, 100 transports"};
  c.budget = 120.0;
  ProblemPair p = exa3_pair();
  SweepConfig defaults;
  GsVerdict v = check_gs(p, whole_line_set(), Interval{}, 1.0, defaults);
  double worst_floor = 0.0;
  std::size_t samples = 0;
  for (const SliceRecord& rec : v.slices)
    for (const SliceSample& smp : rec.samples) {
      double dev = rec.s == 0.0 ? std::fabs(smp.tangential_norm - 1.0)
                                : std::fabs(rec.s) - smp.tangential_norm;
      worst_floor = std::max(worst_floor, dev);
      ++samples;
    }

  std::mt19937_64 prng(1337);
  std::uniform_real_distribution<double> Y(0.5, 2.0), Z(5.0, 45.0), M(-1.0, 1.0),
      C(0.0, 1.0);
  const double targets[3] = {-1.0, 0.0, 1.0};
  int ok = 0, total = 0;
  double max_f_error = 0.0;
  bool radius_ok = true;
  for (int i = 0; i < 100; ++i) {
    double y = (C(prng) < 0.5 ? -1.0 : 1.0) * Y(prng);
    double z = (C(prng) < 0.5 ? -1.0 : 1.0) * Z(prng);
    double mu = M(prng);
    double x = solve_fiber_x(p.f, y, z, mu);
    if (std::isnan(x)) continue;
    Vec x0(3);
    x0 << x, y, z;
    double r = x0.norm();
    radius_ok = radius_ok && r >= 5.0 && r <= 50.0;
    ++total;
    TransportResult tr = transport_ambient(p, x0, targets[i % 3]);
    if (tr.success) {
      ++ok;
      max_f_error = std::max(max_f_error, tr.f_error);
    }
  }
  c.pass = v.pass && samples > 0 && worst_floor <= 1e-12 && radius_ok && total == 100 &&
           ok == 100 && max_f_error <= 1e-8;
  c.detail = std::string("verdict ") + (v.pass ? "pass" : "FAIL") + ", floor dev " +
             fmt(worst_floor) + ", transports " + std::to_string(ok) + "/" +
             std::to_string(total) + ", max f_error " + fmt(max_f_error) +
             (radius_ok ? "" : ", START RADIUS OUT OF [5,50]");
  return c;
}

// ---------- criterion 4 ----------

Criterion criterion4() {
  Criterion c{4, "Jacobian identity over 10 plane pairs x 1000 points"};
  auto pairs = jacobian_pairs();
  bool shear_present = false;
  for (const auto& pr : pairs)
    shear_present = shear_present || (pr.first == "x + y^2" && pr.second == "y");
  double worst = 0.0;
  long long tested = 0;
  PairWorkspace<double> pw;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    Expression f1 = parse_expression(pairs[pi].first, 2);
    Expression f2 = parse_expression(pairs[pi].second, 2);
    ProblemPair pp = make_problem(f1, f2);
    std::mt19937_64 prng(0xACCE0000ull + pi);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    int done = 0;
    while (done < 1000) {
      Vec x(2);
      x << U(prng), U(prng);
      double lhs, rhs, n2;
      try {
        Vec g2 = grad(f2, x);
        n2 = g2.squaredNorm();
        if (n2 < 1e-12) continue;
        double tn2 = tangential_norm2(pp, x.data(), pw);
        lhs = tn2 * n2;
        double j = jacobian2(f1, f2, x);
        rhs = j * j;
      } catch (const Error&) {
        continue;
      }
      double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-12});
      // keep the comparison meaningfully conditioned
      if (scale < 1e-6) continue;
      worst = std::max(worst, std::fabs(lhs - rhs) / scale);
      ++done;
      ++tested;
    }
  }
  c.pass = pairs.size() == 10 && shear_present && tested == 10000 && worst <= 1e-9;
  c.detail = "worst relative residual " + fmt(worst) + " over " + std::to_string(tested) +
             " points" + (shear_present ? "" : ", SHEAR PAIR MISSING");
  return c;
}

// ---------- criterion 5 ----------

Criterion criterion5() {
  Criterion c{5, "sphere-tangent fiber field identities on the parabolic cylinder"};
  ProblemPair p = sec4_pair();
  double worst_axis = 0.0;
  for (double z : {-10.0, -1.0, -0.1, 0.1, 1.0, 10.0}) {
    Vec x(3);
    x << 1.0, 0.0, z;
    worst_axis = std::max(worst_axis, std::fabs(field_v(p, x)[1] - 1.0));
  }

  std::mt19937_64 prng(0x5EC45EC4ull);
  std::uniform_real_distribution<double> TH(0.05, M_PI / 2.0 - 0.05), C(0.0, 1.0);
  double worst_equator = 0.0;
  for (int i = 0; i < 100; ++i) {
    double th = TH(prng);
    double sx = C(prng) < 0.5 ? -1.0 : 1.0;
    double sy = C(prng) < 0.5 ? -1.0 : 1.0;
    Vec x(3);
    x << sx * std::cos(th), sy * std::sin(th) / std::sqrt(2.0), 0.0;
    worst_equator = std::max(worst_equator, std::fabs(field_v(p, x)[1]));
  }

  std::uniform_real_distribution<double> TH2(0.1, 1.47), Z(0.2, 3.0);
  double worst_route = 0.0, worst_orth = 0.0;
  for (int i = 0; i < 500; ++i) {
    double th = TH2(prng);
    Vec x(3);
    x << std::cos(th), std::sin(th) / std::sqrt(2.0),
        (C(prng) < 0.5 ? -1.0 : 1.0) * Z(prng);
    Vec v = field_v(p, x);
    Vec v2 = field_v_by_projection(p, x);
    worst_route = std::max(worst_route, (v - v2).lpNorm<Eigen::Infinity>());
    Vec gg = grad(p.g, x);
    worst_orth = std::max(worst_orth, std::fabs(v.dot(x)) / (v.norm() * x.norm()));
    worst_orth = std::max(worst_orth, std::fabs(v.dot(gg)) / (v.norm() * gg.norm()));
  }
  c.pass = worst_axis <= 1e-10 && worst_equator <= 1e-10 && worst_route <= 1e-9 &&
           worst_orth <= 1e-10;
  c.detail = "axis dev " + fmt(worst_axis) + ", equator dev " + fmt(worst_equator) +
             ", route dev " + fmt(worst_route) + ", orthogonality " + fmt(worst_orth);
  return c;
}

// ---------- criterion 6 ----------

Criterion criterion6() {
  Criterion c{6, "flow invariants over the corpus, 50 round trips per family"};
  c.budget = 300.0;
  auto families = flow_corpus();
  int families_done = 0;
  std::string worst_family;
  double worst_affine = 0.0, worst_trip = 0.0, worst_g = 0.0, worst_drift = 0.0;
  bool all_ok = true;
  for (const FlowFamily& fam : families) {
    std::mt19937_64 seeder(fnv1a64(fam.name) ^ 0xACCEull);
    Rng rng(seeder());
    int ok = 0;
    for (int i = 0; i < 50; ++i) {
      Vec x0;
      double lambda = 0.0;
      fam.sample(rng, x0, lambda);
      TransportResult out, back;
      double trip = round_trip(fam.pair, x0, lambda, fam.mode, fam.opts, &out, &back);
      bool good = out.success && back.success && std::isfinite(trip);
      if (good) {
        double tol = fam.opts.tol;
        double affine = std::max(out.max_affine_residual, back.max_affine_residual);
        worst_affine = std::max(worst_affine, affine);
        double rel_trip = trip / (1.0 + x0.norm());
        worst_trip = std::max(worst_trip, rel_trip);
        good = affine <= 10.0 * tol && rel_trip <= 1e-5;
        if (fam.mode == TransportMode::on_manifold) {
          double gmax = std::max(out.g_error, back.g_error);
          double drift = std::max(out.max_norm_drift, back.max_norm_drift);
          worst_g = std::max(worst_g, gmax);
          worst_drift = std::max(worst_drift, drift);
          good = good && gmax <= 1e-10 && drift <= 10.0 * tol;
        }
      }
      if (good) ++ok;
    }
    if (ok != 50) {
      all_ok = false;
      worst_family = fam.name + " " + std::to_string(ok) + "/50";
    }
    ++families_done;
  }
  c.pass = all_ok && families_done == int(families.size()) && families_done >= 5;
  c.detail = std::to_string(families_done) + " families, worst affine " + fmt(worst_affine) +
             ", worst trip " + fmt(worst_trip) + ", worst |g| " + fmt(worst_g) +
             ", worst drift " + fmt(worst_drift) +
             (all_ok ? "" : ", FAILED " + worst_family);
  return c;
}

// ---------- criterion 7 ----------

Criterion criterion7() {
  Criterion c{7, "autodiff vs central differences on the expression corpus"};
  auto corpus = expression_corpus();
  double worst = 0.0;
  long long points = 0;
  GradWorkspace<double> gw;
  for (std::size_t ei = 0; ei < corpus.size(); ++ei) {
    const Expression& f = corpus[ei];
    std::mt19937_64 prng(0xAD07ull + ei);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    Vec x(f.arity), ad(f.arity), xp(f.arity), xm(f.arity);
    int done = 0;
    while (done < 1000) {
      for (int i = 0; i < f.arity; ++i) x[i] = U(prng);
      try {
        grad_into(f, x, ad, gw);
        double scale = std::max(1.0, ad.lpNorm<Eigen::Infinity>());
        for (int i = 0; i < f.arity; ++i) {
          double h = 1e-6 * std::max(1.0, std::fabs(x[i]));
          xp = x;
          xm = x;
          xp[i] += h;
          xm[i] -= h;
          double fd = (eval(f, xp) - eval(f, xm)) / (2.0 * h);
          worst = std::max(worst, std::fabs(ad[i] - fd) / scale);
        }
      } catch (const Error&) {
        continue;  // outside a domain guard: resample
      }
      ++done;
      ++points;
    }
  }
  c.pass = !corpus.empty() && worst <= 1e-6;
  c.detail = "worst relative deviation " + fmt(worst) + " over " +
             std::to_string(corpus.size()) + " expressions x 1000 points";
  return c;
}

// ---------- criterion 8 ----------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Criterion criterion8(const std::string& bin) {
  Criterion c{8, "byte-identical reports from two identical cli runs"};
  std::string base = "/tmp/bifurcat_acceptance_" + std::to_string(::getpid());
  std::string a = base + "_a", b = base + "_b";
  int rc_rm = std::system(("rm -rf " + a + " " + b).c_str());
  (void)rc_rm;
  std::string cmd1 = bin + " examples all --seed 42 --out " + a + " >/dev/null 2>&1";
  std::string cmd2 = bin + " examples all --seed 42 --out " + b + " >/dev/null 2>&1";
  int s1 = std::system(cmd1.c_str());
  int s2 = std::system(cmd2.c_str());
  int e1 = WIFEXITED(s1) ? WEXITSTATUS(s1) : -1;
  int e2 = WIFEXITED(s2) ? WEXITSTATUS(s2) : -1;
  std::string ra = slurp(a + "/report.json");
  std::string rb = slurp(b + "/report.json");
  c.pass = e1 == 0 && e2 == 0 && !ra.empty() && ra == rb;
  c.detail = "exit codes " + std::to_string(e1) + "/" + std::to_string(e2) + ", " +
             std::to_string(ra.size()) + " vs " + std::to_string(rb.size()) + " bytes, " +
             (ra == rb ? "identical" : "DIFFERENT");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-bifurcat-binary>\n");
    return 64;
  }
  std::string bin = argv[1];

  std::vector<std::function<Criterion()>> runners = {
      criterion1, criterion2,  criterion3, criterion4,
      criterion5, criterion6,  criterion7, [&] { return criterion8(bin); },
  };

  int failed = 0;
  for (std::size_t i = 0; i < runners.size(); ++i) {
    double t0 = now_seconds();
    Criterion c;
    try {
      c = runners[i]();
    } catch (const std::exception& e) {
      c.id = int(i) + 1;
      c.title = "aborted";
      c.pass = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = now_seconds() - t0;
    bool in_budget = c.budget <= 0.0 || c.seconds < c.budget;
    bool pass = c.pass && in_budget;
    std::printf("criterion %d: %s — %s (%s; %.2f s%s)\n", c.id, pass ? "PASS" : "FAIL",
                c.title.c_str(), c.detail.c_str(), c.seconds,
                c.budget > 0.0 ? (" < " + fmt(c.budget) + " s budget").c_str() : "");
    if (!pass) ++failed;
  }
  std::printf("acceptance: %d/8 criteria passed\n", 8 - failed);
  return failed;
}
