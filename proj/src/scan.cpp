#include "bifurc/scan.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bifurc {

double SweepConfig::radius(int level) const { return r0 * std::pow(q, level); }

std::vector<double> SweepConfig::radii() const {
  std::vector<double> r;
  for (int k = 0; k <= levels; ++k) r.push_back(radius(k));
  return r;
}

const char* scan_kind_name(ScanKind k) {
  switch (k) {
    case ScanKind::k_infinity: return "K_inf";
    case ScanKind::k_infinity_gs: return "K_inf_gS";
    case ScanKind::s_zero: return "S_zero";
  }
  return "?";
}

namespace {

void validate(const SweepConfig& cfg) {
  if (!(cfg.r0 > 0.0)) throw Error("sweep r0 must be positive");
  if (!(cfg.q > 1.0)) throw Error("sweep ratio q must exceed 1");
  if (cfg.levels < 0) throw Error("sweep levels must be non-negative");
  if (cfg.directions < 1) throw Error("sweep needs at least one direction");
  if (cfg.refine_iters < 0) throw Error("refine_iters must be non-negative");
}

struct Ctx {
  const Expression* f = nullptr;
  const Expression* g = nullptr;
  ProblemPair pair;  // only populated when g is present
  SweepConfig cfg;

  GradWorkspace<double> gw;
  std::vector<double> scratch;
  PairWorkspace<double> pw;
  PairWorkspace<Dual<double>> pw_d;
  GradWorkspace<Dual<double>> gw_d;
  std::vector<Dual<double>> scratch_d, xd;
  EvalBuffer<double> eb;

  std::uint64_t evals = 0;
  std::uint64_t skipped = 0;
  bool budget_hit = false;

  bool budget_ok() {
    if (cfg.max_evaluations != 0 && evals >= cfg.max_evaluations) {
      budget_hit = true;
      return false;
    }
    return true;
  }

  bool eval_f_at(const Vec& x, double& out) {
    try {
      out = eval_with(*f, x.data(), eb);
    } catch (const Error&) {
      ++skipped;
      return false;
    }
    return std::isfinite(out);
  }
};

Ctx make_ctx(const Expression& f, const Expression* g, const SweepConfig& cfg) {
  Ctx c;
  c.cfg = cfg;
  if (g) {
    c.pair = make_problem(f, *g);
    c.f = &c.pair.f;
    c.g = &c.pair.g;
  } else {
    c.pair.f = f;
    c.f = &c.pair.f;
  }
  return c;
}

// --- objective callbacks -------------------------------------------------

ValueFn kinf_value(Ctx& c) {
  return [&c](const Vec& x, double& out) {
    try {
      out = grad_norm2<double>(*c.f, x.data(), c.gw, c.scratch);
    } catch (const Error&) {
      ++c.skipped;
      return false;
    }
    ++c.evals;
    return std::isfinite(out);
  };
}

ValueGradFn kinf_value_grad(Ctx& c) {
  return [&c](const Vec& x, double& out, Vec& gout) {
    const int n = c.f->arity;
    gout.resize(n);
    c.xd.resize(n);
    for (int i = 0; i < n; ++i) c.xd[i] = Dual<double>{x[i], 0.0};
    try {
      for (int j = 0; j < n; ++j) {
        c.xd[j].d = 1.0;
        Dual<double> r = grad_norm2<Dual<double>>(*c.f, c.xd.data(), c.gw_d, c.scratch_d);
        out = r.v;
        gout[j] = r.d;
        c.xd[j].d = 0.0;
      }
    } catch (const Error&) {
      ++c.skipped;
      return false;
    }
    ++c.evals;
    return std::isfinite(out) && gout.allFinite();
  };
}

ValueFn slice_value(Ctx& c) {
  return [&c](const Vec& x, double& out) {
    try {
      out = tangential_norm2<double>(c.pair, x.data(), c.pw);
    } catch (const Error&) {
      ++c.skipped;
      return false;
    }
    ++c.evals;
    return std::isfinite(out);
  };
}

ValueGradFn slice_value_grad(Ctx& c) {
  return [&c](const Vec& x, double& out, Vec& gout) {
    const int n = c.pair.arity;
    gout.resize(n);
    c.xd.resize(n);
    for (int i = 0; i < n; ++i) c.xd[i] = Dual<double>{x[i], 0.0};
    try {
      for (int j = 0; j < n; ++j) {
        c.xd[j].d = 1.0;
        Dual<double> r = tangential_norm2<Dual<double>>(c.pair, c.xd.data(), c.pw_d);
        out = r.v;
        gout[j] = r.d;
        c.xd[j].d = 0.0;
      }
    } catch (const Error&) {
      ++c.skipped;
      return false;
    }
    ++c.evals;
    return std::isfinite(out) && gout.allFinite();
  };
}

// Raw Gram objective for the Milnor hunt. The normalized residual is useless
// as a descent objective near points where the tangential gradient vanishes
// (it jumps 1 -> 0), so we descend the smooth sum-of-squared-minors instead
// and only use the normalized residual as the acceptance screen.
ValueFn milnor_value(Ctx& c) {
  return [&c](const Vec& x, double& out) {
    try {
      out = primal(milnor_parts<double>(c.pair, x.data(), c.pw).raw);
    } catch (const Error&) {
      ++c.skipped;
      return false;
    }
    ++c.evals;
    return std::isfinite(out);
  };
}

ValueGradFn milnor_value_grad(Ctx& c) {
  return [&c](const Vec& x, double& out, Vec& gout) {
    const int n = c.pair.arity;
    gout.resize(n);
    c.xd.resize(n);
    for (int i = 0; i < n; ++i) c.xd[i] = Dual<double>{x[i], 0.0};
    try {
      for (int j = 0; j < n; ++j) {
        c.xd[j].d = 1.0;
        Dual<double> r = milnor_parts<Dual<double>>(c.pair, c.xd.data(), c.pw_d).raw;
        out = r.v;
        gout[j] = r.d;
        c.xd[j].d = 0.0;
      }
    } catch (const Error&) {
      ++c.skipped;
      return false;
    }
    ++c.evals;
    return std::isfinite(out) && gout.allFinite();
  };
}

// --- per-level minima and tracks ----------------------------------------

struct LocalMin {
  Vec x;
  double quantity = kNaN;  // the decaying quantity of the scan kind
  double f = kNaN;
  int order = 0;
};

void dedup_minima(std::vector<LocalMin>& v, double min_dist, std::size_t cap) {
  std::sort(v.begin(), v.end(), [](const LocalMin& a, const LocalMin& b) {
    if (a.quantity != b.quantity) return a.quantity < b.quantity;
    return a.order < b.order;
  });
  std::vector<LocalMin> kept;
  for (LocalMin& m : v) {
    bool fresh = true;
    for (const LocalMin& k : kept)
      if ((m.x - k.x).norm() < min_dist) {
        fresh = false;
        break;
      }
    if (fresh) {
      kept.push_back(std::move(m));
      if (kept.size() >= cap) break;
    }
  }
  v = std::move(kept);
}

struct Track {
  std::vector<double> radii, f, q;
  std::vector<Vec> pts;
  int last_level = -1;
  double slice = kNaN;
};

double link_tol(double f_prev) { return std::max(0.25, 0.05 * (1.0 + std::fabs(f_prev))); }

void extend_or_open(std::vector<Track>& tracks, const std::vector<LocalMin>& minima,
                    int level, double radius) {
  std::vector<bool> claimed(tracks.size(), false);
  for (const LocalMin& m : minima) {
    int best = -1;
    double best_d = kInf;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (claimed[t] || tracks[t].last_level != level - 1) continue;
      double d = std::fabs(m.f - tracks[t].f.back());
      if (d <= link_tol(tracks[t].f.back()) && d < best_d) {
        best_d = d;
        best = int(t);
      }
    }
    if (best >= 0) {
      Track& t = tracks[best];
      claimed[best] = true;
      t.radii.push_back(radius);
      t.f.push_back(m.f);
      t.q.push_back(m.quantity);
      t.pts.push_back(m.x);
      t.last_level = level;
    } else {
      Track t;
      t.radii = {radius};
      t.f = {m.f};
      t.q = {m.quantity};
      t.pts = {m.x};
      t.last_level = level;
      tracks.push_back(std::move(t));
      claimed.push_back(true);
    }
  }
}

bool is_zero_quantity(const std::vector<double>& q, double scale) {
  for (double v : q)
    if (!(v <= 1e-12 * scale)) return false;
  return true;
}

double fit_log_slope(const std::vector<double>& radii, const std::vector<double>& q) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(q[i] > 0.0)) continue;
    double lx = std::log(radii[i]);
    double ly = std::log(q[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return -kInf;  // all quantities at exact zero: maximal decay
  double den = m * sxx - sx * sx;
  if (!(std::fabs(den) > 0.0)) return kNaN;
  return (m * sxy - sx * sy) / den;
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double track_confidence(ScanKind kind, const Track& t, double slope, bool zero) {
  double conf_q;
  if (kind == ScanKind::s_zero || zero)
    conf_q = 1.0;
  else
    conf_q = clamp01(-slope);
  double lam = t.f.back();
  double df = t.f.size() >= 2 ? std::fabs(t.f.back() - t.f[t.f.size() - 2]) : 0.0;
  double conf_f = clamp01(1.0 - df / std::max(1e-2, 1e-2 * (1.0 + std::fabs(lam))));
  return conf_q * conf_f;
}

WitnessSequence to_witness(const Track& t, double slope) {
  WitnessSequence w;
  w.radii = t.radii;
  w.points = t.pts;
  w.f_values = t.f;
  w.quantity_values = t.q;
  w.slope = slope;
  w.slice = t.slice;
  return w;
}

/// Single-linkage clusters of candidate values; gap threshold
/// max(1e-3, 1e-2 * spread).
std::vector<std::vector<int>> cluster_values(const std::vector<double>& vals) {
  std::vector<int> order(vals.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (vals[a] != vals[b]) return vals[a] < vals[b];
    return a < b;
  });
  std::vector<std::vector<int>> clusters;
  if (order.empty()) return clusters;
  double spread = vals[order.back()] - vals[order.front()];
  double gap = std::max(1e-3, 1e-2 * spread);
  clusters.push_back({order[0]});
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (vals[order[i]] - vals[order[i - 1]] > gap)
      clusters.push_back({});
    clusters.back().push_back(order[i]);
  }
  return clusters;
}

struct TrackStats {
  double slope;
  bool zero;
  double conf;
  double value;
};

void assemble_candidates(AsymptoticReport& rep, std::vector<Track>& tracks,
                         ScanKind kind, const std::optional<Interval>& window,
                         int min_span, double zero_scale) {
  std::vector<int> qual;
  std::vector<TrackStats> stats(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    Track& t = tracks[i];
    bool zero = is_zero_quantity(t.q, zero_scale);
    double slope = zero ? -kInf : fit_log_slope(t.radii, t.q);
    stats[i] = {slope, zero, track_confidence(kind, t, slope, zero), t.f.back()};
    if (int(t.radii.size()) < min_span) continue;
    bool decays = zero || (std::isfinite(slope) ? slope <= -0.25 : slope == -kInf);
    if (kind == ScanKind::s_zero) decays = true;  // membership screened elsewhere
    if (decays) qual.push_back(int(i));
  }

  std::vector<double> values;
  for (int i : qual) values.push_back(stats[i].value);
  auto clusters = cluster_values(values);
  for (const auto& cl : clusters) {
    CandidateValue cand;
    double best_conf = -1.0;
    for (int local : cl) {
      int ti = qual[local];
      cand.witnesses.push_back(to_witness(tracks[ti], stats[ti].slope));
      if (stats[ti].conf > best_conf) {
        best_conf = stats[ti].conf;
        cand.value = stats[ti].value;
      }
    }
    cand.confidence = best_conf;
    if (window && !window->contains(cand.value)) continue;
    rep.candidates.push_back(std::move(cand));
  }
  std::sort(rep.candidates.begin(), rep.candidates.end(),
            [](const CandidateValue& a, const CandidateValue& b) { return a.value < b.value; });

  // floor of the quantity away from the qualifying tracks
  std::vector<char> in_qual(tracks.size(), 0);
  for (int i : qual) in_qual[i] = 1;
  double floor = kInf;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (in_qual[i]) continue;
    for (double v : tracks[i].q) floor = std::min(floor, v);
  }
  if (std::isfinite(floor)) rep.non_candidates_floor = floor;
}

// --- the Milnor polish step (n = 3) -------------------------------------

template <class T>
void milnor_minor_vec(const ProblemPair& p, const T* x, PairWorkspace<T>& ws,
                      std::vector<T>& out) {
  milnor_parts<T>(p, x, ws);  // fills ws.t1 (tangential) and ws.t2 (position part)
  const int n = p.arity;
  out.clear();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      out.push_back(ws.t1[i] * ws.t2[j] - ws.t1[j] * ws.t2[i]);
}

void cross3(const Vec& a, const Vec& b, Vec& out) {
  out.resize(3);
  out[0] = a[1] * b[2] - a[2] * b[1];
  out[1] = a[2] * b[0] - a[0] * b[2];
  out[2] = a[0] * b[1] - a[1] * b[0];
}

/// Newton along the 1-dimensional intersection curve onto the zero set of the
/// best-conditioned Gram minor; carries the descent output the last few
/// decades down to the critical set.
void polish_milnor3(Ctx& c, double s, double r, Vec& x) {
  if (c.pair.arity != 3) return;
  Vec gg(3), t(3);
  std::vector<double> minors;
  std::vector<Dual<double>> minors_d;
  for (int iter = 0; iter < 12; ++iter) {
    try {
      grad_with(*c.g, x.data(), gg.data(), c.gw);
      cross3(x, gg, t);
      double tn = t.norm();
      if (!(tn > 1e-14 * x.norm() * gg.norm())) return;
      t /= tn;

      // minors and their directional derivatives along the curve
      c.xd.resize(3);
      for (int i = 0; i < 3; ++i) c.xd[i] = Dual<double>{x[i], t[i]};
      milnor_minor_vec<Dual<double>>(c.pair, c.xd.data(), c.pw_d, minors_d);
      ++c.evals;
      int best = -1;
      double best_dm = 0.0;
      for (std::size_t k = 0; k < minors_d.size(); ++k) {
        double dm = std::fabs(minors_d[k].d);
        if (dm > best_dm) {
          best_dm = dm;
          best = int(k);
        }
      }
      if (best < 0 || !(best_dm > 0.0)) return;
      double step = -minors_d[best].v / minors_d[best].d;
      if (!std::isfinite(step)) return;
      step = std::clamp(step, -0.1 * r, 0.1 * r);
      x += step * t;
      if (!correct_to_slice(*c.g, s, r, x, c.gw)) return;
      if (std::fabs(step) < 1e-16 * r) return;
    } catch (const Error&) {
      return;
    }
  }
}

}  // namespace

// --- scan_k_infinity ------------------------------------------------------

AsymptoticReport scan_k_infinity(const Expression& f, const SweepConfig& cfg) {
  validate(cfg);
  Ctx ctx = make_ctx(f, nullptr, cfg);
  const int n = f.arity;
  auto value = kinf_value(ctx);
  auto value_grad = kinf_value_grad(ctx);

  AsymptoticReport rep;
  rep.kind = ScanKind::k_infinity;
  rep.config = cfg;
  rep.f = f;

  std::vector<Track> tracks;
  DescentOptions dopt;
  dopt.max_iters = cfg.refine_iters;

  for (int k = 0; k <= cfg.levels && ctx.budget_ok(); ++k) {
    double r = cfg.radius(k);
    auto dirs = sphere_directions(n, cfg.directions, cfg.seed, k);
    std::vector<LocalMin> minima;
    for (std::size_t di = 0; di < dirs.size(); ++di) {
      if (!ctx.budget_ok()) break;
      DescentResult res = minimize_on_sphere(value, value_grad, dirs[di], r, dopt);
      if (res.x.size() == 0) {
        ++ctx.skipped;
        continue;
      }
      double fv;
      if (!ctx.eval_f_at(res.x, fv)) continue;
      minima.push_back({res.x, r * std::sqrt(std::max(0.0, res.value)), fv, int(di)});
    }
    dedup_minima(minima, 1e-3 * r, 32);
    extend_or_open(tracks, minima, k, r);
  }

  rep.partial = ctx.budget_hit;
  if (rep.partial) rep.notes.push_back("evaluation budget exhausted; sweep is partial");
  assemble_candidates(rep, tracks, ScanKind::k_infinity, cfg.f_window, 3, 1.0);
  rep.evaluations = ctx.evals;
  rep.skipped = ctx.skipped;
  return rep;
}

// --- scan_s_zero ----------------------------------------------------------

AsymptoticReport scan_s_zero(const ProblemPair& p, const SweepConfig& cfg) {
  validate(cfg);
  Ctx ctx = make_ctx(p.f, &p.g, cfg);
  const int n = p.arity;
  auto value = milnor_value(ctx);
  auto value_grad = milnor_value_grad(ctx);

  AsymptoticReport rep;
  rep.kind = ScanKind::s_zero;
  rep.config = cfg;
  rep.f = p.f;
  rep.g = p.g;

  std::vector<Track> tracks;
  DescentOptions dopt;
  dopt.max_iters = cfg.refine_iters;

  for (int k = 0; k <= cfg.levels && ctx.budget_ok(); ++k) {
    double r = cfg.radius(k);
    auto dirs = sphere_directions(n, cfg.directions, cfg.seed, k);
    std::vector<LocalMin> minima;
    for (std::size_t di = 0; di < dirs.size(); ++di) {
      if (!ctx.budget_ok()) break;
      Vec x0 = r * dirs[di];
      DescentResult res;
      try {
        if (!correct_to_slice(*ctx.g, 0.0, r, x0, ctx.gw)) {
          ++ctx.skipped;
          continue;
        }
        res = minimize_on_slice(value, value_grad, *ctx.g, 0.0, r, x0, ctx.gw, dopt);
      } catch (const Error&) {
        ++ctx.skipped;
        continue;
      }
      if (res.x.size() == 0) {
        ++ctx.skipped;
        continue;
      }
      Vec x = res.x;
      polish_milnor3(ctx, 0.0, r, x);

      double residual;
      try {
        MilnorParts<double> parts = milnor_parts<double>(ctx.pair, x.data(), ctx.pw);
        residual = parts.raw / (parts.tan_norm2 * parts.pi_norm2 + DBL_EPSILON);
      } catch (const Error&) {
        ++ctx.skipped;
        continue;
      }
      if (!(residual < 1e-8)) continue;  // not on the critical set: no witness
      double fv;
      if (!ctx.eval_f_at(x, fv)) continue;
      minima.push_back({std::move(x), residual, fv, int(di)});
    }
    dedup_minima(minima, 1e-3 * r, 16);
    extend_or_open(tracks, minima, k, r);
  }

  rep.partial = ctx.budget_hit;
  if (rep.partial) rep.notes.push_back("evaluation budget exhausted; sweep is partial");
  assemble_candidates(rep, tracks, ScanKind::s_zero, cfg.f_window, 3, 1.0);
  rep.evaluations = ctx.evals;
  rep.skipped = ctx.skipped;
  return rep;
}

// --- check_gs -------------------------------------------------------------

namespace {

std::vector<double> slice_grid(const IntervalSet& S, const SweepConfig& cfg) {
  std::vector<double> out;
  bool whole = false;
  for (const Interval& i : S)
    if (i.whole_line()) whole = true;
  if (whole || S.empty()) {
    static const double base[] = {0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0,
                                  2.0, -2.0, 4.0, -4.0, 8.0, -8.0, 16.0, -16.0};
    for (int i = 0; i < cfg.slice_count && i < 15; ++i)
      if (std::fabs(base[i]) < 0.9 * cfg.r0) out.push_back(base[i]);
  } else {
    int per = std::max(3, int(S.size() ? cfg.slice_count / int(S.size()) : cfg.slice_count));
    for (const Interval& iv : S) {
      if (iv.bounded()) {
        for (int j = 0; j < per; ++j)
          out.push_back(iv.lo + (iv.hi - iv.lo) * (j + 0.5) / per);
      } else if (std::isfinite(iv.lo)) {
        for (int j = 0; j < per; ++j) out.push_back(iv.lo + 0.5 * std::pow(2.0, j));
      } else if (std::isfinite(iv.hi)) {
        for (int j = 0; j < per; ++j) out.push_back(iv.hi - 0.5 * std::pow(2.0, j));
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

GsVerdict check_gs(const ProblemPair& p, const IntervalSet& S, const Interval& U,
                   double R, const SweepConfig& cfg) {
  validate(cfg);
  if (!(R > 0.0)) throw Error("ball radius R must be positive");
  Ctx ctx = make_ctx(p.f, &p.g, cfg);
  const int n = p.arity;

  GsVerdict verdict;
  verdict.config = cfg;
  verdict.grad_ok = true;
  verdict.containment_ok = true;
  verdict.slices_ok = true;

  // items 1 and 2: direct sampling of the domain between the spheres
  for (int k = 0; k <= cfg.levels && ctx.budget_ok(); ++k) {
    double r = cfg.radius(k);
    if (r <= R) continue;
    auto dirs = sphere_directions(n, cfg.directions, cfg.seed, k);
    Vec gf(n), gg(n);
    for (const Vec& d : dirs) {
      if (!ctx.budget_ok()) break;
      Vec x = r * d;
      double fv, gv;
      if (!ctx.eval_f_at(x, fv)) continue;
      if (!U.contains(fv)) continue;
      try {
        gv = eval_with(*ctx.g, x.data(), ctx.eb);
        grad_with(*ctx.f, x.data(), gf.data(), ctx.gw);
        grad_with(*ctx.g, x.data(), gg.data(), ctx.gw);
      } catch (const Error&) {
        ++ctx.skipped;
        continue;
      }
      ++ctx.evals;
      // the degeneracy test on grad g is absolute: scaling it by the size of
      // grad f would condemn perfectly regular level maps whenever f is a
      // polynomial whose gradient blows up along the sweep
      double ngg = gg.norm();
      if (ngg < verdict.min_grad_g_norm) {
        verdict.min_grad_g_norm = ngg;
        verdict.min_grad_g_point = x;
      }
      if (ngg < 1e-12) verdict.grad_ok = false;
      if (!contains(S, gv)) {
        verdict.containment_ok = false;
        if (verdict.violations.size() < 16) verdict.violations.push_back({x, gv});
      }
    }
  }

  // item 3: per-slice infima of ||x|| * ||grad_g f|| across radii
  auto value = slice_value(ctx);
  auto value_grad = slice_value_grad(ctx);
  DescentOptions dopt;
  dopt.max_iters = cfg.refine_iters;

  std::vector<Track> failing_tracks;
  for (double s : slice_grid(S, cfg)) {
    SliceRecord rec;
    rec.s = s;
    for (int k = 0; k <= cfg.levels && ctx.budget_ok(); ++k) {
      double r = cfg.radius(k);
      if (r <= R || r <= std::fabs(s)) continue;
      auto dirs = sphere_directions(n, std::min(cfg.directions, cfg.slice_seeds),
                                    cfg.seed ^ 0x5eedULL, k);
      double best = kInf, best_f = kNaN;
      Vec best_x;
      for (const Vec& d : dirs) {
        Vec x0 = r * d;
        DescentResult res;
        try {
          if (!correct_to_slice(*ctx.g, s, r, x0, ctx.gw)) {
            ++ctx.skipped;
            continue;
          }
          res = minimize_on_slice(value, value_grad, *ctx.g, s, r, x0, ctx.gw, dopt);
        } catch (const Error&) {
          ++ctx.skipped;
          continue;
        }
        if (res.x.size() == 0) {
          ++ctx.skipped;
          continue;
        }
        double fv;
        if (!ctx.eval_f_at(res.x, fv)) continue;
        if (!U.contains(fv)) continue;  // outside the value window: not in the domain
        double tn = std::sqrt(std::max(0.0, res.value));
        if (r * tn < best) {
          best = r * tn;
          best_f = fv;
          best_x = res.x;
        }
        if (rec.samples.size() < 24) rec.samples.push_back({res.x, fv, tn});
      }
      if (std::isfinite(best)) {
        rec.radii.push_back(r);
        rec.inf_quantity.push_back(best);
        rec.argmin.push_back(best_x);
        rec.argmin_f.push_back(best_f);
      }
    }
    rec.empty = rec.radii.empty();
    if (rec.empty) {
      verdict.skipped_slices.push_back(s);
      verdict.slices.push_back(std::move(rec));
      continue;
    }
    bool zero = is_zero_quantity(rec.inf_quantity, 1.0 + rec.radii.back());
    rec.slope = zero ? -kInf : fit_log_slope(rec.radii, rec.inf_quantity);
    rec.decays =
        zero || (rec.radii.size() >= 3 && std::isfinite(rec.slope) && rec.slope <= -0.25);
    if (rec.decays) {
      verdict.slices_ok = false;
      Track t;
      t.radii = rec.radii;
      t.q = rec.inf_quantity;
      t.f = rec.argmin_f;
      t.pts = rec.argmin;
      t.slice = s;
      failing_tracks.push_back(std::move(t));
    }
    verdict.slices.push_back(std::move(rec));
  }

  verdict.pass = verdict.grad_ok && verdict.containment_ok && verdict.slices_ok;
  verdict.failure_report.kind = ScanKind::k_infinity_gs;
  verdict.failure_report.config = cfg;
  verdict.failure_report.f = p.f;
  verdict.failure_report.g = p.g;
  if (!failing_tracks.empty())
    assemble_candidates(verdict.failure_report, failing_tracks, ScanKind::k_infinity_gs,
                        cfg.f_window, 3, 1.0 + cfg.radius(cfg.levels));
  if (ctx.budget_hit) {
    verdict.failure_report.partial = true;
    verdict.notes.push_back("evaluation budget exhausted; verdict is partial");
  }
  verdict.evaluations = ctx.evals;
  verdict.skipped = ctx.skipped;
  verdict.failure_report.evaluations = ctx.evals;
  verdict.failure_report.skipped = ctx.skipped;
  return verdict;
}

// --- refine_candidate -----------------------------------------------------

AsymptoticReport refine_candidate(const AsymptoticReport& report, int candidate_index,
                                  int extra_levels) {
  if (candidate_index < 0 || candidate_index >= int(report.candidates.size()))
    throw std::out_of_range("candidate index out of range");
  if (extra_levels < 0) throw Error("extra_levels must be non-negative");

  AsymptoticReport out = report;
  if (extra_levels == 0) return out;
  const bool needs_g = report.kind != ScanKind::k_infinity;
  if (needs_g && !report.g)
    throw Error("report lacks the hypersurface map needed to refine");

  Ctx ctx = make_ctx(report.f, report.g ? &*report.g : nullptr, report.config);
  DescentOptions dopt;
  dopt.max_iters = report.config.refine_iters;

  auto kv = kinf_value(ctx);
  auto kvg = kinf_value_grad(ctx);
  auto sv = slice_value(ctx);
  auto svg = slice_value_grad(ctx);
  auto mv = milnor_value(ctx);
  auto mvg = milnor_value_grad(ctx);

  CandidateValue& cand = out.candidates[candidate_index];
  for (WitnessSequence& w : cand.witnesses) {
    for (int j = 1; j <= extra_levels; ++j) {
      double r = w.radii.back() * report.config.q;
      Vec seed = w.points.back() * (r / w.points.back().norm());
      Vec x;
      double quantity, fv;
      try {
        if (report.kind == ScanKind::k_infinity) {
          DescentResult res = minimize_on_sphere(kv, kvg, seed, r, dopt);
          if (res.x.size() == 0) break;
          x = res.x;
          quantity = r * std::sqrt(std::max(0.0, res.value));
        } else if (report.kind == ScanKind::k_infinity_gs) {
          double s = w.slice;
          if (!correct_to_slice(*ctx.g, s, r, seed, ctx.gw)) break;
          DescentResult res = minimize_on_slice(sv, svg, *ctx.g, s, r, seed, ctx.gw, dopt);
          if (res.x.size() == 0) break;
          x = res.x;
          quantity = r * std::sqrt(std::max(0.0, res.value));
        } else {
          if (!correct_to_slice(*ctx.g, 0.0, r, seed, ctx.gw)) break;
          DescentResult res =
              minimize_on_slice(mv, mvg, *ctx.g, 0.0, r, seed, ctx.gw, dopt);
          if (res.x.size() == 0) break;
          x = res.x;
          polish_milnor3(ctx, 0.0, r, x);
          MilnorParts<double> parts = milnor_parts<double>(ctx.pair, x.data(), ctx.pw);
          quantity = parts.raw / (parts.tan_norm2 * parts.pi_norm2 + DBL_EPSILON);
          if (!(quantity < 1e-8)) break;
        }
      } catch (const Error&) {
        break;
      }
      if (!ctx.eval_f_at(x, fv)) break;
      if (std::fabs(fv - w.f_values.back()) > link_tol(w.f_values.back())) break;
      w.radii.push_back(r);
      w.points.push_back(std::move(x));
      w.f_values.push_back(fv);
      w.quantity_values.push_back(quantity);
    }
  }

  // re-estimate value and confidence from the extended sequences
  double best_conf = 0.0, best_value = cand.value;
  for (WitnessSequence& w : cand.witnesses) {
    Track t;
    t.radii = w.radii;
    t.f = w.f_values;
    t.q = w.quantity_values;
    t.slice = w.slice;
    bool zero = is_zero_quantity(t.q, 1.0 + w.radii.back());
    w.slope = zero ? -kInf : fit_log_slope(t.radii, t.q);
    double conf = track_confidence(report.kind, t, w.slope, zero);
    if (conf > best_conf) {
      best_conf = conf;
      best_value = t.f.back();
    }
  }
  cand.value = best_value;
  cand.confidence = best_conf;
  out.evaluations += ctx.evals;
  out.skipped += ctx.skipped;
  out.notes.push_back("refined candidate " + std::to_string(candidate_index) + " by " +
                      std::to_string(extra_levels) + " radii");
  return out;
}

}  // namespace bifurc
