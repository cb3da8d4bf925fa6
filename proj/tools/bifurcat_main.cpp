#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bifurc/examples.hpp"
#include "bifurc/problem.hpp"
#include "bifurc/report.hpp"

namespace {

using namespace bifurc;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& out_dir, const Json& report,
          const std::vector<std::pair<std::string, std::string>>& extra_files) {
  if (out_dir.empty()) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  write_json(out_dir + "/report.json", report);
  for (const auto& [name, text] : extra_files) write_text_atomic(out_dir + "/" + name, text);
  std::cout << "wrote " << out_dir << "/report.json";
  if (!extra_files.empty()) std::cout << " and " << extra_files.size() << " csv file(s)";
  std::cout << "\n";
}

void witness_files(const AsymptoticReport& rep, int arity,
                   std::vector<std::pair<std::string, std::string>>& files) {
  for (std::size_t c = 0; c < rep.candidates.size(); ++c)
    for (std::size_t w = 0; w < rep.candidates[c].witnesses.size(); ++w) {
      std::string name =
          "candidate" + std::to_string(c) + "_witness" + std::to_string(w) + ".csv";
      files.push_back({name, witness_csv(rep.candidates[c].witnesses[w], arity)});
    }
}

Vec parse_point(const std::string& text, int n) {
  Vec x(n);
  std::istringstream in(text);
  std::string tok;
  int i = 0;
  while (std::getline(in, tok, ',')) {
    if (i >= n) throw Error("start point has more than " + std::to_string(n) + " coordinates");
    try {
      x[i++] = std::stod(tok);
    } catch (const std::exception&) {
      throw Error("bad coordinate '" + tok + "' in start point");
    }
  }
  if (i != n) throw Error("start point needs " + std::to_string(n) + " coordinates");
  return x;
}

/// Newton along grad g; the CLI-level courtesy projection for nearly
/// on-surface starts (within 1e-3).
bool project_to_surface(const Expression& g, Vec& x) {
  GradWorkspace<double> gw;
  EvalBuffer<double> eb;
  Vec gg(g.arity);
  for (int it = 0; it < 30; ++it) {
    double gv = eval_with(g, x.data(), eb);
    if (std::fabs(gv) <= 1e-12) return true;
    grad_with(g, x.data(), gg.data(), gw);
    double n2 = gg.squaredNorm();
    if (!(n2 > 1e-30)) return false;
    x -= (gv / n2) * gg;
  }
  return false;
}

std::string fmt_seed(std::uint64_t s) { return std::to_string(s); }

int run_scan(const std::string& kind, const std::string& problem_path,
             const std::string& out_dir, std::optional<std::uint64_t> seed,
             std::optional<int> radii, std::optional<int> dirs) {
  std::string raw = slurp(problem_path);
  ProblemFile pf = parse_problem_text(raw);
  if (seed) pf.sweep.seed = *seed;
  if (radii) pf.sweep.levels = *radii;
  if (dirs) pf.sweep.directions = *dirs;

  std::string echo = "scan " + kind + " --problem " + problem_path + " --seed " +
                     fmt_seed(pf.sweep.seed) + " --radii " +
                     std::to_string(pf.sweep.levels) + " --dirs " +
                     std::to_string(pf.sweep.directions);

  Json results;
  std::vector<std::pair<std::string, std::string>> files;
  bool findings = false;
  if (kind == "kinf") {
    AsymptoticReport rep = scan_k_infinity(pf.f, pf.sweep);
    findings = !rep.candidates.empty();
    results["scan"] = to_json(rep);
    witness_files(rep, pf.n, files);
  } else if (kind == "gs") {
    if (!pf.has_g()) throw Error("scan kind 'gs' needs a hypersurface map g in the problem file");
    GsVerdict v = check_gs(problem_pair(pf), pf.S, pf.U, pf.R, pf.sweep);
    findings = !v.pass;
    results["verdict"] = to_json(v);
    if (!v.pass) witness_files(v.failure_report, pf.n, files);
  } else if (kind == "szero") {
    if (!pf.has_g()) throw Error("scan kind 'szero' needs a hypersurface map g in the problem file");
    AsymptoticReport rep = scan_s_zero(problem_pair(pf), pf.sweep);
    findings = !rep.candidates.empty();
    results["scan"] = to_json(rep);
    witness_files(rep, pf.n, files);
  } else {
    throw Error("unknown scan kind '" + kind + "' (expected kinf, gs, szero)");
  }
  results["problem"] = problem_json(pf);

  emit(out_dir, run_report(echo, pf.sweep.seed, raw, std::move(results)), files);
  return findings ? 2 : 0;
}

int run_transport(const std::string& problem_path, const std::string& out_dir,
                  double lambda, const std::string& mode_name,
                  const std::vector<std::string>& start_texts, int sample_count,
                  std::optional<std::uint64_t> seed, std::optional<double> tol) {
  std::string raw = slurp(problem_path);
  ProblemFile pf = parse_problem_text(raw);
  if (!pf.has_g())
    throw Error("transport needs the hypersurface map g (the field blends grad f with the fiberwise gradient)");
  ProblemPair pair = problem_pair(pf);
  std::uint64_t eff_seed = seed ? *seed : pf.sweep.seed;

  TransportMode mode;
  if (mode_name == "ambient") mode = TransportMode::ambient;
  else if (mode_name == "manifold") mode = TransportMode::on_manifold;
  else throw Error("unknown mode '" + mode_name + "' (expected ambient or manifold)");

  TransportOptions opts;
  opts.R = pf.R;
  opts.tol = tol ? *tol : pf.tol.transport;
  opts.geom.on_manifold = pf.tol.on_manifold;
  opts.geom.degeneracy = pf.tol.degeneracy;

  std::vector<Vec> starts;
  std::vector<std::string> rejected;
  for (const std::string& t : start_texts) starts.push_back(parse_point(t, pf.n));
  if (sample_count > 0) {
    Rng rng(eff_seed);
    for (int i = 0; i < sample_count; ++i) {
      Vec d(pf.n);
      for (int k = 0; k < pf.n; ++k) d[k] = rng.normal();
      double dn = d.norm();
      if (!(dn > 0.0)) d[0] = dn = 1.0;
      starts.push_back(rng.uniform(2.0, 8.0) / dn * d);
    }
  }
  if (starts.empty()) throw Error("no starts: pass --start or --sample");

  EvalBuffer<double> eb;
  Json arr = Json::array();
  std::vector<std::pair<std::string, std::string>> files;
  int successes = 0;
  double max_f_error = 0.0, max_drift = 0.0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    Vec x0 = starts[i];
    Json entry;
    entry["start"] = json_vec(x0);
    if (mode == TransportMode::on_manifold) {
      double gv = eval_with(pair.g, x0.data(), eb);
      if (std::fabs(gv) > 1e-3) {
        entry["rejected"] = "start is not on the surface (|g| > 1e-3)";
        arr.push_back(std::move(entry));
        continue;
      }
      if (!project_to_surface(pair.g, x0)) {
        entry["rejected"] = "projection onto the surface did not converge";
        arr.push_back(std::move(entry));
        continue;
      }
    }
    TransportResult tr = mode == TransportMode::ambient
                             ? transport_ambient(pair, x0, lambda, opts)
                             : transport_on_manifold(pair, x0, lambda, opts);
    if (tr.success) {
      ++successes;
      max_f_error = std::max(max_f_error, tr.f_error);
      if (mode == TransportMode::on_manifold)
        max_drift = std::max(max_drift, tr.max_norm_drift);
    }
    entry["result"] = to_json(tr, false);
    arr.push_back(std::move(entry));
    files.push_back({"transport" + std::to_string(i) + ".csv",
                     trajectory_csv(tr.trajectory, pf.n)});
  }

  std::string echo = "transport --problem " + problem_path + " --lambda " +
                     format_double(lambda) + " --mode " + mode_name + " --seed " +
                     fmt_seed(eff_seed) + " --tol " + format_double(opts.tol);
  Json results;
  results["mode"] = mode_name;
  results["lambda"] = json_number(lambda);
  results["transports"] = std::move(arr);
  Json summary;
  summary["count"] = starts.size();
  summary["successes"] = successes;
  summary["success_rate"] =
      json_number(starts.empty() ? 0.0 : double(successes) / double(starts.size()));
  summary["max_f_error"] = json_number(max_f_error);
  summary["max_norm_drift"] = json_number(max_drift);
  results["summary"] = std::move(summary);
  results["problem"] = problem_json(pf);

  emit(out_dir, run_report(echo, eff_seed, raw, std::move(results)), files);
  return 0;
}

int run_examples_cmd(const std::string& which, const std::string& out_dir,
                     std::uint64_t seed, int transports) {
  std::vector<CheckRow> rows = run_examples(which, seed, transports);
  bool all_pass = true;
  for (const CheckRow& r : rows) {
    std::printf("%-6s %-32s %-4s expected<=%-12.6g observed=%-12.6g\n", r.example.c_str(),
                r.check.c_str(), r.pass ? "ok" : "FAIL", r.expected, r.observed);
    if (!r.pass)
      std::fprintf(stderr, "mismatch: %s/%s expected %.17g, observed %.17g (%s)\n",
                   r.example.c_str(), r.check.c_str(), r.expected, r.observed,
                   r.note.c_str());
    all_pass = all_pass && r.pass;
  }
  std::string echo = "examples " + which + " --seed " + fmt_seed(seed) +
                     " --transports " + std::to_string(transports);
  Json results;
  results["matrix"] = examples_json(rows);
  emit(out_dir, run_report(echo, seed, which + "/" + fmt_seed(seed), std::move(results)),
       {});
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bifurcat: candidate bifurcation values and fiber transport"};
  app.require_subcommand(1);

  std::string kind, problem_path, out_dir, mode_name = "ambient", which = "all";
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> radii_opt, dirs_opt;
  std::optional<double> tol_opt;
  double lambda = 0.0;
  std::vector<std::string> start_texts;
  int sample_count = 0;
  std::uint64_t ex_seed = 0;
  int ex_transports = 12;

  CLI::App* scan = app.add_subcommand("scan", "sweep for asymptotic critical values");
  scan->add_option("kind", kind, "kinf | gs | szero")->required();
  scan->add_option("--problem", problem_path, "problem file (TOML)")->required();
  scan->add_option("--out", out_dir, "output directory (default: stdout)");
  scan->add_option("--seed", seed_opt, "override the sweep seed");
  scan->add_option("--radii", radii_opt, "override the number of extra radii (levels)");
  scan->add_option("--dirs", dirs_opt, "override directions per sphere");

  CLI::App* tr = app.add_subcommand("transport", "integrate the fiber-to-fiber flow");
  tr->add_option("--problem", problem_path, "problem file (TOML)")->required();
  tr->add_option("--lambda", lambda, "target value")->required();
  tr->add_option("--mode", mode_name, "ambient | manifold");
  tr->add_option("--start", start_texts, "start point, comma-separated coordinates");
  tr->add_option("--sample", sample_count, "additionally sample this many random starts");
  tr->add_option("--out", out_dir, "output directory (default: stdout)");
  tr->add_option("--seed", seed_opt, "sampler seed");
  tr->add_option("--tol", tol_opt, "transport tolerance");

  CLI::App* ex = app.add_subcommand("examples", "run the built-in example matrix");
  ex->add_option("which", which, "ex1 | exa2 | exa3 | exa4 | sec4 | flows | all");
  ex->add_option("--out", out_dir, "output directory (default: stdout)");
  ex->add_option("--seed", ex_seed, "seed for the sampled checks");
  ex->add_option("--transports", ex_transports, "transports per flow family");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (scan->parsed())
      return run_scan(kind, problem_path, out_dir, seed_opt, radii_opt, dirs_opt);
    if (tr->parsed())
      return run_transport(problem_path, out_dir, lambda, mode_name, start_texts,
                           sample_count, seed_opt, tol_opt);
    if (ex->parsed()) return run_examples_cmd(which, out_dir, ex_seed, ex_transports);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
