#include "bifurc/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bifurc {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_string(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json json_number(double v) {
  if (std::isnan(v)) return Json("nan");
  if (v == kInf) return Json("inf");
  if (v == -kInf) return Json("-inf");
  return Json(v);
}

Json json_vec(const Vec& v) {
  Json arr = Json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(json_number(v[i]));
  return arr;
}

Json json_interval(const Interval& iv) {
  return Json::array({json_number(iv.lo), json_number(iv.hi)});
}

Json json_interval_set(const IntervalSet& s) {
  Json arr = Json::array();
  for (const Interval& iv : s) arr.push_back(json_interval(iv));
  return arr;
}

Json to_json(const SweepConfig& cfg) {
  Json j;
  j["r0"] = json_number(cfg.r0);
  j["q"] = json_number(cfg.q);
  j["levels"] = cfg.levels;
  j["directions"] = cfg.directions;
  j["refine_iters"] = cfg.refine_iters;
  j["seed"] = cfg.seed;
  j["f_window"] = cfg.f_window ? json_interval(*cfg.f_window) : Json(nullptr);
  j["max_evaluations"] = cfg.max_evaluations;
  j["slice_count"] = cfg.slice_count;
  j["slice_seeds"] = cfg.slice_seeds;
  return j;
}

Json to_json(const WitnessSequence& w) {
  Json j;
  Json radii = Json::array(), fv = Json::array(), qv = Json::array(), pts = Json::array();
  for (double r : w.radii) radii.push_back(json_number(r));
  for (double v : w.f_values) fv.push_back(json_number(v));
  for (double v : w.quantity_values) qv.push_back(json_number(v));
  for (const Vec& p : w.points) pts.push_back(json_vec(p));
  j["radii"] = std::move(radii);
  j["f_values"] = std::move(fv);
  j["quantity_values"] = std::move(qv);
  j["points"] = std::move(pts);
  j["slope"] = json_number(w.slope);
  j["slice"] = std::isnan(w.slice) ? Json(nullptr) : json_number(w.slice);
  return j;
}

Json to_json(const CandidateValue& c) {
  Json j;
  j["value"] = json_number(c.value);
  j["confidence"] = json_number(c.confidence);
  Json ws = Json::array();
  for (const WitnessSequence& w : c.witnesses) ws.push_back(to_json(w));
  j["witnesses"] = std::move(ws);
  return j;
}

Json to_json(const AsymptoticReport& rep) {
  Json j;
  j["kind"] = scan_kind_name(rep.kind);
  Json cands = Json::array();
  for (const CandidateValue& c : rep.candidates) cands.push_back(to_json(c));
  j["candidates"] = std::move(cands);
  j["non_candidates_floor"] =
      rep.non_candidates_floor ? json_number(*rep.non_candidates_floor) : Json(nullptr);
  j["partial"] = rep.partial;
  j["evaluations"] = rep.evaluations;
  j["skipped"] = rep.skipped;
  j["notes"] = rep.notes;
  j["config"] = to_json(rep.config);
  j["f"] = to_string(rep.f);
  j["g"] = rep.g ? Json(to_string(*rep.g)) : Json(nullptr);
  return j;
}

Json to_json(const GsVerdict& v) {
  Json j;
  j["pass"] = v.pass;
  j["grad_ok"] = v.grad_ok;
  j["containment_ok"] = v.containment_ok;
  j["slices_ok"] = v.slices_ok;
  j["min_grad_g_norm"] = json_number(v.min_grad_g_norm);
  j["min_grad_g_point"] = v.min_grad_g_point.size() ? json_vec(v.min_grad_g_point) : Json(nullptr);
  Json viol = Json::array();
  for (const ContainmentViolation& cv : v.violations) {
    Json e;
    e["x"] = json_vec(cv.x);
    e["g"] = json_number(cv.g);
    viol.push_back(std::move(e));
  }
  j["violations"] = std::move(viol);
  Json slices = Json::array();
  for (const SliceRecord& rec : v.slices) {
    Json s;
    s["s"] = json_number(rec.s);
    Json radii = Json::array(), q = Json::array(), fv = Json::array();
    for (double r : rec.radii) radii.push_back(json_number(r));
    for (double x : rec.inf_quantity) q.push_back(json_number(x));
    for (double x : rec.argmin_f) fv.push_back(json_number(x));
    s["radii"] = std::move(radii);
    s["inf_quantity"] = std::move(q);
    s["argmin_f"] = std::move(fv);
    s["slope"] = json_number(rec.slope);
    s["decays"] = rec.decays;
    s["empty"] = rec.empty;
    slices.push_back(std::move(s));
  }
  j["slices"] = std::move(slices);
  Json sk = Json::array();
  for (double s : v.skipped_slices) sk.push_back(json_number(s));
  j["skipped_slices"] = std::move(sk);
  j["failure_report"] = v.pass ? Json(nullptr) : to_json(v.failure_report);
  j["config"] = to_json(v.config);
  j["evaluations"] = v.evaluations;
  j["skipped"] = v.skipped;
  j["notes"] = v.notes;
  return j;
}

Json to_json(const Trajectory& tr, bool include_points) {
  Json j;
  j["termination"] = termination_name(tr.termination);
  j["detail"] = tr.detail;
  j["steps_accepted"] = tr.steps_accepted;
  j["steps_rejected"] = tr.steps_rejected;
  j["rhs_evals"] = tr.rhs_evals;
  j["samples"] = tr.times.size();
  if (include_points) {
    Json t = Json::array(), pts = Json::array(), fv = Json::array(), gv = Json::array(),
         nv = Json::array(), ar = Json::array();
    for (double x : tr.times) t.push_back(json_number(x));
    for (const Vec& p : tr.points) pts.push_back(json_vec(p));
    for (double x : tr.f_values) fv.push_back(json_number(x));
    for (double x : tr.g_values) gv.push_back(json_number(x));
    for (double x : tr.norms) nv.push_back(json_number(x));
    for (double x : tr.affine_residuals) ar.push_back(json_number(x));
    j["times"] = std::move(t);
    j["points"] = std::move(pts);
    j["f_values"] = std::move(fv);
    j["g_values"] = std::move(gv);
    j["norms"] = std::move(nv);
    j["affine_residuals"] = std::move(ar);
  }
  return j;
}

Json to_json(const TransportResult& tr, bool include_trajectory) {
  Json j;
  j["success"] = tr.success;
  j["mu"] = json_number(tr.mu);
  j["lambda"] = json_number(tr.lambda);
  j["endpoint"] = tr.endpoint.size() ? json_vec(tr.endpoint) : Json(nullptr);
  j["f_error"] = json_number(tr.f_error);
  j["g_error"] = json_number(tr.g_error);
  j["norm_drift"] = json_number(tr.norm_drift);
  j["max_norm_drift"] = json_number(tr.max_norm_drift);
  j["max_affine_residual"] = json_number(tr.max_affine_residual);
  j["trajectory"] = to_json(tr.trajectory, include_trajectory);
  return j;
}

Json problem_json(const ProblemFile& pf) {
  Json j;
  j["n"] = pf.n;
  j["f"] = pf.f_text;
  j["g"] = pf.g_text ? Json(*pf.g_text) : Json(nullptr);
  j["S"] = json_interval_set(pf.S);
  j["U"] = json_interval(pf.U);
  j["R"] = json_number(pf.R);
  return j;
}

Json run_report(const std::string& command_echo, std::uint64_t seed,
                const std::string& input_bytes, Json results) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = "bifurcat";
  j["version"] = tool_version();
  j["command"] = command_echo;
  j["seed"] = seed;
  j["input_digest"] = digest_string(input_bytes);
  j["results"] = std::move(results);
  return j;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_json(const std::string& path, const Json& doc) {
  write_text_atomic(path, doc.dump(2) + "\n");
}

std::string witness_csv(const WitnessSequence& w, int n) {
  std::ostringstream out;
  out << "radius";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  out << ",f,quantity\n";
  for (std::size_t k = 0; k < w.radii.size(); ++k) {
    out << format_double(w.radii[k]);
    for (int i = 0; i < n; ++i) out << "," << format_double(w.points[k][i]);
    out << "," << format_double(w.f_values[k]) << ","
        << format_double(w.quantity_values[k]) << "\n";
  }
  return out.str();
}

std::string trajectory_csv(const Trajectory& tr, int n) {
  std::ostringstream out;
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  out << ",f,g,norm\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    out << format_double(tr.times[k]);
    for (int i = 0; i < n; ++i) out << "," << format_double(tr.points[k][i]);
    double g = k < tr.g_values.size() ? tr.g_values[k] : kNaN;
    out << "," << format_double(tr.f_values[k]) << "," << format_double(g) << ","
        << format_double(tr.norms[k]) << "\n";
  }
  return out.str();
}

}  // namespace bifurc
