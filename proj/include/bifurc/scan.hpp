#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bifurc/geometry.hpp"
#include "bifurc/optim.hpp"
#include "bifurc/types.hpp"

namespace bifurc {

struct SweepConfig {
  double r0 = 10.0;
  double q = 2.0;
  int levels = 12;        // radii r0 * q^k for k = 0..levels
  int directions = 4096;  // low-discrepancy seeds per sphere
  int refine_iters = 100; // descent iterations per seed
  std::uint64_t seed = 0;
  std::optional<Interval> f_window;
  std::uint64_t max_evaluations = 0;  // 0 = unbounded; exceeding flags a partial report
  int slice_count = 15;   // g-levels for the per-slice sweep
  int slice_seeds = 16;   // seeds per (slice, radius)

  double radius(int level) const;
  std::vector<double> radii() const;
};

struct WitnessSequence {
  std::vector<double> radii;  // strictly increasing
  std::vector<Vec> points;
  std::vector<double> f_values;
  std::vector<double> quantity_values;  // the decaying quantity of the scan kind
  double slope = kNaN;                  // least-squares log-quantity vs log-radius
  double slice = kNaN;                  // gS sweeps: the g-level the track lives on
};

struct CandidateValue {
  double value = kNaN;
  double confidence = 0.0;  // in [0,1]
  std::vector<WitnessSequence> witnesses;
};

enum class ScanKind { k_infinity, k_infinity_gs, s_zero };
const char* scan_kind_name(ScanKind k);

struct AsymptoticReport {
  ScanKind kind = ScanKind::k_infinity;
  std::vector<CandidateValue> candidates;
  SweepConfig config;
  std::optional<double> non_candidates_floor;  // smallest quantity seen off-candidate
  bool partial = false;                        // evaluation budget was exhausted
  std::uint64_t evaluations = 0;
  std::uint64_t skipped = 0;  // samples lost to domain errors / non-convergence
  std::vector<std::string> notes;
  // enough context to refine later
  Expression f;
  std::optional<Expression> g;
};

/// Sweeps spheres of geometrically growing radius for minima of ||grad f||,
/// tracks minima whose ||x||*||grad f|| decays across radii, and clusters
/// their f-values into candidate bifurcation values at infinity.
AsymptoticReport scan_k_infinity(const Expression& f, const SweepConfig& cfg);

/// Hunts unbounded branches of the critical set of (f|M, ||.||^2) on
/// M = g^{-1}(0) and clusters the f-values they converge to.
AsymptoticReport scan_s_zero(const ProblemPair& p, const SweepConfig& cfg);

struct SliceSample {
  Vec x;
  double f = kNaN;
  double tangential_norm = kNaN;
};

struct SliceRecord {
  double s = kNaN;
  std::vector<double> radii;         // radii with feasible samples
  std::vector<double> inf_quantity;  // estimated inf of ||x||*||grad_g f||
  std::vector<Vec> argmin;
  std::vector<double> argmin_f;
  double slope = kNaN;
  bool decays = false;  // per-slice Malgrange failure
  bool empty = true;
  std::vector<SliceSample> samples;  // capped
};

struct ContainmentViolation {
  Vec x;
  double g = kNaN;
};

struct GsVerdict {
  bool grad_ok = false;         // grad g nonvanishing on the sampled domain
  bool containment_ok = false;  // sampled domain inside g^{-1}(S)
  bool slices_ok = false;       // no slice-wise Malgrange decay
  bool pass = false;
  double min_grad_g_norm = kInf;  // smallest sampled ||grad g||
  Vec min_grad_g_point;
  std::vector<ContainmentViolation> violations;  // capped at 16
  std::vector<SliceRecord> slices;
  std::vector<double> skipped_slices;
  AsymptoticReport failure_report;  // candidates fed by failing slices
  SweepConfig config;
  std::uint64_t evaluations = 0;
  std::uint64_t skipped = 0;
  std::vector<std::string> notes;
};

/// Verifies the three-part fiberwise Malgrange condition for (f, g) over the
/// value window U, outside the ball of radius R, with fibers sliced along S.
GsVerdict check_gs(const ProblemPair& p, const IntervalSet& S, const Interval& U,
                   double R, const SweepConfig& cfg);

/// Extends the witness sequences of one candidate to extra_levels further
/// radii and re-estimates its value and confidence. Throws std::out_of_range
/// for a bad index (including any index into an empty report).
AsymptoticReport refine_candidate(const AsymptoticReport& report, int candidate_index,
                                  int extra_levels);

}  // namespace bifurc
