#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "bifurc/flow.hpp"
#include "bifurc/problem.hpp"
#include "bifurc/scan.hpp"

namespace bifurc {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// FNV-1a over the raw bytes; the digest that ties a report to its inputs.
std::uint64_t fnv1a64(const std::string& bytes);
std::string digest_string(const std::string& bytes);

/// doubles render finite values exactly (shortest round-trip via the JSON
/// writer); non-finite values become the strings "inf" / "-inf" / "nan".
Json json_number(double v);
Json json_vec(const Vec& v);
Json json_interval(const Interval& iv);
Json json_interval_set(const IntervalSet& s);

Json to_json(const SweepConfig& cfg);
Json to_json(const WitnessSequence& w);
Json to_json(const CandidateValue& c);
Json to_json(const AsymptoticReport& rep);
Json to_json(const GsVerdict& verdict);
Json to_json(const Trajectory& tr, bool include_points);
Json to_json(const TransportResult& tr, bool include_trajectory);
Json problem_json(const ProblemFile& pf);

/// The envelope every CLI invocation writes.
Json run_report(const std::string& command_echo, std::uint64_t seed,
                const std::string& input_bytes, Json results);

/// temp file + rename so readers never observe a half-written report
void write_text_atomic(const std::string& path, const std::string& text);
void write_json(const std::string& path, const Json& doc);

// CSV exports, columns fixed: witnesses (radius, x_1..x_n, f, quantity),
// trajectories (t, x_1..x_n, f, g, norm)
std::string witness_csv(const WitnessSequence& w, int n);
std::string trajectory_csv(const Trajectory& tr, int n);

std::string format_double(double v);  // %.17g, the CSV number format

}  // namespace bifurc
