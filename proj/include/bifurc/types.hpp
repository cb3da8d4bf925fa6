#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bifurc {

using Vec = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Interval of the real line; unbounded ends are +-inf.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double x) const { return x >= lo && x <= hi; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool whole_line() const { return lo == -kInf && hi == kInf; }
};

using IntervalSet = std::vector<Interval>;

inline bool contains(const IntervalSet& s, double x) {
  for (const Interval& i : s)
    if (i.contains(x)) return true;
  return false;
}

inline IntervalSet whole_line_set() { return {Interval{}}; }

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct ParseError : Error {
  std::size_t position;
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

/// Domain-guard violation during evaluation, pointing at the offending node.
struct EvalError : Error {
  std::size_t position;
  std::string node_op;
  EvalError(const std::string& msg, const std::string& op, std::size_t pos)
      : Error(msg + " in '" + op + "' (source position " + std::to_string(pos) + ")"),
        position(pos),
        node_op(op) {}
};

enum class Degeneracy {
  zero_axis,       // projection axis below threshold
  gradient,        // grad g vanishes where it must not
  pairing,         // <w, grad f> (or <v, grad f_M>) collapse
  v_denominator,   // x and grad g linearly dependent
  off_manifold,    // |g(x)| above the on-manifold tolerance
};

inline const char* degeneracy_name(Degeneracy d) {
  switch (d) {
    case Degeneracy::zero_axis: return "zero_axis";
    case Degeneracy::gradient: return "gradient";
    case Degeneracy::pairing: return "pairing";
    case Degeneracy::v_denominator: return "v_denominator";
    case Degeneracy::off_manifold: return "off_manifold";
  }
  return "?";
}

struct DegenerateError : Error {
  Degeneracy kind;
  double magnitude;  // the offending quantity (norm, pairing, denominator)
  DegenerateError(Degeneracy k, const std::string& msg, double mag)
      : Error(msg), kind(k), magnitude(mag) {}
};

// --- deterministic RNG helpers (independent of libstdc++ distributions) ---

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Rng {
  std::uint64_t state;
  bool have_spare = false;
  double spare = 0.0;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() { return splitmix64(state); }

  /// Uniform in [0,1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * M_PI * u2);
    have_spare = true;
    return r * std::cos(2.0 * M_PI * u2);
  }
};

inline const char* tool_version() { return "0.1.0"; }

}  // namespace bifurc
