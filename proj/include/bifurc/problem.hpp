#pragma once

#include <optional>
#include <string>

#include "bifurc/geometry.hpp"
#include "bifurc/scan.hpp"
#include "bifurc/types.hpp"

namespace bifurc {

struct FlowTolerances {
  double transport = 1e-8;
  double on_manifold = 1e-8;
  double degeneracy = 1e-12;
};

/// Parsed problem description (TOML subset, see the README for the grammar).
struct ProblemFile {
  int n = 0;
  std::string f_text;
  std::optional<std::string> g_text;
  Expression f;
  std::optional<Expression> g;
  IntervalSet S = whole_line_set();
  Interval U;          // defaults to the whole line
  double R = 1.0;
  SweepConfig sweep;
  FlowTolerances tol;

  bool has_g() const { return g.has_value(); }
};

ProblemFile parse_problem_text(const std::string& text);
ProblemFile load_problem_file(const std::string& path);

/// Requires g; throws Error otherwise.
ProblemPair problem_pair(const ProblemFile& pf);

}  // namespace bifurc
