#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bifurc/flow.hpp"
#include "bifurc/geometry.hpp"
#include "bifurc/scan.hpp"

namespace bifurc {

/// One line of the built-in example matrix: observed vs the pinned bound.
struct CheckRow {
  std::string example;
  std::string check;
  double expected = 0.0;  // bound the observation is held against
  double observed = kNaN;
  bool pass = false;
  std::string note;
};

// the built-in corpus
ProblemPair ex1_pair();   // f = x - x^3 y^2,                 g = y
ProblemPair exa2_pair();  // f = y/(1+x^2),                   g = x
ProblemPair exa3_pair();  // f = x - 3x^5 y^2 + 2x^7 y^3 + yz, g = y
ProblemPair sec4_pair();  // f = y,    g = x^2/2 + y^2 - 1/2

/// Arity-2 formula pairs for the Jacobian identity battery (first is the shear).
std::vector<std::pair<std::string, std::string>> jacobian_pairs();

/// Every distinct formula in the corpus (gradient-oracle battery).
std::vector<Expression> expression_corpus();

/// A transport setup with a sampler that only produces starts the field is
/// provably clean on.
struct FlowFamily {
  std::string name;
  ProblemPair pair;
  TransportMode mode = TransportMode::ambient;
  TransportOptions opts;
  std::function<void(Rng&, Vec&, double&)> sample;  // fills start and lambda
};

std::vector<FlowFamily> flow_corpus();

/// Runs the checks for one example ("ex1", "exa2", "exa3", "exa4", "sec4",
/// "flows") or "all". transports_per_family sizes the flow rows (the matrix
/// uses a smaller count than the acceptance gate; the checks are identical).
std::vector<CheckRow> run_examples(const std::string& which, std::uint64_t seed,
                                   int transports_per_family = 12);

nlohmann::ordered_json examples_json(const std::vector<CheckRow>& rows);

}  // namespace bifurc
