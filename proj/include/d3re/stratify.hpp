#pragma once

#include <map>
#include <string>
#include <vector>

#include "d3re/program.hpp"

namespace d3re {

/// Layering of a program's rules so that every negated relation is complete
/// before any rule that negates it runs.
///
/// Only relations defined by at least one rule or fact get a stratum; pure
/// input relations are complete from the start and constrain nothing.
struct Stratification {
  /// Indices into DatalogProgram::rules, one vector per stratum, in
  /// evaluation order. Within a stratum rules keep program order.
  std::vector<std::vector<std::size_t>> strata;
  std::map<std::string, std::size_t> relation_stratum;
};

/// Lowest feasible stratum per defined relation. Throws StratificationError
/// naming the relations on a cycle through negation.
Stratification stratify(const DatalogProgram& program);

}  // namespace d3re
