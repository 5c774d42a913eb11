#pragma once

#include <cstddef>
#include <set>
#include <string>

#include "d3re/fact_database.hpp"
#include "d3re/program.hpp"

namespace d3re {

/// Work counters for one evaluation.
struct EvalStats {
  std::size_t rounds = 0;            ///< fixpoint iterations summed over strata
  std::size_t rule_evaluations = 0;  ///< rule bodies evaluated (one per semi-naive variant)
  std::size_t join_probes = 0;       ///< tuples visited through index lookups
  std::size_t derivations = 0;       ///< successful body matches, duplicates included
  std::size_t new_tuples = 0;        ///< tuples added to the database

  EvalStats& operator+=(const EvalStats& o) {
    rounds += o.rounds;
    rule_evaluations += o.rule_evaluations;
    join_probes += o.join_probes;
    derivations += o.derivations;
    new_tuples += o.new_tuples;
    return *this;
  }
};

struct EvalOptions {
  /// Canonical clauses (see canonical_clause) the input database is already
  /// closed under, typically the rule set of a cached snapshot. Those rules
  /// are only re-run against tuples added during this evaluation.
  std::set<std::string> closed_clauses;
  EvalStats* stats = nullptr;
};

/// Stratified least model of `program` over `edb`, by semi-naive iteration.
///
/// Returns every declared relation plus any undeclared edb relations
/// unchanged. Throws StratificationError, EvalError (edb arity/type
/// mismatch, arithmetic on strings, overflow, division by zero, unsound
/// closed_clauses).
FactDatabase evaluate(const DatalogProgram& program, const FactDatabase& edb,
                      const EvalOptions& options = {});

/// Reference evaluator: applies the immediate-consequence operator of each
/// stratum to a fixpoint with plain nested-loop joins. Test oracle for
/// `evaluate`; same contract, no seeding.
FactDatabase naive_evaluate(const DatalogProgram& program, const FactDatabase& edb);

/// Relations whose contents may change when `program` is evaluated over a
/// database already closed under `closed_clauses`: relations defined by the
/// remaining rules/facts and everything that depends on them.
std::set<std::string> affected_relations(const DatalogProgram& program,
                                         const std::set<std::string>& closed_clauses);

/// A database closed under `closed_clauses` can seed `program` iff no closed
/// rule negates an affected relation (otherwise stale negative conclusions
/// would survive).
bool seed_is_sound(const DatalogProgram& program, const std::set<std::string>& closed_clauses);

}  // namespace d3re
