#pragma once

// Pieces shared by the semi-naive engine and the naive reference evaluator:
// arithmetic/comparison semantics and edb admission. Join machinery is
// deliberately not shared.

#include <functional>
#include <map>
#include <string>

#include "d3re/fact_database.hpp"
#include "d3re/program.hpp"

namespace d3re::detail {

using VarLookup = std::function<Value(const std::string&)>;

/// Integer arithmetic with overflow and division-by-zero detection.
Value eval_expr(const Expr& e, const VarLookup& lookup);

/// `=`/`!=` compare any values; ordering operators require integers.
bool compare(CompareOp op, const Value& lhs, const Value& rhs);

/// Schema of every relation the evaluation will materialize: program
/// declarations plus undeclared relations carried by the edb. Throws
/// EvalError when the edb disagrees with a declaration.
Schema evaluation_schema(const DatalogProgram& program, const FactDatabase& edb);

}  // namespace d3re::detail
