#pragma once

#include <string_view>

#include "d3re/error.hpp"
#include "d3re/program.hpp"

namespace d3re {

/// Parses a self-contained rule file (Souffle-compatible subset).
///
/// Accepted syntax: `.decl r(col:number|symbol, ...)`, `.input r[, r...]`,
/// `.output r[, r...]` (a trailing `(key=value, ...)` parameter list is
/// ignored), rules `h(...) :- b1, !b2, X < Y + 1.`, ground facts `r(1,"s").`,
/// `_` wildcards, `//` and `/* */` comments. A dangling comma before the
/// terminating `.` is accepted with a warning.
///
/// Throws ParseError on malformed text and SemanticError on undeclared
/// relations, arity/type mismatches and unsafe variables.
DatalogProgram parse_program(std::string_view text, Diagnostics* diagnostics = nullptr);

/// Parses `text` as an extension of `base`: relations declared in `base` may
/// be referenced without redeclaration. Returns only the new unit (its own
/// declarations, directives, rules and facts); combine with
/// `base.extended_with(unit)`.
DatalogProgram parse_extension(std::string_view text, const DatalogProgram& base,
                               Diagnostics* diagnostics = nullptr);

/// Validates a complete program; throws SemanticError on the first violation.
void validate_program(const DatalogProgram& program);

}  // namespace d3re
