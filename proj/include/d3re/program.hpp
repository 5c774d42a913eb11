#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "d3re/value.hpp"

namespace d3re {

enum class ColumnType { Number, Symbol };

const char* to_string(ColumnType type);

struct Column {
  std::string name;
  ColumnType type = ColumnType::Number;
};

struct RelationDecl {
  std::string name;
  std::vector<Column> columns;

  std::size_t arity() const { return columns.size(); }
  /// Arity and column types agree; column names are documentation only.
  bool same_signature(const RelationDecl& other) const;
};

struct SourcePos {
  std::size_t line = 0;
  std::size_t column = 0;
};

struct Term {
  enum class Kind { Variable, Constant, Wildcard };

  Kind kind = Kind::Wildcard;
  std::string name;  // Variable only
  Value value;       // Constant only

  static Term variable(std::string name) { return {Kind::Variable, std::move(name), {}}; }
  static Term constant(Value v) { return {Kind::Constant, {}, v}; }
  static Term wildcard() { return {}; }

  bool is_variable() const { return kind == Kind::Variable; }
  bool is_constant() const { return kind == Kind::Constant; }
  bool is_wildcard() const { return kind == Kind::Wildcard; }
};

/// Integer arithmetic over terms.
struct Expr {
  enum class Op { Leaf, Add, Sub, Mul, Div, Neg };

  Op op = Op::Leaf;
  Term leaf;
  std::vector<Expr> operands;

  static Expr of(Term t) { return {Op::Leaf, std::move(t), {}}; }
  static Expr binary(Op op, Expr lhs, Expr rhs) {
    Expr e{op, {}, {}};
    e.operands.push_back(std::move(lhs));
    e.operands.push_back(std::move(rhs));
    return e;
  }
  static Expr negate(Expr inner) {
    Expr e{Op::Neg, {}, {}};
    e.operands.push_back(std::move(inner));
    return e;
  }

  bool is_leaf() const { return op == Op::Leaf; }
  void collect_variables(std::set<std::string>& out) const;
};

struct Atom {
  std::string relation;
  std::vector<Term> args;
};

enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne };

const char* to_string(CompareOp op);

struct Constraint {
  Expr lhs;
  CompareOp op = CompareOp::Eq;
  Expr rhs;
};

struct Literal {
  enum class Kind { Positive, Negated, Builtin };

  Kind kind = Kind::Positive;
  Atom atom;              // Positive / Negated
  Constraint constraint;  // Builtin

  static Literal positive(Atom a) { return {Kind::Positive, std::move(a), {}}; }
  static Literal negated(Atom a) { return {Kind::Negated, std::move(a), {}}; }
  static Literal builtin(Constraint c) { return {Kind::Builtin, {}, std::move(c)}; }

  bool is_atom() const { return kind != Kind::Builtin; }
};

struct Rule {
  Atom head;
  std::vector<Literal> body;
  SourcePos pos;
};

/// A ground head-only clause.
struct Fact {
  std::string relation;
  Tuple values;

  friend bool operator==(const Fact&, const Fact&) = default;
};

/// Parsed rules plus relation declarations and I/O directives.
///
/// Treated as an immutable value once built; extension produces a new
/// program. Rules and facts are kept free of duplicates (compared by their
/// canonical clause text).
struct DatalogProgram {
  std::map<std::string, RelationDecl> declarations;
  std::set<std::string> inputs;
  std::set<std::string> outputs;
  std::vector<Rule> rules;
  std::vector<Fact> facts;

  const RelationDecl* find(const std::string& relation) const;

  /// Union of both programs. Conflicting declarations throw SemanticError.
  DatalogProgram extended_with(const DatalogProgram& other) const;

  /// Canonical clause strings of all rules and facts.
  std::set<std::string> clause_set() const;

  /// Relations that are the head of some rule or fact.
  std::set<std::string> defined_relations() const;
};

// Printing. `to_source` keeps user variable names and written order; the
// canonical forms rename variables V0, V1, ... in order of first occurrence
// (head first, then body left to right) and are used for hashing.
std::string to_source(const Term& t);
std::string to_source(const Expr& e);
std::string to_source(const Atom& a);
std::string to_source(const Literal& l);
std::string to_source(const Rule& r);
std::string to_source(const Fact& f);
std::string to_source(const RelationDecl& d);
std::string to_source(const DatalogProgram& p);

std::string canonical_clause(const Rule& r);
std::string canonical_clause(const Fact& f);

/// Declarations and directives sorted by name, then facts sorted, then
/// rules sorted, all in canonical clause form. Stable and parseable.
std::string canonical_text(const DatalogProgram& p);

/// Content digest of a program's canonical text.
struct ProgramId {
  std::string hex;

  friend bool operator==(const ProgramId&, const ProgramId&) = default;
  friend auto operator<=>(const ProgramId&, const ProgramId&) = default;
};

ProgramId canonical_hash(const DatalogProgram& p);

}  // namespace d3re
