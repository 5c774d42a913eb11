#include "d3re/program.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

#include "d3re/digest.hpp"
#include "d3re/error.hpp"

namespace d3re {

const char* to_string(ColumnType type) { return type == ColumnType::Number ? "number" : "symbol"; }

const char* to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
  }
  return "?";
}

bool RelationDecl::same_signature(const RelationDecl& other) const {
  if (columns.size() != other.columns.size()) return false;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].type != other.columns[i].type) return false;
  }
  return true;
}

void Expr::collect_variables(std::set<std::string>& out) const {
  if (op == Op::Leaf) {
    if (leaf.is_variable()) out.insert(leaf.name);
    return;
  }
  for (const auto& e : operands) e.collect_variables(out);
}

const RelationDecl* DatalogProgram::find(const std::string& relation) const {
  auto it = declarations.find(relation);
  return it == declarations.end() ? nullptr : &it->second;
}

DatalogProgram DatalogProgram::extended_with(const DatalogProgram& other) const {
  DatalogProgram out = *this;
  for (const auto& [name, decl] : other.declarations) {
    auto [it, inserted] = out.declarations.emplace(name, decl);
    if (!inserted && !it->second.same_signature(decl)) {
      throw SemanticError(0, 0,
                          "conflicting declaration of '" + name + "': " + to_source(it->second) +
                              " vs " + to_source(decl));
    }
  }
  out.inputs.insert(other.inputs.begin(), other.inputs.end());
  out.outputs.insert(other.outputs.begin(), other.outputs.end());

  std::set<std::string> seen;
  for (const auto& r : out.rules) seen.insert(canonical_clause(r));
  for (const auto& f : out.facts) seen.insert(canonical_clause(f));
  for (const auto& r : other.rules) {
    if (seen.insert(canonical_clause(r)).second) out.rules.push_back(r);
  }
  for (const auto& f : other.facts) {
    if (seen.insert(canonical_clause(f)).second) out.facts.push_back(f);
  }
  return out;
}

std::set<std::string> DatalogProgram::clause_set() const {
  std::set<std::string> out;
  for (const auto& r : rules) out.insert(canonical_clause(r));
  for (const auto& f : facts) out.insert(canonical_clause(f));
  return out;
}

std::set<std::string> DatalogProgram::defined_relations() const {
  std::set<std::string> out;
  for (const auto& r : rules) out.insert(r.head.relation);
  for (const auto& f : facts) out.insert(f.relation);
  return out;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

using Renamer = std::function<std::string(const std::string&)>;

std::string print_term(const Term& t, const Renamer& rename) {
  switch (t.kind) {
    case Term::Kind::Variable: return rename(t.name);
    case Term::Kind::Constant: return to_source(t.value);
    case Term::Kind::Wildcard: return "_";
  }
  return "_";
}

const char* op_symbol(Expr::Op op) {
  switch (op) {
    case Expr::Op::Add: return " + ";
    case Expr::Op::Sub: return " - ";
    case Expr::Op::Mul: return " * ";
    case Expr::Op::Div: return " / ";
    default: return "";
  }
}

std::string print_expr(const Expr& e, const Renamer& rename, bool nested) {
  if (e.is_leaf()) return print_term(e.leaf, rename);
  if (e.op == Expr::Op::Neg) return "-" + print_expr(e.operands[0], rename, true);
  std::string s = print_expr(e.operands[0], rename, true) + op_symbol(e.op) +
                  print_expr(e.operands[1], rename, true);
  return nested ? "(" + s + ")" : s;
}

std::string print_atom(const Atom& a, const Renamer& rename) {
  std::string s = a.relation + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) s += ",";
    s += print_term(a.args[i], rename);
  }
  return s + ")";
}

std::string print_literal(const Literal& l, const Renamer& rename) {
  switch (l.kind) {
    case Literal::Kind::Positive: return print_atom(l.atom, rename);
    case Literal::Kind::Negated: return "!" + print_atom(l.atom, rename);
    case Literal::Kind::Builtin:
      return print_expr(l.constraint.lhs, rename, false) + " " + to_string(l.constraint.op) + " " +
             print_expr(l.constraint.rhs, rename, false);
  }
  return {};
}

std::string print_rule(const Rule& r, const Renamer& rename) {
  std::string s = print_atom(r.head, rename) + " :- ";
  for (std::size_t i = 0; i < r.body.size(); ++i) {
    if (i) s += ", ";
    s += print_literal(r.body[i], rename);
  }
  return s + ".";
}

const Renamer kIdentity = [](const std::string& n) { return n; };

}  // namespace

std::string to_source(const Term& t) { return print_term(t, kIdentity); }
std::string to_source(const Expr& e) { return print_expr(e, kIdentity, false); }
std::string to_source(const Atom& a) { return print_atom(a, kIdentity); }
std::string to_source(const Literal& l) { return print_literal(l, kIdentity); }
std::string to_source(const Rule& r) { return print_rule(r, kIdentity); }

std::string to_source(const Fact& f) {
  std::string s = f.relation + "(";
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (i) s += ",";
    s += to_source(f.values[i]);
  }
  return s + ").";
}

std::string to_source(const RelationDecl& d) {
  std::string s = ".decl " + d.name + "(";
  for (std::size_t i = 0; i < d.columns.size(); ++i) {
    if (i) s += ", ";
    s += d.columns[i].name + ":" + to_string(d.columns[i].type);
  }
  return s + ")";
}

std::string to_source(const DatalogProgram& p) {
  std::string s;
  for (const auto& [name, decl] : p.declarations) s += to_source(decl) + "\n";
  for (const auto& name : p.inputs) s += ".input " + name + "\n";
  for (const auto& name : p.outputs) s += ".output " + name + "\n";
  for (const auto& f : p.facts) s += to_source(f) + "\n";
  for (const auto& r : p.rules) s += to_source(r) + "\n";
  return s;
}

std::string canonical_clause(const Rule& r) {
  std::unordered_map<std::string, std::string> names;
  Renamer rename = [&names](const std::string& n) {
    auto [it, inserted] = names.emplace(n, "");
    if (inserted) it->second = "V" + std::to_string(names.size() - 1);
    return it->second;
  };
  return print_rule(r, rename);
}

std::string canonical_clause(const Fact& f) { return to_source(f); }

std::string canonical_text(const DatalogProgram& p) {
  std::string s;
  for (const auto& [name, decl] : p.declarations) {
    RelationDecl anon = decl;
    for (std::size_t i = 0; i < anon.columns.size(); ++i) anon.columns[i].name = "c" + std::to_string(i);
    s += to_source(anon) + "\n";
  }
  for (const auto& name : p.inputs) s += ".input " + name + "\n";
  for (const auto& name : p.outputs) s += ".output " + name + "\n";

  std::vector<std::string> facts;
  for (const auto& f : p.facts) facts.push_back(canonical_clause(f));
  std::sort(facts.begin(), facts.end());
  facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
  for (const auto& f : facts) s += f + "\n";

  std::vector<std::string> rules;
  for (const auto& r : p.rules) rules.push_back(canonical_clause(r));
  std::sort(rules.begin(), rules.end());
  rules.erase(std::unique(rules.begin(), rules.end()), rules.end());
  for (const auto& r : rules) s += r + "\n";
  return s;
}

ProgramId canonical_hash(const DatalogProgram& p) { return {sha256_hex(canonical_text(p))}; }

}  // namespace d3re
