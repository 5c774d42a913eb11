// Reference evaluator. Kept intentionally plain: no indices, no deltas, no
// reordering beyond "positive atoms first, then assignments, then filters".

#include <map>
#include <set>

#include "d3re/evaluate.hpp"
#include "d3re/stratify.hpp"
#include "eval_common.hpp"

namespace d3re {
namespace {

using Binding = std::map<std::string, Value>;
using Database = std::map<std::string, std::set<Tuple>>;

bool unify(const Atom& atom, const Tuple& tuple, Binding& binding) {
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    const Term& t = atom.args[i];
    if (t.is_wildcard()) continue;
    if (t.is_constant()) {
      if (!(t.value == tuple[i])) return false;
      continue;
    }
    auto [it, inserted] = binding.emplace(t.name, tuple[i]);
    if (!inserted && !(it->second == tuple[i])) return false;
  }
  return true;
}

bool negation_holds(const Atom& atom, const Binding& binding, const Database& db) {
  for (const auto& tuple : db.at(atom.relation)) {
    Binding scratch = binding;
    if (unify(atom, tuple, scratch)) return false;
  }
  return true;
}

void finish(const Rule& rule, Binding binding, const Database& db, std::set<Tuple>& out) {
  auto lookup = [&binding](const std::string& v) { return binding.at(v); };
  std::vector<const Constraint*> pending;
  for (const auto& lit : rule.body) {
    if (lit.kind == Literal::Kind::Builtin) pending.push_back(&lit.constraint);
  }
  // Resolve assignments `X = expr` until none apply, then everything left is a filter.
  for (bool progress = true; progress;) {
    progress = false;
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      const Constraint& c = **it;
      if (c.op != CompareOp::Eq) continue;
      std::set<std::string> lv, rv;
      c.lhs.collect_variables(lv);
      c.rhs.collect_variables(rv);
      auto all_bound = [&binding](const std::set<std::string>& vs) {
        for (const auto& v : vs) {
          if (!binding.count(v)) return false;
        }
        return true;
      };
      const Expr* target = nullptr;
      const Expr* source = nullptr;
      if (c.lhs.is_leaf() && c.lhs.leaf.is_variable() && !binding.count(c.lhs.leaf.name) && all_bound(rv)) {
        target = &c.lhs;
        source = &c.rhs;
      } else if (c.rhs.is_leaf() && c.rhs.leaf.is_variable() && !binding.count(c.rhs.leaf.name) &&
                 all_bound(lv)) {
        target = &c.rhs;
        source = &c.lhs;
      }
      if (!target) continue;
      binding[target->leaf.name] = detail::eval_expr(*source, lookup);
      pending.erase(it);
      progress = true;
      break;
    }
  }
  for (const Constraint* c : pending) {
    if (!detail::compare(c->op, detail::eval_expr(c->lhs, lookup), detail::eval_expr(c->rhs, lookup))) return;
  }
  for (const auto& lit : rule.body) {
    if (lit.kind == Literal::Kind::Negated && !negation_holds(lit.atom, binding, db)) return;
  }
  Tuple head;
  for (const auto& t : rule.head.args) head.push_back(t.is_constant() ? t.value : binding.at(t.name));
  out.insert(std::move(head));
}

void match(const Rule& rule, std::size_t index, const Binding& binding, const Database& db,
           std::set<Tuple>& out) {
  while (index < rule.body.size() && rule.body[index].kind != Literal::Kind::Positive) ++index;
  if (index == rule.body.size()) {
    finish(rule, binding, db, out);
    return;
  }
  const Atom& atom = rule.body[index].atom;
  for (const auto& tuple : db.at(atom.relation)) {
    Binding next = binding;
    if (unify(atom, tuple, next)) match(rule, index + 1, next, db, out);
  }
}

}  // namespace

FactDatabase naive_evaluate(const DatalogProgram& program, const FactDatabase& edb) {
  Stratification strata = stratify(program);
  Schema schema = detail::evaluation_schema(program, edb);

  Database db;
  for (const auto& [name, rs] : schema) db[name];
  for (const auto& [name, rel] : edb.relations()) db[name].insert(rel.tuples.begin(), rel.tuples.end());
  for (const auto& f : program.facts) db[f.relation].insert(f.values);

  for (const auto& stratum : strata.strata) {
    for (bool changed = true; changed;) {
      changed = false;
      std::map<std::string, std::set<Tuple>> derived;
      for (std::size_t id : stratum) {
        const Rule& rule = program.rules[id];
        match(rule, 0, {}, db, derived[rule.head.relation]);
      }
      for (auto& [name, tuples] : derived) {
        for (const auto& t : tuples) changed |= db[name].insert(t).second;
      }
    }
  }

  FactDatabase::Builder b;
  for (const auto& [name, rs] : schema) {
    b.declare(name, rs);
    for (const auto& t : db[name]) b.insert(name, t);
  }
  return std::move(b).build();
}

}  // namespace d3re
