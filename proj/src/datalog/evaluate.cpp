#include "d3re/evaluate.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "d3re/error.hpp"
#include "d3re/stratify.hpp"
#include "eval_common.hpp"

namespace d3re {
namespace {

using ColumnOrder = std::vector<std::size_t>;

/// Tuple set with lazily created sorted indices, one per column order.
/// Index keys are the tuple permuted into that order.
class IndexedRelation {
 public:
  explicit IndexedRelation(std::size_t arity) : arity_(arity) {}

  std::size_t arity() const { return arity_; }
  std::size_t size() const { return primary_.size(); }
  bool empty() const { return primary_.empty(); }
  bool contains(const Tuple& t) const { return primary_.count(t) > 0; }
  const std::set<Tuple>& tuples() const { return primary_; }

  bool insert(const Tuple& t) {
    if (!primary_.insert(t).second) return false;
    for (auto& [order, index] : indices_) index.insert(permute(t, order));
    return true;
  }

  void clear() {
    primary_.clear();
    indices_.clear();
  }

  /// Visits every stored tuple whose columns `order[0..prefix.size())` equal
  /// `prefix`. The callback receives tuples in `order` layout.
  template <class F>
  std::size_t scan(const ColumnOrder& order, const Tuple& prefix, F&& f) {
    const std::set<Tuple>& index = index_for(order);
    std::size_t visited = 0;
    for (auto it = index.lower_bound(prefix); it != index.end(); ++it) {
      if (!std::equal(prefix.begin(), prefix.end(), it->begin())) break;
      ++visited;
      f(*it);
    }
    return visited;
  }

  bool any_with_prefix(const ColumnOrder& order, const Tuple& prefix) {
    const std::set<Tuple>& index = index_for(order);
    auto it = index.lower_bound(prefix);
    return it != index.end() && std::equal(prefix.begin(), prefix.end(), it->begin());
  }

 private:
  static bool is_identity(const ColumnOrder& order) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (order[i] != i) return false;
    }
    return true;
  }

  static Tuple permute(const Tuple& t, const ColumnOrder& order) {
    Tuple out;
    out.reserve(order.size());
    for (std::size_t c : order) out.push_back(t[c]);
    return out;
  }

  const std::set<Tuple>& index_for(const ColumnOrder& order) {
    if (is_identity(order)) return primary_;
    auto it = indices_.find(order);
    if (it == indices_.end()) {
      std::set<Tuple> index;
      for (const auto& t : primary_) index.insert(permute(t, order));
      it = indices_.emplace(order, std::move(index)).first;
    }
    return it->second;
  }

  std::size_t arity_;
  std::set<Tuple> primary_;
  std::map<ColumnOrder, std::set<Tuple>> indices_;
};

enum class Source { Full, Delta, Added };

// ---------------------------------------------------------------------------
// Rule plans

struct ColumnSpec {
  enum class Kind { Const, Bound, Bind, Repeat, Free };
  Kind kind = Kind::Free;
  Value constant;
  std::size_t slot = 0;
};

struct Step {
  enum class Kind { Scan, Negation, Filter, Assign };
  Kind kind = Kind::Scan;

  // Scan / Negation
  std::string relation;
  Source source = Source::Full;
  ColumnOrder order;                // bound columns first
  std::vector<ColumnSpec> columns;  // indexed by original column
  std::size_t prefix_len = 0;

  // Filter / Assign
  const Constraint* constraint = nullptr;
  std::size_t assign_slot = 0;
  bool assign_from_lhs = false;  // Assign: value comes from lhs, slot is rhs variable
};

struct Plan {
  const Rule* rule = nullptr;
  std::vector<Step> steps;
  std::vector<ColumnSpec> head;
  std::map<std::string, std::size_t> slots;
};

Plan compile(const Rule& rule, std::optional<std::size_t> delta_pos, Source delta_source) {
  Plan plan;
  plan.rule = &rule;
  std::set<std::string> bound;
  auto slot_of = [&plan](const std::string& var) {
    auto [it, inserted] = plan.slots.emplace(var, plan.slots.size());
    return it->second;
  };

  std::vector<bool> done(rule.body.size(), false);

  auto atom_step = [&](const Atom& atom, Step::Kind kind) {
    Step s;
    s.kind = kind;
    s.relation = atom.relation;
    s.columns.resize(atom.args.size());
    std::set<std::string> bound_here;
    ColumnOrder bound_cols, rest;
    for (std::size_t c = 0; c < atom.args.size(); ++c) {
      const Term& t = atom.args[c];
      ColumnSpec& spec = s.columns[c];
      if (t.is_constant()) {
        spec.kind = ColumnSpec::Kind::Const;
        spec.constant = t.value;
      } else if (t.is_wildcard()) {
        spec.kind = ColumnSpec::Kind::Free;
      } else if (bound.count(t.name)) {
        spec.kind = ColumnSpec::Kind::Bound;
        spec.slot = slot_of(t.name);
      } else if (bound_here.count(t.name)) {
        spec.kind = ColumnSpec::Kind::Repeat;
        spec.slot = slot_of(t.name);
      } else {
        spec.kind = ColumnSpec::Kind::Bind;
        spec.slot = slot_of(t.name);
        bound_here.insert(t.name);
      }
      bool is_key = spec.kind == ColumnSpec::Kind::Const || spec.kind == ColumnSpec::Kind::Bound;
      (is_key ? bound_cols : rest).push_back(c);
    }
    s.prefix_len = bound_cols.size();
    s.order = bound_cols;
    s.order.insert(s.order.end(), rest.begin(), rest.end());
    if (kind == Step::Kind::Scan) bound.insert(bound_here.begin(), bound_here.end());
    return s;
  };

  auto all_bound = [&bound](const std::set<std::string>& vars) {
    return std::all_of(vars.begin(), vars.end(), [&](const std::string& v) { return bound.count(v) > 0; });
  };

  // Attach every pending negation/constraint whose variables are bound.
  auto flush = [&]() {
    for (bool progress = true; progress;) {
      progress = false;
      for (std::size_t i = 0; i < rule.body.size(); ++i) {
        if (done[i]) continue;
        const Literal& lit = rule.body[i];
        if (lit.kind == Literal::Kind::Negated) {
          std::set<std::string> vars;
          for (const auto& t : lit.atom.args) {
            if (t.is_variable()) vars.insert(t.name);
          }
          if (all_bound(vars)) {
            plan.steps.push_back(atom_step(lit.atom, Step::Kind::Negation));
            done[i] = progress = true;
          }
        } else if (lit.kind == Literal::Kind::Builtin) {
          const Constraint& c = lit.constraint;
          std::set<std::string> lv, rv;
          c.lhs.collect_variables(lv);
          c.rhs.collect_variables(rv);
          Step s;
          s.constraint = &c;
          if (all_bound(lv) && all_bound(rv)) {
            s.kind = Step::Kind::Filter;
          } else if (c.op == CompareOp::Eq && c.lhs.is_leaf() && c.lhs.leaf.is_variable() &&
                     !bound.count(c.lhs.leaf.name) && all_bound(rv)) {
            s.kind = Step::Kind::Assign;
            s.assign_slot = slot_of(c.lhs.leaf.name);
            s.assign_from_lhs = false;
            bound.insert(c.lhs.leaf.name);
          } else if (c.op == CompareOp::Eq && c.rhs.is_leaf() && c.rhs.leaf.is_variable() &&
                     !bound.count(c.rhs.leaf.name) && all_bound(lv)) {
            s.kind = Step::Kind::Assign;
            s.assign_slot = slot_of(c.rhs.leaf.name);
            s.assign_from_lhs = true;
            bound.insert(c.rhs.leaf.name);
          } else {
            continue;
          }
          plan.steps.push_back(s);
          done[i] = progress = true;
        }
      }
    }
  };

  flush();
  if (delta_pos) {
    Step s = atom_step(rule.body[*delta_pos].atom, Step::Kind::Scan);
    s.source = delta_source;
    plan.steps.push_back(std::move(s));
    done[*delta_pos] = true;
    flush();
  }
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    if (done[i] || rule.body[i].kind != Literal::Kind::Positive) continue;
    plan.steps.push_back(atom_step(rule.body[i].atom, Step::Kind::Scan));
    done[i] = true;
    flush();
  }
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    if (!done[i]) throw EvalError("internal: could not schedule '" + to_source(rule.body[i]) + "'");
  }

  for (const auto& t : rule.head.args) {
    ColumnSpec spec;
    if (t.is_constant()) {
      spec.kind = ColumnSpec::Kind::Const;
      spec.constant = t.value;
    } else {
      spec.kind = ColumnSpec::Kind::Bound;
      spec.slot = plan.slots.at(t.name);
    }
    plan.head.push_back(spec);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Engine

class Engine {
 public:
  Engine(const Schema& schema, EvalStats& stats) : stats_(stats) {
    for (const auto& [name, rs] : schema) {
      full_.emplace(name, IndexedRelation(rs.arity()));
      added_.emplace(name, IndexedRelation(rs.arity()));
      delta_.emplace(name, IndexedRelation(rs.arity()));
    }
  }

  void load(const FactDatabase& edb) {
    for (const auto& [name, rel] : edb.relations()) {
      auto& dst = full_.at(name);
      for (const auto& t : rel.tuples) dst.insert(t);
    }
  }

  void add_fact(const Fact& f) {
    if (full_.at(f.relation).insert(f.values)) {
      added_.at(f.relation).insert(f.values);
      ++stats_.new_tuples;
    }
  }

  void run_stratum(const DatalogProgram& program, const std::vector<std::size_t>& rule_ids,
                   const std::set<std::string>& closed) {
    std::set<std::string> heads;
    for (std::size_t id : rule_ids) heads.insert(program.rules[id].head.relation);
    for (const auto& h : heads) delta_.at(h).clear();

    // Round 0: open rules see the whole database; closed rules only need
    // matches that touch a tuple added during this evaluation.
    std::map<std::string, std::set<Tuple>> pending;
    for (std::size_t id : rule_ids) {
      const Rule& rule = program.rules[id];
      if (!closed.count(canonical_clause(rule))) {
        run_plan(plan_for(id, rule, std::nullopt, Source::Full), pending);
        continue;
      }
      for (std::size_t i = 0; i < rule.body.size(); ++i) {
        const Literal& lit = rule.body[i];
        if (lit.kind != Literal::Kind::Positive || added_.at(lit.atom.relation).empty()) continue;
        run_plan(plan_for(id, rule, i, Source::Added), pending);
      }
    }
    ++stats_.rounds;

    while (commit(pending)) {
      pending.clear();
      for (std::size_t id : rule_ids) {
        const Rule& rule = program.rules[id];
        for (std::size_t i = 0; i < rule.body.size(); ++i) {
          const Literal& lit = rule.body[i];
          if (lit.kind != Literal::Kind::Positive || !heads.count(lit.atom.relation) ||
              delta_.at(lit.atom.relation).empty()) {
            continue;
          }
          run_plan(plan_for(id, rule, i, Source::Delta), pending);
        }
      }
      ++stats_.rounds;
    }
  }

  FactDatabase result(const Schema& schema) const {
    FactDatabase::Builder b;
    for (const auto& [name, rs] : schema) {
      b.declare(name, rs);
      for (const auto& t : full_.at(name).tuples()) b.insert(name, t);
    }
    return std::move(b).build();
  }

 private:
  const Plan& plan_for(std::size_t rule_id, const Rule& rule, std::optional<std::size_t> pos, Source src) {
    auto key = std::make_tuple(rule_id, pos ? *pos + 1 : 0, static_cast<int>(src));
    auto it = plans_.find(key);
    if (it == plans_.end()) it = plans_.emplace(key, compile(rule, pos, src)).first;
    return it->second;
  }

  /// Moves pending tuples into the database; returns true if any were new.
  bool commit(const std::map<std::string, std::set<Tuple>>& pending) {
    for (auto& [name, rel] : delta_) rel.clear();
    bool any = false;
    for (const auto& [name, tuples] : pending) {
      auto& full = full_.at(name);
      auto& added = added_.at(name);
      auto& delta = delta_.at(name);
      for (const auto& t : tuples) {
        if (full.insert(t)) {
          added.insert(t);
          delta.insert(t);
          ++stats_.new_tuples;
          any = true;
        }
      }
    }
    return any;
  }

  IndexedRelation& relation(const std::string& name, Source src) {
    switch (src) {
      case Source::Delta: return delta_.at(name);
      case Source::Added: return added_.at(name);
      default: return full_.at(name);
    }
  }

  void run_plan(const Plan& plan, std::map<std::string, std::set<Tuple>>& pending) {
    ++stats_.rule_evaluations;
    std::vector<Value> slots(plan.slots.size());
    auto& out = pending[plan.rule->head.relation];
    const auto& full_head = full_.at(plan.rule->head.relation);
    auto emit = [&]() {
      ++stats_.derivations;
      Tuple t;
      t.reserve(plan.head.size());
      for (const auto& spec : plan.head) {
        t.push_back(spec.kind == ColumnSpec::Kind::Const ? spec.constant : slots[spec.slot]);
      }
      if (!full_head.contains(t)) out.insert(std::move(t));
    };
    execute(plan, 0, slots, emit);
  }

  static Tuple key_prefix(const Step& s, const std::vector<Value>& slots) {
    Tuple prefix;
    prefix.reserve(s.prefix_len);
    for (std::size_t k = 0; k < s.prefix_len; ++k) {
      const ColumnSpec& spec = s.columns[s.order[k]];
      prefix.push_back(spec.kind == ColumnSpec::Kind::Const ? spec.constant : slots[spec.slot]);
    }
    return prefix;
  }

  template <class Emit>
  void execute(const Plan& plan, std::size_t step_index, std::vector<Value>& slots, Emit& emit) {
    if (step_index == plan.steps.size()) {
      emit();
      return;
    }
    const Step& s = plan.steps[step_index];
    switch (s.kind) {
      case Step::Kind::Scan: {
        IndexedRelation& rel = relation(s.relation, s.source);
        Tuple prefix = key_prefix(s, slots);
        // Binds precede their repeats in `order`: both sit in the unbound
        // tail, which keeps original column order.
        stats_.join_probes += rel.scan(s.order, prefix, [&](const Tuple& t) {
          for (std::size_t k = s.prefix_len; k < s.order.size(); ++k) {
            const ColumnSpec& spec = s.columns[s.order[k]];
            if (spec.kind == ColumnSpec::Kind::Bind) {
              slots[spec.slot] = t[k];
            } else if (spec.kind == ColumnSpec::Kind::Repeat && !(slots[spec.slot] == t[k])) {
              return;
            }
          }
          execute(plan, step_index + 1, slots, emit);
        });
        return;
      }
      case Step::Kind::Negation: {
        IndexedRelation& rel = relation(s.relation, Source::Full);
        if (!rel.any_with_prefix(s.order, key_prefix(s, slots))) execute(plan, step_index + 1, slots, emit);
        return;
      }
      case Step::Kind::Filter: {
        auto lookup = [&](const std::string& v) { return slots[plan.slots.at(v)]; };
        Value l = detail::eval_expr(s.constraint->lhs, lookup);
        Value r = detail::eval_expr(s.constraint->rhs, lookup);
        if (detail::compare(s.constraint->op, l, r)) execute(plan, step_index + 1, slots, emit);
        return;
      }
      case Step::Kind::Assign: {
        auto lookup = [&](const std::string& v) { return slots[plan.slots.at(v)]; };
        const Expr& src = s.assign_from_lhs ? s.constraint->lhs : s.constraint->rhs;
        slots[s.assign_slot] = detail::eval_expr(src, lookup);
        execute(plan, step_index + 1, slots, emit);
        return;
      }
    }
  }

  EvalStats& stats_;
  std::map<std::string, IndexedRelation> full_;
  std::map<std::string, IndexedRelation> added_;
  std::map<std::string, IndexedRelation> delta_;
  std::map<std::tuple<std::size_t, std::size_t, int>, Plan> plans_;
};

}  // namespace

std::set<std::string> affected_relations(const DatalogProgram& program,
                                         const std::set<std::string>& closed_clauses) {
  std::set<std::string> affected;
  for (const auto& f : program.facts) {
    if (!closed_clauses.count(canonical_clause(f))) affected.insert(f.relation);
  }
  for (const auto& r : program.rules) {
    if (!closed_clauses.count(canonical_clause(r))) affected.insert(r.head.relation);
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& r : program.rules) {
      if (affected.count(r.head.relation)) continue;
      for (const auto& lit : r.body) {
        if (lit.is_atom() && affected.count(lit.atom.relation)) {
          affected.insert(r.head.relation);
          changed = true;
          break;
        }
      }
    }
  }
  return affected;
}

bool seed_is_sound(const DatalogProgram& program, const std::set<std::string>& closed_clauses) {
  if (closed_clauses.empty()) return true;
  std::set<std::string> affected = affected_relations(program, closed_clauses);
  for (const auto& r : program.rules) {
    if (!closed_clauses.count(canonical_clause(r))) continue;
    for (const auto& lit : r.body) {
      if (lit.kind == Literal::Kind::Negated && affected.count(lit.atom.relation)) return false;
    }
  }
  return true;
}

FactDatabase evaluate(const DatalogProgram& program, const FactDatabase& edb, const EvalOptions& options) {
  Stratification strata = stratify(program);
  if (!seed_is_sound(program, options.closed_clauses)) {
    throw EvalError("cannot seed evaluation: a closed rule negates a relation the new rules can change");
  }
  Schema schema = detail::evaluation_schema(program, edb);
  EvalStats local;
  EvalStats& stats = options.stats ? *options.stats : local;
  Engine engine(schema, stats);
  engine.load(edb);
  for (const auto& f : program.facts) engine.add_fact(f);
  for (const auto& stratum : strata.strata) engine.run_stratum(program, stratum, options.closed_clauses);
  return engine.result(schema);
}

}  // namespace d3re
