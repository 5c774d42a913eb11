#pragma once

// Seeded generator of small stratifiable Datalog programs and matching edbs,
// for oracle-equivalence and algebraic property tests.

#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "d3re/fact_database.hpp"
#include "d3re/parser.hpp"

namespace d3re::testing {

struct RandomCase {
  std::string text;
  DatalogProgram program;
  FactDatabase edb;
};

struct GeneratorLimits {
  int max_rules = 6;
  int max_relations = 4;
  int domain = 8;
  bool negation = true;
  bool constraints = true;
};

class ProgramGenerator {
 public:
  explicit ProgramGenerator(std::uint64_t seed, GeneratorLimits limits = {}) : rng_(seed), limits_(limits) {}

  RandomCase next() {
    struct Rel {
      std::string name;
      int arity;
      bool idb;
      int level;
    };
    int nrel = pick(2, limits_.max_relations);
    int nedb = pick(1, std::max(1, nrel - 1));
    std::vector<Rel> rels;
    for (int i = 0; i < nrel; ++i) {
      bool idb = i >= nedb;
      rels.push_back({(idb ? "r" : "e") + std::to_string(i), pick(1, 2), idb, idb ? pick(0, 2) : -1});
    }

    std::ostringstream text;
    for (const auto& r : rels) {
      text << ".decl " << r.name << "(";
      for (int c = 0; c < r.arity; ++c) text << (c ? ", " : "") << "c" << c << ":number";
      text << ")\n";
    }

    std::vector<const Rel*> idbs;
    for (const auto& r : rels) {
      if (r.idb) idbs.push_back(&r);
    }
    int nrules = pick(1, limits_.max_rules);
    static const char* kVars[] = {"X", "Y", "Z", "W"};
    for (int k = 0; k < nrules; ++k) {
      const Rel& head = *idbs[pick(0, static_cast<int>(idbs.size()) - 1)];
      std::vector<std::string> body;
      std::set<std::string> bound;
      int npos = pick(1, 3);
      for (int a = 0; a < npos; ++a) {
        // Positive atoms may use any relation at the same or a lower level.
        std::vector<const Rel*> allowed;
        for (const auto& r : rels) {
          if (!r.idb || r.level <= head.level) allowed.push_back(&r);
        }
        const Rel& r = *allowed[pick(0, static_cast<int>(allowed.size()) - 1)];
        std::string atom = r.name + "(";
        for (int c = 0; c < r.arity; ++c) {
          if (c) atom += ",";
          int roll = pick(0, 9);
          if (roll == 0) {
            atom += std::to_string(pick(0, limits_.domain - 1));
          } else if (roll == 1) {
            atom += "_";
          } else {
            std::string v = kVars[pick(0, 3)];
            atom += v;
            bound.insert(v);
          }
        }
        body.push_back(atom + ")");
      }
      if (bound.empty()) {
        // Guarantee at least one bound variable for the head.
        for (const auto& r : rels) {
          if (!r.idb) {
            std::string atom = r.name + "(X";
            for (int c = 1; c < r.arity; ++c) atom += ",_";
            body.push_back(atom + ")");
            bound.insert("X");
            break;
          }
        }
      }
      std::vector<std::string> bvars(bound.begin(), bound.end());
      auto bound_var = [&]() { return bvars[pick(0, static_cast<int>(bvars.size()) - 1)]; };

      if (limits_.negation && pick(0, 2) == 0) {
        std::vector<const Rel*> lower;
        for (const auto& r : rels) {
          if (!r.idb || r.level < head.level) lower.push_back(&r);
        }
        const Rel& r = *lower[pick(0, static_cast<int>(lower.size()) - 1)];
        std::string atom = "!" + r.name + "(";
        for (int c = 0; c < r.arity; ++c) {
          if (c) atom += ",";
          int roll = pick(0, 4);
          atom += roll == 0 ? std::to_string(pick(0, limits_.domain - 1)) : roll == 1 ? "_" : bound_var();
        }
        body.push_back(atom + ")");
      }
      if (limits_.constraints && pick(0, 3) == 0) {
        static const char* kOps[] = {"<", "<=", ">", ">=", "=", "!="};
        std::string rhs = pick(0, 1) ? bound_var() : std::to_string(pick(0, limits_.domain - 1));
        body.push_back(bound_var() + " " + kOps[pick(0, 5)] + " " + rhs);
      }
      if (limits_.constraints && pick(0, 5) == 0) {
        // Bounded value invention: new variable V = X + 1 restricted to the domain.
        std::string x = bound_var();
        body.push_back("V = " + x + " + 1");
        body.push_back("V < " + std::to_string(limits_.domain));
        bvars.push_back("V");
      }

      std::string h = head.name + "(";
      for (int c = 0; c < head.arity; ++c) {
        if (c) h += ",";
        h += pick(0, 7) == 0 ? std::to_string(pick(0, limits_.domain - 1)) : bound_var();
      }
      text << h << ") :- ";
      for (std::size_t i = 0; i < body.size(); ++i) text << (i ? ", " : "") << body[i];
      text << ".\n";
    }
    if (pick(0, 2) == 0) {
      const Rel& r = *idbs[0];
      text << r.name << "(";
      for (int c = 0; c < r.arity; ++c) text << (c ? "," : "") << pick(0, limits_.domain - 1);
      text << ").\n";
    }

    RandomCase out;
    out.text = text.str();
    out.program = parse_program(out.text);
    out.edb = random_edb(out.program, rels.size());
    return out;
  }

  /// Random tuples for every edb relation (names starting with 'e'), and
  /// occasionally a few for idb relations too.
  FactDatabase random_edb(const DatalogProgram& program, std::size_t = 0) {
    FactDatabase::Builder b;
    for (const auto& [name, decl] : program.declarations) {
      b.declare(name, RelationSchema::from(decl));
      bool edb = name[0] == 'e';
      int n = edb ? pick(0, 12) : (pick(0, 4) == 0 ? pick(1, 3) : 0);
      for (int i = 0; i < n; ++i) {
        Tuple t;
        for (std::size_t c = 0; c < decl.arity(); ++c) t.push_back(Value::integer(pick(0, limits_.domain - 1)));
        b.insert(name, t);
      }
    }
    return std::move(b).build();
  }

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
  GeneratorLimits limits_;
};

/// Relation-wise inclusion.
inline bool subset_of(const FactDatabase& a, const FactDatabase& b) {
  for (const auto& [name, rel] : a.relations()) {
    for (const auto& t : rel.tuples) {
      if (!b.contains(name, t)) return false;
    }
  }
  return true;
}

}  // namespace d3re::testing
