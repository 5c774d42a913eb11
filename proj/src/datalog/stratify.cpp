#include "d3re/stratify.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "d3re/error.hpp"

namespace d3re {
namespace {

struct Edge {
  std::size_t to;
  bool negative;
};

}  // namespace

Stratification stratify(const DatalogProgram& program) {
  std::vector<std::string> names;
  std::map<std::string, std::size_t> index;
  for (const auto& rel : program.defined_relations()) {
    index.emplace(rel, names.size());
    names.push_back(rel);
  }
  const std::size_t n = names.size();

  // body relation -> head relation
  std::vector<std::vector<Edge>> out(n);
  for (const auto& rule : program.rules) {
    std::size_t head = index.at(rule.head.relation);
    for (const auto& lit : rule.body) {
      if (!lit.is_atom()) continue;
      auto it = index.find(lit.atom.relation);
      if (it == index.end()) continue;
      out[it->second].push_back({head, lit.kind == Literal::Kind::Negated});
    }
  }

  // Tarjan's SCC; components come out in reverse topological order.
  std::vector<int> order(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  int counter = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    order[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (const auto& e : out[v]) {
      if (order[e.to] < 0) {
        visit(e.to);
        low[v] = std::min(low[v], low[e.to]);
      } else if (on_stack[e.to]) {
        low[v] = std::min(low[v], order[e.to]);
      }
    }
    if (low[v] == order[v]) {
      std::vector<std::size_t> members;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = static_cast<int>(components.size());
        members.push_back(w);
      } while (w != v);
      components.push_back(std::move(members));
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (order[v] < 0) visit(v);
  }

  for (std::size_t v = 0; v < n; ++v) {
    for (const auto& e : out[v]) {
      if (!e.negative || comp[v] != comp[e.to]) continue;
      // Report a concrete cycle: the negative edge v -> e.to closed by a path e.to ~> v.
      std::vector<std::string> cycle;
      std::vector<int> parent(n, -1);
      std::vector<std::size_t> queue{e.to};
      std::vector<bool> seen(n, false);
      seen[e.to] = true;
      for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        std::size_t u = queue[qi];
        if (u == v) break;
        for (const auto& f : out[u]) {
          if (comp[f.to] == comp[v] && !seen[f.to]) {
            seen[f.to] = true;
            parent[f.to] = static_cast<int>(u);
            queue.push_back(f.to);
          }
        }
      }
      std::vector<std::size_t> path{v};
      for (int p = parent[v]; p >= 0; p = parent[p]) path.push_back(static_cast<std::size_t>(p));
      std::reverse(path.begin(), path.end());
      std::string text;
      for (std::size_t i = 0; i < path.size(); ++i) {
        cycle.push_back(names[path[i]]);
        text += names[path[i]] + (i + 1 == path.size() ? "" : " -> ");
      }
      text += " -!-> " + names[e.to];
      throw StratificationError("unstratifiable program: negation cycle " + text, cycle);
    }
  }

  // Components in topological order (reverse of Tarjan output).
  std::vector<std::size_t> level(components.size(), 0);
  for (std::size_t c = components.size(); c-- > 0;) {
    for (std::size_t v : components[c]) {
      for (const auto& e : out[v]) {
        auto target = static_cast<std::size_t>(comp[e.to]);
        if (target == c) continue;
        level[target] = std::max(level[target], level[c] + (e.negative ? 1 : 0));
      }
    }
  }

  Stratification result;
  std::size_t max_level = 0;
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t l = level[static_cast<std::size_t>(comp[v])];
    result.relation_stratum[names[v]] = l;
    max_level = std::max(max_level, l);
  }
  result.strata.assign(n == 0 ? 0 : max_level + 1, {});
  for (std::size_t i = 0; i < program.rules.size(); ++i) {
    result.strata[result.relation_stratum.at(program.rules[i].head.relation)].push_back(i);
  }
  return result;
}

}  // namespace d3re
