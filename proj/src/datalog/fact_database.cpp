#include "d3re/fact_database.hpp"

#include <algorithm>

#include "d3re/digest.hpp"
#include "d3re/error.hpp"

namespace d3re {
namespace {

std::string compute_fingerprint(const std::map<std::string, FactDatabase::Relation>& relations) {
  Sha256 h;
  for (const auto& [name, rel] : relations) {
    if (rel.tuples.empty()) continue;
    h.update("R").update(name).update(std::string(1, '\0'));
    h.update(std::to_string(rel.schema.arity())).update(std::string(1, '\0'));
    for (const auto& t : rel.tuples) {
      for (const auto& v : t) {
        if (v.is_integer()) {
          h.update("i").update(std::to_string(v.as_integer()));
        } else {
          h.update("s").update(std::to_string(v.as_string().size())).update(":").update(v.as_string());
        }
        h.update(std::string(1, '\0'));
      }
      h.update("\n");
    }
  }
  return h.hex_digest();
}

}  // namespace

FactDatabase::Builder& FactDatabase::Builder::declare(const std::string& name, const RelationSchema& schema) {
  auto [it, inserted] = relations_.emplace(name, Relation{schema, {}});
  if (!inserted && !it->second.schema.same_signature(schema)) {
    throw FactsError("relation '" + name + "' declared with arity " + std::to_string(schema.arity()) +
                     " but already has arity " + std::to_string(it->second.schema.arity()) +
                     " or different column types");
  }
  return *this;
}

FactDatabase::Builder& FactDatabase::Builder::insert(const std::string& name, Tuple tuple) {
  auto it = relations_.find(name);
  if (it == relations_.end()) throw FactsError("insert into undeclared relation '" + name + "'");
  const auto& cols = it->second.schema.columns;
  if (tuple.size() != cols.size()) {
    throw FactsError("arity mismatch inserting into '" + name + "': expected " + std::to_string(cols.size()) +
                     ", got " + std::to_string(tuple.size()));
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if ((cols[i].type == ColumnType::Number) != tuple[i].is_integer()) {
      throw FactsError("type mismatch inserting into '" + name + "' column " + std::to_string(i + 1));
    }
  }
  it->second.tuples.push_back(std::move(tuple));
  return *this;
}

FactDatabase::Builder& FactDatabase::Builder::merge(const FactDatabase& db) {
  for (const auto& [name, rel] : db.relations()) {
    declare(name, rel.schema);
    auto& dst = relations_.at(name).tuples;
    dst.insert(dst.end(), rel.tuples.begin(), rel.tuples.end());
  }
  return *this;
}

FactDatabase FactDatabase::Builder::build() && {
  auto data = std::make_shared<Data>();
  data->relations = std::move(relations_);
  for (auto& [name, rel] : data->relations) {
    std::sort(rel.tuples.begin(), rel.tuples.end());
    rel.tuples.erase(std::unique(rel.tuples.begin(), rel.tuples.end()), rel.tuples.end());
  }
  data->fingerprint = compute_fingerprint(data->relations);
  return FactDatabase(std::move(data));
}

FactDatabase::FactDatabase() : FactDatabase(Builder().build()) {}

const FactDatabase::Relation* FactDatabase::find(const std::string& name) const {
  auto it = data_->relations.find(name);
  return it == data_->relations.end() ? nullptr : &it->second;
}

bool FactDatabase::contains(const std::string& name, const Tuple& tuple) const {
  const Relation* rel = find(name);
  return rel && std::binary_search(rel->tuples.begin(), rel->tuples.end(), tuple);
}

std::size_t FactDatabase::size(const std::string& name) const {
  const Relation* rel = find(name);
  return rel ? rel->tuples.size() : 0;
}

std::size_t FactDatabase::total_tuples() const {
  std::size_t n = 0;
  for (const auto& [name, rel] : data_->relations) n += rel.tuples.size();
  return n;
}

Schema FactDatabase::schema() const {
  Schema out;
  for (const auto& [name, rel] : data_->relations) out.emplace(name, rel.schema);
  return out;
}

FactDatabase FactDatabase::restricted_to(const std::vector<std::string>& names) const {
  Builder b;
  for (const auto& name : names) {
    if (const Relation* rel = find(name)) {
      b.declare(name, rel->schema);
      for (const auto& t : rel->tuples) b.insert(name, t);
    }
  }
  return std::move(b).build();
}

}  // namespace d3re
