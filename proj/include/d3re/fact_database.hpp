#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "d3re/program.hpp"
#include "d3re/value.hpp"

namespace d3re {

/// Column signature of a stored relation.
struct RelationSchema {
  std::vector<Column> columns;

  std::size_t arity() const { return columns.size(); }
  static RelationSchema from(const RelationDecl& decl) { return {decl.columns}; }
  bool same_signature(const RelationSchema& other) const {
    return RelationDecl{"", columns}.same_signature(RelationDecl{"", other.columns});
  }
};

/// relation name -> schema
using Schema = std::map<std::string, RelationSchema>;

/// Immutable set of named relations with a content fingerprint.
///
/// Tuples are stored sorted and unique, so iteration order is canonical. The
/// fingerprint is a SHA-256 over every non-empty relation (name, arity,
/// sorted tuples); declared-but-empty relations do not affect it.
class FactDatabase {
 public:
  struct Relation {
    RelationSchema schema;
    std::vector<Tuple> tuples;
  };

  class Builder {
   public:
    /// Declares a relation; redeclaring with a different signature throws FactsError.
    Builder& declare(const std::string& name, const RelationSchema& schema);
    /// Inserts into a declared relation; checks arity and column types.
    Builder& insert(const std::string& name, Tuple tuple);
    /// Copies every relation (schema and tuples) of `db`.
    Builder& merge(const FactDatabase& db);
    bool has(const std::string& name) const { return relations_.count(name) > 0; }
    FactDatabase build() &&;

   private:
    std::map<std::string, Relation> relations_;
  };

  FactDatabase();

  const std::string& fingerprint() const { return data_->fingerprint; }
  const std::map<std::string, Relation>& relations() const { return data_->relations; }
  const Relation* find(const std::string& name) const;
  bool contains(const std::string& name, const Tuple& tuple) const;
  std::size_t size(const std::string& name) const;
  std::size_t total_tuples() const;
  Schema schema() const;

  /// Same non-empty relations with the same tuples.
  friend bool operator==(const FactDatabase& a, const FactDatabase& b) {
    return a.fingerprint() == b.fingerprint();
  }

  /// Projection onto the named relations (missing names are skipped).
  FactDatabase restricted_to(const std::vector<std::string>& names) const;

 private:
  struct Data {
    std::map<std::string, Relation> relations;
    std::string fingerprint;
  };
  explicit FactDatabase(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

  std::shared_ptr<const Data> data_;
};

}  // namespace d3re
