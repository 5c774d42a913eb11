#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "d3re/error.hpp"
#include "d3re/fact_database.hpp"
#include "d3re/program.hpp"

namespace d3re {

struct SnapshotNode {
  std::string node_id;
  std::string root;         ///< node id of the lineage root
  std::string parent;       ///< first parent; empty for roots
  std::string program_id;   ///< "root" for ingested facts
  std::string program_text;
  std::string created_at;   ///< RFC 3339, UTC
  std::string fingerprint;  ///< of the stored FactDatabase
  std::string binary_digest;
  std::set<std::string> rule_set;
  Schema schema;
  std::filesystem::path edb_ref;  ///< directory of `<relation>.facts` files

  bool is_root() const { return parent.empty(); }
};

struct SnapshotEdge {
  std::string parent;
  std::string program_id;
  std::string child;

  friend bool operator==(const SnapshotEdge&, const SnapshotEdge&) = default;
  friend auto operator<=>(const SnapshotEdge&, const SnapshotEdge&) = default;
};

struct SessionRecord {
  std::string name;
  std::string root;
  std::string node;
};

/// On-disk graph of evaluated snapshots.
///
///     <store>/roots/<digest>/node       root node id of a binary
///     <store>/nodes/<id>/manifest.json
///     <store>/nodes/<id>/rel/<relation>.facts
///     <store>/edges/<parent>-<program>-<child>
///     <store>/sessions/<name>
///
/// Snapshots are immutable once their manifest exists. Writes within one
/// lineage hold an exclusive lock on `roots/<digest>/lock`.
class MetaDatabase {
 public:
  explicit MetaDatabase(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  /// Idempotent per digest. Empty databases need `allow_empty`.
  std::string register_root(const FactDatabase& edb, const std::string& binary_digest, bool allow_empty = false);
  std::optional<std::string> find_root(const std::string& binary_digest) const;

  /// Reachable node with the largest rule set that is a subset of the
  /// program's clauses and can soundly seed it. Latest created_at, then
  /// greatest id, break ties.
  std::string find_compatible(const DatalogProgram& program, const std::string& root) const;

  /// Records `result = evaluate(program, snapshot(parent))`. Returns the
  /// parent itself when the program adds no clauses.
  std::string register_run(const std::string& parent, const DatalogProgram& program, const FactDatabase& result);

  bool has_node(const std::string& id) const;
  SnapshotNode node(const std::string& id) const;
  FactDatabase load_snapshot(const std::string& id) const;

  std::vector<std::string> node_ids() const;
  std::vector<SnapshotEdge> edges() const;
  /// `root` and every node reachable from it, sorted.
  std::vector<std::string> reachable(const std::string& root) const;

  void save_session(const SessionRecord& session);
  void drop_session(const std::string& name);
  std::vector<SessionRecord> sessions() const;

  /// Deletes nodes that are neither a named session's node nor one of its
  /// ancestors. Returns the number of nodes removed.
  std::size_t gc();

 private:
  std::string write_node(SnapshotNode node, const FactDatabase& db);
  void write_edge(const SnapshotEdge& e);
  std::filesystem::path node_dir(const std::string& id) const;
  std::mutex& lineage_mutex(const std::string& digest);

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, SnapshotNode> node_cache_;
  mutable std::map<std::string, FactDatabase> snapshot_cache_;
  std::map<std::string, std::unique_ptr<std::mutex>> lineage_mutexes_;
};

/// Identity of a clause set: SHA-256 over the sorted clauses.
std::string rule_set_id(const std::set<std::string>& rule_set);

}  // namespace d3re
