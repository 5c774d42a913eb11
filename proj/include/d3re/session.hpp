#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d3re/annotation.hpp"
#include "d3re/evaluate.hpp"
#include "d3re/facts.hpp"
#include "d3re/listing.hpp"
#include "d3re/metadb.hpp"
#include "d3re/rulelib.hpp"

namespace d3re {

struct RunOutcome {
  std::string node_id;
  std::string seed_node;  ///< snapshot the evaluation started from
  std::string program_id;
  std::vector<std::string> outputs;
  EvalStats stats;

  /// Seeded from a snapshot other than the root.
  bool cache_hit = false;
};

/// One analysis session over one binary: the accumulated rules and the
/// snapshot they produced. Mutating calls fail with SessionBusy while a run
/// is in progress; reads are served from the last committed snapshot.
class Session {
 public:
  Session(std::string id, MetaDatabase& store, const Registry* registry, const IngestedInput& input);

  /// Opens `inputs` (see ingest) and registers its root.
  static std::unique_ptr<Session> open(std::string id, MetaDatabase& store, const Registry* registry,
                                       const std::vector<std::filesystem::path>& inputs,
                                       Diagnostics* diag = nullptr);

  const std::string& id() const { return id_; }
  const std::string& digest() const { return digest_; }
  const std::string& root() const { return root_; }
  std::string current() const;
  std::optional<std::int64_t> cursor() const;
  FactDatabase snapshot() const;
  const Registry* registry() const { return registry_; }

  /// Rules loaded so far (on top of the session prelude).
  DatalogProgram program() const;
  /// What the next run evaluates: program() plus the cursor fact.
  DatalogProgram effective_program() const;

  /// Parses `text` against the accumulated program and appends it.
  DatalogProgram load(std::string_view text, Diagnostics* diag = nullptr);
  /// load(text) then evaluate. Nothing changes if either step fails.
  RunOutcome run(std::string_view text = {}, Diagnostics* diag = nullptr);
  /// Loads and runs a registry analysis with its requirements.
  RunOutcome run_analysis(std::string_view name, Diagnostics* diag = nullptr);
  /// Appends one ground fact, e.g. `code_in_range(1,2).`
  void assume(std::string_view fact);
  void set_cursor(std::optional<std::int64_t> address);

  /// Tuples of `relation` in the current snapshot. Throws Error if the
  /// relation is neither stored nor declared.
  FactDatabase::Relation query(const std::string& relation) const;
  std::vector<std::string> relation_names() const;

  /// From highlight/comment and every registry binding whose relation the
  /// program declares.
  std::vector<Annotation> derived_annotations() const;
  /// Replaces the published annotations of `kind` with the derived ones.
  std::size_t publish(Annotation::Kind kind);
  std::size_t publish_all();
  /// Replaces all published annotations.
  void set_annotations(std::vector<Annotation> annotations);
  std::vector<Annotation> annotations() const;
  std::string etag() const;
  /// Annotations and their etag, read together.
  std::pair<std::vector<Annotation>, std::string> annotation_state() const;
  /// Blocks until the etag differs from `etag` or the timeout passes.
  /// Returns the current etag.
  std::string wait_for_change(const std::string& etag, std::chrono::milliseconds timeout) const;

  std::vector<ListingRow> listing(std::int64_t from = INT64_MIN, std::int64_t to = INT64_MAX) const;

 private:
  RunOutcome evaluate_and_commit(const DatalogProgram& program, std::optional<std::int64_t> cursor);
  DatalogProgram effective(const DatalogProgram& program, std::optional<std::int64_t> cursor) const;
  void set_annotations_locked(std::vector<Annotation> annotations);

  std::string id_;
  MetaDatabase& store_;
  const Registry* registry_;
  std::string digest_;
  std::string root_;

  std::mutex run_mutex_;
  mutable std::shared_mutex state_mutex_;
  std::string current_;
  DatalogProgram program_;
  std::optional<std::int64_t> cursor_;
  FactDatabase snapshot_;

  mutable std::mutex annotation_mutex_;
  mutable std::condition_variable annotation_cv_;
  std::vector<Annotation> published_;
  std::string etag_;
};

}  // namespace d3re
