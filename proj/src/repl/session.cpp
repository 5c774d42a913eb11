#include "d3re/session.hpp"

#include <algorithm>

#include "d3re/digest.hpp"
#include "d3re/parser.hpp"

namespace d3re {

namespace {

std::string annotation_etag(const std::vector<Annotation>& annotations) {
  Sha256 h;
  for (const auto& a : annotations)
    h.update(to_string(a.kind)).update("\t").update(std::to_string(a.address)).update("\t").update(a.text).update(
        "\t").update(a.relation).update("\n");
  return h.hex_digest().substr(0, 16);
}

}  // namespace

Session::Session(std::string id, MetaDatabase& store, const Registry* registry, const IngestedInput& input)
    : id_(std::move(id)), store_(store), registry_(registry), digest_(input.digest), program_(prelude_program()) {
  root_ = store_.register_root(input.facts, digest_, true);
  current_ = root_;
  snapshot_ = store_.load_snapshot(root_);
  etag_ = annotation_etag(published_);
  store_.save_session({id_, root_, current_});
}

std::unique_ptr<Session> Session::open(std::string id, MetaDatabase& store, const Registry* registry,
                                       const std::vector<std::filesystem::path>& inputs, Diagnostics* diag) {
  return std::make_unique<Session>(std::move(id), store, registry, ingest(inputs, diag));
}

std::string Session::current() const {
  std::shared_lock lock(state_mutex_);
  return current_;
}

std::optional<std::int64_t> Session::cursor() const {
  std::shared_lock lock(state_mutex_);
  return cursor_;
}

FactDatabase Session::snapshot() const {
  std::shared_lock lock(state_mutex_);
  return snapshot_;
}

DatalogProgram Session::program() const {
  std::shared_lock lock(state_mutex_);
  return program_;
}

DatalogProgram Session::effective(const DatalogProgram& program, std::optional<std::int64_t> cursor) const {
  DatalogProgram p = program;
  if (cursor) p.facts.push_back(Fact{"current_address", {Value::integer(*cursor)}});
  return p;
}

DatalogProgram Session::effective_program() const {
  std::shared_lock lock(state_mutex_);
  return effective(program_, cursor_);
}

DatalogProgram Session::load(std::string_view text, Diagnostics* diag) {
  std::unique_lock run(run_mutex_, std::try_to_lock);
  if (!run.owns_lock()) throw SessionBusy("a run is in progress");
  DatalogProgram base = program();
  DatalogProgram unit = parse_extension(text, base, diag);
  DatalogProgram next = base.extended_with(unit);
  std::unique_lock lock(state_mutex_);
  program_ = std::move(next);
  return unit;
}

RunOutcome Session::run(std::string_view text, Diagnostics* diag) {
  std::unique_lock run(run_mutex_, std::try_to_lock);
  if (!run.owns_lock()) throw SessionBusy("a run is in progress");
  DatalogProgram program;
  std::optional<std::int64_t> cursor;
  {
    std::shared_lock lock(state_mutex_);
    program = program_;
    cursor = cursor_;
  }
  if (!text.empty()) program = program.extended_with(parse_extension(text, program, diag));
  return evaluate_and_commit(program, cursor);
}

RunOutcome Session::run_analysis(std::string_view name, Diagnostics* diag) {
  if (!registry_) throw Error("no rule registry available");
  std::unique_lock run(run_mutex_, std::try_to_lock);
  if (!run.owns_lock()) throw SessionBusy("a run is in progress");
  DatalogProgram program;
  std::optional<std::int64_t> cursor;
  {
    std::shared_lock lock(state_mutex_);
    program = program_;
    cursor = cursor_;
  }
  return evaluate_and_commit(registry_->build(name, program, diag), cursor);
}

RunOutcome Session::evaluate_and_commit(const DatalogProgram& program, std::optional<std::int64_t> cursor) {
  DatalogProgram full = effective(program, cursor);
  RunOutcome out;
  out.seed_node = store_.find_compatible(full, root_);
  out.cache_hit = out.seed_node != root_;
  out.program_id = canonical_hash(full).hex;
  EvalOptions opts;
  opts.closed_clauses = store_.node(out.seed_node).rule_set;
  opts.stats = &out.stats;
  FactDatabase result = evaluate(full, store_.load_snapshot(out.seed_node), opts);
  out.node_id = store_.register_run(out.seed_node, full, result);
  out.outputs.assign(full.outputs.begin(), full.outputs.end());
  {
    std::unique_lock lock(state_mutex_);
    program_ = program;
    current_ = out.node_id;
    snapshot_ = std::move(result);
  }
  store_.save_session({id_, root_, out.node_id});
  return out;
}

void Session::assume(std::string_view fact) {
  DatalogProgram unit = [&] {
    Diagnostics diag;
    return parse_extension(fact, program(), &diag);
  }();
  if (unit.facts.size() != 1 || !unit.rules.empty() || !unit.declarations.empty() || !unit.inputs.empty() ||
      !unit.outputs.empty())
    throw Error("assume expects a single ground fact");
  load(fact);
}

void Session::set_cursor(std::optional<std::int64_t> address) {
  std::unique_lock run(run_mutex_, std::try_to_lock);
  if (!run.owns_lock()) throw SessionBusy("a run is in progress");
  std::unique_lock lock(state_mutex_);
  cursor_ = address;
}

FactDatabase::Relation Session::query(const std::string& relation) const {
  std::shared_lock lock(state_mutex_);
  if (const auto* rel = snapshot_.find(relation)) return *rel;
  if (const auto* decl = program_.find(relation)) return {RelationSchema::from(*decl), {}};
  throw Error("unknown relation '" + relation + "'");
}

std::vector<std::string> Session::relation_names() const {
  std::shared_lock lock(state_mutex_);
  std::set<std::string> names;
  for (const auto& [name, _] : snapshot_.relations()) names.insert(name);
  for (const auto& [name, _] : program_.declarations) names.insert(name);
  return {names.begin(), names.end()};
}

std::vector<Annotation> Session::derived_annotations() const {
  std::vector<AnnotationBinding> bindings{
      {"highlight", Annotation::Kind::Highlight, 0, std::nullopt, ""},
      {"comment", Annotation::Kind::Comment, 0, 1, ""},
  };
  FactDatabase db;
  {
    std::shared_lock lock(state_mutex_);
    db = snapshot_;
    if (registry_)
      for (const auto& [name, _] : program_.declarations)
        for (auto& b : registry_->bindings_for(name)) bindings.push_back(std::move(b));
  }
  auto out = derive_annotations(db, bindings);
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const Annotation& a) { return a.kind == Annotation::Kind::Comment && a.text.empty(); }),
            out.end());
  return out;
}

std::size_t Session::publish(Annotation::Kind kind) {
  auto derived = derived_annotations();
  std::lock_guard lock(annotation_mutex_);
  std::vector<Annotation> next;
  std::size_t n = 0;
  for (const auto& a : published_)
    if (a.kind != kind) next.push_back(a);
  for (auto& a : derived)
    if (a.kind == kind) {
      next.push_back(std::move(a));
      ++n;
    }
  set_annotations_locked(std::move(next));
  return n;
}

std::size_t Session::publish_all() {
  auto derived = derived_annotations();
  std::size_t n = derived.size();
  std::lock_guard lock(annotation_mutex_);
  set_annotations_locked(std::move(derived));
  return n;
}

void Session::set_annotations(std::vector<Annotation> annotations) {
  std::lock_guard lock(annotation_mutex_);
  set_annotations_locked(std::move(annotations));
}

void Session::set_annotations_locked(std::vector<Annotation> annotations) {
  std::sort(annotations.begin(), annotations.end());
  annotations.erase(std::unique(annotations.begin(), annotations.end()), annotations.end());
  auto tag = annotation_etag(annotations);
  published_ = std::move(annotations);
  if (tag != etag_) {
    etag_ = tag;
    annotation_cv_.notify_all();
  }
}

std::vector<Annotation> Session::annotations() const {
  std::lock_guard lock(annotation_mutex_);
  return published_;
}

std::pair<std::vector<Annotation>, std::string> Session::annotation_state() const {
  std::lock_guard lock(annotation_mutex_);
  return {published_, etag_};
}

std::string Session::etag() const {
  std::lock_guard lock(annotation_mutex_);
  return etag_;
}

std::string Session::wait_for_change(const std::string& etag, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(annotation_mutex_);
  annotation_cv_.wait_for(lock, timeout, [&] { return etag_ != etag; });
  return etag_;
}

std::vector<ListingRow> Session::listing(std::int64_t from, std::int64_t to) const {
  return build_listing(snapshot(), annotations(), from, to);
}

}  // namespace d3re
