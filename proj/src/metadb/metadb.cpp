#include "d3re/metadb.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "d3re/digest.hpp"
#include "d3re/evaluate.hpp"
#include "d3re/facts.hpp"

namespace d3re {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kSnapshotCacheLimit = 32;

class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StoreError("cannot open lock " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw StoreError("cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes via a temporary file and rename.
void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw StoreError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StoreError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string now_rfc3339() {
  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::system_clock::to_time_t(now);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count() % 1000000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[80];
  std::snprintf(out, sizeof out, "%s.%06lldZ", buf, static_cast<long long>(micros));
  return out;
}

json schema_json(const Schema& schema) {
  json j = json::object();
  for (const auto& [name, rs] : schema) {
    json cols = json::array();
    for (const auto& c : rs.columns) cols.push_back({c.name, to_string(c.type)});
    j[name] = cols;
  }
  return j;
}

Schema schema_from_json(const json& j) {
  Schema schema;
  for (const auto& [name, cols] : j.items()) {
    RelationSchema rs;
    for (const auto& c : cols) {
      auto type = c.at(1).get<std::string>();
      rs.columns.push_back({c.at(0).get<std::string>(), type == "symbol" ? ColumnType::Symbol : ColumnType::Number});
    }
    schema[name] = rs;
  }
  return schema;
}

json manifest_json(const SnapshotNode& n) {
  return {{"node_id", n.node_id},
          {"root", n.root},
          {"parent", n.parent},
          {"program_id", n.program_id},
          {"program_text", n.program_text},
          {"created_at", n.created_at},
          {"fingerprint", n.fingerprint},
          {"binary_digest", n.binary_digest},
          {"rule_set", n.rule_set},
          {"relations", schema_json(n.schema)}};
}

SnapshotNode manifest_from_json(const json& j) {
  SnapshotNode n;
  n.node_id = j.at("node_id").get<std::string>();
  n.root = j.at("root").get<std::string>();
  n.parent = j.at("parent").get<std::string>();
  n.program_id = j.at("program_id").get<std::string>();
  n.program_text = j.at("program_text").get<std::string>();
  n.created_at = j.at("created_at").get<std::string>();
  n.fingerprint = j.at("fingerprint").get<std::string>();
  n.binary_digest = j.at("binary_digest").get<std::string>();
  n.rule_set = j.at("rule_set").get<std::set<std::string>>();
  n.schema = schema_from_json(j.at("relations"));
  return n;
}

bool is_hex_id(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

void check_name(const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name[0] == '.')
    throw StoreError("invalid name '" + name + "'");
}

}  // namespace

std::string rule_set_id(const std::set<std::string>& rule_set) {
  Sha256 h;
  for (const auto& c : rule_set) h.update(c).update("\n");
  return h.hex_digest();
}

MetaDatabase::MetaDatabase(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  for (const char* sub : {"roots", "nodes", "edges", "sessions"}) {
    fs::create_directories(dir_ / sub, ec);
    if (ec) throw StoreError("cannot create " + (dir_ / sub).string() + ": " + ec.message());
  }
}

fs::path MetaDatabase::node_dir(const std::string& id) const { return dir_ / "nodes" / id; }

std::mutex& MetaDatabase::lineage_mutex(const std::string& digest) {
  std::lock_guard lock(mutex_);
  auto& m = lineage_mutexes_[digest];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

bool MetaDatabase::has_node(const std::string& id) const {
  if (!is_hex_id(id)) return false;
  {
    std::lock_guard lock(mutex_);
    if (node_cache_.count(id)) return true;
  }
  return fs::exists(node_dir(id) / "manifest.json");
}

SnapshotNode MetaDatabase::node(const std::string& id) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = node_cache_.find(id); it != node_cache_.end()) return it->second;
  }
  if (!has_node(id)) throw StoreError("unknown node '" + id + "'");
  SnapshotNode n;
  try {
    n = manifest_from_json(json::parse(slurp(node_dir(id) / "manifest.json")));
  } catch (const json::exception& e) {
    throw StoreError("corrupt manifest for node " + id + ": " + e.what());
  }
  n.edb_ref = node_dir(id) / "rel";
  std::lock_guard lock(mutex_);
  node_cache_[id] = n;
  return n;
}

FactDatabase MetaDatabase::load_snapshot(const std::string& id) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = snapshot_cache_.find(id); it != snapshot_cache_.end()) return it->second;
  }
  SnapshotNode n = node(id);
  FactDatabase db = load_fact_dir(n.edb_ref, n.schema);
  if (db.fingerprint() != n.fingerprint) throw StoreError("snapshot " + id + " does not match its fingerprint");
  std::lock_guard lock(mutex_);
  if (snapshot_cache_.size() >= kSnapshotCacheLimit) snapshot_cache_.clear();
  snapshot_cache_[id] = db;
  return db;
}

std::string MetaDatabase::write_node(SnapshotNode n, const FactDatabase& db) {
  if (has_node(n.node_id)) return n.node_id;
  fs::path nd = node_dir(n.node_id);
  std::error_code ec;
  fs::remove_all(nd, ec);
  fs::create_directories(nd / "rel", ec);
  if (ec) throw StoreError("cannot create " + nd.string() + ": " + ec.message());
  write_fact_dir(db, nd / "rel");
  n.created_at = now_rfc3339();
  n.fingerprint = db.fingerprint();
  n.schema = db.schema();
  write_atomic(nd / "manifest.json", manifest_json(n).dump(2) + "\n");
  return n.node_id;
}

void MetaDatabase::write_edge(const SnapshotEdge& e) {
  fs::path p = dir_ / "edges" / (e.parent + "-" + e.program_id + "-" + e.child);
  if (!fs::exists(p)) write_atomic(p, "");
}

std::string MetaDatabase::register_root(const FactDatabase& edb, const std::string& binary_digest, bool allow_empty) {
  check_name(binary_digest);
  if (!allow_empty && edb.total_tuples() == 0) throw StoreError("refusing to register an empty fact database");
  std::lock_guard guard(lineage_mutex(binary_digest));
  fs::path rd = dir_ / "roots" / binary_digest;
  std::error_code ec;
  fs::create_directories(rd, ec);
  if (ec) throw StoreError("cannot create " + rd.string() + ": " + ec.message());
  FileLock lock(rd / "lock");
  if (auto existing = find_root(binary_digest)) return *existing;

  SnapshotNode n;
  n.node_id = sha256_hex("root\n" + binary_digest + "\n" + edb.fingerprint());
  n.root = n.node_id;
  n.program_id = "root";
  n.binary_digest = binary_digest;
  std::string id = write_node(n, edb);
  write_atomic(rd / "node", id + "\n");
  return id;
}

std::optional<std::string> MetaDatabase::find_root(const std::string& binary_digest) const {
  fs::path p = dir_ / "roots" / binary_digest / "node";
  if (!fs::exists(p)) return std::nullopt;
  std::string id = slurp(p);
  while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.pop_back();
  if (!has_node(id)) return std::nullopt;
  return id;
}

std::string MetaDatabase::find_compatible(const DatalogProgram& program, const std::string& root) const {
  if (!has_node(root)) throw StoreError("unknown root '" + root + "'");
  const auto clauses = program.clause_set();
  std::optional<SnapshotNode> best;
  for (const auto& id : reachable(root)) {
    SnapshotNode n = node(id);
    if (!std::includes(clauses.begin(), clauses.end(), n.rule_set.begin(), n.rule_set.end())) continue;
    if (!seed_is_sound(program, n.rule_set)) continue;
    if (best && std::make_tuple(n.rule_set.size(), n.created_at, n.node_id) <
                    std::make_tuple(best->rule_set.size(), best->created_at, best->node_id))
      continue;
    best = std::move(n);
  }
  return best->node_id;
}

std::string MetaDatabase::register_run(const std::string& parent, const DatalogProgram& program,
                                       const FactDatabase& result) {
  SnapshotNode p = node(parent);
  std::set<std::string> rule_set = p.rule_set;
  for (auto& c : program.clause_set()) rule_set.insert(c);
  if (rule_set.size() == p.rule_set.size()) return parent;

  std::lock_guard guard(lineage_mutex(p.binary_digest));
  FileLock lock(dir_ / "roots" / p.binary_digest / "lock");
  SnapshotNode n;
  n.node_id = sha256_hex(p.root + "\n" + result.fingerprint() + "\n" + rule_set_id(rule_set));
  n.root = p.root;
  n.parent = parent;
  n.program_id = canonical_hash(program).hex;
  n.program_text = canonical_text(program);
  n.binary_digest = p.binary_digest;
  n.rule_set = std::move(rule_set);
  std::string id = write_node(n, result);
  write_edge({parent, n.program_id, id});
  return id;
}

std::vector<std::string> MetaDatabase::node_ids() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "nodes", ec)) {
    auto name = entry.path().filename().string();
    if (is_hex_id(name) && fs::exists(entry.path() / "manifest.json")) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SnapshotEdge> MetaDatabase::edges() const {
  std::vector<SnapshotEdge> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "edges", ec)) {
    auto name = entry.path().filename().string();
    auto a = name.find('-');
    auto b = name.rfind('-');
    if (a == std::string::npos || a == b || name.find(".tmp") != std::string::npos) continue;
    out.push_back({name.substr(0, a), name.substr(a + 1, b - a - 1), name.substr(b + 1)});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> MetaDatabase::reachable(const std::string& root) const {
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& e : edges()) children[e.parent].push_back(e.child);
  std::set<std::string> seen{root};
  std::deque<std::string> queue{root};
  while (!queue.empty()) {
    auto id = queue.front();
    queue.pop_front();
    for (const auto& c : children[id])
      if (has_node(c) && seen.insert(c).second) queue.push_back(c);
  }
  return {seen.begin(), seen.end()};
}

void MetaDatabase::save_session(const SessionRecord& s) {
  check_name(s.name);
  json j{{"name", s.name}, {"root", s.root}, {"node", s.node}};
  write_atomic(dir_ / "sessions" / s.name, j.dump() + "\n");
}

void MetaDatabase::drop_session(const std::string& name) {
  check_name(name);
  std::error_code ec;
  fs::remove(dir_ / "sessions" / name, ec);
}

std::vector<SessionRecord> MetaDatabase::sessions() const {
  std::vector<SessionRecord> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "sessions", ec)) {
    if (entry.path().filename().string().find(".tmp") != std::string::npos) continue;
    try {
      auto j = json::parse(slurp(entry.path()));
      out.push_back({j.at("name").get<std::string>(), j.at("root").get<std::string>(), j.at("node").get<std::string>()});
    } catch (const json::exception&) {
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

std::size_t MetaDatabase::gc() {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::vector<std::string>> parents;
  auto all_edges = edges();
  for (const auto& e : all_edges) parents[e.child].push_back(e.parent);
  std::set<std::string> live;
  std::deque<std::string> queue;
  for (const auto& s : sessions()) queue.push_back(s.node);
  while (!queue.empty()) {
    auto id = queue.front();
    queue.pop_front();
    if (!live.insert(id).second) continue;
    for (const auto& p : parents[id]) queue.push_back(p);
  }
  std::size_t removed = 0;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "nodes", ec)) {
    auto id = entry.path().filename().string();
    if (live.count(id)) continue;
    fs::remove_all(entry.path(), ec);
    node_cache_.erase(id);
    snapshot_cache_.erase(id);
    if (is_hex_id(id)) ++removed;
  }
  for (const auto& e : all_edges)
    if (!live.count(e.parent) || !live.count(e.child))
      fs::remove(dir_ / "edges" / (e.parent + "-" + e.program_id + "-" + e.child), ec);
  for (const auto& entry : fs::directory_iterator(dir_ / "roots", ec)) {
    fs::path p = entry.path() / "node";
    if (!fs::exists(p)) continue;
    std::string id = slurp(p);
    while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.pop_back();
    if (!live.count(id)) fs::remove(p, ec);
  }
  return removed;
}

}  // namespace d3re
