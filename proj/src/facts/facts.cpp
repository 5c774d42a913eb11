#include "d3re/facts.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace d3re {
namespace fs = std::filesystem;

namespace {

struct Spec {
  const char* name;
  std::vector<std::pair<const char*, ColumnType>> columns;
  std::vector<std::size_t> addresses;
};

constexpr ColumnType N = ColumnType::Number;
constexpr ColumnType S = ColumnType::Symbol;

FactSchema make_base_schema() {
  const std::vector<Spec> specs = {
      {"code", {{"ea", N}}, {0}},
      {"code_in_block", {{"ea", N}, {"block", N}}, {0, 1}},
      {"instruction",
       {{"ea", N}, {"size", N}, {"prefix", S}, {"opcode", S}, {"op1", N}, {"op2", N}, {"op3", N}, {"op4", N}},
       {0, 1, 4, 5, 6, 7}},
      {"instruction_get_src_op", {{"ea", N}, {"index", N}, {"op", N}}, {0, 1, 2}},
      {"instruction_get_dest_op", {{"ea", N}, {"index", N}, {"op", N}}, {0, 1, 2}},
      {"op_immediate", {{"op", N}, {"value", N}}, {0}},
      {"op_regdirect", {{"op", N}, {"reg", S}}, {0}},
      {"op_indirect",
       {{"op", N}, {"seg", S}, {"base", S}, {"index", S}, {"scale", N}, {"disp", N}, {"size", N}},
       {0, 4, 6}},
      {"pc_relative_operand", {{"ea", N}, {"index", N}, {"dest", N}}, {0, 1, 2}},
      {"defined_symbol",
       {{"ea", N}, {"size", N}, {"type", S}, {"scope", S}, {"sectionIndex", N}, {"name", S}},
       {0, 1, 4}},
      {"block_last_def_global", {{"ea_used", N}, {"ea_def", N}, {"ga", N}}, {0, 1, 2}},
      {"last_def_global", {{"block", N}, {"ea_def", N}, {"ga", N}}, {0, 1, 2}},
      {"section", {{"name", S}, {"size", N}, {"addr", N}}, {1, 2}},
      {"function_entry", {{"ea", N}}, {0}},
      {"direct_call", {{"ea", N}, {"dest", N}}, {0, 1}},
      {"data_byte", {{"ea", N}, {"value", N}}, {0, 1}},
  };
  FactSchema s;
  for (const auto& spec : specs) {
    RelationSchema rs;
    for (const auto& [col, type] : spec.columns) rs.columns.push_back({col, type});
    s.relations.emplace(spec.name, std::move(rs));
    s.address_columns.emplace(spec.name, spec.addresses);
  }
  s.allowed_symbols[{"defined_symbol", 2}] = {"OBJECT", "FUNC", "NOTYPE"};
  s.allowed_symbols[{"defined_symbol", 3}] = {"GLOBAL", "LOCAL", "WEAK"};
  return s;
}

std::string location(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

}  // namespace

FactDatabase::Relation load_fact_file(const fs::path& file, const std::string& name, const RelationSchema& rs) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FactsError("cannot read " + file.string());
  FactDatabase::Relation rel{rs, {}};
  // A unary symbol relation can legitimately hold the empty string.
  bool keep_empty = rs.arity() == 1 && rs.columns[0].type == ColumnType::Symbol;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && !keep_empty) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    for (;;) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != rs.arity()) {
      throw FactsError(location(file, lineno) + ": relation '" + name + "' expects " + std::to_string(rs.arity()) +
                       " columns, found " + std::to_string(fields.size()));
    }
    Tuple t;
    t.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      std::string_view f = fields[i];
      if (rs.columns[i].type == ColumnType::Symbol) {
        t.push_back(Value::string(f));
        continue;
      }
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw FactsError(location(file, lineno) + ": column " + std::to_string(i + 1) + " of '" + name +
                         "' is not an integer: '" + std::string(f) + "'");
      }
      t.push_back(Value::integer(v));
    }
    rel.tuples.push_back(std::move(t));
  }
  return rel;
}

const FactSchema& base_schema() {
  static const FactSchema schema = make_base_schema();
  return schema;
}

void FactSchema::validate(const FactDatabase& db) const {
  for (const auto& [name, rel] : db.relations()) {
    auto decl = relations.find(name);
    if (decl == relations.end()) continue;
    if (!decl->second.same_signature(rel.schema)) {
      throw FactsError("relation '" + name + "' does not match the fact schema");
    }
    auto addr = address_columns.find(name);
    for (const auto& t : rel.tuples) {
      if (addr != address_columns.end()) {
        for (std::size_t c : addr->second) {
          if (t[c].as_integer() < 0) {
            throw FactsError("negative address in " + name + " column " + std::to_string(c + 1) + ": " +
                             std::to_string(t[c].as_integer()));
          }
        }
      }
      for (std::size_t c = 0; c < t.size(); ++c) {
        auto allowed = allowed_symbols.find({name, c});
        if (allowed != allowed_symbols.end() && !allowed->second.count(std::string(t[c].as_string()))) {
          throw FactsError("unexpected value '" + std::string(t[c].as_string()) + "' in " + name + " column " +
                           std::to_string(c + 1));
        }
      }
    }
  }
}

std::vector<RelationDecl> FactSchema::declarations() const {
  std::vector<RelationDecl> out;
  for (const auto& [name, rs] : relations) out.push_back({name, rs.columns});
  return out;
}

FactDatabase load_fact_dir(const fs::path& dir, const Schema& schema, Diagnostics* diag) {
  if (!fs::is_directory(dir)) throw FactsError("not a directory: " + dir.string());
  FactDatabase::Builder b;
  for (const auto& [name, rs] : schema) b.declare(name, rs);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".facts") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::string name = file.stem().string();
    auto it = schema.find(name);
    if (it == schema.end()) {
      if (diag) diag->warn("ignoring " + file.filename().string() + ": no relation '" + name + "' in schema");
      continue;
    }
    for (auto& t : load_fact_file(file, name, it->second).tuples) b.insert(name, std::move(t));
  }
  return std::move(b).build();
}

FactDatabase load_fact_dir(const fs::path& dir, const FactSchema& schema, Diagnostics* diag) {
  FactDatabase db = load_fact_dir(dir, schema.relations, diag);
  schema.validate(db);
  return db;
}

std::string to_tsv(const FactDatabase::Relation& rel) {
  std::string out;
  for (const auto& t : rel.tuples) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) out += '\t';
      if (t[i].is_integer()) {
        out += std::to_string(t[i].as_integer());
      } else {
        std::string_view s = t[i].as_string();
        if (s.find_first_of("\t\n\r") != std::string_view::npos) {
          throw FactsError("string value contains a tab or newline: " + to_source(t[i]));
        }
        out += s;
      }
    }
    out += '\n';
  }
  return out;
}

void write_fact_dir(const FactDatabase& db, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [name, rel] : db.relations()) {
    std::string text = to_tsv(rel);
    std::ofstream out(dir / (name + ".facts"), std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw FactsError("cannot write " + (dir / (name + ".facts")).string());
  }
}

FactDatabase merge(const FactDatabase& base, const FactDatabase& overlay) {
  FactDatabase::Builder b;
  b.merge(base);
  b.merge(overlay);
  return std::move(b).build();
}

}  // namespace d3re
