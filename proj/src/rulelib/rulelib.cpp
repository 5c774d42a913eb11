#include "d3re/rulelib.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "d3re/facts.hpp"
#include "d3re/parser.hpp"

namespace d3re {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AnnotationBinding parse_binding(const json& j) {
  AnnotationBinding b;
  b.relation = j.at("relation").get<std::string>();
  auto kind = j.at("kind").get<std::string>();
  if (kind == "highlight")
    b.kind = Annotation::Kind::Highlight;
  else if (kind == "comment")
    b.kind = Annotation::Kind::Comment;
  else
    throw Error("unknown binding kind '" + kind + "'");
  b.address_column = j.at("address").get<std::size_t>();
  if (j.contains("text")) b.text_column = j.at("text").get<std::size_t>();
  b.label = j.value("label", "");
  return b;
}

bool same_binding(const AnnotationBinding& a, const AnnotationBinding& b) {
  return a.relation == b.relation && a.kind == b.kind && a.address_column == b.address_column &&
         a.text_column == b.text_column && a.label == b.label;
}

}  // namespace

std::string Analysis::source() const { return slurp(file); }

DatalogProgram Analysis::compile(const DatalogProgram& context, Diagnostics* diag) const {
  DatalogProgram unit = parse_extension(source(), context, diag);
  for (const auto& [relation, path] : facts) {
    const RelationDecl* decl = unit.find(relation);
    if (!decl) decl = context.find(relation);
    if (!decl) throw Error(name + ": facts for undeclared relation '" + relation + "'");
    auto rel = load_fact_file(path, relation, RelationSchema::from(*decl));
    for (auto& t : rel.tuples) unit.facts.push_back(Fact{relation, std::move(t)});
  }
  return unit;
}

Registry Registry::load(const fs::path& rules_dir) {
  Registry reg;
  reg.dir_ = rules_dir;
  json doc;
  try {
    doc = json::parse(slurp(rules_dir / "registry.json"));
  } catch (const json::exception& e) {
    throw Error((rules_dir / "registry.json").string() + ": " + e.what());
  }
  try {
    for (const auto& j : doc.at("analyses")) {
      Analysis a;
      a.name = j.at("name").get<std::string>();
      a.file = rules_dir / j.at("file").get<std::string>();
      if (j.contains("requires")) a.dependencies = j.at("requires").get<std::vector<std::string>>();
      if (j.contains("facts"))
        for (const auto& [rel, file] : j.at("facts").items()) a.facts[rel] = rules_dir / file.get<std::string>();
      if (j.contains("outputs")) a.outputs = j.at("outputs").get<std::vector<std::string>>();
      if (j.contains("bindings"))
        for (const auto& b : j.at("bindings")) a.bindings.push_back(parse_binding(b));
      if (reg.find(a.name)) throw Error("duplicate analysis '" + a.name + "'");
      reg.analyses_.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw Error((rules_dir / "registry.json").string() + ": " + e.what());
  }
  return reg;
}

const Analysis* Registry::find(std::string_view name) const {
  for (const auto& a : analyses_)
    if (a.name == name) return &a;
  return nullptr;
}

std::vector<const Analysis*> Registry::closure(std::string_view name) const {
  std::vector<const Analysis*> order;
  std::set<std::string> done, active;
  std::function<void(std::string_view)> visit = [&](std::string_view n) {
    const Analysis* a = find(n);
    if (!a) throw Error("unknown analysis '" + std::string(n) + "'");
    if (done.count(a->name)) return;
    if (!active.insert(a->name).second) throw Error("analysis '" + a->name + "' requires itself");
    for (const auto& dep : a->dependencies) visit(dep);
    active.erase(a->name);
    done.insert(a->name);
    order.push_back(a);
  };
  visit(name);
  return order;
}

std::vector<AnnotationBinding> Registry::bindings_for(const std::string& relation) const {
  std::vector<AnnotationBinding> out;
  for (const auto& a : analyses_)
    for (const auto& b : a.bindings) {
      if (b.relation != relation) continue;
      bool seen = false;
      for (const auto& o : out) seen = seen || same_binding(o, b);
      if (!seen) out.push_back(b);
    }
  return out;
}

DatalogProgram Registry::build(std::string_view name, const DatalogProgram& context, Diagnostics* diag) const {
  DatalogProgram program = context;
  for (const Analysis* a : closure(name)) program = program.extended_with(a->compile(program, diag));
  return program;
}

DatalogProgram prelude_program() {
  DatalogProgram p;
  for (const auto& d : base_schema().declarations()) {
    p.declarations[d.name] = d;
    p.inputs.insert(d.name);
  }
  p.declarations["highlight"] = RelationDecl{"highlight", {{"addr", ColumnType::Number}}};
  p.declarations["comment"] =
      RelationDecl{"comment", {{"addr", ColumnType::Number}, {"text", ColumnType::Symbol}}};
  p.declarations["current_address"] = RelationDecl{"current_address", {{"addr", ColumnType::Number}}};
  return p;
}

fs::path default_rules_dir() {
  if (const char* env = std::getenv("D3RE_RULES"); env && *env) return env;
#ifdef D3RE_DEFAULT_RULES_DIR
  return D3RE_DEFAULT_RULES_DIR;
#else
  return "rules";
#endif
}

std::size_t datalog_line_count(std::string_view text) {
  std::size_t count = 0;
  bool in_block = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    bool code = false;
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (in_block) {
        if (c == '*' && i + 1 < line.size() && line[i + 1] == '/') {
          in_block = false;
          ++i;
        }
        continue;
      }
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') break;
      if (c == '/' && i + 1 < line.size() && line[i + 1] == '*') {
        in_block = true;
        ++i;
        continue;
      }
      if (c == '"') in_string = true;
      if (!std::isspace(static_cast<unsigned char>(c))) code = true;
    }
    if (code) ++count;
    pos = end + 1;
  }
  return count;
}

}  // namespace d3re
