#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "d3re/evaluate.hpp"
#include "d3re/facts.hpp"
#include "d3re/parser.hpp"
#include "d3re/rulelib.hpp"
#include "d3re/stratify.hpp"
#include "support/temp_dir.hpp"

using namespace d3re;
using d3re::testing::read_file;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = D3RE_FIXTURES_DIR;

const Registry& registry() {
  static const Registry reg = Registry::load(D3RE_RULES_DIR);
  return reg;
}

const FactDatabase& cromu() {
  static const FactDatabase db = load_fact_dir(kFixtures / "cromu38-like");
  return db;
}

FactDatabase run(const std::string& analysis, const FactDatabase& db) {
  return evaluate(registry().build(analysis, prelude_program()), db);
}

std::int64_t num(const Value& v) { return v.as_integer(); }

const std::vector<Tuple>& rows(const FactDatabase& db, const std::string& rel) {
  static const std::vector<Tuple> none;
  const auto* r = db.find(rel);
  return r ? r->tuples : none;
}

std::set<Tuple> tuple_set(const FactDatabase& db, const std::string& rel) {
  const auto& r = rows(db, rel);
  return {r.begin(), r.end()};
}

Tuple tup(std::initializer_list<Value> vs) { return Tuple(vs); }
Value I(std::int64_t v) { return Value::integer(v); }
Value S(const char* s) { return Value::string(s); }

// Trimmed lines of clause text: drops blanks, comments and directives.
std::vector<std::string> clause_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.rfind("//", 0) == 0 || line[0] == '.') continue;
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> listing(const char* name) {
  return clause_lines(read_file(fs::path(D3RE_TEST_DATA_DIR) / "listings" / name));
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Entry of the function containing `ea`: the greatest entry not above it.
std::optional<std::int64_t> function_of(const FactDatabase& db, std::int64_t ea) {
  std::optional<std::int64_t> best;
  for (const auto& t : rows(db, "function_entry"))
    if (num(t[0]) <= ea && (!best || num(t[0]) > *best)) best = num(t[0]);
  return best;
}

std::map<std::int64_t, std::string> symbols_of_type(const FactDatabase& db, const std::string& type,
                                                    const std::string& scope = "") {
  std::map<std::int64_t, std::string> out;
  for (const auto& t : rows(db, "defined_symbol"))
    if (t[2].as_string() == type && (scope.empty() || t[3].as_string() == scope)) out[num(t[0])] = t[5].as_string();
  return out;
}

// Procedural model of global use-before-definition.
struct UseDefOracle {
  struct Use {
    std::int64_t ea, ga;
  };
  std::vector<Use> uses;
  std::map<std::pair<std::int64_t, std::int64_t>, std::set<std::int64_t>> reaching;  // (use, ga) -> defs
  std::set<std::int64_t> null_defs;
  std::map<std::int64_t, std::string> globals;

  explicit UseDefOracle(const FactDatabase& db) {
    globals = symbols_of_type(db, "OBJECT", "GLOBAL");
    std::set<std::int64_t> code;
    for (const auto& t : rows(db, "code")) code.insert(num(t[0]));
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> pcrel;
    for (const auto& t : rows(db, "pc_relative_operand")) pcrel[{num(t[0]), num(t[1])}] = num(t[2]);
    auto global_at = [&](std::int64_t ea, std::int64_t idx) -> std::optional<std::int64_t> {
      auto it = pcrel.find({ea, idx});
      if (!code.count(ea) || it == pcrel.end() || !globals.count(it->second)) return std::nullopt;
      return it->second;
    };
    std::set<std::pair<std::int64_t, std::int64_t>> use_keys;
    for (const auto& t : rows(db, "instruction_get_src_op"))
      if (auto ga = global_at(num(t[0]), num(t[1])))
        if (use_keys.insert({num(t[0]), *ga}).second) uses.push_back({num(t[0]), *ga});
    std::set<std::int64_t> defs;
    for (const auto& t : rows(db, "instruction_get_dest_op"))
      if (global_at(num(t[0]), num(t[1]))) defs.insert(num(t[0]));
    std::map<std::int64_t, std::int64_t> imm;
    for (const auto& t : rows(db, "op_immediate")) imm[num(t[0])] = num(t[1]);
    for (const auto& t : rows(db, "instruction_get_src_op"))
      if (defs.count(num(t[0])) && imm.count(num(t[2])) && imm[num(t[2])] == 0) null_defs.insert(num(t[0]));

    std::set<std::pair<std::int64_t, std::int64_t>> local;
    for (const auto& t : rows(db, "block_last_def_global")) {
      reaching[{num(t[0]), num(t[2])}].insert(num(t[1]));
      local.insert({num(t[0]), num(t[2])});
    }
    std::map<std::int64_t, std::int64_t> block_of;
    for (const auto& t : rows(db, "code_in_block")) block_of[num(t[0])] = num(t[1]);
    for (const auto& u : uses) {
      if (local.count({u.ea, u.ga}) || !block_of.count(u.ea)) continue;
      for (const auto& t : rows(db, "last_def_global"))
        if (num(t[0]) == block_of[u.ea] && num(t[2]) == u.ga) reaching[{u.ea, u.ga}].insert(num(t[1]));
    }
  }

  // Clause 1: no reaching definition. Clause 2: some reaching definition
  // (non-null ones only when `skip_null`). Each clause optionally limited
  // to [lo, hi).
  std::set<Tuple> report(std::optional<std::pair<std::int64_t, std::int64_t>> range1,
                         std::optional<std::pair<std::int64_t, std::int64_t>> range2, bool skip_null) const {
    std::set<Tuple> out;
    auto in = [](std::int64_t ea, const auto& r) { return !r || (ea >= r->first && ea < r->second); };
    for (const auto& u : uses) {
      auto it = reaching.find({u.ea, u.ga});
      bool any = it != reaching.end() && !it->second.empty();
      bool live = false;
      if (any)
        for (auto d : it->second) live = live || !skip_null || !null_defs.count(d);
      if ((!any && in(u.ea, range1)) || (live && in(u.ea, range2)))
        out.insert(tup({I(u.ea), I(u.ga), S(globals.at(u.ga).c_str())}));
    }
    return out;
  }
};

std::pair<std::int64_t, std::int64_t> main_range(const FactDatabase& db) {
  for (const auto& t : rows(db, "defined_symbol"))
    if (t[5].as_string() == "main") return {num(t[0]), num(t[0]) + num(t[1])};
  throw std::runtime_error("no main");
}

std::set<Tuple> uninit_rows(std::initializer_list<std::tuple<std::int64_t, std::int64_t, const char*>> rs) {
  std::set<Tuple> out;
  for (auto [ea, ga, n] : rs) out.insert(tup({I(ea), I(ga), S(n)}));
  return out;
}

}  // namespace

TEST(Registry, ListsEveryAnalysis) {
  std::vector<std::string> names;
  for (const auto& a : registry().analyses()) names.push_back(a.name);
  std::vector<std::string> expected{"use_def_global", "uninitialized", "uninitialized_range", "uninitialized_refined",
                                    "non_xor",        "overflow",      "basicblk",            "findcrypt",
                                    "stack_var",      "heap_var",      "static_var",          "unl_static"};
  EXPECT_EQ(names, expected);
  for (const auto& a : registry().analyses()) EXPECT_TRUE(fs::exists(a.file)) << a.file;
}

TEST(Registry, ClosureListsDependenciesFirst) {
  std::vector<std::string> order;
  for (const auto* a : registry().closure("unl_static")) order.push_back(a->name);
  EXPECT_EQ(order, (std::vector<std::string>{"stack_var", "heap_var", "static_var", "unl_static"}));
  EXPECT_THROW(registry().closure("nope"), Error);
}

TEST(Registry, RejectsCyclesAndBadKinds) {
  d3re::testing::TempDir dir;
  dir.write("a.dl", ".decl a(x:number)\n");
  dir.write("registry.json",
            R"({"analyses":[{"name":"a","file":"a.dl","requires":["b"]},{"name":"b","file":"a.dl","requires":["a"]}]})");
  auto reg = Registry::load(dir.path());
  EXPECT_THROW(reg.closure("a"), Error);
  dir.write("registry.json",
            R"({"analyses":[{"name":"a","file":"a.dl","bindings":[{"relation":"a","kind":"blink","address":0}]}]})");
  EXPECT_THROW(Registry::load(dir.path()), Error);
  dir.write("registry.json", "{");
  EXPECT_THROW(Registry::load(dir.path()), Error);
}

TEST(Registry, BindingsAreMergedPerRelation) {
  auto b = registry().bindings_for("use_before_def_global");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].kind, Annotation::Kind::Highlight);
  EXPECT_EQ(b[1].kind, Annotation::Kind::Comment);
  EXPECT_EQ(b[1].text_column, std::optional<std::size_t>(2));
  EXPECT_TRUE(registry().bindings_for("def_global").empty());
}

TEST(Registry, EveryAnalysisParsesAndStratifies) {
  for (const auto& a : registry().analyses()) {
    SCOPED_TRACE(a.name);
    Diagnostics diag;
    DatalogProgram p = registry().build(a.name, prelude_program(), &diag);
    EXPECT_NO_THROW(validate_program(p));
    auto s = stratify(p);
    for (const auto& out : a.outputs) EXPECT_TRUE(s.relation_stratum.count(out)) << out;
  }
}

TEST(RuleFiles, ClausesMatchReferenceListings) {
  auto rules = [](const char* f) { return clause_lines(read_file(fs::path(D3RE_RULES_DIR) / f)); };
  auto uninit = listing("uninitialized.txt");
  auto second = std::vector<std::string>(
      std::find(uninit.begin() + 1, uninit.end(), uninit.front()), uninit.end());
  ASSERT_FALSE(second.empty());
  EXPECT_EQ(rules("use_def_global.dl"), listing("use_def_global.txt"));
  EXPECT_EQ(rules("uninitialized.dl"), uninit);
  EXPECT_EQ(rules("uninitialized_range.dl"), concat(listing("range.txt"), second));
  EXPECT_EQ(rules("uninitialized_refined.dl"), concat(listing("range.txt"), listing("refined.txt")));
}

TEST(RuleFiles, RangeConstantIsMainFunction) {
  auto [lo, hi] = main_range(cromu());
  auto program = registry().build("uninitialized_range", prelude_program());
  std::set<Tuple> ranges;
  for (const auto& f : program.facts)
    if (f.relation == "code_in_range") ranges.insert(f.values);
  EXPECT_EQ(ranges, (std::set<Tuple>{tup({I(lo), I(hi)})}));
}

TEST(LineCount, CountsCodeLinesOnly) {
  EXPECT_EQ(datalog_line_count(""), 0u);
  EXPECT_EQ(datalog_line_count("// c\n\n  \n.decl a(x:number)\n"), 1u);
  EXPECT_EQ(datalog_line_count("/* a\n b */ a(1).\na(2). // x\n"), 2u);
  EXPECT_EQ(datalog_line_count("/*\n*/\n"), 0u);
  EXPECT_EQ(datalog_line_count("s(\"// not a comment\")."), 1u);
}

TEST(LineCount, ReplicatedAnalysesAreComparablyConcise) {
  const std::map<std::string, double> reference{{"non_xor", 8}, {"overflow", 18}, {"basicblk", 4}, {"findcrypt", 45}};
  for (const auto& [name, ref] : reference) {
    auto n = static_cast<double>(datalog_line_count(registry().find(name)->source()));
    EXPECT_GE(n, ref / 2) << name;
    EXPECT_LE(n, ref * 2) << name;
  }
}

TEST(Results, UninitializedGlobals) {
  const auto& db = cromu();
  UseDefOracle oracle(db);
  auto range = main_range(db);
  auto a = tuple_set(run("uninitialized", db), "use_before_def_global");
  auto b = tuple_set(run("uninitialized_range", db), "use_before_def_global");
  auto c = tuple_set(run("uninitialized_refined", db), "use_before_def_global");
  EXPECT_EQ(a, oracle.report(std::nullopt, std::nullopt, false));
  EXPECT_EQ(b, oracle.report(range, std::nullopt, false));
  EXPECT_EQ(c, oracle.report(range, range, true));

  EXPECT_EQ(a, uninit_rows({{0x4a10, 0xa190, "g_counter"},
                            {0x4feb, 0xa180, "swap_short"},
                            {0x5017, 0xa188, "swap_word"},
                            {0x515e, 0xa180, "swap_short"},
                            {0x520b, 0xa190, "g_counter"},
                            {0x5510, 0xa180, "swap_short"},
                            {0x5520, 0xa188, "swap_word"}}));
  EXPECT_EQ(c, uninit_rows({{0x5017, 0xa188, "swap_word"}}));
  EXPECT_TRUE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
  EXPECT_TRUE(std::includes(b.begin(), b.end(), c.begin(), c.end()));
  EXPECT_LT(c.size(), b.size());
  EXPECT_LT(b.size(), a.size());
}

TEST(Results, NonZeroingXor) {
  // Oracle: textual scan of the fixture source.
  std::set<Tuple> expected;
  std::istringstream src(read_file(kFixtures / "src" / "cromu38-like.fx"));
  std::regex xor_line(R"(^\s*(0x[0-9a-fA-F]+)(?:/\d+)?:\s*xor\s+(\w+)\s*,\s*(\w+)\s*$)", std::regex::icase);
  std::string line;
  std::smatch m;
  while (std::getline(src, line))
    if (std::regex_match(line, m, xor_line) && m[2] != m[3]) expected.insert(tup({I(std::stoll(m[1], nullptr, 16))}));
  EXPECT_EQ(tuple_set(run("non_xor", cromu()), "non_xor"), expected);
  EXPECT_EQ(expected, (std::set<Tuple>{tup({I(0x4a19)})}));
}

TEST(Results, RiskyCalls) {
  const auto& db = cromu();
  std::set<std::string> risky;
  std::istringstream list(read_file(fs::path(D3RE_RULES_DIR) / "risky_functions.facts"));
  for (std::string n; std::getline(list, n);)
    if (!n.empty()) risky.insert(n);
  std::map<std::int64_t, std::string> names;
  for (const auto& t : rows(db, "defined_symbol")) names[num(t[0])] = t[5].as_string();
  auto funcs = symbols_of_type(db, "FUNC");
  std::set<Tuple> expected;
  for (const auto& t : rows(db, "direct_call")) {
    auto callee = names.find(num(t[1]));
    if (callee == names.end() || !risky.count(callee->second)) continue;
    auto f = function_of(db, num(t[0]));
    if (f && funcs.count(*f)) expected.insert(tup({t[0], S(funcs[*f].c_str()), S(callee->second.c_str())}));
  }
  EXPECT_EQ(tuple_set(run("overflow", db), "overflow"), expected);
  EXPECT_EQ(expected, (std::set<Tuple>{tup({I(0x4c5e), S("main"), S("strcpy")})}));
}

TEST(Results, BasicBlocks) {
  const auto& db = cromu();
  std::map<std::int64_t, std::int64_t> end;
  std::map<std::int64_t, std::int64_t> size;
  for (const auto& t : rows(db, "instruction")) size[num(t[0])] = num(t[1]);
  for (const auto& t : rows(db, "code_in_block"))
    end[num(t[1])] = std::max(end[num(t[1])], num(t[0]) + size[num(t[0])]);
  std::set<Tuple> expected;
  for (auto [b, e] : end)
    if (auto f = function_of(db, b)) expected.insert(tup({I(*f), I(b), I(e - b)}));
  auto got = tuple_set(run("basicblk", db), "basicblk");
  EXPECT_EQ(got, expected);

  std::istringstream src(read_file(kFixtures / "src" / "cromu38-like.fx"));
  std::size_t block_lines = 0;
  for (std::string line; std::getline(src, line);) block_lines += line.rfind("block ", 0) == 0;
  EXPECT_EQ(got.size(), block_lines);
}

TEST(Results, CryptoConstants) {
  auto scan = [](const FactDatabase& db, const DatalogProgram& program) {
    std::map<std::string, std::map<std::int64_t, std::int64_t>> consts;
    for (const auto& f : program.facts)
      if (f.relation == "crypto_byte") consts[f.values[0].as_string()][num(f.values[1])] = num(f.values[2]);
    std::map<std::int64_t, std::int64_t> mem;
    for (const auto& t : rows(db, "data_byte")) mem[num(t[0])] = num(t[1]);
    std::set<Tuple> hits;
    for (const auto& [name, bytes] : consts)
      for (const auto& [start, _] : mem) {
        bool all = true;
        for (const auto& [off, v] : bytes) {
          auto it = mem.find(start + off);
          all = all && it != mem.end() && it->second == v;
        }
        if (all) hits.insert(tup({S(name.c_str()), I(start)}));
      }
    return hits;
  };
  auto program = registry().build("findcrypt", prelude_program());
  auto expected = scan(cromu(), program);
  EXPECT_EQ(tuple_set(evaluate(program, cromu()), "crypto_match"), expected);
  EXPECT_EQ(expected, (std::set<Tuple>{tup({S("AES_SBOX"), I(0xb010)}), tup({S("MD5_IV"), I(0xb000)})}));

  auto plain = load_fact_dir(kFixtures / "plain");
  EXPECT_TRUE(scan(plain, program).empty());
  EXPECT_TRUE(rows(evaluate(program, plain), "crypto_match").empty());
}

TEST(Results, VariableChain) {
  const auto& db = cromu();
  auto out = run("unl_static", db);
  EXPECT_EQ(tuple_set(out, "heap_var"), (std::set<Tuple>{tup({I(0x4c22), I(-24)})}));

  // Oracle: objects with a pc-relative source use and no pc-relative destination.
  auto objects = symbols_of_type(db, "OBJECT");
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> pcrel;
  for (const auto& t : rows(db, "pc_relative_operand")) pcrel[{num(t[0]), num(t[1])}] = num(t[2]);
  std::set<std::int64_t> written;
  for (const auto& t : rows(db, "instruction_get_dest_op"))
    if (auto it = pcrel.find({num(t[0]), num(t[1])}); it != pcrel.end()) written.insert(it->second);
  std::set<Tuple> expected;
  for (const auto& t : rows(db, "instruction_get_src_op"))
    if (auto it = pcrel.find({num(t[0]), num(t[1])});
        it != pcrel.end() && objects.count(it->second) && !written.count(it->second))
      expected.insert(tup({t[0], I(it->second), S(objects[it->second].c_str())}));
  EXPECT_EQ(tuple_set(out, "unl_static"), expected);
  EXPECT_EQ(expected, (std::set<Tuple>{tup({I(0x4a1b), I(0xa198), S("g_flags")})}));
}

TEST(Annotations, DerivedFromBindings) {
  auto out = run("overflow", cromu());
  auto notes = derive_annotations(out, registry().bindings_for("overflow"));
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].kind, Annotation::Kind::Highlight);
  EXPECT_EQ(notes[0].address, 0x4c5e);
  EXPECT_EQ(notes[1].text, "possible overflow: strcpy");

  auto blocks = derive_annotations(run("basicblk", cromu()), registry().bindings_for("basicblk"));
  EXPECT_EQ(blocks.size(), 11u);
  for (const auto& n : blocks) EXPECT_EQ(n.text, "basic block");
  EXPECT_TRUE(derive_annotations(cromu(), registry().bindings_for("basicblk")).empty());
}
