#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "d3re/elf.hpp"
#include "d3re/facts.hpp"
#include "d3re/fixture.hpp"
#include "support/temp_dir.hpp"

using namespace d3re;
using d3re::testing::read_file;
using d3re::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kCromu = fs::path(D3RE_FIXTURES_DIR) / "cromu38-like";
const fs::path kElf = fs::path(D3RE_FIXTURES_DIR) / "elf";

Schema edge_schema() {
  return {{"edge", {{{"a", ColumnType::Number}, {"b", ColumnType::Number}}}},
          {"name", {{{"n", ColumnType::Symbol}}}}};
}

Tuple ints(std::initializer_list<std::int64_t> xs) {
  Tuple t;
  for (auto x : xs) t.push_back(Value::integer(x));
  return t;
}

}  // namespace

TEST(FactDir, SingleRow) {
  TempDir dir;
  dir.write("edge.facts", "1\t2\n");
  FactDatabase db = load_fact_dir(dir.path(), edge_schema());
  ASSERT_EQ(db.size("edge"), 1u);
  EXPECT_TRUE(db.contains("edge", ints({1, 2})));
}

TEST(FactDir, EmptyDirectoryGivesEmptyRelations) {
  TempDir dir;
  FactDatabase db = load_fact_dir(dir.path(), base_schema());
  EXPECT_EQ(db.total_tuples(), 0u);
  EXPECT_EQ(db.relations().size(), base_schema().relations.size());
}

TEST(FactDir, FixtureCardinalitiesMatchLineCounts) {
  // Manifest produced by `wc -l *.facts` when the fixture was generated.
  std::istringstream manifest(read_file(fs::path(D3RE_FIXTURES_DIR) / "cromu38-like.wc"));
  FactDatabase db = load_fact_dir(kCromu);
  std::size_t count = 0, files = 0;
  std::string file;
  while (manifest >> count >> file) {
    ++files;
    std::string rel = fs::path(file).stem().string();
    EXPECT_EQ(db.size(rel), count) << rel;
  }
  EXPECT_GE(files, 10u);
}

TEST(FactDir, ErrorsNameFileAndLine) {
  TempDir dir;
  dir.write("edge.facts", "1\t2\n3\n");
  try {
    load_fact_dir(dir.path(), edge_schema());
    FAIL();
  } catch (const FactsError& e) {
    EXPECT_NE(std::string(e.what()).find("edge.facts:2"), std::string::npos) << e.what();
  }
  dir.write("edge.facts", "1\t2\n\n0x10\t4\n");
  try {
    load_fact_dir(dir.path(), edge_schema());
    FAIL();
  } catch (const FactsError& e) {
    EXPECT_NE(std::string(e.what()).find("edge.facts:3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("not an integer"), std::string::npos);
  }
}

TEST(FactDir, UnknownFilesWarnAndCrLfIsAccepted) {
  TempDir dir;
  dir.write("edge.facts", "1\t2\r\n-3\t4\r\n");
  dir.write("mystery.facts", "x\n");
  dir.write("README", "not a fact file");
  Diagnostics diag;
  FactDatabase db = load_fact_dir(dir.path(), edge_schema(), &diag);
  EXPECT_EQ(db.size("edge"), 2u);
  EXPECT_TRUE(db.contains("edge", ints({-3, 4})));
  ASSERT_EQ(diag.warnings.size(), 1u);
  EXPECT_NE(diag.warnings[0].find("mystery"), std::string::npos);
}

TEST(FactDir, RoundTripKeepsFingerprint) {
  FactDatabase db = load_fact_dir(kCromu);
  TempDir dir;
  write_fact_dir(db, dir.path());
  FactDatabase back = load_fact_dir(dir.path());
  EXPECT_EQ(back.fingerprint(), db.fingerprint());
  for (const auto& [name, rel] : db.relations()) EXPECT_EQ(back.find(name)->tuples, rel.tuples) << name;
}

TEST(FactDir, LineOrderDoesNotMatter) {
  TempDir dir;
  for (const auto& entry : fs::directory_iterator(kCromu)) fs::copy(entry.path(), dir / entry.path().filename().string());
  std::string fp = load_fact_dir(dir.path()).fingerprint();
  std::mt19937 rng(3);
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    std::istringstream in(read_file(entry.path()));
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    dir.write(entry.path().filename().string(), text);
  }
  EXPECT_EQ(load_fact_dir(dir.path()).fingerprint(), fp);
}

TEST(FactDir, SymbolsAndEmptyStrings) {
  FactDatabase::Builder b;
  b.declare("name", {{{"n", ColumnType::Symbol}}});
  b.insert("name", {Value::string("")});
  b.insert("name", {Value::string("with space")});
  FactDatabase db = std::move(b).build();
  TempDir dir;
  write_fact_dir(db, dir.path());
  EXPECT_EQ(load_fact_dir(dir.path(), edge_schema()).find("name")->tuples, db.find("name")->tuples);

  FactDatabase::Builder bad;
  bad.declare("name", {{{"n", ColumnType::Symbol}}});
  bad.insert("name", {Value::string("a\tb")});
  EXPECT_THROW(write_fact_dir(std::move(bad).build(), dir.path()), FactsError);
}

TEST(FactSchema, ValidatesAddressesAndSymbolVocabulary) {
  TempDir dir;
  dir.write("code.facts", "-4\n");
  EXPECT_THROW(load_fact_dir(dir.path()), FactsError);
  fs::remove(dir / "code.facts");
  dir.write("defined_symbol.facts", "16\t8\tTABLE\tGLOBAL\t1\tx\n");
  EXPECT_THROW(load_fact_dir(dir.path()), FactsError);
  dir.write("defined_symbol.facts", "16\t8\tOBJECT\tGLOBAL\t1\tx\n");
  EXPECT_EQ(load_fact_dir(dir.path()).size("defined_symbol"), 1u);
  // Immediates and displacements may be negative.
  dir.write("op_immediate.facts", "1\t-1\n");
  EXPECT_NO_THROW(load_fact_dir(dir.path()));
}

TEST(Merge, IdentityAndCommutativity) {
  FactDatabase fixture = load_fact_dir(kCromu);
  FactDatabase elf = extract_elf_facts(kElf / "swap.elf");
  EXPECT_EQ(merge(fixture, FactDatabase{}), fixture);
  EXPECT_EQ(merge(fixture, elf).fingerprint(), merge(elf, fixture).fingerprint());
}

TEST(Merge, CardinalityIsSumMinusOverlap) {
  FactDatabase fixture = load_fact_dir(kCromu);
  FactDatabase elf = extract_elf_facts(kElf / "swap.elf");
  FactDatabase both = merge(fixture, elf);
  std::size_t overlap = 0;
  for (const auto& [name, rel] : elf.relations()) {
    const auto* other = fixture.find(name);
    if (!other) continue;
    for (const auto& t : rel.tuples) {
      for (const auto& u : other->tuples) overlap += t == u;
    }
  }
  EXPECT_GT(overlap, 0u);  // data_byte zeros at swap_short/swap_word
  EXPECT_EQ(both.total_tuples(), fixture.total_tuples() + elf.total_tuples() - overlap);
}

TEST(Merge, ArityConflictThrows) {
  FactDatabase::Builder a, b;
  a.declare("r", {{{"x", ColumnType::Number}}});
  b.declare("r", {{{"x", ColumnType::Number}, {"y", ColumnType::Number}}});
  EXPECT_THROW(merge(std::move(a).build(), std::move(b).build()), FactsError);
}

TEST(Elf, SymbolTableMatchesReadelf) {
  FactDatabase db = extract_elf_facts(kElf / "swap.elf");
  EXPECT_TRUE(db.contains("defined_symbol", {Value::integer(41352), Value::integer(8), Value::string("OBJECT"),
                                             Value::string("GLOBAL"), Value::integer(2), Value::string("swap_word")}));

  // Every named OBJECT/FUNC/NOTYPE symbol with a section in readelf's dump appears, and nothing else.
  std::istringstream dump(read_file(kElf / "swap.readelf.txt"));
  std::size_t expected = 0;
  for (std::string line; std::getline(dump, line);) {
    std::istringstream row(line);
    std::string num, value, size, type, bind, vis, ndx, name;
    if (!(row >> num >> value >> size >> type >> bind >> vis >> ndx) || num.back() != ':') continue;
    row >> name;
    if (name.empty() || ndx == "UND" || ndx == "ABS") continue;
    if (type != "OBJECT" && type != "FUNC" && type != "NOTYPE") continue;
    ++expected;
    Tuple t{Value::integer(std::stoll(value, nullptr, 16)), Value::integer(std::stoll(size)), Value::string(type),
            Value::string(bind), Value::integer(std::stoll(ndx)), Value::string(name)};
    EXPECT_TRUE(db.contains("defined_symbol", t)) << line;
    if (type == "FUNC") EXPECT_TRUE(db.contains("function_entry", {t[0]}));
  }
  EXPECT_EQ(db.size("defined_symbol"), expected);
  EXPECT_EQ(db.size("function_entry"), 1u);
}

TEST(Elf, SectionsAndBytes) {
  BinaryImage img = read_elf(kElf / "swap.elf");
  EXPECT_EQ(img.digest.size(), 64u);
  FactDatabase db = extract_elf_facts(img);
  EXPECT_TRUE(db.contains("section", {Value::string(".data"), Value::integer(0x14), Value::integer(0xa180)}));
  EXPECT_TRUE(db.contains("data_byte", ints({0xa190, 0x01})));
  EXPECT_TRUE(db.contains("data_byte", ints({0xa193, 0x67})));
  // .text (27 bytes) + .data (20 bytes); symbol and string tables are not loaded.
  EXPECT_EQ(db.size("data_byte"), 27u + 20u);
}

TEST(Elf, StrippedImageHasNoSymbols) {
  FactDatabase db = extract_elf_facts(kElf / "empty.elf");
  EXPECT_EQ(db.size("defined_symbol"), 0u);
  EXPECT_EQ(db.size("function_entry"), 0u);
  EXPECT_GT(db.size("section"), 0u);
}

TEST(Elf, DistinctErrorKinds) {
  auto kind_of = [](const std::string& bytes) {
    try {
      parse_elf(bytes);
    } catch (const ElfError& e) {
      return e.kind();
    }
    return ElfError::Kind::Io;
  };
  std::string good = read_file(kElf / "swap.elf");
  EXPECT_EQ(kind_of("hello, world\n"), ElfError::Kind::NotElf);
  EXPECT_EQ(kind_of(good.substr(0, 40)), ElfError::Kind::Truncated);
  EXPECT_EQ(kind_of(good.substr(0, good.size() - 100)), ElfError::Kind::Truncated);
  std::string elf32 = good;
  elf32[4] = 1;
  EXPECT_EQ(kind_of(elf32), ElfError::Kind::UnsupportedClass);
  std::string big = good;
  big[5] = 2;
  EXPECT_EQ(kind_of(big), ElfError::Kind::UnsupportedEncoding);
  EXPECT_THROW(read_elf(kElf / "swap.s"), ElfError);
}

TEST(Fixture, CommittedDirectoryIsUpToDate) {
  for (const char* name : {"cromu38-like", "plain"}) {
    FactDatabase compiled =
        compile_fixture(read_file(fs::path(D3RE_FIXTURES_DIR) / "src" / (std::string(name) + ".fx")));
    EXPECT_EQ(compiled.fingerprint(), load_fact_dir(fs::path(D3RE_FIXTURES_DIR) / name).fingerprint()) << name;
  }
}

TEST(Fixture, OperandsAndDerivedRelations) {
  FactDatabase db = compile_fixture(R"(
section .data 0x100 0x10
symbol g 0x100 8 OBJECT GLOBAL
symbol f 0x200 0 FUNC GLOBAL
function main 0x10
block 0x10
0x10: mov qword ptr [g], 0
0x1b: xor eax, eax
0x1d: mov rax, [g]
0x24: mov [rbp-8], rax
0x28: call f
0x2d/1: ret
)");
  EXPECT_TRUE(db.contains("defined_symbol", {Value::integer(0x100), Value::integer(8), Value::string("OBJECT"),
                                             Value::string("GLOBAL"), Value::integer(1), Value::string("g")}));
  EXPECT_TRUE(db.contains("pc_relative_operand", ints({0x10, 1, 0x100})));
  EXPECT_TRUE(db.contains("pc_relative_operand", ints({0x1d, 2, 0x100})));
  EXPECT_TRUE(db.contains("block_last_def_global", ints({0x1d, 0x10, 0x100})));
  EXPECT_TRUE(db.contains("direct_call", ints({0x28, 0x200})));
  EXPECT_EQ(db.size("code"), 6u);
  EXPECT_TRUE(db.contains("function_entry", ints({0x10})));

  const auto& ins = db.find("instruction")->tuples;
  auto xor_row = std::find_if(ins.begin(), ins.end(), [](const Tuple& t) { return t[0].as_integer() == 0x1b; });
  ASSERT_NE(xor_row, ins.end());
  EXPECT_EQ((*xor_row)[1].as_integer(), 2);
  EXPECT_EQ((*xor_row)[3].as_string(), "XOR");
  EXPECT_EQ((*xor_row)[4], (*xor_row)[5]);  // same register, same operand id
  // mov writes op1 only; xor reads and writes it.
  EXPECT_FALSE(db.contains("instruction_get_src_op", {Value::integer(0x10), Value::integer(1), (*ins.begin())[4]}));
  EXPECT_TRUE(db.contains("instruction_get_src_op", {Value::integer(0x1b), Value::integer(1), (*xor_row)[4]}));
  EXPECT_TRUE(db.contains("instruction_get_dest_op", {Value::integer(0x1b), Value::integer(1), (*xor_row)[4]}));
}

TEST(Fixture, Errors) {
  EXPECT_THROW(compile_fixture("0x10: nop"), FactsError);
  EXPECT_THROW(compile_fixture("frobnicate 1"), FactsError);
  EXPECT_THROW(compile_fixture("block 0x10\n0x12: nop"), FactsError);
  EXPECT_THROW(compile_fixture("block 0x10\n0x10: nop\n0x40: nop"), FactsError);
  EXPECT_THROW(compile_fixture("symbol x 0 0 THING GLOBAL"), FactsError);
  try {
    compile_fixture("block 0x10\n0x10: nop\nreaches 0x10 0x10 nowhere");
    FAIL();
  } catch (const FactsError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}
