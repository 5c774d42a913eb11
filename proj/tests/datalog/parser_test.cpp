#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "d3re/parser.hpp"

using namespace d3re;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kEdgeDecls = ".decl edge(a:number,b:number)\n.decl path(a:number,b:number)\n";

}  // namespace

TEST(Parser, MinimalRule) {
  DatalogProgram p = parse_program(std::string(kEdgeDecls) + "path(x,y) :- edge(x,y).");
  ASSERT_EQ(p.rules.size(), 1u);
  EXPECT_EQ(p.rules[0].head.relation, "path");
  EXPECT_EQ(p.rules[0].head.args.size(), 2u);
  EXPECT_EQ(p.find("path")->arity(), 2u);
}

TEST(Parser, GlobalUseDefListingParsesWithDanglingCommaWarning) {
  Diagnostics diag;
  DatalogProgram p = parse_program(read_file(D3RE_RULES_DIR "/use_def_global.dl"), &diag);
  ASSERT_EQ(p.rules.size(), 4u);
  EXPECT_EQ(p.rules[0].head.relation, "def_global");
  EXPECT_EQ(p.rules[1].head.relation, "used_global");
  EXPECT_EQ(p.rules[2].head.relation, "def_used_global");
  EXPECT_EQ(p.rules[3].head.relation, "def_used_global");
  ASSERT_EQ(diag.warnings.size(), 1u);
  EXPECT_NE(diag.warnings[0].find("dangling"), std::string::npos);
  // The wildcard inside the negation stays a wildcard.
  const Literal& neg = p.rules[3].body.back();
  EXPECT_EQ(neg.kind, Literal::Kind::Negated);
  EXPECT_TRUE(neg.atom.args[1].is_wildcard());
}

TEST(Parser, UnclosedParenthesisReportsItsPosition) {
  std::string text = ".decl p(a:number)\n.decl q(a:number)\np(x) :- q(x";
  try {
    parse_program(text);
    FAIL() << "expected ParseError";
  } catch (const SemanticError&) {
    FAIL() << "expected a syntax error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 10u);  // the '(' after q
  }
}

TEST(Parser, SemanticErrors) {
  EXPECT_THROW(parse_program(".decl p(a:number)\np(x) :- q(x)."), SemanticError);
  EXPECT_THROW(parse_program(".decl p(a:number)\n.decl q(a:number,b:number)\np(x) :- q(x)."), SemanticError);
  // Head variable not bound.
  EXPECT_THROW(parse_program(".decl p(a:number)\n.decl q(a:number)\np(y) :- q(x)."), SemanticError);
  // Negated variable not bound.
  EXPECT_THROW(parse_program(".decl p(a:number)\n.decl q(a:number)\np(x) :- q(x), !q(y)."), SemanticError);
  // Constraint variable not bound.
  EXPECT_THROW(parse_program(".decl p(a:number)\n.decl q(a:number)\np(x) :- q(x), x < y."), SemanticError);
  // Non-ground fact.
  EXPECT_THROW(parse_program(".decl p(a:number)\np(x)."), SemanticError);
  // Constant of the wrong type.
  EXPECT_THROW(parse_program(".decl p(a:number)\np(\"s\")."), SemanticError);
  // Conflicting redeclaration.
  EXPECT_THROW(parse_program(".decl p(a:number)\n.decl p(a:symbol)\n"), SemanticError);
  // Directive naming an unknown relation.
  EXPECT_THROW(parse_program(".output nope\n"), SemanticError);
}

TEST(Parser, WildcardInNegationIsExistential) {
  EXPECT_NO_THROW(parse_program(".decl p(a:number)\n.decl q(a:number,b:number)\np(x) :- q(x,_), !q(_,x)."));
}

TEST(Parser, AssignmentBindsVariable) {
  DatalogProgram p = parse_program(".decl q(a:number)\n.decl p(a:number)\np(y) :- q(x), y = x + 1.");
  ASSERT_EQ(p.rules.size(), 1u);
  EXPECT_THROW(parse_program(".decl q(a:number)\n.decl p(a:number)\np(y) :- q(x), y < x + 1."), SemanticError);
}

TEST(Parser, NumbersCommentsAndDirectiveParameters) {
  DatalogProgram p = parse_program(R"(
    // line comment
    /* block
       comment */
    .decl r(a:number, b:symbol)
    .input r(IO=file, filename="r.facts")
    .output r
    r(0x10, "a\tb").
    r(-5, "x").
  )");
  ASSERT_EQ(p.facts.size(), 2u);
  EXPECT_EQ(p.facts[0].values[0].as_integer(), 16);
  EXPECT_EQ(p.facts[0].values[1].as_string(), "a\tb");
  EXPECT_EQ(p.facts[1].values[0].as_integer(), -5);
  EXPECT_TRUE(p.inputs.count("r"));
  EXPECT_TRUE(p.outputs.count("r"));
  EXPECT_THROW(parse_program(".decl r(a:number)\nr(99999999999999999999)."), ParseError);
}

TEST(Parser, DuplicateClausesAreMerged) {
  DatalogProgram p = parse_program(std::string(kEdgeDecls) +
                                   "path(x,y) :- edge(x,y).\npath(A,B) :- edge(A,B).\nedge(1,2).\nedge(1,2).");
  EXPECT_EQ(p.rules.size(), 1u);
  EXPECT_EQ(p.facts.size(), 1u);
}

TEST(Parser, ExtensionSeesBaseDeclarations) {
  DatalogProgram base = parse_program(read_file(D3RE_RULES_DIR "/use_def_global.dl"));
  DatalogProgram unit = parse_extension(read_file(D3RE_RULES_DIR "/uninitialized.dl"), base);
  EXPECT_EQ(unit.rules.size(), 2u);
  EXPECT_FALSE(unit.find("used_global"));
  DatalogProgram all = base.extended_with(unit);
  EXPECT_EQ(all.rules.size(), 6u);
  EXPECT_THROW(parse_program(read_file(D3RE_RULES_DIR "/uninitialized.dl")), SemanticError);
  EXPECT_THROW(parse_extension(".decl used_global(a:symbol)", base), SemanticError);
}

TEST(Printer, SourceRoundTrip) {
  for (const char* file : {"use_def_global.dl", "uninitialized_refined.dl"}) {
    std::string text = read_file(std::string(D3RE_RULES_DIR "/") + file);
    DatalogProgram p = file == std::string("use_def_global.dl")
                           ? parse_program(text)
                           : parse_extension(text, parse_program(read_file(D3RE_RULES_DIR "/use_def_global.dl")));
    DatalogProgram full = file == std::string("use_def_global.dl")
                              ? p
                              : parse_program(read_file(D3RE_RULES_DIR "/use_def_global.dl")).extended_with(p);
    std::string printed = to_source(full);
    EXPECT_EQ(to_source(parse_program(printed)), printed) << file;
    std::string canon = canonical_text(full);
    EXPECT_EQ(canonical_text(parse_program(canon)), canon) << file;
  }
}

TEST(Printer, ExpressionsKeepStructure) {
  DatalogProgram p =
      parse_program(".decl q(a:number,b:number)\n.decl p(a:number)\np(z) :- q(x,y), z = (x - y) * -(y + 1).");
  std::string printed = to_source(p.rules[0]);
  EXPECT_EQ(printed, "p(z) :- q(x,y), z = (x - y) * -(y + 1).");
}

TEST(CanonicalHash, AlphaRenamingIsCanonical) {
  std::string decls = ".decl p(a:number)\n.decl q(a:number)\n";
  EXPECT_EQ(canonical_hash(parse_program(decls + "p(x):-q(x).")),
            canonical_hash(parse_program(decls + "p(A):-q(A).")));
}

TEST(CanonicalHash, RuleOrderAndWhitespaceAreCanonical) {
  std::string decls = ".decl p(a:number)\n.decl q(a:number)\n.decl r(a:number)\n";
  EXPECT_EQ(canonical_hash(parse_program(decls + "p(x):-q(x).\nr(x):-p(x).")),
            canonical_hash(parse_program(decls + "r(y)  :-\n  p(y) .\n\n p(x) :- q(x).")));
}

TEST(CanonicalHash, AddingAFactChangesId) {
  std::string base = read_file(D3RE_RULES_DIR "/use_def_global.dl") + "\n.decl code_in_range(from:number,to:number)\n";
  EXPECT_NE(canonical_hash(parse_program(base)), canonical_hash(parse_program(base + "code_in_range(19490,21704).")));
}

TEST(CanonicalHash, BodyOrderIsSignificant) {
  std::string decls = ".decl p(a:number)\n.decl q(a:number)\n.decl r(a:number)\n";
  EXPECT_NE(canonical_hash(parse_program(decls + "p(x):-q(x),r(x).")),
            canonical_hash(parse_program(decls + "p(x):-r(x),q(x).")));
}
