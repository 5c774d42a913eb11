#include "d3re/parser.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <optional>

namespace d3re {
namespace {

enum class Tok {
  Ident,
  Number,
  String,
  LParen,
  RParen,
  Comma,
  Period,
  ColonDash,
  Colon,
  Bang,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Plus,
  Minus,
  Star,
  Slash,
  Decl,
  Input,
  Output,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t number = 0;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      Token t;
      t.pos = {line_, col_};
      if (at_end()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::Ident;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
          t.text += advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else if (c == '"') {
        lex_string(t);
      } else if (c == '.') {
        advance();
        t.kind = Tok::Period;
        for (auto [word, kind] : {std::pair{"decl", Tok::Decl}, {"input", Tok::Input},
                                  {"output", Tok::Output}}) {
          if (matches_word(word)) {
            for (std::size_t i = 0; word[i]; ++i) advance();
            t.kind = kind;
            break;
          }
        }
      } else {
        advance();
        switch (c) {
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case ',': t.kind = Tok::Comma; break;
          case '+': t.kind = Tok::Plus; break;
          case '-': t.kind = Tok::Minus; break;
          case '*': t.kind = Tok::Star; break;
          case '/': t.kind = Tok::Slash; break;
          case '=': t.kind = Tok::Eq; break;
          case ':':
            if (!at_end() && peek() == '-') {
              advance();
              t.kind = Tok::ColonDash;
            } else {
              t.kind = Tok::Colon;
            }
            break;
          case '!':
            if (!at_end() && peek() == '=') {
              advance();
              t.kind = Tok::Ne;
            } else {
              t.kind = Tok::Bang;
            }
            break;
          case '<':
            t.kind = Tok::Lt;
            if (!at_end() && peek() == '=') advance(), t.kind = Tok::Le;
            break;
          case '>':
            t.kind = Tok::Gt;
            if (!at_end() && peek() == '=') advance(), t.kind = Tok::Ge;
            break;
          default:
            throw ParseError(t.pos.line, t.pos.column,
                             std::string("unexpected character '") + c + "'");
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0';
  }
  char advance() {
    char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  bool matches_word(std::string_view word) const {
    if (src_.substr(i_, word.size()) != word) return false;
    char after = peek(word.size());
    return !(std::isalnum(static_cast<unsigned char>(after)) || after == '_');
  }

  void skip_space_and_comments() {
    while (!at_end()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        SourcePos start{line_, col_};
        advance();
        advance();
        while (!at_end() && !(peek() == '*' && peek(1) == '/')) advance();
        if (at_end()) throw ParseError(start.line, start.column, "unterminated block comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  void lex_number(Token& t) {
    t.kind = Tok::Number;
    std::string digits;
    int base = 10;
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance();
      advance();
      base = 16;
      while (!at_end() && std::isxdigit(static_cast<unsigned char>(peek()))) digits += advance();
    } else {
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) digits += advance();
    }
    if (digits.empty()) throw ParseError(t.pos.line, t.pos.column, "malformed number");
    // Parsed as unsigned so that -9223372036854775808 survives the unary minus.
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
    if (ec != std::errc() || v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + 1) {
      throw ParseError(t.pos.line, t.pos.column, "integer literal out of 64-bit range");
    }
    t.text = digits;
    t.number = static_cast<std::int64_t>(v);
    if (v == static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + 1) {
      t.text = "overflow";  // only valid after unary minus
    }
  }

  void lex_string(Token& t) {
    t.kind = Tok::String;
    advance();
    for (;;) {
      if (at_end() || peek() == '\n') {
        throw ParseError(t.pos.line, t.pos.column, "unterminated string literal");
      }
      char c = advance();
      if (c == '"') return;
      if (c == '\\') {
        if (at_end()) throw ParseError(t.pos.line, t.pos.column, "unterminated string literal");
        char e = advance();
        switch (e) {
          case 'n': t.text += '\n'; break;
          case 't': t.text += '\t'; break;
          case '"': t.text += '"'; break;
          case '\\': t.text += '\\'; break;
          default: throw ParseError(line_, col_ - 1, std::string("unknown escape '\\") + e + "'");
        }
      } else {
        t.text += c;
      }
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

const char* describe(Tok k) {
  switch (k) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Period: return "'.'";
    case Tok::ColonDash: return "':-'";
    case Tok::Colon: return "':'";
    case Tok::Bang: return "'!'";
    case Tok::Eq: return "'='";
    case Tok::Ne: return "'!='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Decl: return "'.decl'";
    case Tok::Input: return "'.input'";
    case Tok::Output: return "'.output'";
    case Tok::End: return "end of input";
  }
  return "token";
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, Diagnostics* diag) : toks_(std::move(tokens)), diag_(diag) {}

  DatalogProgram run() {
    DatalogProgram prog;
    while (cur().kind != Tok::End) {
      switch (cur().kind) {
        case Tok::Decl: parse_decl(prog); break;
        case Tok::Input: parse_io(prog.inputs); break;
        case Tok::Output: parse_io(prog.outputs); break;
        case Tok::Ident: parse_clause(prog); break;
        default: fail(cur(), std::string("expected a rule or directive, found ") + describe(cur().kind));
      }
    }
    return prog;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  const Token& peek(std::size_t n = 1) const {
    return toks_[std::min(i_ + n, toks_.size() - 1)];
  }
  const Token& take() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

  [[noreturn]] void fail(const Token& at, const std::string& msg) {
    throw ParseError(at.pos.line, at.pos.column, msg);
  }

  const Token& expect(Tok kind, const char* context) {
    if (cur().kind != kind) {
      fail(cur(), std::string("expected ") + describe(kind) + " " + context + ", found " +
                      describe(cur().kind));
    }
    return take();
  }

  void parse_decl(DatalogProgram& prog) {
    const Token& start = take();
    RelationDecl decl;
    decl.name = expect(Tok::Ident, "after .decl").text;
    expect(Tok::LParen, "after relation name");
    if (cur().kind != Tok::RParen) {
      for (;;) {
        Column col;
        col.name = expect(Tok::Ident, "for column name").text;
        expect(Tok::Colon, "after column name");
        const Token& type = expect(Tok::Ident, "for column type");
        if (type.text == "number") {
          col.type = ColumnType::Number;
        } else if (type.text == "symbol") {
          col.type = ColumnType::Symbol;
        } else {
          fail(type, "unknown column type '" + type.text + "' (expected number or symbol)");
        }
        decl.columns.push_back(std::move(col));
        if (cur().kind == Tok::Comma) {
          take();
          continue;
        }
        break;
      }
    }
    expect(Tok::RParen, "to close declaration");
    auto [it, inserted] = prog.declarations.emplace(decl.name, decl);
    if (!inserted && !it->second.same_signature(decl)) {
      throw SemanticError(start.pos.line, start.pos.column,
                          "conflicting redeclaration of '" + decl.name + "'");
    }
    decl_pos_[decl.name] = start.pos;
  }

  void parse_io(std::set<std::string>& target) {
    take();
    for (;;) {
      const Token& name = expect(Tok::Ident, "naming a relation");
      target.insert(name.text);
      io_pos_.emplace(name.text, name.pos);
      if (cur().kind == Tok::LParen) skip_parameters();
      if (cur().kind == Tok::Comma) {
        take();
        continue;
      }
      break;
    }
  }

  void skip_parameters() {
    const Token& open = take();
    int depth = 1;
    while (depth > 0) {
      if (cur().kind == Tok::End) fail(open, "unclosed directive parameter list");
      if (cur().kind == Tok::LParen) ++depth;
      if (cur().kind == Tok::RParen) --depth;
      take();
    }
  }

  Term parse_arg() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Ident:
        take();
        return t.text == "_" ? Term::wildcard() : Term::variable(t.text);
      case Tok::String:
        take();
        return Term::constant(Value::string(t.text));
      case Tok::Number:
        if (t.text == "overflow") fail(t, "integer literal out of 64-bit range");
        take();
        return Term::constant(Value::integer(t.number));
      case Tok::Minus: {
        take();
        const Token& n = expect(Tok::Number, "after '-'");
        return Term::constant(Value::integer(n.text == "overflow" ? std::numeric_limits<std::int64_t>::min()
                                                                  : -n.number));
      }
      default:
        fail(t, std::string("expected a term, found ") + describe(t.kind));
    }
  }

  Atom parse_atom_after_name(const Token& name) {
    Atom a;
    a.relation = name.text;
    const Token& open = expect(Tok::LParen, "after relation name");
    if (cur().kind != Tok::RParen) {
      for (;;) {
        a.args.push_back(parse_arg());
        if (cur().kind == Tok::Comma) {
          take();
          continue;
        }
        break;
      }
    }
    if (cur().kind != Tok::RParen) {
      fail(open, "unclosed '(' in '" + a.relation + "(...': expected ')' but found " + describe(cur().kind));
    }
    take();
    return a;
  }

  Expr parse_expr() {
    Expr lhs = parse_product();
    while (cur().kind == Tok::Plus || cur().kind == Tok::Minus) {
      auto op = take().kind == Tok::Plus ? Expr::Op::Add : Expr::Op::Sub;
      lhs = Expr::binary(op, std::move(lhs), parse_product());
    }
    return lhs;
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    while (cur().kind == Tok::Star || cur().kind == Tok::Slash) {
      auto op = take().kind == Tok::Star ? Expr::Op::Mul : Expr::Op::Div;
      lhs = Expr::binary(op, std::move(lhs), parse_unary());
    }
    return lhs;
  }

  Expr parse_unary() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Minus:
        take();
        if (cur().kind == Tok::Number) {
          const Token& n = take();
          return Expr::of(Term::constant(Value::integer(
              n.text == "overflow" ? std::numeric_limits<std::int64_t>::min() : -n.number)));
        }
        return Expr::negate(parse_unary());
      case Tok::Number:
        if (t.text == "overflow") fail(t, "integer literal out of 64-bit range");
        take();
        return Expr::of(Term::constant(Value::integer(t.number)));
      case Tok::String:
        take();
        return Expr::of(Term::constant(Value::string(t.text)));
      case Tok::Ident:
        if (t.text == "_") fail(t, "wildcard '_' is not allowed in a constraint");
        take();
        return Expr::of(Term::variable(t.text));
      case Tok::LParen: {
        take();
        Expr e = parse_expr();
        expect(Tok::RParen, "to close parenthesized expression");
        return e;
      }
      default:
        fail(t, std::string("expected an expression, found ") + describe(t.kind));
    }
  }

  Literal parse_literal() {
    if (cur().kind == Tok::Bang) {
      take();
      const Token& name = expect(Tok::Ident, "after '!'");
      return Literal::negated(parse_atom_after_name(name));
    }
    if (cur().kind == Tok::Ident && peek().kind == Tok::LParen) {
      const Token& name = take();
      return Literal::positive(parse_atom_after_name(name));
    }
    Constraint c;
    c.lhs = parse_expr();
    switch (cur().kind) {
      case Tok::Lt: c.op = CompareOp::Lt; break;
      case Tok::Le: c.op = CompareOp::Le; break;
      case Tok::Gt: c.op = CompareOp::Gt; break;
      case Tok::Ge: c.op = CompareOp::Ge; break;
      case Tok::Eq: c.op = CompareOp::Eq; break;
      case Tok::Ne: c.op = CompareOp::Ne; break;
      default: fail(cur(), std::string("expected a comparison operator, found ") + describe(cur().kind));
    }
    take();
    c.rhs = parse_expr();
    return Literal::builtin(std::move(c));
  }

  void parse_clause(DatalogProgram& prog) {
    const Token& name = take();
    Rule rule;
    rule.pos = name.pos;
    rule.head = parse_atom_after_name(name);
    if (cur().kind == Tok::Period) {
      take();
      Fact f;
      f.relation = rule.head.relation;
      for (const auto& arg : rule.head.args) {
        if (!arg.is_constant()) {
          throw SemanticError(rule.pos.line, rule.pos.column,
                              "unsafe fact '" + to_source(rule.head) +
                                  "': facts must be ground (variable or wildcard in head)");
        }
        f.values.push_back(arg.value);
      }
      fact_pos_.push_back(rule.pos);
      prog.facts.push_back(std::move(f));
      return;
    }
    expect(Tok::ColonDash, "or '.' after rule head");
    for (;;) {
      rule.body.push_back(parse_literal());
      if (cur().kind == Tok::Comma) {
        const Token& comma = take();
        if (cur().kind == Tok::Period) {
          if (diag_) {
            diag_->warn(std::to_string(comma.pos.line) + ":" + std::to_string(comma.pos.column) +
                        ": dangling ',' before '.' ignored");
          }
          break;
        }
        continue;
      }
      break;
    }
    expect(Tok::Period, "to end the rule");
    prog.rules.push_back(std::move(rule));
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  Diagnostics* diag_;

 public:
  std::map<std::string, SourcePos> decl_pos_;
  std::map<std::string, SourcePos> io_pos_;
  std::vector<SourcePos> fact_pos_;
};

// ---------------------------------------------------------------------------
// Validation

struct Scope {
  const DatalogProgram& unit;
  const DatalogProgram* base;

  const RelationDecl* find(const std::string& name) const {
    if (auto* d = unit.find(name)) return d;
    return base ? base->find(name) : nullptr;
  }
};

const RelationDecl& require_decl(const Scope& scope, const Atom& atom, SourcePos pos) {
  const RelationDecl* decl = scope.find(atom.relation);
  if (!decl) {
    throw SemanticError(pos.line, pos.column, "undeclared relation '" + atom.relation + "'");
  }
  if (decl->arity() != atom.args.size()) {
    throw SemanticError(pos.line, pos.column,
                        "arity mismatch for '" + atom.relation + "': declared " +
                            std::to_string(decl->arity()) + ", used with " +
                            std::to_string(atom.args.size()));
  }
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    const Term& t = atom.args[i];
    if (!t.is_constant()) continue;
    bool want_int = decl->columns[i].type == ColumnType::Number;
    if (want_int != t.value.is_integer()) {
      throw SemanticError(pos.line, pos.column,
                          "type mismatch in '" + atom.relation + "' column " + std::to_string(i + 1) +
                              ": expected " + to_string(decl->columns[i].type) + ", got " +
                              to_source(t.value));
    }
  }
  return *decl;
}

void check_rule(const Scope& scope, const Rule& rule) {
  const SourcePos pos = rule.pos;
  require_decl(scope, rule.head, pos);

  std::set<std::string> bound;
  for (const auto& lit : rule.body) {
    if (lit.is_atom()) require_decl(scope, lit.atom, pos);
    if (lit.kind == Literal::Kind::Positive) {
      for (const auto& t : lit.atom.args) {
        if (t.is_variable()) bound.insert(t.name);
      }
    }
  }
  if (std::none_of(rule.body.begin(), rule.body.end(),
                   [](const Literal& l) { return l.kind == Literal::Kind::Positive; })) {
    throw SemanticError(pos.line, pos.column,
                        "unsafe rule for '" + rule.head.relation + "': body has no positive literal");
  }

  // `X = expr` binds X once every variable of expr is bound.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& lit : rule.body) {
      if (lit.kind != Literal::Kind::Builtin || lit.constraint.op != CompareOp::Eq) continue;
      const auto& c = lit.constraint;
      for (int side = 0; side < 2; ++side) {
        const Expr& target = side == 0 ? c.lhs : c.rhs;
        const Expr& source = side == 0 ? c.rhs : c.lhs;
        if (!target.is_leaf() || !target.leaf.is_variable() || bound.count(target.leaf.name)) continue;
        std::set<std::string> needed;
        source.collect_variables(needed);
        if (std::all_of(needed.begin(), needed.end(),
                        [&](const std::string& v) { return bound.count(v) > 0; })) {
          bound.insert(target.leaf.name);
          changed = true;
        }
      }
    }
  }

  for (const auto& t : rule.head.args) {
    if (t.is_wildcard()) {
      throw SemanticError(pos.line, pos.column,
                          "unsafe rule for '" + rule.head.relation + "': wildcard in head");
    }
    if (t.is_variable() && !bound.count(t.name)) {
      throw SemanticError(pos.line, pos.column,
                          "unsafe rule for '" + rule.head.relation + "': head variable '" + t.name +
                              "' is not bound by a positive body literal");
    }
  }
  for (const auto& lit : rule.body) {
    std::set<std::string> vars;
    if (lit.kind == Literal::Kind::Negated) {
      for (const auto& t : lit.atom.args) {
        if (t.is_variable()) vars.insert(t.name);
      }
    } else if (lit.kind == Literal::Kind::Builtin) {
      lit.constraint.lhs.collect_variables(vars);
      lit.constraint.rhs.collect_variables(vars);
    }
    for (const auto& v : vars) {
      if (!bound.count(v)) {
        throw SemanticError(pos.line, pos.column,
                            "unsafe rule for '" + rule.head.relation + "': variable '" + v + "' in '" +
                                to_source(lit) + "' is not bound by a positive body literal");
      }
    }
  }
}

void check_unit(const DatalogProgram& unit, const DatalogProgram* base,
                const std::map<std::string, SourcePos>& io_pos, const std::vector<SourcePos>& fact_pos) {
  Scope scope{unit, base};
  if (base) {
    for (const auto& [name, decl] : unit.declarations) {
      const RelationDecl* prior = base->find(name);
      if (prior && !prior->same_signature(decl)) {
        throw SemanticError(0, 0, "conflicting declaration of '" + name + "': " + to_source(*prior) +
                                      " vs " + to_source(decl));
      }
    }
  }
  for (const auto* set : {&unit.inputs, &unit.outputs}) {
    for (const auto& name : *set) {
      if (!scope.find(name)) {
        auto it = io_pos.find(name);
        SourcePos p = it == io_pos.end() ? SourcePos{} : it->second;
        throw SemanticError(p.line, p.column, "directive names undeclared relation '" + name + "'");
      }
    }
  }
  for (std::size_t i = 0; i < unit.facts.size(); ++i) {
    const Fact& f = unit.facts[i];
    SourcePos p = i < fact_pos.size() ? fact_pos[i] : SourcePos{};
    Atom a{f.relation, {}};
    for (const auto& v : f.values) a.args.push_back(Term::constant(v));
    require_decl(scope, a, p);
  }
  for (const auto& r : unit.rules) check_rule(scope, r);
}

DatalogProgram dedupe(DatalogProgram p) {
  DatalogProgram out;
  out.declarations = std::move(p.declarations);
  out.inputs = std::move(p.inputs);
  out.outputs = std::move(p.outputs);
  p.declarations.clear();
  return out.extended_with(p);
}

}  // namespace

DatalogProgram parse_program(std::string_view text, Diagnostics* diagnostics) {
  Parser parser(Lexer(text).run(), diagnostics);
  DatalogProgram prog = parser.run();
  check_unit(prog, nullptr, parser.io_pos_, parser.fact_pos_);
  return dedupe(std::move(prog));
}

DatalogProgram parse_extension(std::string_view text, const DatalogProgram& base, Diagnostics* diagnostics) {
  Parser parser(Lexer(text).run(), diagnostics);
  DatalogProgram prog = parser.run();
  check_unit(prog, &base, parser.io_pos_, parser.fact_pos_);
  return dedupe(std::move(prog));
}

void validate_program(const DatalogProgram& program) { check_unit(program, nullptr, {}, {}); }

}  // namespace d3re
