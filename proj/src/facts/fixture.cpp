#include "d3re/fixture.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "d3re/error.hpp"
#include "d3re/facts.hpp"

namespace d3re {
namespace {

enum class Role { Write, ReadWrite, Read };

Role role_of(const std::string& mnemonic) {
  static const std::set<std::string> writes = {"mov", "movzx", "movsx", "movsxd", "movabs", "lea", "pop",
                                               "sete", "setne", "cmove", "cmovne"};
  static const std::set<std::string> rmw = {"add", "sub", "xor", "and", "or", "inc", "dec", "shl", "shr",
                                            "sar", "imul", "adc", "sbb", "neg", "not", "xchg"};
  if (writes.count(mnemonic)) return Role::Write;
  if (rmw.count(mnemonic)) return Role::ReadWrite;
  return Role::Read;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Line {
  std::size_t number;
  std::vector<std::string> words;  // directive lines
  std::string text;                // instruction lines, after the address
  std::string head;
};

struct Instruction {
  std::size_t line;
  std::int64_t ea;
  std::optional<std::int64_t> size;
  std::int64_t block;
  std::string mnemonic;
  std::vector<std::string> operands;
};

class Compiler {
 public:
  FactDatabase run(std::string_view source) {
    for (const auto& [name, rs] : base_schema().relations) b_.declare(name, rs);
    std::vector<Line> lines = split(source);
    // Declarations first so operands may name symbols defined further down.
    for (const auto& l : lines) {
      line_ = l.number;
      if (l.words.empty()) continue;
      const std::string& d = l.words[0];
      if (d == "section") section(l.words);
      if (d == "symbol") symbol(l.words);
      if (d == "function") function(l.words);
    }
    for (const auto& l : lines) {
      line_ = l.number;
      if (!l.head.empty()) {
        instruction(l);
        continue;
      }
      const std::string& d = l.words[0];
      if (d == "section" || d == "symbol" || d == "function") continue;
      if (d == "block") {
        need(l.words, 2, "block <addr>");
        block_ = number(l.words[1]);
        if (!blocks_.insert(*block_).second) fail("block " + l.words[1] + " defined twice");
      } else if (d == "reaches") {
        need(l.words, 4, "reaches <block> <def-addr> <symbol>");
        reaches_.push_back({l.number, number(l.words[1]), number(l.words[2]), l.words[3]});
      } else if (d == "bytes") {
        if (l.words.size() < 3) fail("usage: bytes <addr> <hex>...");
        std::int64_t ea = number(l.words[1]);
        for (std::size_t i = 2; i < l.words.size(); ++i) {
          std::int64_t v = hex_byte(l.words[i]);
          insert("data_byte", {Value::integer(ea++), Value::integer(v)});
        }
      } else if (d == "fact") {
        raw_fact(l);
      } else {
        fail("unknown directive '" + d + "'");
      }
    }
    finish();
    FactDatabase db = std::move(b_).build();
    base_schema().validate(db);
    return db;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw FactsError("fixture line " + std::to_string(line_) + ": " + msg);
  }

  void need(const std::vector<std::string>& w, std::size_t n, const char* usage) const {
    if (w.size() < n) fail(std::string("usage: ") + usage);
  }

  std::int64_t number(const std::string& s) const {
    std::string_view v = s;
    bool neg = !v.empty() && v[0] == '-';
    if (neg) v.remove_prefix(1);
    int base = 10;
    if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
      base = 16;
      v.remove_prefix(2);
    }
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) fail("bad number '" + s + "'");
    return neg ? -out : out;
  }

  std::int64_t hex_byte(const std::string& s) const {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (s.empty() || s.size() > 2 || ec != std::errc() || p != s.data() + s.size()) fail("bad byte '" + s + "'");
    return v;
  }

  std::vector<Line> split(std::string_view source) {
    std::vector<Line> out;
    std::size_t number = 0;
    std::istringstream in{std::string(source)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++number;
      line_ = number;
      bool quoted = false;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '"') quoted = !quoted;
        if (!quoted && (raw[i] == '#' || raw[i] == ';')) {
          raw.resize(i);
          break;
        }
      }
      std::string text = trim(raw);
      if (text.empty()) continue;
      Line l{number, {}, {}, {}};
      auto colon = text.find(':');
      if (std::isdigit(static_cast<unsigned char>(text[0])) && colon != std::string::npos) {
        l.head = trim(std::string_view(text).substr(0, colon));
        l.text = trim(std::string_view(text).substr(colon + 1));
      } else {
        l.words = words(text);
      }
      out.push_back(std::move(l));
    }
    return out;
  }

  std::vector<std::string> words(const std::string& text) const {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
      if (std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
        continue;
      }
      if (text[i] == '"') {
        auto end = text.find('"', i + 1);
        if (end == std::string::npos) fail("unterminated string");
        out.push_back(text.substr(i, end - i + 1));
        i = end + 1;
        continue;
      }
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      out.push_back(text.substr(i, j - i));
      i = j;
    }
    return out;
  }

  void insert(const std::string& rel, Tuple t) {
    try {
      b_.insert(rel, std::move(t));
    } catch (const FactsError& e) {
      fail(e.what());
    }
  }

  void section(const std::vector<std::string>& w) {
    need(w, 4, "section <name> <addr> <size>");
    sections_.push_back({number(w[2]), number(w[3])});
    insert("section", {Value::string(w[1]), Value::integer(number(w[3])), Value::integer(number(w[2]))});
  }

  std::int64_t section_index(std::int64_t addr) const {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      if (addr >= sections_[i].first && addr < sections_[i].first + sections_[i].second) {
        return static_cast<std::int64_t>(i + 1);
      }
    }
    return 0;
  }

  void add_symbol(const std::string& name, std::int64_t addr, std::int64_t size, const std::string& type,
                  const std::string& scope, std::optional<std::int64_t> index) {
    if (!symbols_.emplace(name, addr).second) fail("symbol '" + name + "' defined twice");
    insert("defined_symbol", {Value::integer(addr), Value::integer(size), Value::string(type), Value::string(scope),
                              Value::integer(index.value_or(section_index(addr))), Value::string(name)});
  }

  void symbol(const std::vector<std::string>& w) {
    need(w, 6, "symbol <name> <addr> <size> <type> <scope> [section-index]");
    std::optional<std::int64_t> index;
    if (w.size() > 6) index = number(w[6]);
    add_symbol(w[1], number(w[2]), number(w[3]), w[4], w[5], index);
  }

  void function(const std::vector<std::string>& w) {
    need(w, 3, "function <name> <addr> [size]");
    std::int64_t addr = number(w[2]);
    add_symbol(w[1], addr, w.size() > 3 ? number(w[3]) : 0, "FUNC", "GLOBAL", std::nullopt);
    insert("function_entry", {Value::integer(addr)});
  }

  void raw_fact(const Line& l) {
    need(l.words, 2, "fact <relation> <value>...");
    const std::string& rel = l.words[1];
    auto it = base_schema().relations.find(rel);
    if (it == base_schema().relations.end()) fail("unknown relation '" + rel + "'");
    Tuple t;
    for (std::size_t i = 2; i < l.words.size(); ++i) {
      const std::string& w = l.words[i];
      if (w.size() >= 2 && w.front() == '"') {
        t.push_back(Value::string(w.substr(1, w.size() - 2)));
      } else {
        t.push_back(Value::integer(number(w)));
      }
    }
    insert(rel, std::move(t));
  }

  void instruction(const Line& l) {
    if (!block_) fail("instruction outside a block");
    Instruction ins;
    ins.line = l.number;
    ins.block = *block_;
    auto slash = l.head.find('/');
    ins.ea = number(l.head.substr(0, slash));
    if (slash != std::string::npos) ins.size = number(l.head.substr(slash + 1));
    if (!instructions_.empty() && ins.ea <= instructions_.back().ea) fail("instruction addresses must increase");
    if (instructions_.empty() || instructions_.back().block != ins.block) {
      if (ins.ea != ins.block) fail("first instruction of a block must be at the block address");
    }
    std::string text = l.text;
    auto sp = text.find_first_of(" \t");
    ins.mnemonic = text.substr(0, sp);
    std::transform(ins.mnemonic.begin(), ins.mnemonic.end(), ins.mnemonic.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (sp != std::string::npos) {
      std::string rest = text.substr(sp + 1);
      int depth = 0;
      std::string cur;
      for (char c : rest) {
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (c == ',' && depth == 0) {
          ins.operands.push_back(trim(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!trim(cur).empty()) ins.operands.push_back(trim(cur));
    }
    if (ins.operands.size() > 4) fail("at most four operands");
    instructions_.push_back(std::move(ins));
  }

  std::int64_t operand_id(const std::string& key) {
    auto [it, inserted] = operand_ids_.emplace(key, static_cast<std::int64_t>(operand_ids_.size() + 1));
    return it->second;
  }

  struct Parsed {
    std::int64_t op;
    std::optional<std::int64_t> pc_target;
    std::optional<std::int64_t> call_target;
  };

  bool is_number(const std::string& s) const {
    std::string_view v = s;
    if (!v.empty() && (v[0] == '-' || v[0] == '+')) v.remove_prefix(1);
    return !v.empty() && std::isdigit(static_cast<unsigned char>(v[0]));
  }

  Parsed memory_operand(const std::string& inner) {
    // [sym], [sym+N]: pc-relative reference to a symbol.
    std::string t = inner;
    t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
    std::vector<std::pair<char, std::string>> terms;
    char sign = '+';
    std::string cur;
    for (char c : t) {
      if ((c == '+' || c == '-') && !cur.empty()) {
        terms.push_back({sign, cur});
        cur.clear();
        sign = c;
      } else if ((c == '+' || c == '-') && cur.empty()) {
        sign = c;
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) terms.push_back({sign, cur});
    if (terms.empty()) fail("empty memory operand");

    if (auto sym = symbols_.find(terms[0].second); sym != symbols_.end() && terms[0].first == '+') {
      std::int64_t target = sym->second;
      for (std::size_t i = 1; i < terms.size(); ++i) {
        if (!is_number(terms[i].second)) fail("bad symbol offset in [" + inner + "]");
        target += (terms[i].first == '-' ? -1 : 1) * number(terms[i].second);
      }
      std::int64_t op = operand_id("ind:RIP:" + std::to_string(target));
      pending_.push_back({"op_indirect", {Value::integer(op), Value::string("NONE"), Value::string("RIP"),
                                          Value::string("NONE"), Value::integer(1), Value::integer(target),
                                          Value::integer(64)}});
      return {op, target, std::nullopt};
    }

    std::string base = "NONE", index = "NONE";
    std::int64_t scale = 1, disp = 0;
    for (const auto& [s, term] : terms) {
      if (is_number(term)) {
        disp += (s == '-' ? -1 : 1) * number(term);
      } else if (auto star = term.find('*'); star != std::string::npos) {
        index = upper(term.substr(0, star));
        scale = number(term.substr(star + 1));
      } else if (base == "NONE") {
        base = upper(term);
      } else {
        index = upper(term);
      }
    }
    std::int64_t op = operand_id("ind:" + base + ":" + index + ":" + std::to_string(scale) + ":" + std::to_string(disp));
    pending_.push_back({"op_indirect", {Value::integer(op), Value::string("NONE"), Value::string(base),
                                        Value::string(index), Value::integer(scale), Value::integer(disp),
                                        Value::integer(64)}});
    return {op, std::nullopt, std::nullopt};
  }

  Parsed operand(const std::string& text) {
    std::string t = text;
    for (const char* prefix : {"qword ptr ", "dword ptr ", "word ptr ", "byte ptr "}) {
      if (t.rfind(prefix, 0) == 0) t = trim(t.substr(std::string(prefix).size()));
    }
    if (!t.empty() && t.front() == '[') {
      if (t.back() != ']') fail("unclosed '[' in operand '" + text + "'");
      return memory_operand(t.substr(1, t.size() - 2));
    }
    if (is_number(t)) {
      std::int64_t v = number(t);
      std::int64_t op = operand_id("imm:" + std::to_string(v));
      pending_.push_back({"op_immediate", {Value::integer(op), Value::integer(v)}});
      return {op, std::nullopt, std::nullopt};
    }
    if (auto sym = symbols_.find(t); sym != symbols_.end()) {
      std::int64_t op = operand_id("imm:" + std::to_string(sym->second));
      pending_.push_back({"op_immediate", {Value::integer(op), Value::integer(sym->second)}});
      return {op, std::nullopt, sym->second};
    }
    std::string reg = upper(t);
    std::int64_t op = operand_id("reg:" + reg);
    pending_.push_back({"op_regdirect", {Value::integer(op), Value::string(reg)}});
    return {op, std::nullopt, std::nullopt};
  }

  void finish() {
    for (std::size_t i = 0; i < instructions_.size(); ++i) {
      const Instruction& ins = instructions_[i];
      line_ = ins.line;
      const Instruction* next = i + 1 < instructions_.size() ? &instructions_[i + 1] : nullptr;
      std::int64_t size = 1;
      if (ins.size) {
        size = *ins.size;
      } else if (next && next->block == ins.block) {
        size = next->ea - ins.ea;
        if (size > 15) fail("gap of " + std::to_string(size) + " bytes inside a block; give an explicit size");
      } else if (next && next->ea - ins.ea <= 15) {
        size = next->ea - ins.ea;
      }
      if (next && ins.ea + size > next->ea) fail("instruction overlaps the next one");

      Value ea = Value::integer(ins.ea);
      insert("code", {ea});
      insert("code_in_block", {ea, Value::integer(ins.block)});
      std::vector<std::int64_t> ops(4, 0);
      Role role = role_of(ins.mnemonic);
      for (std::size_t k = 0; k < ins.operands.size(); ++k) {
        Parsed p = operand(ins.operands[k]);
        ops[k] = p.op;
        Value index = Value::integer(static_cast<std::int64_t>(k + 1));
        bool dest = k == 0 && role != Role::Read;
        bool src = !(k == 0 && role == Role::Write);
        if (dest) insert("instruction_get_dest_op", {ea, index, Value::integer(p.op)});
        if (src) insert("instruction_get_src_op", {ea, index, Value::integer(p.op)});
        if (p.pc_target) {
          insert("pc_relative_operand", {ea, index, Value::integer(*p.pc_target)});
          if (dest) defs_[ins.block].push_back({ins.ea, *p.pc_target});
          if (src) uses_.push_back({ins.block, ins.ea, *p.pc_target});
        }
        if (p.call_target && ins.mnemonic == "call") insert("direct_call", {ea, Value::integer(*p.call_target)});
      }
      insert("instruction", {ea, Value::integer(size), Value::string(""), Value::string(upper(ins.mnemonic)),
                             Value::integer(ops[0]), Value::integer(ops[1]), Value::integer(ops[2]),
                             Value::integer(ops[3])});
    }
    for (auto& [rel, t] : pending_) insert(rel, std::move(t));

    // Last definition of the same global earlier in the block.
    for (const auto& [block, ea, ga] : uses_) {
      const auto& defs = defs_[block];
      std::optional<std::int64_t> last;
      for (const auto& [def_ea, def_ga] : defs) {
        if (def_ga == ga && def_ea < ea) last = def_ea;
      }
      if (last) insert("block_last_def_global", {Value::integer(ea), Value::integer(*last), Value::integer(ga)});
    }

    for (const auto& r : reaches_) {
      line_ = r.line;
      if (!blocks_.count(r.block)) fail("reaches: unknown block");
      auto sym = symbols_.find(r.symbol);
      if (sym == symbols_.end()) fail("reaches: unknown symbol '" + r.symbol + "'");
      bool defines = false;
      for (const auto& [b, defs] : defs_) {
        for (const auto& [def_ea, ga] : defs) defines |= def_ea == r.def && ga == sym->second;
      }
      if (!defines) fail("reaches: no definition of " + r.symbol + " at that address");
      insert("last_def_global", {Value::integer(r.block), Value::integer(r.def), Value::integer(sym->second)});
    }
  }

  struct Reach {
    std::size_t line;
    std::int64_t block, def;
    std::string symbol;
  };
  struct Use {
    std::int64_t block, ea, ga;
  };

  FactDatabase::Builder b_;
  std::size_t line_ = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> sections_;
  std::map<std::string, std::int64_t> symbols_;
  std::optional<std::int64_t> block_;
  std::set<std::int64_t> blocks_;
  std::vector<Instruction> instructions_;
  std::vector<Reach> reaches_;
  std::map<std::string, std::int64_t> operand_ids_;
  std::vector<std::pair<std::string, Tuple>> pending_;
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, std::int64_t>>> defs_;
  std::vector<Use> uses_;
};

}  // namespace

FactDatabase compile_fixture(std::string_view source) { return Compiler().run(source); }

}  // namespace d3re
