#include "d3re/listing.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

namespace d3re {

namespace {

std::string hex(std::int64_t v) {
  char buf[32];
  if (v < 0)
    std::snprintf(buf, sizeof buf, "-0x%llx", static_cast<unsigned long long>(-(v + 1)) + 1ULL);
  else
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string byte_hex(std::int64_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02llx", static_cast<unsigned long long>(v & 0xff));
  return buf;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Operands {
  std::map<std::int64_t, std::string> reg;
  std::map<std::int64_t, std::int64_t> imm;
  std::map<std::int64_t, Tuple> mem;
  std::map<std::int64_t, std::string> names;

  explicit Operands(const FactDatabase& db) {
    if (const auto* r = db.find("op_regdirect"))
      for (const auto& t : r->tuples) reg[t[0].as_integer()] = lower(t[1].as_string());
    if (const auto* r = db.find("op_immediate"))
      for (const auto& t : r->tuples) imm[t[0].as_integer()] = t[1].as_integer();
    if (const auto* r = db.find("op_indirect"))
      for (const auto& t : r->tuples) mem[t[0].as_integer()] = t;
    if (const auto* r = db.find("defined_symbol"))
      for (const auto& t : r->tuples) names.emplace(t[0].as_integer(), t[5].as_string());
  }

  std::string address(std::int64_t a) const {
    auto it = names.find(a);
    return it != names.end() ? it->second : hex(a);
  }

  std::string render(std::int64_t op, bool branch) const {
    if (auto it = reg.find(op); it != reg.end()) return it->second;
    if (auto it = imm.find(op); it != imm.end()) return branch ? address(it->second) : hex(it->second);
    auto it = mem.find(op);
    if (it == mem.end()) return "?";
    const Tuple& t = it->second;
    const std::string base = t[2].as_string(), index = t[3].as_string();
    const std::int64_t scale = t[4].as_integer(), disp = t[5].as_integer();
    if (base == "RIP") return "[" + address(disp) + "]";
    std::string s;
    if (base != "NONE") s = lower(base);
    if (index != "NONE") s += (s.empty() ? "" : "+") + lower(index) + "*" + std::to_string(scale);
    if (disp != 0 || s.empty()) s += disp < 0 ? hex(disp) : (s.empty() ? "" : "+") + hex(disp);
    return "[" + s + "]";
  }
};

}  // namespace

std::vector<ListingRow> build_listing(const FactDatabase& db, const std::vector<Annotation>& annotations,
                                      std::int64_t from, std::int64_t to) {
  std::map<std::int64_t, std::int64_t> bytes;
  if (const auto* r = db.find("data_byte"))
    for (const auto& t : r->tuples) bytes[t[0].as_integer()] = t[1].as_integer();
  std::map<std::int64_t, std::int64_t> blocks;
  if (const auto* r = db.find("code_in_block"))
    for (const auto& t : r->tuples) blocks[t[0].as_integer()] = t[1].as_integer();
  std::multimap<std::int64_t, const Annotation*> notes;
  for (const auto& a : annotations) notes.emplace(a.address, &a);

  Operands ops(db);
  std::map<std::int64_t, ListingRow> rows;
  std::map<std::int64_t, std::int64_t> covered;  // start -> end
  if (const auto* r = db.find("instruction"))
    for (const auto& t : r->tuples) {
      std::int64_t ea = t[0].as_integer(), size = t[1].as_integer();
      covered[ea] = ea + size;
      if (ea < from || ea >= to) continue;
      ListingRow row;
      row.address = ea;
      std::string mnemonic = lower(t[3].as_string());
      if (!t[2].as_string().empty()) mnemonic = lower(t[2].as_string()) + " " + mnemonic;
      bool branch = mnemonic == "call" || (!mnemonic.empty() && mnemonic[0] == 'j');
      row.text = mnemonic;
      for (std::size_t i = 4; i < 8; ++i) {
        if (t[i].as_integer() == 0) continue;
        row.text += (i == 4 ? " " : ", ") + ops.render(t[i].as_integer(), branch);
      }
      for (std::int64_t a = ea; a < ea + size; ++a) {
        auto b = bytes.find(a);
        if (b == bytes.end()) {
          row.bytes.clear();
          break;
        }
        row.bytes += (row.bytes.empty() ? "" : " ") + byte_hex(b->second);
      }
      if (auto b = blocks.find(ea); b != blocks.end()) row.block = b->second;
      rows[ea] = std::move(row);
    }

  auto inside_instruction = [&](std::int64_t a) {
    auto it = covered.upper_bound(a);
    if (it == covered.begin()) return false;
    --it;
    return a < it->second;
  };
  for (auto it = bytes.begin(); it != bytes.end();) {
    if (inside_instruction(it->first)) {
      ++it;
      continue;
    }
    ListingRow row;
    row.address = it->first;
    std::string values;
    std::int64_t next = it->first;
    for (int n = 0; n < 8 && it != bytes.end() && it->first == next && !inside_instruction(next); ++n, ++it, ++next) {
      row.bytes += (row.bytes.empty() ? "" : " ") + byte_hex(it->second);
      values += (values.empty() ? "" : ", ") + hex(it->second);
    }
    row.text = "db " + values;
    if (row.address >= from && row.address < to) rows[row.address] = std::move(row);
  }

  std::vector<ListingRow> out;
  out.reserve(rows.size());
  for (auto& [addr, row] : rows) {
    auto [lo, hi] = notes.equal_range(addr);
    for (auto n = lo; n != hi; ++n) row.annotations.push_back(*n->second);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace d3re
