#include "d3re/elf.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "d3re/digest.hpp"
#include "d3re/facts.hpp"

namespace d3re {
namespace {

constexpr std::uint32_t kShtSymtab = 2;
constexpr std::uint32_t kShtNobits = 8;
constexpr std::uint64_t kShfAlloc = 0x2;
constexpr std::size_t kEhdrSize = 64;
constexpr std::size_t kShdrSize = 64;
constexpr std::size_t kSymSize = 24;

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename T>
  T read(std::uint64_t off, const char* what) const {
    need(off, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<std::uint8_t>(data_[off + i])) << (8 * i);
    }
    return v;
  }

  void need(std::uint64_t off, std::uint64_t len, const char* what) const {
    if (off > data_.size() || len > data_.size() - off) {
      throw ElfError(ElfError::Kind::Truncated, std::string("truncated ELF: ") + what + " at offset " +
                                                    std::to_string(off) + " extends past end of file (" +
                                                    std::to_string(data_.size()) + " bytes)");
    }
  }

  std::string cstring(std::uint64_t off, std::uint64_t limit) const {
    std::string out;
    for (std::uint64_t i = off; i < limit && i < data_.size() && data_[i] != '\0'; ++i) out += data_[i];
    return out;
  }

  const std::string& data() const { return data_; }

 private:
  const std::string& data_;
};

struct RawSection {
  std::uint32_t name, type, link;
  std::uint64_t flags, addr, offset, size, entsize;
};

std::string symbol_type(unsigned t) {
  switch (t) {
    case 0: return "NOTYPE";
    case 1: return "OBJECT";
    case 2: return "FUNC";
    case 3: return "SECTION";
    case 4: return "FILE";
    default: return std::to_string(t);
  }
}

std::string symbol_scope(unsigned b) {
  switch (b) {
    case 0: return "LOCAL";
    case 1: return "GLOBAL";
    case 2: return "WEAK";
    default: return std::to_string(b);
  }
}

}  // namespace

bool ElfSection::loadable() const { return (flags & kShfAlloc) && type != kShtNobits; }

BinaryImage parse_elf(const std::string& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "\x7f" "ELF", 4) != 0) {
    throw ElfError(ElfError::Kind::NotElf, "not an ELF file: " + path.string());
  }
  if (bytes.size() < 6) throw ElfError(ElfError::Kind::Truncated, "truncated ELF identification");
  if (bytes[4] == 1) throw ElfError(ElfError::Kind::UnsupportedClass, "32-bit ELF is not supported");
  if (bytes[4] != 2) throw ElfError(ElfError::Kind::UnsupportedClass, "unknown ELF class " + std::to_string(bytes[4]));
  if (bytes[5] != 1) throw ElfError(ElfError::Kind::UnsupportedEncoding, "only little-endian ELF is supported");

  Reader r(bytes);
  r.need(0, kEhdrSize, "ELF header");
  auto shoff = r.read<std::uint64_t>(0x28, "e_shoff");
  auto shentsize = r.read<std::uint16_t>(0x3a, "e_shentsize");
  auto shnum = r.read<std::uint16_t>(0x3c, "e_shnum");
  auto shstrndx = r.read<std::uint16_t>(0x3e, "e_shstrndx");
  if (shnum && shentsize < kShdrSize) {
    throw ElfError(ElfError::Kind::Truncated, "section header entries too small: " + std::to_string(shentsize));
  }

  std::vector<RawSection> raw(shnum);
  for (std::uint16_t i = 0; i < shnum; ++i) {
    std::uint64_t base = shoff + std::uint64_t(i) * shentsize;
    r.need(base, kShdrSize, "section header");
    raw[i] = {r.read<std::uint32_t>(base, "sh_name"),     r.read<std::uint32_t>(base + 4, "sh_type"),
              r.read<std::uint32_t>(base + 40, "sh_link"), r.read<std::uint64_t>(base + 8, "sh_flags"),
              r.read<std::uint64_t>(base + 16, "sh_addr"), r.read<std::uint64_t>(base + 24, "sh_offset"),
              r.read<std::uint64_t>(base + 32, "sh_size"), r.read<std::uint64_t>(base + 56, "sh_entsize")};
    if (raw[i].type != kShtNobits && raw[i].type != 0) r.need(raw[i].offset, raw[i].size, "section contents");
  }

  auto strtab_name = [&](std::uint32_t table, std::uint32_t off) -> std::string {
    if (table >= raw.size()) return {};
    const RawSection& s = raw[table];
    return r.cstring(s.offset + off, s.offset + s.size);
  };

  BinaryImage img;
  img.path = path;
  img.digest = sha256_hex(bytes);
  for (std::uint16_t i = 1; i < shnum; ++i) {
    ElfSection s;
    s.index = i;
    s.name = shstrndx < shnum ? strtab_name(shstrndx, raw[i].name) : std::string();
    s.type = raw[i].type;
    s.flags = raw[i].flags;
    s.vaddr = raw[i].addr;
    s.size = raw[i].size;
    if (raw[i].type != kShtNobits && raw[i].type != 0) {
      s.bytes.assign(bytes.begin() + raw[i].offset, bytes.begin() + raw[i].offset + raw[i].size);
    }
    img.sections.push_back(std::move(s));
  }

  for (const RawSection& sec : raw) {
    if (sec.type != kShtSymtab) continue;
    std::uint64_t count = sec.size / kSymSize;
    for (std::uint64_t k = 1; k < count; ++k) {
      std::uint64_t base = sec.offset + k * kSymSize;
      auto info = r.read<std::uint8_t>(base + 4, "st_info");
      ElfSymbol sym;
      sym.name = strtab_name(sec.link, r.read<std::uint32_t>(base, "st_name"));
      sym.type = symbol_type(info & 0xf);
      sym.scope = symbol_scope(info >> 4);
      sym.section_index = r.read<std::uint16_t>(base + 6, "st_shndx");
      sym.value = r.read<std::uint64_t>(base + 8, "st_value");
      sym.size = r.read<std::uint64_t>(base + 16, "st_size");
      img.symbols.push_back(std::move(sym));
    }
  }
  return img;
}

BinaryImage read_elf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ElfError(ElfError::Kind::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_elf(ss.str(), path);
}

FactDatabase extract_elf_facts(const BinaryImage& image) {
  const Schema& schema = base_schema().relations;
  FactDatabase::Builder b;
  for (const char* rel : {"section", "defined_symbol", "function_entry", "data_byte"}) b.declare(rel, schema.at(rel));
  auto num = [](std::uint64_t v) { return Value::integer(static_cast<std::int64_t>(v)); };

  for (const auto& s : image.sections) {
    if (s.name.empty()) continue;
    b.insert("section", {Value::string(s.name), num(s.size), num(s.vaddr)});
    if (!s.loadable()) continue;
    for (std::size_t i = 0; i < s.bytes.size(); ++i) b.insert("data_byte", {num(s.vaddr + i), num(s.bytes[i])});
  }
  for (const auto& sym : image.symbols) {
    bool kept_type = sym.type == "OBJECT" || sym.type == "FUNC" || sym.type == "NOTYPE";
    bool kept_scope = sym.scope == "GLOBAL" || sym.scope == "LOCAL" || sym.scope == "WEAK";
    if (sym.name.empty() || sym.section_index == 0 || !kept_type || !kept_scope) continue;
    b.insert("defined_symbol", {num(sym.value), num(sym.size), Value::string(sym.type), Value::string(sym.scope),
                                num(sym.section_index), Value::string(sym.name)});
    if (sym.type == "FUNC") b.insert("function_entry", {num(sym.value)});
  }
  return std::move(b).build();
}

FactDatabase extract_elf_facts(const std::filesystem::path& path) { return extract_elf_facts(read_elf(path)); }

}  // namespace d3re
