#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "d3re/error.hpp"
#include "d3re/fact_database.hpp"

namespace d3re {

struct ElfSection {
  std::uint32_t index = 0;
  std::string name;
  std::uint32_t type = 0;
  std::uint64_t flags = 0;
  std::uint64_t vaddr = 0;
  std::uint64_t size = 0;
  std::vector<std::uint8_t> bytes;  ///< empty for SHT_NOBITS

  bool loadable() const;
};

struct ElfSymbol {
  std::string name;
  std::uint64_t value = 0;
  std::uint64_t size = 0;
  std::string type;   ///< OBJECT, FUNC, NOTYPE, or the raw number for anything else
  std::string scope;  ///< GLOBAL, LOCAL, WEAK, or the raw number
  std::uint16_t section_index = 0;
};

/// A parsed ELF64 little-endian file.
struct BinaryImage {
  std::filesystem::path path;
  std::string digest;  ///< SHA-256 of the file contents
  std::string format = "elf64";
  std::vector<ElfSection> sections;
  std::vector<ElfSymbol> symbols;  ///< .symtab entries, index 0 omitted
};

/// Throws ElfError with kind NotElf, Truncated, UnsupportedClass (ELF32),
/// UnsupportedEncoding (big-endian) or Io.
BinaryImage read_elf(const std::filesystem::path& path);
BinaryImage parse_elf(const std::string& bytes, const std::filesystem::path& path = {});

/// Structural facts: section, defined_symbol (named, defined symbols of
/// type OBJECT/FUNC/NOTYPE), function_entry (FUNC symbols) and data_byte
/// for every byte of allocated sections with file contents.
FactDatabase extract_elf_facts(const BinaryImage& image);
FactDatabase extract_elf_facts(const std::filesystem::path& path);

}  // namespace d3re
