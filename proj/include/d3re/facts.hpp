#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "d3re/error.hpp"
#include "d3re/fact_database.hpp"

namespace d3re {

/// Declarations of the disassembler vocabulary plus the value constraints
/// on it.
struct FactSchema {
  Schema relations;
  /// Columns holding addresses (must be >= 0), per relation.
  std::map<std::string, std::vector<std::size_t>> address_columns;
  /// Symbol columns restricted to a fixed vocabulary.
  std::map<std::pair<std::string, std::size_t>, std::set<std::string>> allowed_symbols;

  /// Throws FactsError on the first violation.
  void validate(const FactDatabase& db) const;
  std::vector<RelationDecl> declarations() const;
};

/// code, code_in_block, instruction, operand tables, defined_symbol,
/// section, function_entry, direct_call, data_byte, ...
const FactSchema& base_schema();

/// Reads `<relation>.facts` TSV files. Relations of `schema` with no file
/// are empty; files for relations outside `schema` are skipped with a
/// warning.
FactDatabase load_fact_dir(const std::filesystem::path& dir, const Schema& schema, Diagnostics* diag = nullptr);
/// Same, then validates against the schema's constraints.
FactDatabase load_fact_dir(const std::filesystem::path& dir, const FactSchema& schema = base_schema(),
                           Diagnostics* diag = nullptr);

/// Parses one TSV file as relation `name`.
FactDatabase::Relation load_fact_file(const std::filesystem::path& file, const std::string& name,
                                      const RelationSchema& schema);

/// Writes one `<relation>.facts` per relation, rows in canonical order.
/// Strings containing tab or newline are rejected.
void write_fact_dir(const FactDatabase& db, const std::filesystem::path& dir);

/// One relation as TSV text.
std::string to_tsv(const FactDatabase::Relation& rel);

/// Base facts of one analysed program.
struct IngestedInput {
  FactDatabase facts;
  /// Identity of the input: file SHA-256 for an ELF image, the fingerprint
  /// for a fact directory, a digest of both when combined.
  std::string digest;
};

/// Loads a fact directory or an ELF file; with two inputs (a fact directory
/// and the ELF it describes) the facts are merged.
IngestedInput ingest(const std::vector<std::filesystem::path>& inputs, Diagnostics* diag = nullptr);

/// Relation-wise union. Throws FactsError when a shared relation disagrees
/// in arity or column types.
FactDatabase merge(const FactDatabase& base, const FactDatabase& overlay);

}  // namespace d3re
