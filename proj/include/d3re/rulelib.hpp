#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "d3re/annotation.hpp"
#include "d3re/error.hpp"
#include "d3re/program.hpp"

namespace d3re {

/// One packaged analysis of the rule library.
struct Analysis {
  std::string name;
  std::filesystem::path file;
  std::vector<std::string> dependencies;
  /// relation -> TSV file loaded as program facts
  std::map<std::string, std::filesystem::path> facts;
  std::vector<std::string> outputs;
  std::vector<AnnotationBinding> bindings;

  std::string source() const;

  /// Parses the rule file against `context` and appends the extra facts.
  DatalogProgram compile(const DatalogProgram& context, Diagnostics* diag = nullptr) const;
};

/// The analyses listed in `<rules_dir>/registry.json`.
class Registry {
 public:
  static Registry load(const std::filesystem::path& rules_dir);

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<Analysis>& analyses() const { return analyses_; }
  /// nullptr if unknown.
  const Analysis* find(std::string_view name) const;
  /// `name` preceded by everything it requires, dependencies first.
  /// Throws Error on unknown names or cycles.
  std::vector<const Analysis*> closure(std::string_view name) const;
  /// Bindings of every analysis for `relation`, deduplicated.
  std::vector<AnnotationBinding> bindings_for(const std::string& relation) const;

  /// `context` extended with the analysis and its requirements.
  DatalogProgram build(std::string_view name, const DatalogProgram& context, Diagnostics* diag = nullptr) const;

 private:
  std::filesystem::path dir_;
  std::vector<Analysis> analyses_;
};

/// Declarations every session starts from: the base fact relations as
/// inputs, plus highlight(addr), comment(addr, text) and
/// current_address(addr).
DatalogProgram prelude_program();

/// Rules directory: $D3RE_RULES if set, else the one next to the sources.
std::filesystem::path default_rules_dir();

/// Non-blank lines that are not entirely comment.
std::size_t datalog_line_count(std::string_view text);

}  // namespace d3re
