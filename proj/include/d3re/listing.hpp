#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "d3re/annotation.hpp"
#include "d3re/fact_database.hpp"

namespace d3re {

/// One line of the disassembly view.
struct ListingRow {
  std::int64_t address = 0;
  std::string bytes;  ///< space-separated hex, empty when unknown
  std::string text;
  std::optional<std::int64_t> block;
  std::vector<Annotation> annotations;
};

/// Instructions plus runs of data bytes (up to 8 per row) not covered by an
/// instruction, restricted to [from, to) and sorted by address.
std::vector<ListingRow> build_listing(const FactDatabase& db, const std::vector<Annotation>& annotations,
                                      std::int64_t from = INT64_MIN, std::int64_t to = INT64_MAX);

}  // namespace d3re
