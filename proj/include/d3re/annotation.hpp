#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "d3re/fact_database.hpp"

namespace d3re {

/// A highlight or comment attached to an address of the listing.
struct Annotation {
  enum class Kind { Highlight, Comment };

  Kind kind = Kind::Highlight;
  std::int64_t address = 0;
  std::string text;      // Comment only
  std::string relation;  // relation it was derived from

  friend bool operator==(const Annotation&, const Annotation&) = default;
  friend auto operator<=>(const Annotation&, const Annotation&) = default;
};

const char* to_string(Annotation::Kind kind);

/// Maps tuples of one relation to annotations.
struct AnnotationBinding {
  std::string relation;
  Annotation::Kind kind = Annotation::Kind::Highlight;
  std::size_t address_column = 0;
  /// Column rendered as comment text; none means the label alone.
  std::optional<std::size_t> text_column;
  std::string label;
};

/// Applies `bindings` to `db`. Tuples whose address column is not a number
/// are skipped. Result is sorted and unique.
std::vector<Annotation> derive_annotations(const FactDatabase& db,
                                           const std::vector<AnnotationBinding>& bindings);

}  // namespace d3re
