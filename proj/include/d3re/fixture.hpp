#pragma once

#include <string_view>

#include "d3re/fact_database.hpp"

namespace d3re {

/// Compiles a fixture description (see docs/fixtures.md) into a fact
/// database over the base schema. Throws FactsError with a line number.
FactDatabase compile_fixture(std::string_view source);

}  // namespace d3re
