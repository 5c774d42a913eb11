#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace d3re {

/// Ground value: a signed 64-bit integer or an interned string.
///
/// Strings are interned process-wide so equality and hashing are pointer
/// operations; ordering always compares content, so interning order never
/// shows up in sorted output or fingerprints.
class Value {
 public:
  enum class Kind : std::uint8_t { Integer, String };

  constexpr Value() = default;

  static Value integer(std::int64_t v) {
    Value out;
    out.kind_ = Kind::Integer;
    out.int_ = v;
    return out;
  }
  static Value string(std::string_view text);

  Kind kind() const { return kind_; }
  bool is_integer() const { return kind_ == Kind::Integer; }
  bool is_string() const { return kind_ == Kind::String; }

  std::int64_t as_integer() const { return int_; }
  const std::string& as_string() const { return *str_; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return false;
    return a.kind_ == Kind::Integer ? a.int_ == b.int_ : a.str_ == b.str_;
  }
  friend std::strong_ordering operator<=>(const Value& a, const Value& b);

  std::size_t hash() const {
    return kind_ == Kind::Integer ? std::hash<std::int64_t>{}(int_)
                                  : std::hash<const void*>{}(str_) ^ 0x9e3779b97f4a7c15ULL;
  }

 private:
  Kind kind_ = Kind::Integer;
  union {
    std::int64_t int_ = 0;
    const std::string* str_;
  };
};

using Tuple = std::vector<Value>;

struct TupleHash {
  std::size_t operator()(const Tuple& t) const {
    std::size_t h = t.size();
    for (const auto& v : t) h ^= v.hash() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

/// Rule-source rendering: integers in decimal, strings quoted and escaped.
std::string to_source(const Value& v);

/// Listing rendering: integers as 8-digit zero-padded lowercase hex, strings raw.
std::string to_hex_display(const Value& v);

}  // namespace d3re
