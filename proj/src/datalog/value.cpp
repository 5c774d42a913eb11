#include "d3re/value.hpp"

#include <cstdio>
#include <deque>
#include <mutex>
#include <unordered_set>

namespace d3re {
namespace {

class SymbolTable {
 public:
  const std::string* intern(std::string_view text) {
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(text); it != index_.end()) return *it;
    const std::string& stored = storage_.emplace_back(text);
    index_.insert(&stored);
    return &stored;
  }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    std::size_t operator()(const std::string* s) const { return (*this)(std::string_view(*s)); }
  };
  struct Eq {
    using is_transparent = void;
    static std::string_view view(std::string_view s) { return s; }
    static std::string_view view(const std::string* s) { return *s; }
    template <class A, class B>
    bool operator()(const A& a, const B& b) const {
      return view(a) == view(b);
    }
  };

  std::mutex mutex_;
  std::deque<std::string> storage_;
  std::unordered_set<const std::string*, Hash, Eq> index_;
};

SymbolTable& symbols() {
  static SymbolTable table;
  return table;
}

}  // namespace

Value Value::string(std::string_view text) {
  Value out;
  out.kind_ = Kind::String;
  out.str_ = symbols().intern(text);
  return out;
}

std::strong_ordering operator<=>(const Value& a, const Value& b) {
  if (a.kind_ != b.kind_) return a.kind_ <=> b.kind_;
  if (a.kind_ == Value::Kind::Integer) return a.int_ <=> b.int_;
  if (a.str_ == b.str_) return std::strong_ordering::equal;
  int c = a.str_->compare(*b.str_);
  return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
}

std::string to_source(const Value& v) {
  if (v.is_integer()) return std::to_string(v.as_integer());
  std::string out = "\"";
  for (char c : v.as_string()) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string to_hex_display(const Value& v) {
  if (v.is_string()) return v.as_string();
  std::int64_t n = v.as_integer();
  char buf[32];
  if (n < 0) {
    std::snprintf(buf, sizeof buf, "-%08llx",
                  static_cast<unsigned long long>(-(static_cast<__int128>(n))));
  } else {
    std::snprintf(buf, sizeof buf, "%08llx", static_cast<unsigned long long>(n));
  }
  return buf;
}

}  // namespace d3re
