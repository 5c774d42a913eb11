#include "d3re/annotation.hpp"

#include <algorithm>

namespace d3re {

const char* to_string(Annotation::Kind kind) {
  return kind == Annotation::Kind::Highlight ? "highlight" : "comment";
}

std::vector<Annotation> derive_annotations(const FactDatabase& db,
                                           const std::vector<AnnotationBinding>& bindings) {
  std::vector<Annotation> out;
  for (const auto& b : bindings) {
    const auto* rel = db.find(b.relation);
    if (!rel) continue;
    for (const auto& t : rel->tuples) {
      if (b.address_column >= t.size() || !t[b.address_column].is_integer()) continue;
      Annotation a;
      a.kind = b.kind;
      a.address = t[b.address_column].as_integer();
      a.relation = b.relation;
      if (b.kind == Annotation::Kind::Comment) {
        std::string text;
        if (b.text_column && *b.text_column < t.size()) {
          const auto& v = t[*b.text_column];
          text = v.is_string() ? v.as_string() : to_hex_display(v);
        }
        if (!b.label.empty() && !text.empty())
          a.text = b.label + " " + text;
        else
          a.text = b.label.empty() ? text : b.label;
      }
      out.push_back(std::move(a));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace d3re
