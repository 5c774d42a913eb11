#include "d3re/digest.hpp"
#include "d3re/elf.hpp"
#include "d3re/facts.hpp"

namespace d3re {
namespace fs = std::filesystem;

IngestedInput ingest(const std::vector<fs::path>& inputs, Diagnostics* diag) {
  if (inputs.empty()) throw FactsError("nothing to open");
  IngestedInput out;
  std::string ids;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (!fs::exists(in, ec)) throw FactsError(in.string() + ": no such file or directory");
    if (fs::is_directory(in)) {
      auto db = load_fact_dir(in, base_schema(), diag);
      ids += "facts:" + db.fingerprint() + "\n";
      out.facts = merge(out.facts, db);
    } else {
      auto image = read_elf(in);
      ids += "elf:" + image.digest + "\n";
      out.facts = merge(out.facts, extract_elf_facts(image));
    }
  }
  if (inputs.size() == 1)
    out.digest = ids.substr(ids.find(':') + 1, ids.size() - ids.find(':') - 2);
  else
    out.digest = sha256_hex(ids);
  return out;
}

}  // namespace d3re
