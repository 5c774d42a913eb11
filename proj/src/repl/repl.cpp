#include "d3re/repl.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace d3re {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::int64_t parse_address(const std::string& s) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, 0);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error("not an address: '" + s + "'");
}

void print_warnings(std::ostream& os, const Diagnostics& diag) {
  for (const auto& w : diag.warnings) os << "warning: " << w << "\n";
}

const char* kHelp =
    "open PATH [PATH]     open a fact directory and/or ELF file\n"
    "load FILE            append rules from FILE (dl/NAME names the rule library)\n"
    "run [FILE]           load FILE, then evaluate\n"
    "analysis NAME        load and run a library analysis with its requirements\n"
    "analyses             list library analyses\n"
    "query RELATION       print the tuples of RELATION\n"
    "relations            list relations and sizes\n"
    "assume FACT.         append one ground fact\n"
    "cursor [ADDR|none]   show or set current_address\n"
    "highlight            publish highlight annotations\n"
    "comment              publish comment annotations\n"
    "info                 session, root and current node\n"
    "quit                 leave\n";

}  // namespace

Repl::Repl(ReplOptions options, std::ostream& out, std::ostream& err, std::ostream& info, ViewerLink* link)
    : options_(std::move(options)), out_(out), err_(err), info_(info), link_(link) {
  store_ = std::make_unique<MetaDatabase>(options_.store_dir);
  if (fs::exists(options_.rules_dir / "registry.json"))
    registry_ = std::make_unique<Registry>(Registry::load(options_.rules_dir));
}

Repl::~Repl() = default;

fs::path Repl::resolve(const std::string& arg) const {
  if (arg.rfind("dl/", 0) == 0) {
    fs::path p = options_.rules_dir / arg.substr(3);
    if (fs::exists(p)) return p;
  }
  fs::path p(arg);
  if (p.is_relative() && !options_.base_dir.empty() && fs::exists(options_.base_dir / p)) return options_.base_dir / p;
  if (fs::exists(p)) return p;
  throw Error("file not found: " + arg);
}

Session& Repl::need_session() {
  if (!session_) throw Error("no binary open (use: open PATH)");
  return *session_;
}

bool Repl::execute(std::string_view raw) {
  std::string line = trim(raw);
  if (line.empty() || line[0] == '#') return true;
  auto space = line.find_first_of(" \t");
  std::string cmd = line.substr(0, space);
  std::string arg = space == std::string::npos ? "" : trim(line.substr(space));
  try {
    dispatch(cmd, arg);
    return true;
  } catch (const std::exception& e) {
    err_ << "error: " << e.what() << "\n";
    return false;
  }
}

void Repl::open(const std::vector<std::string>& args) {
  if (args.empty() || args.size() > 2) throw Error("usage: open PATH [PATH]");
  std::vector<fs::path> inputs;
  for (const auto& a : args) inputs.push_back(resolve(a));
  Diagnostics diag;
  auto session = Session::open(options_.session_name, *store_, registry_.get(), inputs, &diag);
  print_warnings(err_, diag);
  if (link_) link_->attach(inputs);
  session_ = std::move(session);
  info_ << "opened " << args[0] << " (root " << session_->root().substr(0, 12) << ")\n";
}

void Repl::sync_cursor() {
  if (link_) need_session().set_cursor(link_->cursor());
}

void Repl::report(const RunOutcome& r) {
  info_ << "node " << r.node_id.substr(0, 12) << (r.cache_hit ? " (cached from " : " (from root ")
        << r.seed_node.substr(0, 12) << "), " << r.stats.derivations << " derivations\n";
}

void Repl::print_relation(const FactDatabase::Relation& rel) {
  for (const auto& t : rel.tuples) {
    for (std::size_t i = 0; i < t.size(); ++i) out_ << (i ? "\t" : "") << to_hex_display(t[i]);
    out_ << "\n";
  }
}

void Repl::dispatch(const std::string& cmd, const std::string& arg) {
  if (cmd == "open") {
    open(words(arg));
  } else if (cmd == "load") {
    if (arg.empty()) throw Error("usage: load FILE");
    auto path = resolve(arg);
    Diagnostics diag;
    auto unit = need_session().load(slurp(path), &diag);
    print_warnings(err_, diag);
    info_ << "loaded " << arg << ": " << unit.rules.size() << " rules, " << unit.facts.size() << " facts\n";
  } else if (cmd == "run") {
    Session& s = need_session();
    std::string text;
    if (!arg.empty()) text = slurp(resolve(arg));
    sync_cursor();
    Diagnostics diag;
    auto r = s.run(text, &diag);
    print_warnings(err_, diag);
    report(r);
  } else if (cmd == "analysis") {
    if (arg.empty()) throw Error("usage: analysis NAME");
    Session& s = need_session();
    sync_cursor();
    Diagnostics diag;
    auto r = s.run_analysis(arg, &diag);
    print_warnings(err_, diag);
    report(r);
  } else if (cmd == "analyses") {
    if (!registry_) throw Error("no rule library at " + options_.rules_dir.string());
    for (const auto& a : registry_->analyses()) out_ << a.name << "\n";
  } else if (cmd == "query") {
    if (arg.empty()) throw Error("usage: query RELATION");
    print_relation(need_session().query(arg));
  } else if (cmd == "relations") {
    Session& s = need_session();
    for (const auto& name : s.relation_names()) out_ << name << "\t" << s.query(name).tuples.size() << "\n";
  } else if (cmd == "assume") {
    if (arg.empty()) throw Error("usage: assume FACT.");
    need_session().assume(arg);
  } else if (cmd == "cursor") {
    Session& s = need_session();
    if (arg.empty()) {
      auto c = s.cursor();
      out_ << (c ? to_hex_display(Value::integer(*c)) : "none") << "\n";
    } else {
      s.set_cursor(arg == "none" ? std::nullopt : std::optional<std::int64_t>(parse_address(arg)));
    }
  } else if (cmd == "highlight" || cmd == "comment") {
    if (!arg.empty()) throw Error(cmd + " takes no arguments");
    Session& s = need_session();
    auto kind = cmd == "highlight" ? Annotation::Kind::Highlight : Annotation::Kind::Comment;
    auto n = s.publish(kind);
    if (link_) link_->publish(s.annotations());
    info_ << n << " " << cmd << (n == 1 ? "" : "s") << (link_ ? " sent" : "") << "\n";
  } else if (cmd == "info") {
    Session& s = need_session();
    out_ << "session\t" << s.id() << "\n"
         << "binary\t" << s.digest() << "\n"
         << "root\t" << s.root() << "\n"
         << "node\t" << s.current() << "\n"
         << "program\t" << canonical_hash(s.effective_program()).hex << "\n";
  } else if (cmd == "help") {
    out_ << kHelp;
  } else if (cmd == "quit" || cmd == "exit") {
    finished_ = true;
  } else {
    throw Error("unknown command '" + cmd + "' (try help)");
  }
}

std::size_t Repl::run_script(std::istream& in, bool echo) {
  std::size_t errors = 0;
  for (std::string line; !finished_ && std::getline(in, line);) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (echo) out_ << ">>>   " << t << "\n";
    out_.flush();
    if (!execute(t)) ++errors;
    err_.flush();
  }
  return errors;
}

void Repl::interactive(std::istream& in) {
  std::string line;
  while (!finished_) {
    out_ << ">>> " << std::flush;
    if (!std::getline(in, line)) break;
    execute(line);
  }
  out_ << "\n";
}

}  // namespace d3re
