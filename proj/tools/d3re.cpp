#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "d3re/elf.hpp"
#include "d3re/facts.hpp"
#include "d3re/fixture.hpp"
#include "d3re/parser.hpp"
#include "d3re/repl.hpp"
#include "d3re/server.hpp"

namespace fs = std::filesystem;
using namespace d3re;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_fixture(const std::string& src, const std::string& out) {
  FactDatabase db = compile_fixture(slurp(src));
  fs::remove_all(out);
  write_fact_dir(db, out);
  std::cout << db.total_tuples() << " tuples, fingerprint " << db.fingerprint() << "\n";
  return 0;
}

int cmd_ingest(const std::string& input, const std::string& out) {
  Diagnostics diag;
  auto in = ingest({input}, &diag);
  const FactDatabase& db = in.facts;
  for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";
  if (!out.empty()) write_fact_dir(db, out);
  for (const auto& [name, rel] : db.relations()) std::cout << name << "\t" << rel.tuples.size() << "\n";
  std::cout << "fingerprint\t" << db.fingerprint() << "\n";
  std::cout << "digest\t" << in.digest << "\n";
  return 0;
}

int cmd_hash(const std::vector<std::string>& files, bool canonical) {
  DatalogProgram p;
  for (const auto& f : files) {
    Diagnostics diag;
    p = p.extended_with(parse_extension(slurp(f), p, &diag));
    for (const auto& w : diag.warnings) std::cerr << f << ": warning: " << w << "\n";
  }
  if (canonical) std::cout << canonical_text(p);
  std::cout << canonical_hash(p).hex << "\n";
  return 0;
}

struct SessionArgs {
  std::string store = ".d3re-store";
  std::string rules = default_rules_dir().string();
  std::string server;
  std::string session = "repl";
  std::vector<std::string> open;
};

void add_session_options(CLI::App* cmd, SessionArgs& a) {
  cmd->add_option("--store", a.store, "snapshot store directory")->capture_default_str();
  cmd->add_option("--rules", a.rules, "rule library (target of dl/ paths)")->capture_default_str();
  cmd->add_option("--server", a.server, "viewer service URL, e.g. http://127.0.0.1:8080");
  cmd->add_option("--session", a.session, "session name kept in the store")->capture_default_str();
  cmd->add_option("--open", a.open, "open this fact directory or ELF file first");
}

int cmd_session(const SessionArgs& a, const std::string& script) {
  ReplOptions opts;
  opts.store_dir = a.store;
  opts.rules_dir = a.rules;
  opts.session_name = a.session;
  std::unique_ptr<HttpViewerLink> link;
  if (!a.server.empty()) link = std::make_unique<HttpViewerLink>(a.server);
  bool replay = !script.empty();
  if (replay) opts.base_dir = fs::path(script).parent_path();
  Repl repl(opts, std::cout, replay ? std::cout : std::cerr, std::cerr, link.get());
  if (!a.open.empty()) {
    std::string line = "open";
    for (const auto& p : a.open) line += " " + p;
    if (!repl.execute(line)) return 1;
  }
  if (!replay) {
    repl.interactive(std::cin);
    return 0;
  }
  std::ifstream in(script);
  if (!in) throw Error("cannot read " + script);
  return repl.run_script(in, true) == 0 ? 0 : 1;
}

Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const SessionArgs& a, const std::string& listen, const std::string& ui) {
  ServerOptions opts;
  opts.store_dir = a.store;
  opts.rules_dir = a.rules;
  if (!ui.empty()) opts.ui_dir = ui;
  Server server(opts);
  auto [host, port] = parse_listen(listen);
  int bound = server.bind(host, port);
  if (bound < 0) throw Error("cannot listen on " + listen);
  for (const auto& p : a.open) std::cout << "session " << server.open_session({p}) << "\t" << p << "\n";
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  return 0;
}

int cmd_gc(const std::string& store) {
  MetaDatabase db(store);
  std::size_t removed = db.gc();
  std::cout << "removed " << removed << " snapshot" << (removed == 1 ? "" : "s") << ", " << db.node_ids().size()
            << " kept\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"d3re: declarative binary analysis workbench"};
  app.require_subcommand(1);

  std::string src, out, input;
  auto* fixture = app.add_subcommand("fixture", "Compile a fixture description into a fact directory");
  fixture->add_option("source", src, "fixture source (.fx)")->required()->check(CLI::ExistingFile);
  fixture->add_option("outdir", out, "output fact directory")->required();

  auto* ingest = app.add_subcommand("ingest", "Load an ELF file or fact directory and report relation sizes");
  ingest->add_option("input", input, "ELF binary or fact directory")->required()->check(CLI::ExistingPath);
  ingest->add_option("-o,--out", out, "write the facts to this directory");

  std::vector<std::string> files;
  bool canonical = false;
  auto* hash = app.add_subcommand("hash", "Print the program id of rule files (later files extend earlier ones)");
  hash->add_option("files", files, "rule files")->required()->check(CLI::ExistingFile);
  hash->add_flag("--canonical", canonical, "also print the canonical text");

  SessionArgs sargs;
  auto* repl = app.add_subcommand("repl", "Interactive session");
  add_session_options(repl, sargs);

  std::string script;
  auto* replay = app.add_subcommand("replay", "Run a command transcript, echoing each command");
  replay->add_option("script", script, "command file")->required()->check(CLI::ExistingFile);
  add_session_options(replay, sargs);

  std::string listen = "127.0.0.1:8080", ui;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--listen", listen, "host:port")->capture_default_str();
  serve->add_option("--ui", ui, "directory of viewer assets served under /ui");
  serve->add_option("--store", sargs.store, "snapshot store directory")->capture_default_str();
  serve->add_option("--rules", sargs.rules, "rule library")->capture_default_str();
  serve->add_option("--open", sargs.open, "open these inputs at startup");

  auto* gc = app.add_subcommand("gc", "Delete snapshots not used by any named session");
  gc->add_option("--store", sargs.store, "snapshot store directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*fixture) return cmd_fixture(src, out);
    if (*ingest) return cmd_ingest(input, out);
    if (*hash) return cmd_hash(files, canonical);
    if (*repl) return cmd_session(sargs, "");
    if (*replay) return cmd_session(sargs, script);
    if (*serve) return cmd_serve(sargs, listen, ui);
    if (*gc) return cmd_gc(sargs.store);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
