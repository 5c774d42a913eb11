#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "d3re/annotation.hpp"
#include "d3re/metadb.hpp"
#include "d3re/rulelib.hpp"
#include "d3re/session.hpp"

namespace d3re {

/// Connection to a running viewer service.
class ViewerLink {
 public:
  virtual ~ViewerLink() = default;
  /// Opens the same inputs on the viewer side.
  virtual void attach(const std::vector<std::filesystem::path>& inputs) = 0;
  /// Address currently selected in the viewer.
  virtual std::optional<std::int64_t> cursor() = 0;
  virtual void publish(const std::vector<Annotation>& annotations) = 0;
};

struct ReplOptions {
  std::filesystem::path store_dir = ".d3re-store";
  std::filesystem::path rules_dir = default_rules_dir();
  std::string session_name = "repl";
  /// Relative paths are tried here first, then in the working directory.
  std::filesystem::path base_dir;
};

/// Command interpreter over one session.
///
/// Data goes to `out`; errors ("error: ...") to `err`; progress messages
/// to `info`.
class Repl {
 public:
  Repl(ReplOptions options, std::ostream& out, std::ostream& err, std::ostream& info, ViewerLink* link = nullptr);
  ~Repl();

  /// Runs one command. Returns false on error; the session is unchanged
  /// then.
  bool execute(std::string_view line);
  /// Executes lines until end of input or `quit`, echoing each command as
  /// `>>>   command` when `echo` is set. Returns the number of failed
  /// commands.
  std::size_t run_script(std::istream& in, bool echo);
  /// Reads commands with a prompt until end of input or `quit`.
  void interactive(std::istream& in);

  bool finished() const { return finished_; }
  Session* session() { return session_.get(); }
  MetaDatabase& store() { return *store_; }
  /// Resolves a path argument (`dl/` names the rules directory).
  std::filesystem::path resolve(const std::string& arg) const;

 private:
  void dispatch(const std::string& cmd, const std::string& arg);
  Session& need_session();
  void open(const std::vector<std::string>& args);
  void print_relation(const FactDatabase::Relation& rel);
  void report(const RunOutcome& r);
  void sync_cursor();

  ReplOptions options_;
  std::ostream& out_;
  std::ostream& err_;
  std::ostream& info_;
  ViewerLink* link_;
  std::unique_ptr<MetaDatabase> store_;
  std::unique_ptr<Registry> registry_;
  std::unique_ptr<Session> session_;
  bool finished_ = false;
};

}  // namespace d3re
