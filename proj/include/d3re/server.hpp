#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "d3re/repl.hpp"

namespace d3re {

struct ServerOptions {
  std::filesystem::path store_dir = ".d3re-store";
  std::filesystem::path rules_dir = default_rules_dir();
  /// Static viewer assets served under /ui.
  std::optional<std::filesystem::path> ui_dir;
  std::string cors_origin = "*";
  /// Longest wait of an annotations long-poll.
  std::chrono::milliseconds poll_timeout{20000};
  std::size_t threads = 16;
};

/// HTTP/JSON session service.
///
///     POST /sessions                       {"path": P} or {"paths": [P, ...]}
///     GET  /sessions/{id}
///     POST /sessions/{id}/run              rule text, or {"rules": T} / {"analysis": N}
///     GET  /sessions/{id}/relations
///     GET  /sessions/{id}/relations/{name}
///     GET  /sessions/{id}/listing?from=&to=
///     GET  /sessions/{id}/annotations      long-polls with If-None-Match
///     POST /sessions/{id}/annotations      {"annotations": [...]}
///     POST /sessions/{id}/cursor           {"address": A} (number, hex string or null)
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds `host:port` (port 0 picks a free one). Returns the port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

  /// Opens a session directly (same as POST /sessions); returns its id.
  std::string open_session(const std::vector<std::filesystem::path>& inputs);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// ViewerLink over HTTP to a Server at `base_url` (e.g. http://127.0.0.1:8080).
class HttpViewerLink : public ViewerLink {
 public:
  explicit HttpViewerLink(std::string base_url);
  ~HttpViewerLink() override;

  void attach(const std::vector<std::filesystem::path>& inputs) override;
  std::optional<std::int64_t> cursor() override;
  void publish(const std::vector<Annotation>& annotations) override;

  const std::string& session_id() const { return session_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string session_;
};

/// Splits "host:port"; a bare port means 127.0.0.1.
std::pair<std::string, int> parse_listen(const std::string& spec);

}  // namespace d3re
