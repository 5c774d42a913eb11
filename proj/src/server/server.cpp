#include "d3re/server.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "d3re/error.hpp"

namespace d3re {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::int64_t kMaxExactInt = (std::int64_t{1} << 53) - 1;

class NotFound : public Error {
 public:
  using Error::Error;
};

json int_json(std::int64_t v) {
  if (v > kMaxExactInt || v < -kMaxExactInt) return std::to_string(v);
  return v;
}

json value_json(const Value& v) { return v.is_integer() ? int_json(v.as_integer()) : json(v.as_string()); }

std::int64_t parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, 0);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error("not an integer: '" + s + "'");
}

std::optional<std::int64_t> address_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return parse_int(j.get<std::string>());
  throw Error("address must be an integer, a string or null");
}

json annotation_json(const Annotation& a) {
  json j{{"kind", to_string(a.kind)}, {"address", int_json(a.address)}, {"relation", a.relation}};
  if (a.kind == Annotation::Kind::Comment) j["text"] = a.text;
  return j;
}

Annotation annotation_from(const json& j) {
  Annotation a;
  auto kind = j.at("kind").get<std::string>();
  if (kind == "highlight")
    a.kind = Annotation::Kind::Highlight;
  else if (kind == "comment")
    a.kind = Annotation::Kind::Comment;
  else
    throw Error("unknown annotation kind '" + kind + "'");
  auto addr = address_from(j.at("address"));
  if (!addr) throw Error("annotation without address");
  a.address = *addr;
  a.text = j.value("text", "");
  a.relation = j.value("relation", "");
  if (a.kind == Annotation::Kind::Comment && a.text.empty()) throw Error("comment without text");
  if (a.kind == Annotation::Kind::Highlight && !a.text.empty()) throw Error("highlight with text");
  return a;
}

std::string unquote(std::string s) {
  if (s.rfind("W/", 0) == 0) s = s.substr(2);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed JSON body: ") + e.what());
  }
}

bool looks_like_json(const httplib::Request& req) {
  auto type = req.get_header_value("Content-Type");
  if (type.find("application/json") != std::string::npos) return true;
  auto p = req.body.find_first_not_of(" \t\r\n");
  return p != std::string::npos && req.body[p] == '{';
}

}  // namespace

struct Server::Impl {
  ServerOptions options;
  MetaDatabase store;
  std::unique_ptr<Registry> registry;
  httplib::Server http;
  std::mutex mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 rng{std::random_device{}()};

  explicit Impl(ServerOptions o) : options(std::move(o)), store(options.store_dir) {
    if (fs::exists(options.rules_dir / "registry.json"))
      registry = std::make_unique<Registry>(Registry::load(options.rules_dir));
    routes();
  }

  std::string open_session(const std::vector<fs::path>& inputs) {
    std::string id;
    {
      std::lock_guard lock(mutex);
      char buf[24];
      std::snprintf(buf, sizeof buf, "%012llx", static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
      id = buf;
    }
    std::shared_ptr<Session> s = Session::open("srv-" + id, store, registry.get(), inputs);
    std::lock_guard lock(mutex);
    sessions[id] = std::move(s);
    return id;
  }

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  json session_json(const std::string& id, const Session& s) {
    auto cursor = s.cursor();
    return {{"id", id},
            {"digest", s.digest()},
            {"root", s.root()},
            {"node", s.current()},
            {"cursor", cursor ? int_json(*cursor) : json(nullptr)},
            {"etag", s.etag()}};
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const NotFound& e) {
        send_json(res, {{"error", e.what()}}, 404);
      } catch (const SessionBusy& e) {
        send_json(res, {{"error", e.what()}}, 409);
      } catch (const ParseError& e) {
        send_json(res, {{"error", e.what()}, {"line", e.line()}, {"column", e.column()}}, 400);
      } catch (const Error& e) {
        send_json(res, {{"error", e.what()}}, 400);
      } catch (const json::exception& e) {
        send_json(res, {{"error", e.what()}}, 400);
      } catch (const std::exception& e) {
        send_json(res, {{"error", e.what()}}, 500);
      }
    };
  }

  void routes() {
    http.new_task_queue = [n = options.threads] { return new httplib::ThreadPool(n); };
    http.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                              {"Access-Control-Allow-Headers", "Content-Type, If-None-Match"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Expose-Headers", "ETag"}});
    http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    if (options.ui_dir) http.set_mount_point("/ui", options.ui_dir->string());

    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = parse_body(req);
      std::vector<fs::path> inputs;
      if (body.contains("paths"))
        for (const auto& p : body.at("paths")) inputs.emplace_back(p.get<std::string>());
      else
        inputs.emplace_back(body.at("path").get<std::string>());
      auto id = open_session(inputs);
      send_json(res, session_json(id, *session(id)), 201);
    }));

    http.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      std::lock_guard lock(mutex);
      for (const auto& [id, s] : sessions) list.push_back(id);
      send_json(res, {{"sessions", list}});
    }));

    http.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      send_json(res, session_json(id, *session(id)));
    }));

    http.Post(R"(/sessions/([^/]+)/run)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      Diagnostics diag;
      RunOutcome r;
      if (looks_like_json(req)) {
        json body = parse_body(req);
        if (body.contains("analysis"))
          r = s->run_analysis(body.at("analysis").get<std::string>(), &diag);
        else
          r = s->run(body.value("rules", ""), &diag);
      } else {
        r = s->run(req.body, &diag);
      }
      s->publish_all();
      send_json(res, {{"node", r.node_id},
                      {"seed", r.seed_node},
                      {"cache_hit", r.cache_hit},
                      {"program_id", r.program_id},
                      {"outputs", r.outputs},
                      {"derivations", r.stats.derivations},
                      {"warnings", diag.warnings}});
    }));

    http.Get(R"(/sessions/([^/]+)/relations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      json list = json::array();
      for (const auto& name : s->relation_names()) list.push_back({{"name", name}, {"size", s->query(name).tuples.size()}});
      send_json(res, {{"relations", list}});
    }));

    http.Get(R"(/sessions/([^/]+)/relations/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = session(req.matches[1]);
               std::string name = req.matches[2];
               auto names = s->relation_names();
               if (std::find(names.begin(), names.end(), name) == names.end())
                 throw NotFound("unknown relation '" + name + "'");
               auto rel = s->query(name);
               json cols = json::array();
               for (const auto& c : rel.schema.columns) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
               json rows = json::array();
               for (const auto& t : rel.tuples) {
                 json row = json::array();
                 for (const auto& v : t) row.push_back(value_json(v));
                 rows.push_back(std::move(row));
               }
               send_json(res, {{"relation", name}, {"columns", cols}, {"tuples", rows}});
             }));

    http.Get(R"(/sessions/([^/]+)/listing)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      std::int64_t from = INT64_MIN, to = INT64_MAX;
      if (req.has_param("from")) from = parse_int(req.get_param_value("from"));
      if (req.has_param("to")) to = parse_int(req.get_param_value("to"));
      json rows = json::array();
      for (const auto& r : s->listing(from, to)) {
        json notes = json::array();
        for (const auto& a : r.annotations) notes.push_back(annotation_json(a));
        rows.push_back({{"address", int_json(r.address)},
                        {"bytes", r.bytes},
                        {"text", r.text},
                        {"block", r.block ? int_json(*r.block) : json(nullptr)},
                        {"annotations", notes}});
      }
      send_json(res, {{"rows", rows}});
    }));

    http.Get(R"(/sessions/([^/]+)/annotations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      std::string etag = s->etag();
      if (req.has_header("If-None-Match")) {
        auto timeout = options.poll_timeout;
        if (req.has_param("wait"))
          timeout = std::min(timeout, std::chrono::milliseconds(std::max<std::int64_t>(0, parse_int(req.get_param_value("wait")))));
        std::string seen = unquote(req.get_header_value("If-None-Match"));
        if (seen == etag) etag = s->wait_for_change(seen, timeout);
        if (seen == etag) {
          res.status = 304;
          res.set_header("ETag", "\"" + etag + "\"");
          return;
        }
      }
      auto [notes, current] = s->annotation_state();
      etag = current;
      json list = json::array();
      for (const auto& a : notes) list.push_back(annotation_json(a));
      res.set_header("ETag", "\"" + etag + "\"");
      send_json(res, {{"etag", etag}, {"annotations", list}});
    }));

    http.Post(R"(/sessions/([^/]+)/annotations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      json body = parse_body(req);
      std::vector<Annotation> notes;
      for (const auto& j : body.at("annotations")) notes.push_back(annotation_from(j));
      s->set_annotations(std::move(notes));
      send_json(res, {{"etag", s->etag()}});
    }));

    http.Post(R"(/sessions/([^/]+)/cursor)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      std::optional<std::int64_t> addr;
      if (looks_like_json(req)) {
        json body = parse_body(req);
        addr = address_from(body.is_object() ? body.at("address") : body);
      } else {
        auto text = req.body;
        text.erase(0, text.find_first_not_of(" \t\r\n"));
        text.erase(text.find_last_not_of(" \t\r\n") + 1);
        if (!text.empty() && text != "null") addr = parse_int(text);
      }
      s->set_cursor(addr);
      send_json(res, {{"cursor", addr ? int_json(*addr) : json(nullptr)}});
    }));
  }
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool Server::serve() { return impl_->http.listen_after_bind(); }
void Server::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}
void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

std::string Server::open_session(const std::vector<fs::path>& inputs) { return impl_->open_session(inputs); }

struct HttpViewerLink::Impl {
  httplib::Client client;
  explicit Impl(const std::string& url) : client(url) {
    client.set_connection_timeout(5);
    client.set_read_timeout(60);
  }

  json call(httplib::Result res, const std::string& what) {
    if (!res) throw Error("viewer unreachable (" + what + "): " + httplib::to_string(res.error()));
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception&) {
    }
    if (res->status >= 300)
      throw Error("viewer rejected " + what + ": " + (body.contains("error") ? body["error"].get<std::string>() : res->body));
    return body;
  }
};

HttpViewerLink::HttpViewerLink(std::string base_url) : impl_(std::make_unique<Impl>(base_url)) {}
HttpViewerLink::~HttpViewerLink() = default;

void HttpViewerLink::attach(const std::vector<fs::path>& inputs) {
  json paths = json::array();
  for (const auto& p : inputs) paths.push_back(fs::absolute(p).string());
  json body = impl_->call(impl_->client.Post("/sessions", json{{"paths", paths}}.dump(), "application/json"), "open");
  session_ = body.at("id").get<std::string>();
}

std::optional<std::int64_t> HttpViewerLink::cursor() {
  if (session_.empty()) return std::nullopt;
  json body = impl_->call(impl_->client.Get("/sessions/" + session_), "cursor");
  return address_from(body.at("cursor"));
}

void HttpViewerLink::publish(const std::vector<Annotation>& annotations) {
  if (session_.empty()) throw Error("viewer session not attached");
  json list = json::array();
  for (const auto& a : annotations) list.push_back(annotation_json(a));
  impl_->call(impl_->client.Post("/sessions/" + session_ + "/annotations", json{{"annotations", list}}.dump(),
                                 "application/json"),
              "annotations");
}

std::pair<std::string, int> parse_listen(const std::string& spec) {
  auto colon = spec.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : spec.substr(0, colon);
  std::string port = colon == std::string::npos ? spec : spec.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  std::int64_t p = parse_int(port);
  if (p < 0 || p > 65535) throw Error("bad port in '" + spec + "'");
  return {host, static_cast<int>(p)};
}

}  // namespace d3re
