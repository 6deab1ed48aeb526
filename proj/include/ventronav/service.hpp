#pragma once

// HTTP/JSON front end over in-memory sessions (cpp-httplib).
//
//   POST   /sessions                         {"scenario": id}          -> handle + snapshot
//   GET    /sessions/{id}                                              -> handle + snapshot
//   POST   /sessions/{id}/events             one event                 -> snapshot + report
//   GET    /sessions/{id}/log                                          -> application/x-ndjson
//   DELETE /sessions/{id}
//   GET    /scenarios                                                  -> list
//   GET    /scenarios/{id}/meshes/{head|ventricles}[?session=id]      -> {positions, indices}
//
// Besides the session events, /events accepts {"type":"AcquireRay","ray":..}:
// the server casts the ray onto the head, captures the hit with the
// scenario's noise model and logs the result as a plain Acquire.

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <httplib.h>

#include "ventronav/scenario.hpp"
#include "ventronav/serialization.hpp"
#include "ventronav/session.hpp"
#include "ventronav/study.hpp"

namespace ventronav {

struct ServiceConfig {
  /// MarkerUpdate events accepted per session per second; 0 disables the cap.
  int marker_rate_limit = 30;
  /// When set, each session's event log is also appended to <dir>/<id>.jsonl.
  std::filesystem::path log_dir;
  std::function<std::chrono::steady_clock::time_point()> clock = [] { return std::chrono::steady_clock::now(); };
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Finds scenario.json in `root` and in its immediate subdirectories.
inline std::map<std::string, std::shared_ptr<const LoadedScenario>> discover_scenarios(const std::filesystem::path& root) {
  std::map<std::string, std::shared_ptr<const LoadedScenario>> out;
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(root / "scenario.json")) files.push_back(root / "scenario.json");
  if (std::filesystem::is_directory(root)) {
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "scenario.json")) {
        files.push_back(entry.path() / "scenario.json");
      }
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto sc = std::make_shared<const LoadedScenario>(load_scenario(f));
    out.emplace(sc->scenario.id, std::move(sc));
  }
  return out;
}

inline Json mesh_to_json(const TriangleMesh& mesh, std::string_view space) {
  Json positions = Json::array();
  for (const auto& v : mesh.vertices()) {
    positions.push_back(v.x());
    positions.push_back(v.y());
    positions.push_back(v.z());
  }
  Json indices = Json::array();
  for (const auto& t : mesh.triangles()) {
    for (auto i : t) indices.push_back(i);
  }
  return Json{{"space", std::string(space)}, {"units", "mm"}, {"positions", positions}, {"indices", indices}};
}

class Service {
 public:
  Service(std::map<std::string, std::shared_ptr<const LoadedScenario>> scenarios, ServiceConfig cfg = {})
      : scenarios_(std::move(scenarios)), cfg_(std::move(cfg)) {
    if (!cfg_.log_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(cfg_.log_dir, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot create " + cfg_.log_dir.string() + ": " + ec.message());
    }
  }

  // --- transport-free handlers (also used by tests) ----------------------

  HttpReply create_session(const std::string& body) {
    Json req;
    try {
      req = body.empty() ? Json::object() : Json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error(422, "ParseError", e.what());
    }
    std::string scenario_id;
    if (req.is_object() && req.contains("scenario") && req["scenario"].is_string()) {
      scenario_id = req["scenario"].get<std::string>();
    } else if (scenarios_.size() == 1) {
      scenario_id = scenarios_.begin()->first;
    } else {
      return error(422, "ParseError", "field 'scenario' is required");
    }
    const auto sc = scenarios_.find(scenario_id);
    if (sc == scenarios_.end()) return error(404, "NotFound", "unknown scenario '" + scenario_id + "'");

    auto entry = std::make_shared<Entry>();
    entry->scenario = sc->second;
    entry->context = sc->second->context();
    entry->created = std::chrono::system_clock::now();
    {
      std::unique_lock lock(sessions_mutex_);
      entry->id = "s" + std::to_string(++next_id_);
      sessions_.emplace(entry->id, entry);
    }
    std::lock_guard guard(entry->mutex);
    return {201, dump_json(snapshot(*entry))};
  }

  HttpReply get_session(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "NotFound", "unknown session '" + id + "'");
    std::lock_guard guard(entry->mutex);
    return {200, dump_json(snapshot(*entry))};
  }

  HttpReply delete_session(const std::string& id) {
    std::unique_lock lock(sessions_mutex_);
    if (sessions_.erase(id) == 0) return error(404, "NotFound", "unknown session '" + id + "'");
    return {200, dump_json(Json{{"deleted", id}})};
  }

  HttpReply get_log(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "NotFound", "unknown session '" + id + "'");
    std::lock_guard guard(entry->mutex);
    std::string out;
    for (const auto& line : entry->log) out += line + "\n";
    return {200, out, "application/x-ndjson"};
  }

  HttpReply post_event(const std::string& id, const std::string& body) {
    auto entry = find(id);
    if (!entry) return error(404, "NotFound", "unknown session '" + id + "'");
    Json j;
    try {
      j = Json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error(422, "ParseError", e.what());
    }

    std::lock_guard guard(entry->mutex);
    SessionEvent event;
    try {
      if (j.is_object() && j.value("type", std::string()) == "AcquireRay") {
        const Ray ray = ray_from_json(detail::json_get<Json>(j, "ray"));
        if (entry->state.phase != Phase::Landmarking) {
          return rejected(*entry, Json{{"type", "AcquireRay"}}, "AcquireRay is not available in phase " +
                                                                   std::string(to_string(entry->state.phase)));
        }
        const auto captured = capture(*entry, ray);
        if (!captured) return rejected(*entry, Json{{"type", "AcquireRay"}}, "ray does not hit a visible head surface");
        event = events::Acquire{*captured};
      } else {
        event = event_from_json(j);
      }
    } catch (const Error& e) {
      return error(422, "ParseError", e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(422, "ParseError", e.what());
    }

    if (std::holds_alternative<events::MarkerUpdate>(event) && cfg_.marker_rate_limit > 0) {
      const auto now = cfg_.clock();
      auto& window = entry->marker_times;
      while (!window.empty() && now - window.front() >= std::chrono::seconds(1)) window.pop_front();
      if (static_cast<int>(window.size()) >= cfg_.marker_rate_limit) {
        return error(429, "RateLimited", "MarkerUpdate is limited to " + std::to_string(cfg_.marker_rate_limit) +
                                             " events per second");
      }
      window.push_back(now);
    }

    const Json event_json = event_to_json(event);
    try {
      auto result = dispatch(entry->context, entry->state, event);
      entry->state = std::move(result.state);
      append_log(*entry, event_json, nullptr);
      Json out = snapshot(*entry);
      out["report"] = report_to_json(result.report);
      return {200, dump_json(out)};
    } catch (const RejectedEvent& e) {
      return rejected(*entry, event_json, e.reason());
    }
  }

  HttpReply list_scenarios() const {
    Json list = Json::array();
    for (const auto& [id, sc] : scenarios_) {
      list.push_back(Json{{"id", id},
                          {"description", sc->scenario.description},
                          {"landmarks", [] {
                             Json names = Json::array();
                             for (auto lm : kLandmarkOrder) names.push_back(std::string(to_string(lm)));
                             return names;
                           }()}});
    }
    return {200, dump_json(Json{{"scenarios", list}})};
  }

  /// Head in world space. Ventricles in model space, or mapped into world
  /// space by a session's current registration when `session_id` is given.
  HttpReply get_mesh(const std::string& scenario_id, const std::string& which, const std::string& session_id = {}) {
    const auto sc = scenarios_.find(scenario_id);
    if (sc == scenarios_.end()) return error(404, "NotFound", "unknown scenario '" + scenario_id + "'");
    const auto& scene = *sc->second->scene;
    if (which == "head") return {200, dump_json(mesh_to_json(scene.head_mesh(), "world"))};
    if (which != "ventricles") return error(404, "NotFound", "unknown mesh '" + which + "'");
    if (session_id.empty()) return {200, dump_json(mesh_to_json(scene.ventricle_mesh(), "model"))};
    auto entry = find(session_id);
    if (!entry) return error(404, "NotFound", "unknown session '" + session_id + "'");
    std::lock_guard guard(entry->mutex);
    if (!entry->state.registration) return error(409, "RejectedEvent", "session is not registered");
    return {200, dump_json(mesh_to_json(scene.ventricle_mesh().transformed(entry->state.registration->transform), "world"))};
  }

  // --- HTTP -----------------------------------------------------------------

  /// Binds and serves until stop(). Returns false when the port cannot be bound.
  bool listen(const std::string& host, int port) {
    install_routes();
    if (!server_.bind_to_port(host, port)) return false;
    return server_.listen_after_bind();
  }

  /// Binds an ephemeral port; serve with listen_after_bind() on another thread.
  int bind_any_port(const std::string& host = "127.0.0.1") {
    install_routes();
    return server_.bind_to_any_port(host);
  }

  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  struct Entry {
    std::string id;
    std::shared_ptr<const LoadedScenario> scenario;
    SessionContext context;
    std::chrono::system_clock::time_point created;
    std::mutex mutex;
    SessionState state;
    std::uint64_t event_counter = 0;
    std::vector<std::string> log;
    std::deque<std::chrono::steady_clock::time_point> marker_times;
  };

  static HttpReply error(int status, std::string_view code, const std::string& reason) {
    return {status, dump_json(Json{{"error", std::string(code)}, {"reason", reason}})};
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  HttpReply rejected(Entry& e, const Json& event_json, const std::string& reason) {
    append_log(e, event_json, &reason);
    Json body{{"error", "RejectedEvent"}, {"reason", reason}, {"event_counter", e.event_counter}};
    return {409, dump_json(body)};
  }

  void append_log(Entry& e, const Json& event_json, const std::string* rejected_reason) {
    ++e.event_counter;
    Json line{{"seq", e.event_counter}, {"event", event_json}, {"accepted", rejected_reason == nullptr}};
    if (rejected_reason) line["reason"] = *rejected_reason;
    e.log.push_back(line.dump());
    if (!cfg_.log_dir.empty()) {
      std::ofstream out(cfg_.log_dir / (e.id + ".jsonl"), std::ios::app);
      out << e.log.back() << "\n";
    }
  }

  /// Noisy capture of the point the ray hits, as the phone would measure it.
  std::optional<Point3> capture(Entry& e, const Ray& ray) {
    const auto& sc = *e.scenario;
    const auto hit = ray_mesh_intersect(ray, sc.scene->head_mesh());
    if (!hit) return std::nullopt;
    Rng rng(trial_seed(sc.scenario.seed, static_cast<std::int64_t>(e.event_counter), sc.scenario.noise.stream));
    try {
      const CameraPose pose = look_at(hit->point, sc.scenario.standoff_mm, -ray.direction);
      return acquire_point(*sc.scene, pose, sc.scenario.intrinsics, hit->point, e.state.current, sc.scenario.noise, rng)
          .point;
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  Json snapshot(const Entry& e) const {
    const auto created = std::chrono::duration_cast<std::chrono::milliseconds>(e.created.time_since_epoch()).count();
    return Json{{"session", Json{{"id", e.id},
                                 {"scenario", e.scenario->scenario.id},
                                 {"created_unix_ms", created},
                                 {"event_counter", e.event_counter}}},
                {"state", state_to_json(e.state)}};
  }

  static void send(httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  void install_routes() {
    if (routes_installed_) return;
    routes_installed_ = true;
    // No SO_REUSEPORT: a second server on a busy port must fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, create_session(req.body));
    });
    server_.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    server_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, delete_session(req.matches[1]));
    });
    server_.Post(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, post_event(req.matches[1], req.body));
    });
    server_.Get(R"(/sessions/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_log(req.matches[1]));
    });
    server_.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) { send(res, list_scenarios()); });
    server_.Get(R"(/scenarios/([^/]+)/meshes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_mesh(req.matches[1], req.matches[2], req.get_param_value("session")));
    });
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "unknown";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send(res, error(500, "InternalError", what));
    });
  }

  std::map<std::string, std::shared_ptr<const LoadedScenario>> scenarios_;
  ServiceConfig cfg_;
  std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 0;
  httplib::Server server_;
  bool routes_installed_ = false;
};

/// Rebuilds a session state from its JSON-lines log (rejected lines skipped).
inline SessionState replay_log(const SessionContext& ctx, std::string_view jsonl) {
  std::vector<SessionEvent> events;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t eol = jsonl.find('\n', pos);
    if (eol == std::string_view::npos) eol = jsonl.size();
    const auto line = jsonl.substr(pos, eol - pos);
    if (!line.empty()) {
      const Json j = parse_json_text(std::string(line), "log");
      if (j.value("accepted", false)) events.push_back(event_from_json(j.at("event")));
    }
    pos = eol + 1;
  }
  return replay(ctx, events);
}

}  // namespace ventronav
