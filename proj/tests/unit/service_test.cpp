#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"
#include "ventronav/service.hpp"

using namespace ventronav;

namespace {

std::map<std::string, std::shared_ptr<const LoadedScenario>> scenarios() {
  return discover_scenarios(vtest::source_dir() / "data");
}

std::string scenario_id() { return vtest::phantom().scenario.id; }

Json body(const HttpReply& r) { return Json::parse(r.body); }

std::string new_session(Service& svc) {
  const auto r = svc.create_session(Json{{"scenario", scenario_id()}}.dump());
  EXPECT_EQ(r.status, 201);
  return body(r)["session"]["id"].get<std::string>();
}

/// A running server on an ephemeral port, stopped on destruction.
class LiveServer {
 public:
  explicit LiveServer(ServiceConfig cfg = {}) : svc_(scenarios(), std::move(cfg)) {
    port_ = svc_.bind_any_port();
    thread_ = std::thread([this] { svc_.listen_after_bind(); });
    svc_.wait_until_ready();
  }
  ~LiveServer() {
    svc_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }
  Service& service() { return svc_; }

 private:
  Service svc_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Service, DiscoversPhantom) {
  const auto s = scenarios();
  ASSERT_EQ(s.count(scenario_id()), 1u);
  Service svc(s);
  const auto list = body(svc.list_scenarios());
  EXPECT_EQ(list["scenarios"][0]["landmarks"].size(), 7u);
}

TEST(Service, HttpWalkthroughLeavesRmseInSnapshot) {
  LiveServer server;
  auto cli = server.client();
  auto created = cli.Post("/sessions", Json{{"scenario", scenario_id()}}.dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  EXPECT_EQ(created->get_header_value("Content-Type"), "application/json");
  const auto id = Json::parse(created->body)["session"]["id"].get<std::string>();
  for (const auto& e : vtest::walkthrough(vtest::phantom(), 31)) {
    const auto r = cli.Post("/sessions/" + id + "/events", event_to_json(e).dump(), "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
  }
  const auto snap = cli.Get("/sessions/" + id);
  ASSERT_TRUE(snap);
  const auto j = Json::parse(snap->body);
  EXPECT_EQ(j["state"]["phase"], "CatheterTracking");
  EXPECT_TRUE(j["state"]["rmse"].is_number());
  EXPECT_TRUE(j["state"]["tip_feedback"].is_object());
  EXPECT_EQ(j["session"]["event_counter"].get<int>(), 19);
  const auto log = cli.Get("/sessions/" + id + "/log");
  ASSERT_TRUE(log);
  EXPECT_EQ(log->get_header_value("Content-Type"), "application/x-ndjson");
}

TEST(Service, AcquireRayCapturesOnTheHead) {
  Service svc(scenarios());
  const auto id = new_session(svc);
  const auto& scene = *vtest::phantom().scene;
  const Point3 lm = scene.true_world_landmarks().at(LandmarkId::RightTragus);
  const Vector3 out = scene.approach_direction(LandmarkId::RightTragus);
  const Ray ray(lm + 300.0 * out, -out);
  const auto r = svc.post_event(id, Json{{"type", "AcquireRay"}, {"ray", ray_to_json(ray)}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const auto pick = vec_from_json(body(r)["state"]["picks"]["RightTragus"][0]);
  EXPECT_LT((pick - lm).norm(), 15.0);
  const auto miss = svc.post_event(
      id, Json{{"type", "AcquireRay"}, {"ray", ray_to_json(Ray(lm + 300.0 * out, out))}}.dump());
  EXPECT_EQ(miss.status, 409);
}

TEST(Service, ConfirmBeforeRegisterIs409) {
  Service svc(scenarios());
  const auto id = new_session(svc);
  const auto r = svc.post_event(id, R"({"type":"Confirm"})");
  EXPECT_EQ(r.status, 409);
  const auto j = body(r);
  EXPECT_EQ(j["error"], "RejectedEvent");
  EXPECT_FALSE(j["reason"].get<std::string>().empty());
  EXPECT_EQ(j["event_counter"].get<int>(), 1);
  EXPECT_EQ(body(svc.get_session(id))["state"]["phase"], "Landmarking");
}

TEST(Service, NotFoundAndMalformed) {
  Service svc(scenarios());
  EXPECT_EQ(svc.get_session("nope").status, 404);
  EXPECT_EQ(svc.post_event("nope", R"({"type":"Next"})").status, 404);
  EXPECT_EQ(svc.create_session(R"({"scenario":"nope"})").status, 404);
  const auto id = new_session(svc);
  EXPECT_EQ(svc.post_event(id, "{not json").status, 422);
  EXPECT_EQ(svc.post_event(id, R"({"type":"Teleport"})").status, 422);
  EXPECT_EQ(svc.post_event(id, R"({"type":"Acquire","point":[1,2]})").status, 422);
  EXPECT_EQ(body(svc.get_session(id))["session"]["event_counter"].get<int>(), 0);
  EXPECT_EQ(svc.delete_session(id).status, 200);
  EXPECT_EQ(svc.get_session(id).status, 404);
}

TEST(Service, ConcurrentPostsAreSerialized) {
  LiveServer server;
  auto setup = server.client();
  const auto id = Json::parse(setup.Post("/sessions", "{}", "application/json")->body)["session"]["id"].get<std::string>();
  for (int round = 0; round < 20; ++round) {
    const int before = Json::parse(setup.Get("/sessions/" + id)->body)["session"]["event_counter"].get<int>();
    auto post = [&](const std::string& e) {
      auto c = server.client();
      const auto r = c.Post("/sessions/" + id + "/events", e, "application/json");
      ASSERT_TRUE(r);
      EXPECT_TRUE(r->status == 200 || r->status == 409);
    };
    std::thread a(post, R"({"type":"Acquire","point":[1,2,3]})");
    std::thread b(post, R"({"type":"Next"})");
    a.join();
    b.join();
    const auto j = Json::parse(setup.Get("/sessions/" + id)->body);
    EXPECT_EQ(j["session"]["event_counter"].get<int>(), before + 2);
    EXPECT_FALSE(invariant_violation(replay_log(vtest::phantom().context(), setup.Get("/sessions/" + id + "/log")->body)));
  }
}

TEST(Service, MarkerUpdatesRateLimited) {
  auto now = std::chrono::steady_clock::time_point{};
  ServiceConfig cfg;
  cfg.clock = [&] { return now; };
  Service svc(scenarios(), cfg);
  const auto id = new_session(svc);
  for (const auto& e : vtest::walkthrough(vtest::phantom(), 32)) ASSERT_EQ(svc.post_event(id, event_to_json(e).dump()).status, 200);
  const std::string marker = event_to_json(vtest::walkthrough(vtest::phantom(), 32).back()).dump();
  // One MarkerUpdate already went through in the walkthrough.
  for (int i = 1; i < 30; ++i) ASSERT_EQ(svc.post_event(id, marker).status, 200) << i;
  EXPECT_EQ(svc.post_event(id, marker).status, 429);
  now += std::chrono::milliseconds(999);
  EXPECT_EQ(svc.post_event(id, marker).status, 429);
  now += std::chrono::milliseconds(2);
  EXPECT_EQ(svc.post_event(id, marker).status, 200);
  EXPECT_EQ(svc.post_event(id, R"({"type":"Reset"})").status, 200);
}

TEST(Service, LogReplayMatchesSnapshot) {
  const auto dir = std::filesystem::temp_directory_path() / ("ventronav_svc_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  ServiceConfig cfg;
  cfg.log_dir = dir;
  Service svc(scenarios(), cfg);
  const auto id = new_session(svc);
  auto log = vtest::walkthrough(vtest::phantom(), 33);
  log.insert(log.begin() + 3, events::Confirm{});
  log.insert(log.begin() + 8, events::Delete{});
  for (const auto& e : log) svc.post_event(id, event_to_json(e).dump());
  const auto snap = body(svc.get_session(id));
  const auto replayed = replay_log(vtest::phantom().context(), svc.get_log(id).body);
  EXPECT_EQ(state_to_json(replayed), snap["state"]);
  EXPECT_EQ(detail::read_file(dir / (id + ".jsonl")), svc.get_log(id).body);
  std::filesystem::remove_all(dir);
}

TEST(Service, MeshEndpoint) {
  LiveServer server;
  auto cli = server.client();
  const auto& sc = vtest::phantom();
  const auto head = cli.Get("/scenarios/" + scenario_id() + "/meshes/head");
  ASSERT_TRUE(head);
  ASSERT_EQ(head->status, 200);
  const auto h = Json::parse(head->body);
  EXPECT_EQ(h["space"], "world");
  EXPECT_EQ(h["positions"].size(), 3 * sc.scene->head_mesh().vertices().size());
  EXPECT_EQ(h["indices"].size(), 3 * sc.scene->head_mesh().triangles().size());
  EXPECT_EQ(Json::parse(cli.Get("/scenarios/" + scenario_id() + "/meshes/ventricles")->body)["space"], "model");
  EXPECT_EQ(cli.Get("/scenarios/" + scenario_id() + "/meshes/liver")->status, 404);
  auto& svc = server.service();
  const auto id = new_session(svc);
  EXPECT_EQ(svc.get_mesh(scenario_id(), "ventricles", id).status, 409);
  for (const auto& e : vtest::walkthrough(sc, 34)) svc.post_event(id, event_to_json(e).dump());
  const auto mapped = cli.Get("/scenarios/" + scenario_id() + "/meshes/ventricles?session=" + id);
  ASSERT_EQ(mapped->status, 200);
  const auto m = Json::parse(mapped->body);
  EXPECT_EQ(m["space"], "world");
  const auto t = transform_from_json(body(svc.get_session(id))["state"]["registration"]["transform"]);
  const Point3 v0 = t.apply(sc.scene->ventricle_mesh().vertices()[0]);
  EXPECT_NEAR(m["positions"][0].get<double>(), v0.x(), 1e-9);
  EXPECT_NEAR(m["positions"][1].get<double>(), v0.y(), 1e-9);
  EXPECT_NEAR(m["positions"][2].get<double>(), v0.z(), 1e-9);
}
