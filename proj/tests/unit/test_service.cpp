#include "support.hpp"

#include "reviver/eval.hpp"
#include "reviver/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <future>
#include <thread>

using namespace reviver;
using namespace testsupport;

namespace {

struct Reply {
    int status = 0;
    Json body;
};

class RunningService {
public:
    explicit RunningService(const fs::path& store, std::chrono::milliseconds latency = {}) {
        ServiceConfig config;
        config.store_dir = store;
        config.settings.mode = ModelMode::mock;
        config.settings.mock_latency = latency;
        config.settings.gateway.backoff_base = std::chrono::milliseconds(1);
        service_ = std::make_unique<ReviverService>(config);
        port_ = service_->bind("127.0.0.1", 0);
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { service_->run(); });
        service_->wait_until_ready();
    }
    ~RunningService() {
        service_->stop();
        thread_.join();
    }

    Reply post(const std::string& path, const Json& body) const {
        httplib::Client client("127.0.0.1", port_);
        client.set_read_timeout(std::chrono::seconds(30));
        return wrap(client.Post(path, body.dump(), "application/json"));
    }
    Reply get(const std::string& path) const {
        httplib::Client client("127.0.0.1", port_);
        return wrap(client.Get(path));
    }

    // Registers and builds a fixture collection; returns its id.
    std::string ready_collection(const fs::path& manifest_path) const {
        const auto created = post("/collections", {{"manifest_path", manifest_path.string()}});
        REQUIRE(created.status == 201);
        const std::string id = created.body["collection_id"];
        const auto job = post("/collections/" + id + "/build", Json::object());
        REQUIRE(job.status == 202);
        const auto done = wait_for_job(job.body["job_id"]);
        REQUIRE(done.body["status"] == "succeeded");
        return id;
    }

    Reply wait_for_job(const std::string& job_id) const {
        for (int i = 0; i < 500; ++i) {
            auto r = get("/jobs/" + job_id);
            const auto status = r.body.value("status", std::string{});
            if (status == "succeeded" || status == "failed") return r;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        FAIL("job did not finish: " << job_id);
        return {};
    }

private:
    static Reply wrap(const httplib::Result& r) {
        REQUIRE(r);
        Reply out;
        out.status = r->status;
        out.body = r->body.empty() ? Json() : Json::parse(r->body, nullptr, false);
        return out;
    }

    std::unique_ptr<ReviverService> service_;
    std::thread thread_;
    int port_ = 0;
};

// trip3 copied into a scratch directory so its photos can be removed.
fs::path scratch_trip3(const TempDir& dir) {
    const auto target = dir / "trip3";
    fs::copy(fixture("trip3"), target, fs::copy_options::recursive);
    return target / "manifest.json";
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("collection registration") {
    TempDir store;
    RunningService svc(store.path());
    SUBCASE("by path") {
        const auto r = svc.post("/collections", {{"manifest_path", fixture("trip3/manifest.json").string()}});
        CHECK(r.status == 201);
        CHECK(r.body["collection_id"] == "trip3");
        CHECK(fs::exists(store / "collections/trip3/manifest.json"));
    }
    SUBCASE("inline manifest with a base directory") {
        const auto manifest = parse_json_text(read_text_file(fixture("garden2/manifest.json")), "m");
        const auto r = svc.post("/collections", {{"manifest", manifest}, {"base_dir", fixture("garden2").string()}});
        CHECK(r.status == 201);
    }
    SUBCASE("invalid manifests are rejected with violations") {
        const auto r = svc.post("/collections", {{"manifest", {{"collection_id", "empty"}, {"photos", Json::array()}}}});
        CHECK(r.status == 422);
        CHECK(r.body["violations"][0]["invariant"] == "non-empty");
        CHECK(svc.post("/collections", Json::object()).status == 422);
    }
    SUBCASE("malformed body") {
        CHECK(svc.post("/collections", Json::array()).status == 400);
    }
}

TEST_CASE("build jobs") {
    TempDir store;
    RunningService svc(store.path());
    svc.post("/collections", {{"manifest_path", fixture("trip3/manifest.json").string()}});
    CHECK(svc.get("/collections/trip3/tree").status == 404);
    CHECK(svc.post("/collections/nope/build", Json::object()).status == 404);
    CHECK(svc.post("/collections/trip3/build", {{"threshold", 1.5}}).status == 400);
    CHECK(svc.post("/collections/trip3/build", {{"mode", "psychic"}}).status == 400);

    const auto job = svc.post("/collections/trip3/build", Json::object());
    REQUIRE(job.status == 202);
    const auto done = svc.wait_for_job(job.body["job_id"]);
    CHECK(done.body["status"] == "succeeded");
    CHECK(done.body["scene_count"] == 3);
    CHECK(done.body["detail_count"] == 9);

    const auto tree = svc.get("/collections/trip3/tree");
    CHECK(tree.status == 200);
    CHECK(tree.body["scenes"].size() == 3);
    CHECK(svc.get("/jobs/job-999").status == 404);

    SUBCASE("a failing build reports the step") {
        TempDir scratch;
        const auto manifest = scratch_trip3(scratch);
        fs::remove(manifest.parent_path() / "photos/p3.jpg");
        svc.post("/collections", {{"manifest_path", manifest.string()}});
        const auto failed = svc.wait_for_job(svc.post("/collections/trip3/build", Json::object()).body["job_id"]);
        CHECK(failed.body["status"] == "failed");
        CHECK(failed.body["step"] == "segmentation");
    }
}

TEST_CASE("a reviver session over HTTP") {
    TempDir store;
    RunningService svc(store.path());
    const auto id = svc.ready_collection(fixture("trip3/manifest.json"));

    const auto created = svc.post("/sessions", {{"collection_id", id}, {"engine", "reviver"}});
    REQUIRE(created.status == 201);
    const std::string sid = created.body["session_id"];
    CHECK(sid == "sess-1");
    CHECK(created.body["opening_message"].get<std::string>().find("student canteen") != std::string::npos);
    const std::string path = "/sessions/" + sid + "/message";

    auto r = svc.post(path, {{"text", "Okay"}});
    CHECK(r.status == 200);
    CHECK(r.body["guidance_kind"] == "activity_intro");
    CHECK(r.body["scene_id"] == 1);
    CHECK(r.body["phase"] == "exploring");

    SUBCASE("progress after accepting scene 2") {
        for (const char* text : {"Go on", "Go on", "Nice"}) svc.post(path, {{"text", text}});
        r = svc.post(path, {{"text", "Okay"}});
        CHECK(r.body["scene_id"] == 2);
        CHECK(r.body["progress"]["visited"] == 2);
        CHECK(r.body["progress"]["total"] == 3);
        const auto state = svc.get("/sessions/" + sid + "/state");
        CHECK(state.status == 200);
        CHECK(state.body["current_scene"] == 2);
        CHECK(state.body["engine"] == "reviver");
        CHECK_FALSE(state.body.contains("history"));
    }
    SUBCASE("a full session concludes, then refuses more input") {
        for (int i = 0; i < 30 && r.body.value("phase", std::string{}) != "concluded"; ++i) {
            r = svc.post(path, {{"text", i % 2 ? "Okay" : "Go on"}});
            REQUIRE(r.status == 200);
        }
        CHECK(r.body["phase"] == "concluded");
        CHECK(r.body["guidance_kind"] == "final_summary");
        CHECK(r.body["progress"]["visited"] == 3);
        const auto after = svc.post(path, {{"text", "Okay"}});
        CHECK(after.status == 409);
        CHECK(after.body["phase"] == "concluded");
    }
    SUBCASE("unknown ids and bad bodies") {
        CHECK(svc.post("/sessions/none/message", {{"text", "hi"}}).status == 404);
        CHECK(svc.get("/sessions/none/state").status == 404);
        CHECK(svc.post("/sessions", {{"collection_id", "none"}}).status == 404);
        CHECK(svc.post(path, {{"words", "hi"}}).status == 400);
        CHECK(svc.post("/sessions", {{"collection_id", id}, {"engine", "other"}}).status == 400);
        CHECK(svc.post("/sessions", {{"collection_id", id}, {"session_id", sid}}).status == 409);
    }
}

TEST_CASE("reviver sessions need a tree") {
    TempDir store;
    RunningService svc(store.path());
    svc.post("/collections", {{"manifest_path", fixture("garden2/manifest.json").string()}});
    CHECK(svc.post("/sessions", {{"collection_id", "garden2"}, {"engine", "reviver"}}).status == 409);
}

TEST_CASE("baseline sessions") {
    TempDir store;
    RunningService svc(store.path());
    svc.post("/collections", {{"manifest_path", fixture("trip3/manifest.json").string()}});
    const auto created = svc.post("/sessions", {{"collection_id", "trip3"}, {"engine", "baseline"}});
    REQUIRE(created.status == 201);
    const auto r = svc.post("/sessions/" + created.body["session_id"].get<std::string>() + "/message", {{"text", "the beach"}});
    CHECK(r.status == 200);
    CHECK(r.body["guidance_kind"] == "none");
    CHECK(r.body["scene_id"].is_null());
    // without a tree there is nothing to measure progress against
    CHECK(r.body["progress"]["total"] == 0);
}

TEST_CASE("concurrent turns on one session: one wins, one gets 409") {
    TempDir store;
    RunningService svc(store.path(), std::chrono::milliseconds(300));
    const auto id = svc.ready_collection(fixture("garden2/manifest.json"));
    const std::string sid = svc.post("/sessions", {{"collection_id", id}}).body["session_id"];
    const std::string path = "/sessions/" + sid + "/message";
    auto a = std::async(std::launch::async, [&] { return svc.post(path, {{"text", "Okay"}}).status; });
    auto b = std::async(std::launch::async, [&] { return svc.post(path, {{"text", "Okay"}}).status; });
    std::multiset<int> statuses{a.get(), b.get()};
    CHECK(statuses == std::multiset<int>{200, 409});
    const auto transcript = svc.get("/sessions/" + sid + "/transcript");
    CHECK(transcript.body["turns"].size() == 3);
}

TEST_CASE("gateway failure mid-session returns 502 with retry advice") {
    TempDir scratch, store;
    const auto manifest = scratch_trip3(scratch);
    RunningService svc(store.path());
    const auto id = svc.ready_collection(manifest);
    const std::string sid = svc.post("/sessions", {{"collection_id", id}}).body["session_id"];
    fs::remove(manifest.parent_path() / "photos/p2.jpg");
    const auto r = svc.post("/sessions/" + sid + "/message", {{"text", "Okay"}});
    CHECK(r.status == 502);
    CHECK(r.body.contains("retry_advice"));
    const auto state = svc.get("/sessions/" + sid + "/state");
    CHECK(state.body["phase"] == "opened");
    CHECK(state.body["visited_scenes"].empty());
}

TEST_CASE("a restarted service resumes sessions") {
    TempDir store;
    std::string sid;
    Json before;
    {
        RunningService svc(store.path());
        const auto id = svc.ready_collection(fixture("trip3/manifest.json"));
        sid = svc.post("/sessions", {{"collection_id", id}}).body["session_id"];
        svc.post("/sessions/" + sid + "/message", {{"text", "Okay"}});
        svc.post("/sessions/" + sid + "/message", {{"text", "Go on"}});
        before = svc.get("/sessions/" + sid + "/state").body;
    }
    RunningService svc(store.path());
    CHECK(svc.get("/sessions/" + sid + "/state").body == before);
    const auto r = svc.post("/sessions/" + sid + "/message", {{"text", "Go on"}});
    CHECK(r.status == 200);
    CHECK(r.body["scene_id"] == 1);
    CHECK(svc.get("/collections/trip3/tree").status == 200);
    const auto next = svc.post("/sessions", {{"collection_id", "trip3"}});
    CHECK(next.body["session_id"] != sid);
}

TEST_CASE("HTTP transcripts equal in-process scripted runs") {
    auto f = build_fixture("trip3");
    for (auto engine : {EngineKind::reviver, EngineKind::baseline}) {
        CAPTURE(to_string(engine));
        eval::RunOptions o;
        o.engine = engine;
        o.script.persona = eval::Persona::curious;
        o.script.max_turns = 40;
        o.seed = 3;
        const auto local = eval::run_scripted_session(f.tree, f.manifest, mock_gateway(fixture("trip3/manifest.json")), o);

        TempDir store;
        RunningService svc(store.path());
        const auto id = svc.ready_collection(fixture("trip3/manifest.json"));
        const std::string sid = eval::session_id_for(id, engine, o.seed);
        REQUIRE(svc.post("/sessions", {{"collection_id", id}, {"engine", to_string(engine)}, {"session_id", sid}}).status == 201);
        for (const auto& input : local.user_inputs) {
            const auto r = svc.post("/sessions/" + sid + "/message", {{"text", input}});
            REQUIRE(r.status == 200);
        }
        const auto remote = svc.get("/sessions/" + sid + "/transcript");
        CHECK(remote.body == to_json(local.transcript));
    }
}

}  // TEST_SUITE
