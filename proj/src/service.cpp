#include "reviver/service.hpp"

#include "reviver/baseline.hpp"
#include "reviver/dialogue.hpp"
#include "reviver/serialization.hpp"
#include "reviver/tree_builder.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

namespace reviver {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRetryAdvice = "The model backend failed after retries. Resend the same message; the failed turn is kept in the transcript.";

bool safe_id(const std::string& id) {
    static const std::regex pattern("^[A-Za-z0-9_.-]{1,128}$");
    return std::regex_match(id, pattern) && id != "." && id != "..";
}

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, Json extra = Json::object()) {
    extra["error"] = message;
    send_json(res, status, extra);
}

Json violations_json(const ValidationReport& report) {
    Json arr = Json::array();
    for (const auto& v : report) arr.push_back({{"invariant", v.invariant}, {"subject", v.subject}, {"message", v.message}});
    return arr;
}

}  // namespace

struct ReviverService::Impl {
    struct Collection {
        std::mutex mu;
        std::string id;
        fs::path dir;
        fs::path source_manifest;  // original location; the mock reads annotations next to it
        std::shared_ptr<CollectionManifest> manifest;
        std::shared_ptr<const MemoryTree> tree;
        std::shared_ptr<ModelGateway> gateway;
        std::shared_ptr<const ReviverEngine> engine;
    };

    struct Session {
        std::mutex turn;  // the per-session turn token
        std::string collection_id;
        EngineKind engine = EngineKind::reviver;
        SessionState state;
    };

    struct Job {
        std::string job_id;
        std::string collection_id;
        std::string status = "queued";  // queued | running | succeeded | failed
        std::optional<double> threshold;
        ModelMode mode = ModelMode::mock;
        Json result = Json::object();
    };

    ServiceConfig config;
    httplib::Server server;

    std::mutex collections_mu;
    std::map<std::string, std::shared_ptr<Collection>> collections;

    std::mutex sessions_mu;
    std::map<std::string, std::shared_ptr<Session>> sessions;
    std::uint64_t next_session = 1;

    std::mutex jobs_mu;
    std::condition_variable jobs_cv;
    std::map<std::string, Job> jobs;
    std::deque<std::string> job_queue;
    std::uint64_t next_job = 1;
    bool stopping = false;
    std::vector<std::thread> workers;

    explicit Impl(ServiceConfig c) : config(std::move(c)) {
        fs::create_directories(config.store_dir / "collections");
        fs::create_directories(config.store_dir / "sessions");
        for (const auto& entry : fs::directory_iterator(config.store_dir / "sessions")) {
            const auto stem = entry.path().stem().string();
            if (stem.rfind("sess-", 0) == 0) {
                try {
                    next_session = std::max<std::uint64_t>(next_session, std::stoull(stem.substr(5)) + 1);
                } catch (const std::exception&) {
                }
            }
        }
        for (int i = 0; i < std::max(1, config.build_workers); ++i) workers.emplace_back([this] { worker_loop(); });
        routes();
    }

    ~Impl() {
        {
            std::lock_guard lock(jobs_mu);
            stopping = true;
        }
        jobs_cv.notify_all();
        for (auto& w : workers) w.join();
    }

    fs::path collection_dir(const std::string& id) const { return config.store_dir / "collections" / id; }
    fs::path session_file(const std::string& id) const { return config.store_dir / "sessions" / (id + ".json"); }

    // --- persistence -------------------------------------------------------

    void persist_collection(const Collection& c) const {
        fs::create_directories(c.dir);
        write_text_file(c.dir / "manifest.json", manifest_to_json_text(*c.manifest));
        Json meta{{"source_manifest", c.source_manifest.generic_string()}};
        write_text_file(c.dir / "collection.json", dump(meta));
    }

    void persist_session(const std::string& id, const Session& s) const {
        Json j{{"engine", to_string(s.engine)}, {"collection_id", s.collection_id}, {"state", to_json(s.state)}};
        write_text_file(session_file(id), dump(j));
    }

    std::shared_ptr<Collection> find_collection(const std::string& id) {
        if (!safe_id(id)) return nullptr;
        std::lock_guard lock(collections_mu);
        if (auto it = collections.find(id); it != collections.end()) return it->second;
        const auto dir = collection_dir(id);
        if (!fs::exists(dir / "manifest.json")) return nullptr;
        auto c = std::make_shared<Collection>();
        c->id = id;
        c->dir = dir;
        c->manifest = std::make_shared<CollectionManifest>(load_manifest(dir / "manifest.json"));
        const auto meta = parse_json_text(read_text_file(dir / "collection.json"), "collection.json");
        c->source_manifest = meta.value("source_manifest", (dir / "manifest.json").string());
        if (fs::exists(dir / "tree.json")) c->tree = std::make_shared<MemoryTree>(load_tree(dir / "tree.json"));
        collections[id] = c;
        return c;
    }

    std::shared_ptr<Session> find_session(const std::string& id) {
        if (!safe_id(id)) return nullptr;
        std::lock_guard lock(sessions_mu);
        if (auto it = sessions.find(id); it != sessions.end()) return it->second;
        const auto file = session_file(id);
        if (!fs::exists(file)) return nullptr;
        const auto j = parse_json_text(read_text_file(file), file.string());
        auto s = std::make_shared<Session>();
        s->engine = engine_kind_from_string(j.at("engine").get<std::string>());
        s->collection_id = j.at("collection_id").get<std::string>();
        s->state = session_from_json(j.at("state"));
        sessions[id] = s;
        return s;
    }

    std::shared_ptr<ModelGateway> gateway_for(Collection& c, ModelMode mode) {
        if (mode == config.settings.mode) {
            if (!c.gateway) c.gateway = std::make_shared<ModelGateway>(make_backend(config.settings, c.source_manifest), config.settings.gateway);
            return c.gateway;
        }
        auto settings = config.settings;
        settings.mode = mode;
        return std::make_shared<ModelGateway>(make_backend(settings, c.source_manifest), settings.gateway);
    }

    // --- build jobs ----------------------------------------------------------

    void worker_loop() {
        for (;;) {
            std::string job_id;
            {
                std::unique_lock lock(jobs_mu);
                jobs_cv.wait(lock, [&] { return stopping || !job_queue.empty(); });
                if (stopping) return;
                job_id = job_queue.front();
                job_queue.pop_front();
                jobs[job_id].status = "running";
            }
            run_job(job_id);
        }
    }

    void run_job(const std::string& job_id) {
        Job job;
        {
            std::lock_guard lock(jobs_mu);
            job = jobs[job_id];
        }
        Json result = Json::object();
        std::string status = "failed";
        try {
            auto c = find_collection(job.collection_id);
            if (!c) throw std::runtime_error("collection " + job.collection_id + " disappeared");
            std::shared_ptr<CollectionManifest> manifest;
            std::shared_ptr<ModelGateway> gateway;
            {
                std::lock_guard lock(c->mu);
                manifest = c->manifest;
                gateway = gateway_for(*c, job.mode);
            }
            BuildOptions options;
            options.threshold = job.threshold.value_or(config.settings.threshold);
            options.clock = build_clock(job.mode);
            options.manifest_path = "manifest.json";
            options.max_parallel = config.settings.gateway.max_concurrent_requests;
            if (manifest->portrait_photo) options.portrait = *manifest->portrait_photo;
            auto tree = std::make_shared<MemoryTree>(build_memory_tree(*manifest, *gateway, options));
            const auto report = validate_tree(*tree, manifest.get());
            save_tree(*tree, c->dir / "tree.json");
            {
                std::lock_guard lock(c->mu);
                c->tree = tree;
                c->engine.reset();
            }
            status = "succeeded";
            result["scene_count"] = tree->scenes.size();
            result["detail_count"] = tree->detail_count();
            result["validation_report"] = violations_json(report);
        } catch (const BuildError& e) {
            result["error"] = e.what();
            result["step"] = e.step();
            result["subject"] = e.subject();
        } catch (const std::exception& e) {
            result["error"] = e.what();
        }
        std::lock_guard lock(jobs_mu);
        jobs[job_id].status = status;
        jobs[job_id].result = std::move(result);
    }

    // --- routes ----------------------------------------------------------------

    static std::optional<Json> body_json(const httplib::Request& req, httplib::Response& res) {
        try {
            auto j = parse_json_text(req.body.empty() ? "{}" : req.body, "request body");
            if (!j.is_object()) throw ParseError("request body must be a JSON object");
            return j;
        } catch (const std::exception& e) {
            send_error(res, 400, e.what());
            return std::nullopt;
        }
    }

    void routes() {
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            } catch (...) {
                send_error(res, 500, "internal error");
            }
        });

        server.Post("/collections", [this](const httplib::Request& req, httplib::Response& res) { post_collection(req, res); });
        server.Post(R"(/collections/([^/]+)/build)", [this](const httplib::Request& req, httplib::Response& res) { post_build(req, res); });
        server.Get(R"(/collections/([^/]+)/tree)", [this](const httplib::Request& req, httplib::Response& res) { get_tree(req, res); });
        server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) { get_job(req, res); });
        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) { post_session(req, res); });
        server.Post(R"(/sessions/([^/]+)/message)", [this](const httplib::Request& req, httplib::Response& res) { post_message(req, res); });
        server.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) { get_state(req, res); });
        server.Get(R"(/sessions/([^/]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) { get_transcript(req, res); });
    }

    void post_collection(const httplib::Request& req, httplib::Response& res) {
        auto body = body_json(req, res);
        if (!body) return;
        CollectionManifest manifest;
        fs::path source;
        try {
            if (body->contains("manifest_path")) {
                source = fs::absolute(body->at("manifest_path").get<std::string>());
                manifest = load_manifest(source);
            } else if (body->contains("manifest")) {
                const fs::path base = fs::absolute(body->value("base_dir", std::string{"."}));
                source = base / "manifest.json";
                manifest = manifest_from_json_text(body->at("manifest").dump(), base);
            } else {
                send_error(res, 422, "body needs 'manifest' or 'manifest_path'");
                return;
            }
        } catch (const std::exception& e) {
            send_error(res, 422, e.what());
            return;
        }
        const auto report = validate_manifest(manifest);
        if (!report.empty() || !safe_id(manifest.collection_id)) {
            Json extra{{"violations", violations_json(report)}};
            send_error(res, 422, report.empty() ? "collection_id must be a simple identifier" : "invalid manifest", extra);
            return;
        }
        auto c = std::make_shared<Collection>();
        c->id = manifest.collection_id;
        c->dir = collection_dir(c->id);
        c->source_manifest = source;
        c->manifest = std::make_shared<CollectionManifest>(std::move(manifest));
        std::error_code ec;
        fs::remove(c->dir / "tree.json", ec);
        persist_collection(*c);
        {
            std::lock_guard lock(collections_mu);
            collections[c->id] = c;
        }
        send_json(res, 201, {{"collection_id", c->id}});
    }

    void post_build(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        auto body = body_json(req, res);
        if (!body) return;
        if (!find_collection(id)) {
            send_error(res, 404, "unknown collection " + id);
            return;
        }
        Job job;
        job.collection_id = id;
        try {
            if (body->contains("threshold")) {
                const double t = body->at("threshold").get<double>();
                if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("threshold must be in (0, 1]");
                job.threshold = t;
            }
            job.mode = body->contains("mode") ? model_mode_from_string(body->at("mode").get<std::string>()) : config.settings.mode;
        } catch (const std::exception& e) {
            send_error(res, 400, e.what());
            return;
        }
        {
            std::lock_guard lock(jobs_mu);
            job.job_id = "job-" + std::to_string(next_job++);
            jobs[job.job_id] = job;
            job_queue.push_back(job.job_id);
        }
        jobs_cv.notify_one();
        send_json(res, 202, {{"job_id", job.job_id}});
    }

    void get_job(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        std::lock_guard lock(jobs_mu);
        auto it = jobs.find(id);
        if (it == jobs.end()) {
            send_error(res, 404, "unknown job " + id);
            return;
        }
        Json j{{"job_id", it->second.job_id}, {"collection_id", it->second.collection_id}, {"status", it->second.status}};
        for (const auto& [k, v] : it->second.result.items()) j[k] = v;
        send_json(res, 200, j);
    }

    void get_tree(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        auto c = find_collection(id);
        if (!c) {
            send_error(res, 404, "unknown collection " + id);
            return;
        }
        std::shared_ptr<const MemoryTree> tree;
        {
            std::lock_guard lock(c->mu);
            tree = c->tree;
        }
        if (!tree) {
            send_error(res, 404, "collection " + id + " has no tree yet");
            return;
        }
        res.status = 200;
        res.set_content(tree_to_json_text(*tree), "application/json");
    }

    Progress progress_of(const Session& s, const std::shared_ptr<const MemoryTree>& tree) const {
        Progress p;
        if (!tree) return p;
        p.total = tree->scenes.size();
        if (s.engine == EngineKind::reviver) {
            p.visited = s.state.visited_scenes.size();
            return p;
        }
        std::set<SceneId> touched;
        for (const auto& t : s.state.history) {
            if (!t.annotations.selected_photos) continue;
            for (const auto& id : *t.annotations.selected_photos) {
                if (auto scene = tree->scene_of_photo(id)) touched.insert(*scene);
            }
        }
        p.visited = touched.size();
        return p;
    }

    void post_session(const httplib::Request& req, httplib::Response& res) {
        auto body = body_json(req, res);
        if (!body) return;
        const std::string collection_id = body->value("collection_id", std::string{});
        EngineKind engine = EngineKind::reviver;
        try {
            engine = engine_kind_from_string(body->value("engine", std::string{"reviver"}));
        } catch (const std::exception& e) {
            send_error(res, 400, e.what());
            return;
        }
        auto c = find_collection(collection_id);
        if (!c) {
            send_error(res, 404, "unknown collection " + collection_id);
            return;
        }

        auto session = std::make_shared<Session>();
        session->collection_id = collection_id;
        session->engine = engine;
        std::string session_id;
        {
            std::lock_guard lock(sessions_mu);
            if (body->contains("session_id")) {
                session_id = body->at("session_id").get<std::string>();
                if (!safe_id(session_id)) {
                    send_error(res, 400, "session_id must be a simple identifier");
                    return;
                }
                if (sessions.contains(session_id) || fs::exists(session_file(session_id))) {
                    send_error(res, 409, "session " + session_id + " already exists");
                    return;
                }
            } else {
                do {
                    session_id = "sess-" + std::to_string(next_session++);
                } while (fs::exists(session_file(session_id)));
            }
            sessions[session_id] = session;  // reserves the id
        }
        auto release = [&] {
            std::lock_guard lock(sessions_mu);
            sessions.erase(session_id);
        };

        try {
            std::lock_guard lock(c->mu);
            if (engine == EngineKind::reviver) {
                if (!c->tree) {
                    release();
                    send_error(res, 409, "collection " + collection_id + " has no tree; build it first");
                    return;
                }
                if (!c->engine) {
                    c->engine = std::make_shared<ReviverEngine>(c->tree, c->manifest, gateway_for(*c, config.settings.mode),
                                                                config.settings.dialogue_for(c->manifest->locale));
                }
                session->state = c->engine->start_session(session_id).state;
            } else {
                auto gateway = gateway_for(*c, config.settings.mode);
                auto prepared = std::make_shared<CollectionManifest>(*c->manifest);
                const auto prep = baseline::prepare_descriptions(*prepared, *gateway);
                if (!prep.complete()) {
                    release();
                    send_error(res, 502, "photo descriptions failed: " + prep.failures.front().photo_id + ": " + prep.failures.front().error,
                               {{"retry_advice", kRetryAdvice}});
                    return;
                }
                if (prep.backend_calls > 0) {
                    c->manifest = prepared;
                    c->engine.reset();
                    persist_collection(*c);
                }
                baseline::BaselineChatbot bot(c->manifest, gateway);
                session->state.session_id = session_id;
                session->state.collection_id = collection_id;
                session->state.history.push_back(bot.opening_turn());
            }
        } catch (const std::exception& e) {
            release();
            send_error(res, 502, e.what(), {{"retry_advice", kRetryAdvice}});
            return;
        }
        persist_session(session_id, *session);
        send_json(res, 201, {{"session_id", session_id}, {"opening_message", session->state.history.front().text}});
    }

    void post_message(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        auto session = find_session(id);
        if (!session) {
            send_error(res, 404, "unknown session " + id);
            return;
        }
        auto body = body_json(req, res);
        if (!body) return;
        if (!body->contains("text") || !body->at("text").is_string()) {
            send_error(res, 400, "body needs a 'text' string");
            return;
        }
        const std::string text = body->at("text").get<std::string>();

        std::unique_lock token(session->turn, std::try_to_lock);
        if (!token.owns_lock()) {
            send_error(res, 409, "another turn is in progress on this session");
            return;
        }
        if (session->state.phase == Phase::concluded) {
            send_error(res, 409, "session has concluded", {{"phase", "concluded"}});
            return;
        }
        auto c = find_collection(session->collection_id);
        if (!c) {
            send_error(res, 404, "collection " + session->collection_id + " no longer exists");
            return;
        }

        std::shared_ptr<const MemoryTree> tree;
        ChatTurn bot;
        try {
            if (session->engine == EngineKind::reviver) {
                std::shared_ptr<const ReviverEngine> engine;
                {
                    std::lock_guard lock(c->mu);
                    if (!c->tree) {
                        send_error(res, 409, "collection has no tree");
                        return;
                    }
                    if (!c->engine) {
                        c->engine = std::make_shared<ReviverEngine>(c->tree, c->manifest, gateway_for(*c, config.settings.mode),
                                                                    config.settings.dialogue_for(c->manifest->locale));
                    }
                    engine = c->engine;
                    tree = c->tree;
                }
                bot = engine->reply(session->state, text);
            } else {
                std::shared_ptr<CollectionManifest> manifest;
                std::shared_ptr<ModelGateway> gateway;
                {
                    std::lock_guard lock(c->mu);
                    manifest = c->manifest;
                    gateway = gateway_for(*c, config.settings.mode);
                    tree = c->tree;
                }
                baseline::BaselineChatbot chatbot(manifest, gateway);
                bot = chatbot.reply(session->state.history, text);
            }
        } catch (const SessionConcludedError&) {
            send_error(res, 409, "session has concluded", {{"phase", "concluded"}});
            return;
        }
        persist_session(id, *session);

        if (bot.annotations.error) {
            send_error(res, 502, "model gateway failure", {{"retry_advice", kRetryAdvice}, {"reply", bot.text}});
            return;
        }
        const auto p = progress_of(*session, tree);
        Json out{{"reply", bot.text},
                 {"guidance_kind", to_string(bot.annotations.guidance_kind.value_or(GuidanceKind::none))},
                 {"scene_id", bot.annotations.selected_scene ? Json(*bot.annotations.selected_scene) : Json(nullptr)},
                 {"progress", {{"visited", p.visited}, {"total", p.total}}},
                 {"phase", to_string(session->state.phase)}};
        send_json(res, 200, out);
    }

    // Readers take the turn token too, so they never observe a half-applied turn.
    template <typename F>
    void read_session(const httplib::Request& req, httplib::Response& res, F&& render) {
        const std::string id = req.matches[1];
        auto session = find_session(id);
        if (!session) {
            send_error(res, 404, "unknown session " + id);
            return;
        }
        std::lock_guard token(session->turn);
        render(*session);
    }

    void get_state(const httplib::Request& req, httplib::Response& res) {
        read_session(req, res, [&](const Session& s) {
            Json j = to_json(s.state);
            j.erase("history");
            std::shared_ptr<const MemoryTree> tree;
            if (auto c = find_collection(s.collection_id)) {
                std::lock_guard lock(c->mu);
                tree = c->tree;
            }
            const auto p = progress_of(s, tree);
            j["engine"] = to_string(s.engine);
            j["turn_count"] = s.state.history.size();
            j["progress"] = {{"visited", p.visited}, {"total", p.total}};
            send_json(res, 200, j);
        });
    }

    void get_transcript(const httplib::Request& req, httplib::Response& res) {
        read_session(req, res, [&](const Session& s) {
            Transcript t;
            t.session_id = s.state.session_id;
            t.engine = s.engine;
            t.collection_id = s.collection_id;
            t.turns = s.state.history;
            res.status = 200;
            res.set_content(transcript_to_json_text(t), "application/json");
        });
    }
};

ReviverService::ReviverService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
ReviverService::~ReviverService() { stop(); }

int ReviverService::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ReviverService::run() { return impl_->server.listen_after_bind(); }

void ReviverService::stop() {
    if (impl_) impl_->server.stop();
}

bool ReviverService::wait_until_ready() const {
    impl_->server.wait_until_ready();
    return impl_->server.is_running();
}

}  // namespace reviver
