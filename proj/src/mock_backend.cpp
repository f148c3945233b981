#include "reviver/model_gateway.hpp"
#include "reviver/text.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <thread>

namespace reviver {

namespace {

std::vector<std::string> string_list(const Json& args, const char* key) {
    std::vector<std::string> out;
    if (auto it = args.find(key); it != args.end() && it->is_array()) {
        for (const auto& v : *it) out.push_back(v.get<std::string>());
    }
    return out;
}

std::string fenced(const Json& j) { return "```json\n" + j.dump() + "\n```"; }

std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

MockBackend::MockBackend(Json annotations, std::chrono::milliseconds latency)
    : annotations_(annotations.is_object() ? std::move(annotations) : Json::object()), latency_(latency) {}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& annotation_file,
                                                    std::chrono::milliseconds latency) {
    return std::make_shared<MockBackend>(parse_json_text(read_text_file(annotation_file), annotation_file.string()), latency);
}

std::shared_ptr<MockBackend> MockBackend::for_manifest(const std::filesystem::path& manifest_path,
                                                       std::chrono::milliseconds latency) {
    const auto file = manifest_path.parent_path() / "annotations.json";
    if (std::filesystem::exists(file)) {
        return from_file(file, latency);
    }
    return std::make_shared<MockBackend>(Json::object(), latency);
}

std::string MockBackend::complete(const ModelRequest& request) {
    if (latency_.count() > 0) {
        std::this_thread::sleep_for(latency_);
    }
    switch (request.task) {
        case Task::describe_photo: return describe(request.task_args);
        case Task::score_similarity: return score(request);
        case Task::extract_scene: return extract(request.task_args);
        case Task::gen_storyline: return storyline(request.task_args);
        case Task::gen_reply: return reply(request.task_args);
        case Task::select_photos: return select(request.task_args);
    }
    throw GatewayError(request.task, "mock", "unsupported task");
}

const Json* MockBackend::scene_for(const std::vector<std::string>& photo_ids) const {
    auto it = annotations_.find("scenes");
    if (it == annotations_.end()) {
        return nullptr;
    }
    for (const auto& scene : *it) {
        if (string_list(scene, "photo_ids") == photo_ids) {
            return &scene;
        }
    }
    return nullptr;
}

std::string MockBackend::describe(const Json& args) const {
    const auto id = args.value("photo_id", std::string{});
    if (auto photos = annotations_.find("photos"); photos != annotations_.end()) {
        if (auto p = photos->find(id); p != photos->end() && p->contains("description")) {
            return (*p)["description"].get<std::string>();
        }
    }
    return "A photo from the collection (" + id + ").";
}

std::string MockBackend::score(const ModelRequest& request) const {
    const auto ids = string_list(request.task_args, "photo_ids");
    if (request.image_refs.size() == 2) {
        std::error_code ec;
        if (request.image_refs[0] == request.image_refs[1] ||
            std::filesystem::equivalent(request.image_refs[0], request.image_refs[1], ec)) {
            return "similarity: 1.00 (identical image)";
        }
    }
    if (ids.size() != 2) {
        throw GatewayError(Task::score_similarity, "mock", "expected two photos");
    }
    const std::string key = ids[0] + "|" + ids[1];
    const std::string rev = ids[1] + "|" + ids[0];
    if (auto raw = annotations_.find("pair_replies"); raw != annotations_.end()) {
        if (raw->contains(key)) return (*raw)[key].get<std::string>();
        if (raw->contains(rev)) return (*raw)[rev].get<std::string>();
    }
    if (auto scores = annotations_.find("pair_scores"); scores != annotations_.end()) {
        if (scores->contains(key)) return "similarity: " + format_score((*scores)[key].get<double>());
        if (scores->contains(rev)) return "similarity: " + format_score((*scores)[rev].get<double>());
    }
    // Fall back to annotated scene membership.
    int scene_a = -1, scene_b = -1;
    if (auto scenes = annotations_.find("scenes"); scenes != annotations_.end()) {
        for (std::size_t i = 0; i < scenes->size(); ++i) {
            const auto members = string_list((*scenes)[i], "photo_ids");
            if (std::find(members.begin(), members.end(), ids[0]) != members.end()) scene_a = static_cast<int>(i);
            if (std::find(members.begin(), members.end(), ids[1]) != members.end()) scene_b = static_cast<int>(i);
        }
    }
    return scene_a == scene_b ? "similarity: 0.90 (same activity)" : "similarity: 0.10 (different activity)";
}

std::string MockBackend::extract(const Json& args) const {
    const auto ids = string_list(args, "photo_ids");
    if (const Json* scene = scene_for(ids)) {
        Json activity = scene->value("activity", Json::object());
        if (args.value("shorten", false) && scene->contains("short_sentence")) {
            activity["sentence"] = (*scene)["short_sentence"];
        }
        Json out = {{"activity", activity}, {"details", scene->value("details", Json::array())}};
        return "Here is the scene information.\n" + fenced(out);
    }
    // Unannotated scene: synthesize from photo descriptions.
    Json details = Json::array();
    for (const auto& id : ids) {
        details.push_back({{"category", "others"}, {"description", describe({{"photo_id", id}})}});
    }
    Json out = {{"activity",
                 {{"sentence", "A scene of " + std::to_string(ids.size()) + " photos."},
                  {"aspects", {{"what", "an event moment"}}},
                  {"reasons", Json::array({"The photos were taken one after another."})}}},
                {"details", details}};
    return fenced(out);
}

std::string MockBackend::storyline(const Json& args) const {
    Json summaries = Json::array();
    for (const auto& s : args.value("scenes", Json::array())) {
        const Json* scene = scene_for(string_list(s, "photo_ids"));
        if (scene != nullptr && scene->contains("summary")) {
            summaries.push_back((*scene)["summary"]);
        } else {
            summaries.push_back(s.value("sentence", std::string{"A scene."}));
        }
    }
    if (annotations_.value("storyline_drop_last", false) && !summaries.empty()) {
        summaries.erase(summaries.end() - 1);
    }
    return fenced({{"summaries", summaries}});
}

std::string MockBackend::reply(const Json& args) const {
    const auto input = args.value("user_input", std::string{});
    if (text::trim(input).empty()) {
        return "";
    }
    const int scene_id = args.value("scene_id", 0);
    const auto tokens = text::tokenize(input);
    const std::set<std::string> token_set(tokens.begin(), tokens.end());
    if (auto replies = annotations_.find("replies"); replies != annotations_.end()) {
        for (const auto& r : *replies) {
            if (r.value("scene", 0) != scene_id) continue;
            const auto kw = text::tokenize(r.value("keyword", std::string{}));
            if (!kw.empty() && std::all_of(kw.begin(), kw.end(), [&](const auto& t) { return token_set.contains(t); })) {
                return r.value("text", std::string{});
            }
        }
    }
    const int turn = args.value("turn_index", 0);
    if (scene_id == 0) {
        const auto ids = string_list(args, "photo_ids");
        std::string joined;
        for (const auto& id : ids) joined += (joined.empty() ? "" : ", ") + id;
        return "Looking at photos " + joined + " (turn " + std::to_string(turn) + "), I can tell you more if you ask.";
    }
    return "Mock reply for scene " + std::to_string(scene_id) + " at turn " + std::to_string(turn) + ".";
}

std::string MockBackend::select(const Json& args) const {
    const auto ids = string_list(args, "photo_ids");
    const std::size_t count = args.value("count", std::size_t{5});
    const auto wanted = text::content_tokens(args.value("user_input", std::string{}));

    std::vector<std::string> chosen;
    if (auto photos = annotations_.find("photos"); photos != annotations_.end() && !wanted.empty()) {
        for (const auto& id : ids) {
            if (chosen.size() == count) break;
            auto p = photos->find(id);
            if (p == photos->end()) continue;
            for (const auto& tag : string_list(*p, "tags")) {
                if (wanted.contains(text::to_lower_ascii(tag))) {
                    chosen.push_back(id);
                    break;
                }
            }
        }
    }
    if (chosen.empty()) {
        chosen = string_list(annotations_, "default_selection");
    }
    if (chosen.empty()) {
        chosen.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(count, ids.size())));
    }
    return "The most relevant photos are:\n" + fenced({{"photo_ids", chosen}});
}

}  // namespace reviver
