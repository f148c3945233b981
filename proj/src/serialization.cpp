#include "reviver/serialization.hpp"

#include <fstream>
#include <sstream>

namespace reviver {

namespace {

const Json& require(const Json& j, const char* key, const char* where) {
    if (!j.is_object()) {
        throw ParseError(std::string(where) + ": expected an object");
    }
    auto it = j.find(key);
    if (it == j.end()) {
        throw ParseError(std::string(where) + ": missing field '" + key + "'");
    }
    return *it;
}

template <typename T>
T get_as(const Json& j, const char* key, const char* where) {
    const Json& v = require(j, key, where);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(where) + ": field '" + key + "' has the wrong type");
    }
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_string()) {
        throw ParseError(std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
}

Json annotations_to_json(const TurnAnnotations& a) {
    Json j = Json::object();
    if (a.classified_as) j["classified_as"] = to_string(*a.classified_as);
    if (a.selected_scene) j["selected_scene"] = *a.selected_scene;
    if (a.guidance_kind) j["guidance_kind"] = to_string(*a.guidance_kind);
    if (a.emitted_detail_id) j["emitted_detail_id"] = *a.emitted_detail_id;
    if (a.selected_photos) j["selected_photos"] = *a.selected_photos;
    if (a.error) j["error"] = true;
    return j;
}

TurnAnnotations annotations_from_json(const Json& j) {
    TurnAnnotations a;
    if (!j.is_object()) {
        return a;
    }
    if (auto s = optional_string(j, "classified_as")) {
        a.classified_as = input_kind_from_string(*s);
        if (!a.classified_as) throw ParseError("unknown input class '" + *s + "'");
    }
    if (auto it = j.find("selected_scene"); it != j.end() && !it->is_null()) a.selected_scene = it->get<int>();
    if (auto s = optional_string(j, "guidance_kind")) {
        a.guidance_kind = guidance_kind_from_string(*s);
        if (!a.guidance_kind) throw ParseError("unknown guidance kind '" + *s + "'");
    }
    a.emitted_detail_id = optional_string(j, "emitted_detail_id");
    if (auto it = j.find("selected_photos"); it != j.end() && !it->is_null()) {
        a.selected_photos = it->get<std::vector<std::string>>();
    }
    a.error = j.value("error", false);
    return a;
}

}  // namespace

Json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError(what + ": malformed JSON at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what());
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const PhotoRecord& photo) {
    Json j;
    j["photo_id"] = photo.photo_id;
    j["source_path"] = photo.source_path.generic_string();
    if (photo.timestamp) j["timestamp"] = format_instant(*photo.timestamp);
    if (photo.cached_description) j["cached_description"] = *photo.cached_description;
    return j;
}

Json to_json(const CollectionManifest& m) {
    Json j;
    j["collection_id"] = m.collection_id;
    j["title"] = m.title;
    j["locale"] = m.locale;
    if (m.portrait_photo) j["portrait_photo"] = m.portrait_photo->generic_string();
    j["photos"] = Json::array();
    for (const auto& p : m.photos) j["photos"].push_back(to_json(p));
    return j;
}

Json to_json(const Scene& s) {
    Json activity;
    activity["sentence"] = s.activity.sentence;
    activity["aspects"] = Json::object();
    for (const auto& [aspect, value] : s.activity.aspects) activity["aspects"][to_string(aspect)] = value;
    activity["reasons"] = s.activity.reasons;
    activity["char_budget"] = s.activity.char_budget;

    Json j;
    j["scene_id"] = s.scene_id;
    j["photo_ids"] = s.photo_ids;
    j["activity"] = std::move(activity);
    j["details"] = Json::array();
    for (const auto& d : s.details) {
        j["details"].push_back({{"detail_id", d.detail_id}, {"category", to_string(d.category)}, {"description", d.description}});
    }
    j["summary_sentence"] = s.summary_sentence;
    return j;
}

Json to_json(const MemoryTree& t) {
    Json j;
    j["schema_version"] = kTreeSchemaVersion;
    j["collection_id"] = t.collection_id;
    j["storyline"] = Json::array();
    for (const auto& e : t.storyline) j["storyline"].push_back({{"scene_id", e.scene_id}, {"summary_sentence", e.summary_sentence}});
    j["scenes"] = Json::array();
    for (const auto& s : t.scenes) j["scenes"].push_back(to_json(s));
    j["build_metadata"] = {{"similarity_threshold", t.build_metadata.similarity_threshold},
                           {"model_id", t.build_metadata.model_id},
                           {"built_at", format_instant(t.build_metadata.built_at)},
                           {"manifest_path", t.build_metadata.manifest_path}};
    return j;
}

Json to_json(const ChatTurn& turn) {
    Json j;
    j["turn_index"] = turn.turn_index;
    j["speaker"] = to_string(turn.speaker);
    j["text"] = turn.text;
    j["annotations"] = annotations_to_json(turn.annotations);
    return j;
}

Json to_json(const Transcript& t) {
    Json j;
    j["session_id"] = t.session_id;
    j["engine"] = to_string(t.engine);
    j["collection_id"] = t.collection_id;
    j["turns"] = Json::array();
    for (const auto& turn : t.turns) j["turns"].push_back(to_json(turn));
    return j;
}

Json to_json(const SessionState& s) {
    Json j;
    j["schema_version"] = kSessionSchemaVersion;
    j["session_id"] = s.session_id;
    j["collection_id"] = s.collection_id;
    j["current_scene"] = s.current_scene;
    j["discussed_details"] = Json::object();
    for (const auto& [sid, ids] : s.discussed_details) j["discussed_details"][std::to_string(sid)] = ids;
    j["visited_scenes"] = s.visited_scenes;
    j["pending_suggestion"] = s.pending_suggestion ? Json(*s.pending_suggestion) : Json(nullptr);
    j["phase"] = to_string(s.phase);
    j["history"] = Json::array();
    for (const auto& turn : s.history) j["history"].push_back(to_json(turn));
    return j;
}

SceneActivity activity_from_json(const Json& j) {
    SceneActivity a;
    a.sentence = get_as<std::string>(j, "sentence", "activity");
    if (auto it = j.find("aspects"); it != j.end() && it->is_object()) {
        for (auto aspect : kAllAspects) {
            if (auto v = it->find(to_string(aspect)); v != it->end() && v->is_string() && !v->get<std::string>().empty()) {
                a.aspects[aspect] = v->get<std::string>();
            }
        }
    }
    if (auto it = j.find("reasons"); it != j.end() && it->is_array()) {
        for (const auto& r : *it) {
            if (r.is_string()) a.reasons.push_back(r.get<std::string>());
        }
    }
    a.char_budget = j.value("char_budget", 100);
    return a;
}

SceneDetail detail_from_json(const Json& j) {
    SceneDetail d;
    d.detail_id = j.value("detail_id", std::string{});
    const auto category = j.value("category", std::string{"others"});
    auto c = detail_category_from_string(category);
    if (!c) {
        throw ParseError("detail: unknown category '" + category + "'");
    }
    d.category = *c;
    d.description = get_as<std::string>(j, "description", "detail");
    return d;
}

ChatTurn turn_from_json(const Json& j) {
    ChatTurn t;
    t.turn_index = get_as<int>(j, "turn_index", "turn");
    const auto speaker = get_as<std::string>(j, "speaker", "turn");
    if (speaker != "user" && speaker != "bot") {
        throw ParseError("turn: unknown speaker '" + speaker + "'");
    }
    t.speaker = speaker == "user" ? Speaker::user : Speaker::bot;
    t.text = get_as<std::string>(j, "text", "turn");
    if (auto it = j.find("annotations"); it != j.end()) t.annotations = annotations_from_json(*it);
    return t;
}

MemoryTree tree_from_json(const Json& j) {
    const int version = get_as<int>(j, "schema_version", "tree");
    if (version != kTreeSchemaVersion) {
        throw SchemaVersionError("tree schema_version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kTreeSchemaVersion) + ")",
                                 version, kTreeSchemaVersion);
    }
    MemoryTree t;
    try {
        t.collection_id = get_as<std::string>(j, "collection_id", "tree");
        for (const auto& e : require(j, "storyline", "tree")) {
            t.storyline.push_back({get_as<int>(e, "scene_id", "storyline"), get_as<std::string>(e, "summary_sentence", "storyline")});
        }
        for (const auto& sj : require(j, "scenes", "tree")) {
            Scene s;
            s.scene_id = get_as<int>(sj, "scene_id", "scene");
            s.photo_ids = get_as<std::vector<std::string>>(sj, "photo_ids", "scene");
            s.activity = activity_from_json(require(sj, "activity", "scene"));
            for (const auto& dj : require(sj, "details", "scene")) s.details.push_back(detail_from_json(dj));
            s.summary_sentence = get_as<std::string>(sj, "summary_sentence", "scene");
            t.scenes.push_back(std::move(s));
        }
        const Json& meta = require(j, "build_metadata", "tree");
        t.build_metadata.similarity_threshold = get_as<double>(meta, "similarity_threshold", "build_metadata");
        t.build_metadata.model_id = get_as<std::string>(meta, "model_id", "build_metadata");
        t.build_metadata.built_at = parse_instant(get_as<std::string>(meta, "built_at", "build_metadata"));
        t.build_metadata.manifest_path = meta.value("manifest_path", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tree: ") + e.what());
    }
    return t;
}

SessionState session_from_json(const Json& j) {
    const int version = get_as<int>(j, "schema_version", "session");
    if (version != kSessionSchemaVersion) {
        throw SchemaVersionError("session schema_version " + std::to_string(version) + " is not supported",
                                 version, kSessionSchemaVersion);
    }
    SessionState s;
    try {
        s.session_id = get_as<std::string>(j, "session_id", "session");
        s.collection_id = get_as<std::string>(j, "collection_id", "session");
        s.current_scene = get_as<int>(j, "current_scene", "session");
        for (const auto& [key, ids] : require(j, "discussed_details", "session").items()) {
            s.discussed_details[std::stoi(key)] = ids.get<std::set<std::string>>();
        }
        s.visited_scenes = get_as<std::set<int>>(j, "visited_scenes", "session");
        if (auto it = j.find("pending_suggestion"); it != j.end() && !it->is_null()) s.pending_suggestion = it->get<int>();
        const auto phase = get_as<std::string>(j, "phase", "session");
        if (phase == "opened") s.phase = Phase::opened;
        else if (phase == "exploring") s.phase = Phase::exploring;
        else if (phase == "concluded") s.phase = Phase::concluded;
        else throw ParseError("session: unknown phase '" + phase + "'");
        for (const auto& tj : require(j, "history", "session")) s.history.push_back(turn_from_json(tj));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("session: ") + e.what());
    }
    return s;
}

std::string tree_to_json_text(const MemoryTree& tree) { return dump(to_json(tree)); }

MemoryTree tree_from_json_text(const std::string& text) { return tree_from_json(parse_json_text(text, "tree")); }

void save_tree(const MemoryTree& tree, const std::filesystem::path& path) { write_text_file(path, tree_to_json_text(tree)); }

MemoryTree load_tree(const std::filesystem::path& path) {
    try {
        return tree_from_json_text(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

CollectionManifest manifest_from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
    const Json j = parse_json_text(text, "manifest");
    CollectionManifest m;
    try {
        m.collection_id = get_as<std::string>(j, "collection_id", "manifest");
        m.title = j.value("title", m.collection_id);
        m.locale = j.value("locale", std::string{"en"});
        auto resolve = [&](const std::string& p) {
            std::filesystem::path path(p);
            return path.is_relative() && !base_dir.empty() ? (base_dir / path).lexically_normal() : path;
        };
        if (auto portrait = optional_string(j, "portrait_photo")) m.portrait_photo = resolve(*portrait);
        int index = 0;
        for (const auto& pj : require(j, "photos", "manifest")) {
            PhotoRecord p;
            p.photo_id = get_as<std::string>(pj, "photo_id", "photo");
            p.source_path = resolve(get_as<std::string>(pj, "source_path", "photo"));
            if (auto ts = optional_string(pj, "timestamp")) p.timestamp = parse_instant(*ts);
            p.cached_description = optional_string(pj, "cached_description");
            p.manifest_index = index++;
            m.photos.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    return m;
}

std::string manifest_to_json_text(const CollectionManifest& manifest) { return dump(to_json(manifest)); }

CollectionManifest load_manifest(const std::filesystem::path& path) {
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return manifest_from_json_text(read_text_file(path), base);
}

std::string transcript_to_json_text(const Transcript& transcript) { return dump(to_json(transcript)); }

Transcript transcript_from_json_text(const std::string& text) {
    const Json j = parse_json_text(text, "transcript");
    Transcript t;
    t.session_id = get_as<std::string>(j, "session_id", "transcript");
    t.engine = engine_kind_from_string(get_as<std::string>(j, "engine", "transcript"));
    t.collection_id = get_as<std::string>(j, "collection_id", "transcript");
    for (const auto& tj : require(j, "turns", "transcript")) t.turns.push_back(turn_from_json(tj));
    return t;
}

std::string session_to_json_text(const SessionState& state) { return dump(to_json(state)); }

SessionState session_from_json_text(const std::string& text) { return session_from_json(parse_json_text(text, "session")); }

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    // write-then-rename so readers never observe a partial file
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace reviver
