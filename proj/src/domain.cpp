#include "reviver/domain.hpp"

#include "reviver/text.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace reviver {

Instant parse_instant(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char z = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &z) != 7 || z != 'Z') {
        throw ParseError("invalid UTC timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
        throw ParseError("invalid UTC timestamp '" + text + "'");
    }
    return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

std::string format_instant(Instant t) {
    const auto days = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd{days};
    const std::chrono::hh_mm_ss hms{t - days};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

const PhotoRecord* CollectionManifest::find(const std::string& photo_id) const {
    auto it = std::find_if(photos.begin(), photos.end(), [&](const PhotoRecord& p) { return p.photo_id == photo_id; });
    return it == photos.end() ? nullptr : &*it;
}

std::vector<PhotoRecord> chronological_order(const std::vector<PhotoRecord>& photos) {
    std::vector<PhotoRecord> out = photos;
    std::stable_sort(out.begin(), out.end(), [](const PhotoRecord& a, const PhotoRecord& b) {
        if (a.timestamp.has_value() != b.timestamp.has_value()) {
            return a.timestamp.has_value();
        }
        if (a.timestamp && *a.timestamp != *b.timestamp) {
            return *a.timestamp < *b.timestamp;
        }
        return a.manifest_index < b.manifest_index;
    });
    return out;
}

std::string to_string(Aspect a) {
    switch (a) {
        case Aspect::who: return "who";
        case Aspect::what: return "what";
        case Aspect::when: return "when";
        case Aspect::where: return "where";
    }
    return "?";
}

std::string to_string(DetailCategory c) {
    switch (c) {
        case DetailCategory::people: return "people";
        case DetailCategory::food: return "food";
        case DetailCategory::animals: return "animals";
        case DetailCategory::plants: return "plants";
        case DetailCategory::buildings: return "buildings";
        case DetailCategory::texts: return "texts";
        case DetailCategory::others: return "others";
    }
    return "others";
}

std::optional<DetailCategory> detail_category_from_string(const std::string& s) {
    for (auto c : {DetailCategory::people, DetailCategory::food, DetailCategory::animals, DetailCategory::plants,
                   DetailCategory::buildings, DetailCategory::texts, DetailCategory::others}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    return std::nullopt;
}

std::string make_detail_id(SceneId scene, int ordinal) {
    return "s" + std::to_string(scene) + "-d" + std::to_string(ordinal);
}

const SceneDetail* Scene::find_detail(const std::string& detail_id) const {
    auto it = std::find_if(details.begin(), details.end(), [&](const SceneDetail& d) { return d.detail_id == detail_id; });
    return it == details.end() ? nullptr : &*it;
}

const Scene* MemoryTree::find_scene(SceneId id) const {
    auto it = std::find_if(scenes.begin(), scenes.end(), [&](const Scene& s) { return s.scene_id == id; });
    return it == scenes.end() ? nullptr : &*it;
}

std::size_t MemoryTree::detail_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) {
        n += s.details.size();
    }
    return n;
}

std::optional<SceneId> MemoryTree::scene_of_photo(const std::string& photo_id) const {
    for (const auto& s : scenes) {
        if (std::find(s.photo_ids.begin(), s.photo_ids.end(), photo_id) != s.photo_ids.end()) {
            return s.scene_id;
        }
    }
    return std::nullopt;
}

std::string to_string(Speaker s) { return s == Speaker::user ? "user" : "bot"; }

std::string to_string(InputKind k) {
    switch (k) {
        case InputKind::acceptance: return "acceptance";
        case InputKind::rejection: return "rejection";
        case InputKind::next_scene_cmd: return "next_scene_cmd";
        case InputKind::switch_cmd: return "switch_cmd";
        case InputKind::question: return "question";
        case InputKind::statement: return "statement";
    }
    return "statement";
}

std::optional<InputKind> input_kind_from_string(const std::string& s) {
    for (auto k : {InputKind::acceptance, InputKind::rejection, InputKind::next_scene_cmd, InputKind::switch_cmd,
                   InputKind::question, InputKind::statement}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

std::string to_string(GuidanceKind k) {
    switch (k) {
        case GuidanceKind::storyline: return "storyline";
        case GuidanceKind::activity_intro: return "activity_intro";
        case GuidanceKind::detail: return "detail";
        case GuidanceKind::scene_suggestion: return "scene_suggestion";
        case GuidanceKind::final_summary: return "final_summary";
        case GuidanceKind::none: return "none";
    }
    return "none";
}

std::optional<GuidanceKind> guidance_kind_from_string(const std::string& s) {
    for (auto k : {GuidanceKind::storyline, GuidanceKind::activity_intro, GuidanceKind::detail,
                   GuidanceKind::scene_suggestion, GuidanceKind::final_summary, GuidanceKind::none}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

std::string to_string(EngineKind e) { return e == EngineKind::reviver ? "reviver" : "baseline"; }

EngineKind engine_kind_from_string(const std::string& s) {
    if (s == "reviver") {
        return EngineKind::reviver;
    }
    if (s == "baseline") {
        return EngineKind::baseline;
    }
    throw std::invalid_argument("unknown engine '" + s + "' (expected reviver|baseline)");
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::opened: return "opened";
        case Phase::exploring: return "exploring";
        case Phase::concluded: return "concluded";
    }
    return "opened";
}

bool SessionState::is_discussed(SceneId scene, const std::string& detail_id) const {
    auto it = discussed_details.find(scene);
    return it != discussed_details.end() && it->second.contains(detail_id);
}

// ---------------------------------------------------------------------------

namespace {

void add(ValidationReport& r, std::string invariant, std::string subject, std::string message) {
    r.push_back({std::move(invariant), std::move(subject), std::move(message)});
}

}  // namespace

ValidationReport validate_tree(const MemoryTree& tree, const CollectionManifest* manifest) {
    ValidationReport r;
    if (tree.scenes.empty()) {
        add(r, "non-empty", tree.collection_id, "tree has no scenes");
        return r;
    }

    for (std::size_t i = 0; i < tree.scenes.size(); ++i) {
        const auto& s = tree.scenes[i];
        const auto sid = std::to_string(s.scene_id);
        if (s.scene_id != static_cast<SceneId>(i + 1)) {
            add(r, "scene ids", sid, "scene at position " + std::to_string(i + 1) + " has id " + sid);
        }
        if (s.photo_ids.empty()) {
            add(r, "non-empty scene", sid, "scene " + sid + " has no photos");
        }
        std::unordered_set<std::string> ids;
        for (const auto& d : s.details) {
            if (!ids.insert(d.detail_id).second) {
                add(r, "detail id", d.detail_id, "detail id repeated in scene " + sid);
            }
        }
        if (text::utf8_length(s.activity.sentence) > static_cast<std::size_t>(s.activity.char_budget)) {
            add(r, "char budget", sid, "activity sentence exceeds " + std::to_string(s.activity.char_budget) + " characters");
        }
    }

    // storyline <-> scenes, same ids in the same order
    std::vector<SceneId> story_ids, scene_ids;
    for (const auto& e : tree.storyline) story_ids.push_back(e.scene_id);
    for (const auto& s : tree.scenes) scene_ids.push_back(s.scene_id);
    if (story_ids != scene_ids) {
        auto a = story_ids, b = scene_ids;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a == b) {
            add(r, "chronological order", tree.collection_id, "storyline order differs from scene order");
        } else {
            add(r, "storyline correspondence", tree.collection_id, "storyline entries do not match scenes 1:1");
        }
    }

    std::unordered_map<std::string, SceneId> owner;
    for (const auto& s : tree.scenes) {
        for (const auto& p : s.photo_ids) {
            auto [it, fresh] = owner.emplace(p, s.scene_id);
            if (!fresh) {
                add(r, "partition", p,
                    "photo " + p + " in scenes " + std::to_string(it->second) + " and " + std::to_string(s.scene_id));
            }
        }
    }

    if (manifest == nullptr) {
        return r;
    }
    if (manifest->collection_id != tree.collection_id) {
        add(r, "collection", tree.collection_id, "tree belongs to a different collection than the manifest");
    }
    const auto ordered = chronological_order(manifest->photos);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        position.emplace(ordered[i].photo_id, i);
        if (!owner.contains(ordered[i].photo_id)) {
            add(r, "partition", ordered[i].photo_id, "photo " + ordered[i].photo_id + " is not in any scene");
        }
    }
    for (const auto& [p, _] : owner) {
        if (!position.contains(p)) {
            add(r, "partition", p, "photo " + p + " is not in the manifest");
        }
    }

    std::optional<std::size_t> previous_start;
    for (const auto& s : tree.scenes) {
        std::vector<std::size_t> pos;
        for (const auto& p : s.photo_ids) {
            if (auto it = position.find(p); it != position.end()) {
                pos.push_back(it->second);
            }
        }
        if (pos.empty()) {
            continue;
        }
        for (std::size_t k = 1; k < pos.size(); ++k) {
            if (pos[k] != pos[k - 1] + 1) {
                add(r, "contiguity", std::to_string(s.scene_id),
                    "scene " + std::to_string(s.scene_id) + " is not a contiguous chronological run");
                break;
            }
        }
        if (previous_start && pos.front() < *previous_start) {
            add(r, "chronological order", std::to_string(s.scene_id),
                "scene " + std::to_string(s.scene_id) + " starts before its predecessor");
        }
        previous_start = pos.front();
    }
    return r;
}

ValidationReport validate_manifest(const CollectionManifest& manifest) {
    ValidationReport r;
    if (manifest.photos.empty()) {
        add(r, "non-empty", manifest.collection_id, "manifest has no photos");
    }
    std::unordered_set<std::string> ids;
    std::vector<int> indices;
    for (const auto& p : manifest.photos) {
        if (p.photo_id.empty()) {
            add(r, "photo id", "", "photo with empty id");
        } else if (!ids.insert(p.photo_id).second) {
            add(r, "photo id", p.photo_id, "duplicate photo id " + p.photo_id);
        }
        indices.push_back(p.manifest_index);
        if (manifest.portrait_photo && p.source_path == *manifest.portrait_photo) {
            add(r, "portrait", p.photo_id, "portrait photo is also a collection member");
        }
    }
    std::sort(indices.begin(), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] != static_cast<int>(i)) {
            add(r, "manifest index", manifest.collection_id, "manifest indices are not dense from 0");
            break;
        }
    }
    return r;
}

ValidationReport validate_session(const SessionState& state, const MemoryTree& tree) {
    ValidationReport r;
    if (tree.find_scene(state.current_scene) == nullptr) {
        add(r, "current scene", std::to_string(state.current_scene), "current scene not in tree");
    }
    if (state.pending_suggestion && state.visited_scenes.contains(*state.pending_suggestion)) {
        add(r, "pending suggestion", std::to_string(*state.pending_suggestion), "suggested scene already visited");
    }
    for (const auto& [sid, ids] : state.discussed_details) {
        const Scene* scene = tree.find_scene(sid);
        for (const auto& id : ids) {
            if (scene == nullptr || scene->find_detail(id) == nullptr) {
                add(r, "discussed details", id, "discussed detail not in scene " + std::to_string(sid));
            }
        }
    }
    if (state.phase == Phase::concluded && state.visited_scenes.size() != tree.scenes.size()) {
        add(r, "concluded", state.session_id, "concluded before visiting every scene");
    }
    return r;
}

std::string describe(const ValidationReport& report) {
    std::ostringstream out;
    for (const auto& v : report) {
        out << v.invariant << " [" << v.subject << "]: " << v.message << '\n';
    }
    return out.str();
}

}  // namespace reviver
