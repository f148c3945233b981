#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace reviver {

using Instant = std::chrono::sys_seconds;
using SceneId = int;

// "2023-05-01T10:00:00Z" <-> Instant. Only the UTC "Z" form is accepted.
Instant parse_instant(const std::string& text);
std::string format_instant(Instant t);

struct PhotoRecord {
    std::string photo_id;
    std::filesystem::path source_path;
    std::optional<Instant> timestamp;
    int manifest_index = 0;
    std::optional<std::string> cached_description;

    bool operator==(const PhotoRecord&) const = default;
};

struct CollectionManifest {
    std::string collection_id;
    std::string title;
    std::vector<PhotoRecord> photos;
    std::optional<std::filesystem::path> portrait_photo;
    std::string locale = "en";

    const PhotoRecord* find(const std::string& photo_id) const;

    bool operator==(const CollectionManifest&) const = default;
};

// Stable chronological order: timestamped photos first by time, then
// untimestamped ones; ties keep manifest order.
std::vector<PhotoRecord> chronological_order(const std::vector<PhotoRecord>& photos);

enum class Aspect { who, what, when, where };
inline constexpr Aspect kAllAspects[] = {Aspect::who, Aspect::what, Aspect::when, Aspect::where};
std::string to_string(Aspect a);

enum class DetailCategory { people, food, animals, plants, buildings, texts, others };
std::string to_string(DetailCategory c);
std::optional<DetailCategory> detail_category_from_string(const std::string& s);

struct SceneActivity {
    std::string sentence;
    std::map<Aspect, std::string> aspects;  // absent key = aspect not inferred
    std::vector<std::string> reasons;
    int char_budget = 100;

    bool operator==(const SceneActivity&) const = default;
};

struct SceneDetail {
    std::string detail_id;
    DetailCategory category = DetailCategory::others;
    std::string description;

    bool operator==(const SceneDetail&) const = default;
};

std::string make_detail_id(SceneId scene, int ordinal);

struct Scene {
    SceneId scene_id = 0;
    std::vector<std::string> photo_ids;
    SceneActivity activity;
    std::vector<SceneDetail> details;
    std::string summary_sentence;

    const SceneDetail* find_detail(const std::string& detail_id) const;

    bool operator==(const Scene&) const = default;
};

struct StorylineEntry {
    SceneId scene_id = 0;
    std::string summary_sentence;

    bool operator==(const StorylineEntry&) const = default;
};

struct BuildMetadata {
    double similarity_threshold = 0.5;
    std::string model_id;
    Instant built_at{};
    // Manifest the tree was built from, so sessions can reach photo paths.
    std::string manifest_path;

    bool operator==(const BuildMetadata&) const = default;
};

struct MemoryTree {
    std::string collection_id;
    std::vector<StorylineEntry> storyline;
    std::vector<Scene> scenes;
    BuildMetadata build_metadata;

    const Scene* find_scene(SceneId id) const;
    std::size_t detail_count() const;
    // Scene owning a photo, if any.
    std::optional<SceneId> scene_of_photo(const std::string& photo_id) const;

    bool operator==(const MemoryTree&) const = default;
};

enum class Speaker { user, bot };
std::string to_string(Speaker s);

enum class InputKind { acceptance, rejection, next_scene_cmd, switch_cmd, question, statement };
std::string to_string(InputKind k);
std::optional<InputKind> input_kind_from_string(const std::string& s);

enum class GuidanceKind { storyline, activity_intro, detail, scene_suggestion, final_summary, none };
std::string to_string(GuidanceKind k);
std::optional<GuidanceKind> guidance_kind_from_string(const std::string& s);

struct TurnAnnotations {
    // user turns
    std::optional<InputKind> classified_as;
    // bot turns
    std::optional<SceneId> selected_scene;
    std::optional<GuidanceKind> guidance_kind;
    std::optional<std::string> emitted_detail_id;
    std::optional<std::vector<std::string>> selected_photos;  // baseline only
    bool error = false;

    bool operator==(const TurnAnnotations&) const = default;
};

struct ChatTurn {
    int turn_index = 0;
    Speaker speaker = Speaker::user;
    std::string text;
    TurnAnnotations annotations;

    bool operator==(const ChatTurn&) const = default;
};

enum class EngineKind { reviver, baseline };
std::string to_string(EngineKind e);
EngineKind engine_kind_from_string(const std::string& s);

struct Transcript {
    std::string session_id;
    EngineKind engine = EngineKind::reviver;
    std::string collection_id;
    std::vector<ChatTurn> turns;

    bool operator==(const Transcript&) const = default;
};

enum class Phase { opened, exploring, concluded };
std::string to_string(Phase p);

struct SessionState {
    std::string session_id;
    std::string collection_id;
    SceneId current_scene = 1;
    std::map<SceneId, std::set<std::string>> discussed_details;
    std::set<SceneId> visited_scenes;
    std::optional<SceneId> pending_suggestion;
    Phase phase = Phase::opened;
    std::vector<ChatTurn> history;

    bool is_discussed(SceneId scene, const std::string& detail_id) const;

    bool operator==(const SessionState&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string invariant;  // "partition", "chronological order", ...
    std::string subject;    // offending id
    std::string message;
};

using ValidationReport = std::vector<Violation>;

// Checks MemoryTree invariants. Manifest-dependent invariants (partition
// coverage, contiguity, chronology) are only checked when a manifest is given.
ValidationReport validate_tree(const MemoryTree& tree, const CollectionManifest* manifest = nullptr);
ValidationReport validate_manifest(const CollectionManifest& manifest);
ValidationReport validate_session(const SessionState& state, const MemoryTree& tree);

std::string describe(const ValidationReport& report);

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int kTreeSchemaVersion = 1;
inline constexpr int kSessionSchemaVersion = 1;

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaVersionError : public std::runtime_error {
public:
    SchemaVersionError(std::string what, int found, int expected)
        : std::runtime_error(std::move(what)), found_(found), expected_(expected) {}
    int found() const { return found_; }
    int expected() const { return expected_; }

private:
    int found_;
    int expected_;
};

std::string tree_to_json_text(const MemoryTree& tree);
MemoryTree tree_from_json_text(const std::string& text);
void save_tree(const MemoryTree& tree, const std::filesystem::path& path);
MemoryTree load_tree(const std::filesystem::path& path);

// Relative source paths are resolved against the manifest's directory.
CollectionManifest manifest_from_json_text(const std::string& text, const std::filesystem::path& base_dir = {});
std::string manifest_to_json_text(const CollectionManifest& manifest);
CollectionManifest load_manifest(const std::filesystem::path& path);

std::string transcript_to_json_text(const Transcript& transcript);
Transcript transcript_from_json_text(const std::string& text);

std::string session_to_json_text(const SessionState& state);
SessionState session_from_json_text(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace reviver
