#pragma once

#include "reviver/domain.hpp"
#include "reviver/model_gateway.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reviver {

struct InputClass {
    InputKind kind = InputKind::statement;
    std::optional<std::string> keyword;  // switch_cmd only

    bool operator==(const InputClass&) const = default;
};

struct DialogueConfig {
    // Phrases are matched on tokens, so "Okay!" and "okay, sure" both hit "okay".
    std::vector<std::string> acceptance_phrases{"okay", "ok", "go on", "yes", "yeah", "sure", "alright", "all right",
                                                "sounds good", "let's go", "of course", "continue", "good"};
    std::vector<std::string> rejection_phrases{"no", "nope", "not yet", "not now", "later", "wait", "no thanks"};
    std::vector<std::string> next_scene_phrases{"next scene"};
    std::vector<std::string> switch_prefixes{"let's talk about", "lets talk about", "let us talk about"};
    std::vector<std::string> interrogative_openers{"what", "who", "whom", "whose", "where", "when", "why", "how",
                                                   "which", "is", "are", "was", "were", "do", "does", "did", "can",
                                                   "could", "would", "will", "should", "may", "tell me"};
    std::vector<std::string> question_suffixes;  // e.g. sentence-final particles
    double mention_threshold = 0.6;
    std::string separator = "\n\n";

    // English defaults plus the locale's command and question vocabulary.
    static DialogueConfig for_locale(const std::string& locale);
};

// Rule-based input classifier; a model-backed one can implement the same
// interface.
class InputClassifier {
public:
    virtual ~InputClassifier() = default;
    virtual InputClass classify(std::string_view text, bool suggestion_pending) const = 0;
};

class RuleClassifier : public InputClassifier {
public:
    explicit RuleClassifier(DialogueConfig config = {}) : config_(std::move(config)) {}
    InputClass classify(std::string_view text, bool suggestion_pending) const override;

private:
    DialogueConfig config_;
};

// Precedence: switch_cmd > next_scene_cmd > acceptance/rejection (only with a
// pending suggestion) > question > statement.
InputClass classify_input(std::string_view text, bool suggestion_pending, const DialogueConfig& config);

struct Guidance {
    GuidanceKind kind = GuidanceKind::none;
    std::string text;
    std::optional<std::string> emitted_detail_id;
    std::optional<SceneId> suggested_scene;
};

enum class SelectionRule { accepted_suggestion, next_scene, switch_match, switch_miss, unchanged };

struct SceneSelection {
    SceneId scene = 1;
    SelectionRule rule = SelectionRule::unchanged;
    std::string notice;  // user-facing note for clamped / unmatched commands
};

struct Progress {
    std::size_t visited = 0;
    std::size_t total = 0;
};

class InvalidTreeError : public std::runtime_error {
public:
    explicit InvalidTreeError(ValidationReport report)
        : std::runtime_error("memory tree failed validation:\n" + describe(report)), report_(std::move(report)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

class SessionConcludedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Proactive reminiscence engine: storyline opening, then per turn
// scene selection -> raw reply -> proactive guidance.
class ReviverEngine {
public:
    ReviverEngine(std::shared_ptr<const MemoryTree> tree, std::shared_ptr<const CollectionManifest> manifest,
                  std::shared_ptr<ModelGateway> gateway, DialogueConfig config = {},
                  std::shared_ptr<const InputClassifier> classifier = nullptr);

    struct Opening {
        SessionState state;
        ChatTurn turn;
    };
    Opening start_session(const std::string& session_id) const;

    // Runs one turn and appends the user and bot turns to state.history.
    // Gateway failures yield an error bot turn and leave the rest of the
    // state untouched. Throws SessionConcludedError on a concluded session.
    ChatTurn reply(SessionState& state, const std::string& user_text) const;

    InputClass classify(const SessionState& state, std::string_view text) const;
    SceneSelection select_scene(const SessionState& state, const InputClass& input) const;
    // First detail of `scene` neither discussed nor already mentioned in the
    // history (or in `extra_text`, e.g. this turn's raw reply).
    std::optional<SceneDetail> next_undiscussed_detail(const SessionState& state, SceneId scene,
                                                       std::string_view extra_text = {}) const;
    bool should_suggest_new_scene(const SessionState& state) const;
    std::optional<SceneId> next_scene_suggestion(const SessionState& state) const;
    Guidance compose_guidance(SessionState& state, SceneId scene, std::string_view raw_reply = {}) const;

    Progress progress(const SessionState& state) const;
    const MemoryTree& tree() const { return *tree_; }
    const CollectionManifest& manifest() const { return *manifest_; }
    const DialogueConfig& config() const { return config_; }

private:
    bool mentioned(const SessionState& state, const SceneDetail& detail, std::string_view extra_text) const;
    bool scene_exhausted(const SessionState& state, SceneId scene) const;
    std::vector<PhotoRecord> scene_photos(SceneId scene) const;
    std::string activity_text(const Scene& scene) const;

    std::shared_ptr<const MemoryTree> tree_;
    std::shared_ptr<const CollectionManifest> manifest_;
    std::shared_ptr<ModelGateway> gateway_;
    DialogueConfig config_;
    std::shared_ptr<const InputClassifier> classifier_;
};

std::string to_string(SelectionRule rule);

}  // namespace reviver
