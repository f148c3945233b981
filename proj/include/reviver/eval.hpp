#pragma once

#include "reviver/dialogue.hpp"
#include "reviver/domain.hpp"
#include "reviver/model_gateway.hpp"
#include "reviver/serialization.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace reviver::eval {

// |a ∩ b| / |a ∪ b|; two empty sets agree perfectly (1.0).
template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& x : a) common += b.count(x);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reviver: a scene counts once it was selected for reply generation.
// Baseline: once any of its photos was selected. Counted across all turns.
double scene_coverage(const Transcript& transcript, const MemoryTree& tree, EngineKind engine);

double memory_ratio(std::string_view pre_narrative, std::string_view post_narrative, std::string_view locale);

// Cut indices (into the chronological photo order) implied by a tree.
std::set<std::size_t> tree_boundaries(const MemoryTree& tree, const CollectionManifest& manifest);

// --- statement accuracy ------------------------------------------------------

struct StatementLabel {
    bool correct = true;
    std::string reason;  // error category when inaccurate
};

struct AnnotationSet {
    // keys: "storyline/<scene_id>", "activity/<scene_id>", "detail/<detail_id>"
    std::map<std::string, StatementLabel> statement_labels;
    std::map<std::string, std::set<std::size_t>> segmentation_points;  // per collection_id

    static AnnotationSet from_json(const Json& j);
};

struct AccuracyReport {
    double storyline_acc = 0.0;
    double activity_acc = 0.0;
    double detail_acc = 0.0;
    std::map<std::string, int> error_categories;
};

std::vector<std::string> statement_keys(const MemoryTree& tree);

// Throws MetricError listing uncovered or unknown statements.
AccuracyReport score_annotations(const MemoryTree& tree, const AnnotationSet& annotations);

// --- scripted users ----------------------------------------------------------

enum class Persona { compliant, curious, scene_hopper, silent_quitter };
std::string to_string(Persona p);
Persona persona_from_string(const std::string& s);

struct UserScript {
    Persona persona = Persona::compliant;
    std::vector<std::string> steps;  // fixed inputs; empty = persona generator
    int max_turns = 200;

    static UserScript from_json(const Json& j);
    Json to_json() const;
};

struct PersonaContext {
    const MemoryTree* tree = nullptr;           // may be null for baseline runs
    const ReviverEngine* engine = nullptr;      // reviver runs only
    const SessionState* state = nullptr;        // reviver runs only
    const std::vector<ChatTurn>* history = nullptr;
    int user_turn = 0;  // 0-based index of the input being produced
};

class ScriptedUser {
public:
    ScriptedUser(UserScript script, std::uint64_t seed);
    // nullopt = the user quits.
    std::optional<std::string> next_input(const PersonaContext& ctx);

private:
    std::size_t pick(std::size_t n);
    std::optional<std::string> compliant(const PersonaContext& ctx) const;
    std::optional<std::string> curious(const PersonaContext& ctx);
    std::optional<std::string> scene_hopper(const PersonaContext& ctx);
    std::optional<std::string> silent_quitter(const PersonaContext& ctx);

    UserScript script_;
    std::mt19937_64 rng_;
    int hops_left_ = -1;
    int quit_after_ = -1;
    bool reached_last_ = false;
};

struct MetricsBundle {
    double scene_coverage = 0.0;
    int user_turns = 0;
    int bot_turns = 0;
    int details_emitted = 0;
    int details_total = 0;
    bool concluded = false;
    bool non_terminating = false;
    std::string end_reason;  // concluded | script_ended | turn_cap

    Json to_json() const;
};

struct SessionRun {
    Transcript transcript;
    MetricsBundle metrics;
    std::vector<std::string> user_inputs;
    std::optional<SessionState> final_state;  // reviver runs only
};

struct RunOptions {
    EngineKind engine = EngineKind::reviver;
    UserScript script;
    std::uint64_t seed = 0;
    DialogueConfig dialogue;
};

// The tree is used by the reviver engine and for the coverage metric; the
// baseline engine itself only sees the manifest.
SessionRun run_scripted_session(std::shared_ptr<const MemoryTree> tree, std::shared_ptr<const CollectionManifest> manifest,
                                std::shared_ptr<ModelGateway> gateway, const RunOptions& options);

std::string session_id_for(const std::string& collection_id, EngineKind engine, std::uint64_t seed);

}  // namespace reviver::eval
