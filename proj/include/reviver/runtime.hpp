#pragma once

#include "reviver/dialogue.hpp"
#include "reviver/domain.hpp"
#include "reviver/model_gateway.hpp"
#include "reviver/tree_builder.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

// Wiring shared by the CLI and the HTTP service.
namespace reviver {

enum class ModelMode { mock, live };
std::string to_string(ModelMode m);
ModelMode model_mode_from_string(const std::string& s);

struct RuntimeSettings {
    ModelMode mode = ModelMode::mock;
    LiveBackendConfig live;
    GatewayConfig gateway;
    double threshold = 0.5;
    std::chrono::milliseconds mock_latency{0};
    // Extra command phrases merged into the locale defaults.
    std::vector<std::string> acceptance_phrases;
    std::vector<std::string> rejection_phrases;
    std::vector<std::string> next_scene_phrases;
    std::vector<std::string> switch_prefixes;

    DialogueConfig dialogue_for(const std::string& locale) const;
};

// Defaults, then the JSON config file (when given), then REVIVER_MODEL_MODE
// and REVIVER_API_KEY from the environment.
RuntimeSettings load_settings(const std::optional<std::filesystem::path>& config_file);

// Mock: answers from <manifest dir>/annotations.json.
std::shared_ptr<ModelBackend> make_backend(const RuntimeSettings& settings, const std::filesystem::path& manifest_path);

// Builds are byte-stable in mock mode: built_at is the epoch.
std::function<Instant()> build_clock(ModelMode mode);

// Manifest referenced by a tree file's build metadata (relative to the tree
// file's directory), or `override_path` when given.
std::filesystem::path manifest_path_for_tree(const MemoryTree& tree, const std::filesystem::path& tree_path,
                                             const std::optional<std::filesystem::path>& override_path = std::nullopt);

// `target` expressed relative to `base_dir` when possible.
std::string relative_to(const std::filesystem::path& target, const std::filesystem::path& base_dir);

}  // namespace reviver
