#include "reviver/runtime.hpp"

#include "reviver/serialization.hpp"

#include <cstdlib>

namespace reviver {

std::string to_string(ModelMode m) { return m == ModelMode::mock ? "mock" : "live"; }

ModelMode model_mode_from_string(const std::string& s) {
    if (s == "mock") return ModelMode::mock;
    if (s == "live") return ModelMode::live;
    throw std::invalid_argument("model mode must be mock or live, got '" + s + "'");
}

DialogueConfig RuntimeSettings::dialogue_for(const std::string& locale) const {
    auto c = DialogueConfig::for_locale(locale);
    auto merge = [](std::vector<std::string>& into, const std::vector<std::string>& extra) {
        into.insert(into.end(), extra.begin(), extra.end());
    };
    merge(c.acceptance_phrases, acceptance_phrases);
    merge(c.rejection_phrases, rejection_phrases);
    merge(c.next_scene_phrases, next_scene_phrases);
    merge(c.switch_prefixes, switch_prefixes);
    return c;
}

RuntimeSettings load_settings(const std::optional<std::filesystem::path>& config_file) {
    RuntimeSettings s;
    if (config_file) {
        const auto j = parse_json_text(read_text_file(*config_file), config_file->string());
        if (j.contains("mode")) s.mode = model_mode_from_string(j.at("mode").get<std::string>());
        s.live.model_id = j.value("model_id", s.live.model_id);
        s.live.base_url = j.value("base_url", s.live.base_url);
        s.live.timeout = std::chrono::seconds(j.value("timeout_seconds", static_cast<int>(s.live.timeout.count())));
        s.gateway.temperature = j.value("temperature", s.gateway.temperature);
        s.gateway.max_concurrent_requests = j.value("max_concurrent_requests", s.gateway.max_concurrent_requests);
        s.gateway.transport_retries = j.value("transport_retries", s.gateway.transport_retries);
        s.gateway.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", static_cast<int>(s.gateway.backoff_base.count())));
        s.threshold = j.value("similarity_threshold", s.threshold);
        s.mock_latency = std::chrono::milliseconds(j.value("mock_latency_ms", 0));
        if (auto it = j.find("keywords"); it != j.end()) {
            auto list = [&](const char* key, std::vector<std::string>& into) {
                if (it->contains(key)) into = it->at(key).get<std::vector<std::string>>();
            };
            list("acceptance", s.acceptance_phrases);
            list("rejection", s.rejection_phrases);
            list("next_scene", s.next_scene_phrases);
            list("switch", s.switch_prefixes);
        }
    }
    if (const char* mode = std::getenv("REVIVER_MODEL_MODE"); mode != nullptr && *mode != '\0') {
        s.mode = model_mode_from_string(mode);
    }
    if (const char* key = std::getenv("REVIVER_API_KEY"); key != nullptr) s.live.api_key = key;
    if (!(s.threshold > 0.0 && s.threshold <= 1.0)) {
        throw std::invalid_argument("similarity_threshold must be in (0, 1]");
    }
    return s;
}

std::shared_ptr<ModelBackend> make_backend(const RuntimeSettings& settings, const std::filesystem::path& manifest_path) {
    if (settings.mode == ModelMode::mock) return MockBackend::for_manifest(manifest_path, settings.mock_latency);
    if (settings.live.api_key.empty()) {
        throw std::runtime_error("live mode needs REVIVER_API_KEY");
    }
    return std::make_shared<LiveBackend>(settings.live);
}

std::function<Instant()> build_clock(ModelMode mode) {
    if (mode == ModelMode::mock) return [] { return Instant{}; };
    return [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
}

std::filesystem::path manifest_path_for_tree(const MemoryTree& tree, const std::filesystem::path& tree_path,
                                             const std::optional<std::filesystem::path>& override_path) {
    if (override_path) return *override_path;
    if (tree.build_metadata.manifest_path.empty()) {
        throw std::runtime_error("tree " + tree_path.string() + " records no manifest path; pass --manifest");
    }
    std::filesystem::path p = tree.build_metadata.manifest_path;
    if (p.is_relative()) p = (tree_path.parent_path() / p).lexically_normal();
    return p;
}

std::string relative_to(const std::filesystem::path& target, const std::filesystem::path& base_dir) {
    std::error_code ec;
    const auto abs_target = std::filesystem::weakly_canonical(std::filesystem::absolute(target), ec);
    const auto abs_base = std::filesystem::weakly_canonical(std::filesystem::absolute(base_dir), ec);
    const auto rel = abs_target.lexically_relative(abs_base);
    return rel.empty() ? abs_target.generic_string() : rel.generic_string();
}

}  // namespace reviver
