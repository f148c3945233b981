#pragma once

#include "reviver/domain.hpp"
#include "reviver/serialization.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reviver {

enum class Task { describe_photo, score_similarity, extract_scene, gen_storyline, gen_reply, select_photos };
std::string to_string(Task t);

struct ModelParams {
    double temperature = 0.8;
    int max_output_chars = 4000;
};

struct ModelRequest {
    Task task = Task::describe_photo;
    std::string prompt_text;
    std::vector<std::filesystem::path> image_refs;
    ModelParams params;
    // Structured inputs the prompt was rendered from. Live backends ignore
    // this; the fixture mock answers from it.
    Json task_args = Json::object();
};

struct ModelResponse {
    std::string text;
    std::optional<Json> parsed;
    long raw_latency_ms = 0;
};

// Transient backend failure (network, 429, 5xx). Retried by the gateway.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GatewayError : public std::runtime_error {
public:
    GatewayError(Task task, std::string task_id, const std::string& message)
        : std::runtime_error(to_string(task) + " [" + task_id + "]: " + message),
          task_(task),
          task_id_(std::move(task_id)) {}
    Task task() const { return task_; }
    const std::string& task_id() const { return task_id_; }

private:
    Task task_;
    std::string task_id_;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    // Returns the model's raw text reply. Throws TransportError on transient
    // failures and GatewayError on permanent ones.
    virtual std::string complete(const ModelRequest& request) = 0;
    virtual std::string model_id() const = 0;
};

struct SceneInfo {
    std::vector<std::string> photo_ids;
    SceneActivity activity;
    std::vector<SceneDetail> details;  // detail_id holds "d{ordinal}" until the builder assigns scene ids
};

struct PhotoDescription {
    std::string photo_id;
    std::string text;
};

struct GatewayConfig {
    double temperature = 0.8;
    int transport_retries = 2;
    std::chrono::milliseconds backoff_base{250};
    int parse_reprompts = 1;
    int max_concurrent_requests = 4;
    int activity_char_budget = 100;
    std::size_t max_selected_photos = 5;
};

// All multimodal-model traffic goes through here: prompt rendering, retry,
// structured-output parsing, and the photo description cache.
class ModelGateway {
public:
    ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayConfig config = {});

    std::string describe_photo(const PhotoRecord& photo, const std::string& locale);
    double score_similarity(const PhotoRecord& a, const PhotoRecord& b);
    SceneInfo extract_scene_info(std::span<const PhotoRecord> photos,
                                 const std::optional<std::filesystem::path>& portrait);
    std::vector<std::string> generate_storyline(std::span<const SceneInfo> scenes);
    // scene_id 0 means "no scene" (baseline replies).
    std::string generate_raw_reply(const std::string& user_input, std::span<const ChatTurn> history,
                                   std::span<const PhotoRecord> scene_photos, SceneId scene_id, int turn_index,
                                   const std::optional<std::filesystem::path>& portrait = std::nullopt);
    std::vector<std::string> select_photos(const std::string& user_input, std::span<const ChatTurn> history,
                                           std::span<const PhotoDescription> descriptions);

    // Raw call with transport retries and the concurrency cap.
    ModelResponse call(ModelRequest request, const std::string& task_id);

    std::string model_id() const { return backend_->model_id(); }
    std::size_t backend_calls() const { return calls_.load(); }
    const GatewayConfig& config() const { return config_; }

private:
    ModelResponse call_parsed(ModelRequest request, const std::string& task_id,
                              const std::function<std::optional<Json>(const std::string&)>& parse);
    void require_readable(Task task, const std::string& task_id, const std::filesystem::path& path) const;

    std::shared_ptr<ModelBackend> backend_;
    GatewayConfig config_;
    std::counting_semaphore<> slots_;
    std::atomic<std::size_t> calls_{0};
    std::mutex cache_mutex_;
    std::map<std::string, std::string> description_cache_;
};

// --- structured-output parsing (exposed for tests) -------------------------

// First fenced ```json block, else the first balanced {...} / [...] in text.
std::optional<Json> extract_json_block(const std::string& text);
// "similarity: 0.72 because..." -> 0.72, clamped to [0,1].
std::optional<double> parse_similarity(const std::string& text);
std::optional<SceneInfo> parse_scene_info(const std::string& text);
std::optional<std::vector<std::string>> parse_storyline(const std::string& text);
std::optional<std::vector<std::string>> parse_photo_ids(const std::string& text);

// Cuts an activity sentence to `budget` code points at the last sentence
// boundary, falling back to the last word boundary.
std::string enforce_char_budget(const std::string& sentence, std::size_t budget);

// --- backends ---------------------------------------------------------------

// Deterministic backend answering from a fixture annotation file. Holds no
// mutable state after construction.
class MockBackend : public ModelBackend {
public:
    explicit MockBackend(Json annotations = Json::object(), std::chrono::milliseconds latency = {});
    static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& annotation_file,
                                                  std::chrono::milliseconds latency = {});
    // <manifest dir>/annotations.json when present, else an empty annotation set.
    static std::shared_ptr<MockBackend> for_manifest(const std::filesystem::path& manifest_path,
                                                     std::chrono::milliseconds latency = {});

    std::string complete(const ModelRequest& request) override;
    std::string model_id() const override { return "mock-fixture"; }

private:
    std::string describe(const Json& args) const;
    std::string score(const ModelRequest& request) const;
    std::string extract(const Json& args) const;
    std::string storyline(const Json& args) const;
    std::string reply(const Json& args) const;
    std::string select(const Json& args) const;
    const Json* scene_for(const std::vector<std::string>& photo_ids) const;

    Json annotations_;
    std::chrono::milliseconds latency_;
};

struct LiveBackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_id = "gpt-4o";
    std::string api_key;
    std::chrono::seconds timeout{120};
};

// Chat-completions style HTTP JSON endpoint with inline base64 images.
class LiveBackend : public ModelBackend {
public:
    explicit LiveBackend(LiveBackendConfig config);
    std::string complete(const ModelRequest& request) override;
    std::string model_id() const override { return config_.model_id; }

    // Request body for a model request (exposed for tests).
    Json request_body(const ModelRequest& request) const;

private:
    LiveBackendConfig config_;
};

std::string base64_encode(std::string_view bytes);

}  // namespace reviver
