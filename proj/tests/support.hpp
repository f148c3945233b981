#pragma once

#include "reviver/domain.hpp"
#include "reviver/model_gateway.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>

namespace testsupport {

namespace fs = std::filesystem;

fs::path fixtures_dir();
fs::path fixture(const std::string& relative);
fs::path placeholder_image();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

struct GeneratorOptions {
    int min_scenes = 1;
    int max_scenes = 6;
    int max_photos_per_scene = 4;
    int max_details = 5;
    bool exotic_text = false;  // mix in non-ASCII text
};

struct GeneratedCollection {
    std::shared_ptr<reviver::MemoryTree> tree;
    std::shared_ptr<reviver::CollectionManifest> manifest;
};

// A valid tree plus its manifest. Every photo points at one placeholder
// image. Detail descriptions use words found nowhere else in the tree.
GeneratedCollection random_collection(std::mt19937_64& rng, int index, const GeneratorOptions& options = {});

// Backend answering through a callback; counts calls.
class FunctionBackend : public reviver::ModelBackend {
public:
    using Handler = std::function<std::string(const reviver::ModelRequest&, int call_index)>;
    explicit FunctionBackend(Handler handler) : handler_(std::move(handler)) {}
    std::string complete(const reviver::ModelRequest& request) override {
        return handler_(request, calls_.fetch_add(1));
    }
    std::string model_id() const override { return "function-backend"; }
    int calls() const { return calls_.load(); }

private:
    Handler handler_;
    std::atomic<int> calls_{0};
};

reviver::GatewayConfig fast_gateway_config();

std::shared_ptr<reviver::ModelGateway> mock_gateway(const fs::path& manifest_path);
std::shared_ptr<reviver::ModelGateway> empty_mock_gateway();

struct LoadedFixture {
    std::shared_ptr<const reviver::MemoryTree> tree;
    std::shared_ptr<const reviver::CollectionManifest> manifest;
    std::shared_ptr<reviver::ModelGateway> gateway;
};

// Builds <name>/manifest.json with the mock gateway.
LoadedFixture build_fixture(const std::string& name);

}  // namespace testsupport
