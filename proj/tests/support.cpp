#include "support.hpp"

#include "reviver/runtime.hpp"
#include "reviver/tree_builder.hpp"

#include <chrono>

namespace testsupport {

using namespace reviver;

fs::path fixtures_dir() { return fs::path(REVIVER_FIXTURES_DIR); }
fs::path fixture(const std::string& relative) { return fixtures_dir() / relative; }
fs::path placeholder_image() { return fixture("trip3/photos/p1.jpg"); }

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("reviver-test-" + std::to_string(stamp) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Pronounceable letters-only words, unique per counter value.
std::string word(std::size_t n) {
    static const char* syllables[] = {"ka", "lo", "mi", "nu", "pe", "ri", "so", "ta", "ve", "zu", "bra", "dri",
                                      "glo", "shi", "tre", "vox"};
    std::string w;
    do {
        w += syllables[n % 16];
        n /= 16;
    } while (n > 0);
    return w + "x";
}

}  // namespace

GeneratedCollection random_collection(std::mt19937_64& rng, int index, const GeneratorOptions& o) {
    GeneratedCollection g;
    g.manifest = std::make_shared<CollectionManifest>();
    g.tree = std::make_shared<MemoryTree>();
    auto& m = *g.manifest;
    auto& t = *g.tree;
    m.collection_id = "rand-" + std::to_string(index);
    m.title = "Random collection " + std::to_string(index);
    t.collection_id = m.collection_id;

    std::size_t fresh = 1000 * static_cast<std::size_t>(index);
    auto words = [&](int count) {
        std::string s;
        for (int i = 0; i < count; ++i) s += (i ? " " : "") + word(fresh++);
        return s;
    };

    const int scenes = o.min_scenes + static_cast<int>(draw(rng, static_cast<std::size_t>(o.max_scenes - o.min_scenes + 1)));
    const Instant start = Instant{} + std::chrono::hours(24 * 365 * 40);
    int photo_no = 0;
    for (int s = 1; s <= scenes; ++s) {
        Scene scene;
        scene.scene_id = s;
        const int photos = 1 + static_cast<int>(draw(rng, static_cast<std::size_t>(o.max_photos_per_scene)));
        for (int p = 0; p < photos; ++p) {
            PhotoRecord rec;
            rec.photo_id = "r" + std::to_string(++photo_no);
            rec.source_path = placeholder_image();
            rec.manifest_index = photo_no - 1;
            // occasional equal timestamps exercise the stable tie-break
            rec.timestamp = start + std::chrono::minutes(photo_no - (draw(rng, 5) == 0 && p > 0 ? 1 : 0));
            m.photos.push_back(rec);
            scene.photo_ids.push_back(rec.photo_id);
        }
        scene.activity.sentence = "Scene " + std::to_string(s) + " " + words(3) + ".";
        for (auto a : kAllAspects) {
            if (draw(rng, 2) == 0) scene.activity.aspects[a] = words(2);
        }
        const int reasons = static_cast<int>(draw(rng, 3));
        for (int r = 0; r < reasons; ++r) scene.activity.reasons.push_back(words(4) + ".");
        const int details = static_cast<int>(draw(rng, static_cast<std::size_t>(o.max_details + 1)));
        for (int d = 1; d <= details; ++d) {
            SceneDetail detail;
            detail.detail_id = make_detail_id(s, d);
            detail.category = static_cast<DetailCategory>(draw(rng, 7));
            detail.description = "The " + words(3 + static_cast<int>(draw(rng, 4))) + ".";
            if (o.exotic_text && draw(rng, 2) == 0) detail.description += " 照片里有一只猫 \xF0\x9F\x90\x88 \"quoted\"\\";
            scene.details.push_back(detail);
        }
        scene.summary_sentence = "We " + words(4) + ".";
        t.storyline.push_back({s, scene.summary_sentence});
        t.scenes.push_back(std::move(scene));
    }
    t.build_metadata.model_id = "mock-fixture";
    t.build_metadata.similarity_threshold = 0.5;
    if (o.exotic_text) t.build_metadata.similarity_threshold = 0.05 + 0.9 * static_cast<double>(draw(rng, 1000)) / 1000.0;
    return g;
}

GatewayConfig fast_gateway_config() {
    GatewayConfig c;
    c.backoff_base = std::chrono::milliseconds(1);
    return c;
}

std::shared_ptr<ModelGateway> mock_gateway(const fs::path& manifest_path) {
    return std::make_shared<ModelGateway>(MockBackend::for_manifest(manifest_path), fast_gateway_config());
}

std::shared_ptr<ModelGateway> empty_mock_gateway() {
    return std::make_shared<ModelGateway>(std::make_shared<MockBackend>(), fast_gateway_config());
}

LoadedFixture build_fixture(const std::string& name) {
    const auto manifest_path = fixture(name + "/manifest.json");
    auto manifest = std::make_shared<CollectionManifest>(load_manifest(manifest_path));
    auto gateway = mock_gateway(manifest_path);
    BuildOptions options;
    options.clock = build_clock(ModelMode::mock);
    options.manifest_path = "manifest.json";
    if (manifest->portrait_photo) options.portrait = *manifest->portrait_photo;
    auto tree = std::make_shared<MemoryTree>(build_memory_tree(*manifest, *gateway, options));
    return {tree, manifest, gateway};
}

}  // namespace testsupport
