#include "support.hpp"

#include "reviver/baseline.hpp"

#include <doctest.h>

#include <set>

using namespace reviver;
using namespace reviver::baseline;
using namespace testsupport;

namespace {

std::shared_ptr<CollectionManifest> prepared(const std::string& name, std::shared_ptr<ModelGateway> gw) {
    auto m = std::make_shared<CollectionManifest>(load_manifest(fixture(name + "/manifest.json")));
    REQUIRE(prepare_descriptions(*m, *gw).complete());
    return m;
}

CollectionManifest synthetic(std::size_t n) {
    CollectionManifest m;
    m.collection_id = "syn";
    m.title = "Synthetic";
    for (std::size_t i = 0; i < n; ++i) {
        PhotoRecord p;
        p.photo_id = "x" + std::to_string(i);
        p.manifest_index = static_cast<int>(i);
        p.source_path = placeholder_image();
        m.photos.push_back(p);
    }
    return m;
}

}  // namespace

TEST_SUITE("baseline") {

TEST_CASE("prepare_descriptions") {
    auto gw = mock_gateway(fixture("trip3/manifest.json"));
    auto m = load_manifest(fixture("trip3/manifest.json"));

    SUBCASE("eight readable photos give eight descriptions, rerun calls nothing") {
        const auto first = prepare_descriptions(m, *gw);
        CHECK(first.complete());
        CHECK(first.backend_calls == 8);
        for (const auto& p : m.photos) CHECK(p.cached_description.has_value());
        CHECK(*m.find("p7")->cached_description == "Two people walk barefoot along a sandy beach at sunset.");
        const auto second = prepare_descriptions(m, *gw);
        CHECK(second.backend_calls == 0);
    }
    SUBCASE("one unreadable photo is recorded and skipped") {
        m.photos[4].source_path = "/nonexistent/p5.jpg";
        const auto r = prepare_descriptions(m, *gw);
        REQUIRE(r.failures.size() == 1);
        CHECK(r.failures[0].photo_id == "p5");
        CHECK(r.failures[0].error.find("image unreadable") != std::string::npos);
        const auto described = std::count_if(m.photos.begin(), m.photos.end(),
                                             [](const PhotoRecord& p) { return p.cached_description.has_value(); });
        CHECK(described == 7);
        CHECK_THROWS_AS(BaselineChatbot(std::make_shared<CollectionManifest>(m), gw), DescriptionsMissingError);
    }
}

TEST_CASE("chatbot without descriptions is refused") {
    auto m = std::make_shared<CollectionManifest>(load_manifest(fixture("trip3/manifest.json")));
    CHECK_THROWS_AS(BaselineChatbot(m, empty_mock_gateway()), DescriptionsMissingError);
}

TEST_CASE("photo selection per turn") {
    SUBCASE("beach on the 40-photo album picks the five tagged photos") {
        auto gw = mock_gateway(fixture("album40/manifest.json"));
        BaselineChatbot bot(prepared("album40", gw), gw);
        std::vector<ChatTurn> history;
        const auto t = bot.reply(history, "Tell me about the beach");
        CHECK(t.annotations.selected_photos == std::vector<std::string>{"a07", "a12", "a19", "a26", "a33"});
        CHECK(t.text == "Looking at photos a07, a12, a19, a26, a33 (turn 1), I can tell you more if you ask.");
        CHECK(history.size() == 2);
        CHECK(history[0].speaker == Speaker::user);
    }
    SUBCASE("a four-photo collection always uses all four") {
        auto gw = mock_gateway(fixture("garden2/manifest.json"));
        BaselineChatbot bot(prepared("garden2", gw), gw);
        std::vector<ChatTurn> history;
        const auto t = bot.reply(history, "anything");
        CHECK(t.annotations.selected_photos == std::vector<std::string>{"g1", "g2", "g3", "g4"});
    }
    SUBCASE("no matching tag falls back to the default selection, padded to five") {
        auto gw = mock_gateway(fixture("trip3/manifest.json"));
        BaselineChatbot bot(prepared("trip3", gw), gw);
        std::vector<ChatTurn> history;
        const auto t = bot.reply(history, "Okay");
        CHECK(t.annotations.selected_photos == std::vector<std::string>{"p1", "p2", "p3", "p4", "p5"});
    }
}

TEST_CASE("opening and determinism") {
    auto gw = mock_gateway(fixture("trip3/manifest.json"));
    auto m = prepared("trip3", gw);
    BaselineChatbot bot(m, gw);
    CHECK(bot.opening_turn().text.find("8 photos") != std::string::npos);
    std::vector<ChatTurn> a, b;
    for (const char* input : {"Okay", "What is on the beach?", "dress", "Go on"}) {
        bot.reply(a, input);
        bot.reply(b, input);
    }
    CHECK(a == b);
}

TEST_CASE("property: selections are valid for any model output") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        auto m = std::make_shared<CollectionManifest>(synthetic(n));
        for (auto& p : m->photos) p.cached_description = "a photo";
        const std::uint64_t seed = rng();
        auto backend = std::make_shared<FunctionBackend>([n, seed](const ModelRequest& r, int call) -> std::string {
            if (r.task != Task::select_photos) return "reply";
            std::mt19937_64 local(seed + static_cast<std::uint64_t>(call));
            Json ids = Json::array();
            const std::size_t count = local() % 9;
            for (std::size_t i = 0; i < count; ++i) {
                // ids beyond n are hallucinated; repeats are likely
                ids.push_back("x" + std::to_string(local() % (n + 3)));
            }
            return ids.dump();
        });
        auto gw = std::make_shared<ModelGateway>(backend, fast_gateway_config());
        BaselineChatbot bot(m, gw);
        std::vector<ChatTurn> history;
        for (int turn = 0; turn < 3; ++turn) {
            const auto t = bot.reply(history, "hello there");
            REQUIRE_FALSE(t.annotations.error);
            const auto& sel = *t.annotations.selected_photos;
            CHECK(sel.size() == std::min<std::size_t>(5, n));
            CHECK(std::set<std::string>(sel.begin(), sel.end()).size() == sel.size());
            for (const auto& id : sel) CHECK(m->find(id) != nullptr);
        }
    }
}

}  // TEST_SUITE
