#include "support.hpp"

#include "reviver/eval.hpp"

#include <doctest.h>

using namespace reviver;
using namespace reviver::eval;
using namespace testsupport;

namespace {

SessionRun run(const std::string& name, EngineKind engine, Persona persona, std::uint64_t seed = 0) {
    auto f = build_fixture(name);
    RunOptions o;
    o.engine = engine;
    o.script.persona = persona;
    o.seed = seed;
    return run_scripted_session(f.tree, f.manifest, f.gateway, o);
}

ChatTurn bot_turn(int index, std::optional<SceneId> scene) {
    ChatTurn t;
    t.turn_index = index;
    t.speaker = Speaker::bot;
    t.annotations.selected_scene = scene;
    return t;
}

ChatTurn user_turn(int index) {
    ChatTurn t;
    t.turn_index = index;
    t.speaker = Speaker::user;
    return t;
}

AnnotationSet fixture_labels() {
    return AnnotationSet::from_json(parse_json_text(read_text_file(fixture("trip3/labels.json")), "labels"));
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("jaccard properties on random sets") {
    std::mt19937_64 rng(3);
    auto random_set = [&] {
        std::set<int> s;
        const auto n = rng() % 8;
        for (std::uint64_t i = 0; i < n; ++i) s.insert(static_cast<int>(rng() % 12));
        return s;
    };
    for (int i = 0; i < 500; ++i) {
        const auto a = random_set(), b = random_set();
        const double j = jaccard(a, b);
        CHECK(j == jaccard(b, a));
        CHECK(j >= 0.0);
        CHECK(j <= 1.0);
        CHECK(jaccard(a, a) == 1.0);
        CHECK((j == 1.0) == (a == b));
    }
    CHECK(jaccard(std::set<int>{1, 2}, std::set<int>{2, 3}) == doctest::Approx(1.0 / 3));
}

TEST_CASE("scene coverage") {
    auto f = build_fixture("trip3");
    Transcript t;
    t.turns = {bot_turn(0, std::nullopt), user_turn(1), bot_turn(2, 1), user_turn(3), bot_turn(4, 1)};
    CHECK(scene_coverage(t, *f.tree, EngineKind::reviver) == doctest::Approx(1.0 / 3));

    SUBCASE("monotone under appended turns") {
        double previous = scene_coverage(t, *f.tree, EngineKind::reviver);
        for (SceneId s : {3, 1, 2, 2}) {
            t.turns.push_back(user_turn(static_cast<int>(t.turns.size())));
            t.turns.push_back(bot_turn(static_cast<int>(t.turns.size()), s));
            const double now = scene_coverage(t, *f.tree, EngineKind::reviver);
            CHECK(now >= previous);
            previous = now;
        }
        CHECK(previous == 1.0);
    }
    SUBCASE("error turns are not counted and need no annotation") {
        t.turns.push_back(user_turn(5));
        auto err = bot_turn(6, std::nullopt);
        err.annotations.error = true;
        t.turns.push_back(err);
        CHECK(scene_coverage(t, *f.tree, EngineKind::reviver) == doctest::Approx(1.0 / 3));
    }
    SUBCASE("missing annotation names the turn") {
        t.turns[2].annotations.selected_scene.reset();
        try {
            scene_coverage(t, *f.tree, EngineKind::reviver);
            FAIL("expected MetricError");
        } catch (const MetricError& e) {
            CHECK(std::string(e.what()).find("turn 2") != std::string::npos);
        }
    }
    SUBCASE("baseline counts scenes of selected photos") {
        Transcript b;
        auto reply = bot_turn(2, std::nullopt);
        reply.annotations.selected_photos = std::vector<std::string>{"p1", "p5"};
        b.turns = {bot_turn(0, std::nullopt), user_turn(1), reply};
        CHECK(scene_coverage(b, *f.tree, EngineKind::baseline) == doctest::Approx(2.0 / 3));
        b.turns[2].annotations.selected_photos.reset();
        CHECK_THROWS_AS(scene_coverage(b, *f.tree, EngineKind::baseline), MetricError);
    }
}

TEST_CASE("memory ratio") {
    CHECK(memory_ratio("we went to the beach", "we went to the beach", "en") == 1.0);
    CHECK(memory_ratio("one two", "one two three four five", "en") == doctest::Approx(2.5));
    CHECK(memory_ratio("我们去海边", "我们去了海边玩", "zh-CN") == doctest::Approx(7.0 / 5));
    CHECK_THROWS_AS(memory_ratio("", "anything", "en"), MetricError);
    CHECK_THROWS_AS(memory_ratio("  \n", "anything", "en"), MetricError);
}

TEST_CASE("tree boundaries match the annotated segmentation") {
    auto f = build_fixture("trip3");
    const auto labels = fixture_labels();
    CHECK(tree_boundaries(*f.tree, *f.manifest) == labels.segmentation_points.at("trip3"));
    CHECK(jaccard(tree_boundaries(*f.tree, *f.manifest), labels.segmentation_points.at("trip3")) == 1.0);
}

TEST_CASE("statement accuracy") {
    auto f = build_fixture("trip3");
    auto labels = fixture_labels();

    SUBCASE("fixture labels") {
        const auto r = score_annotations(*f.tree, labels);
        CHECK(r.storyline_acc == 1.0);
        CHECK(r.activity_acc == 1.0);
        CHECK(r.detail_acc == doctest::Approx(8.0 / 9));
        CHECK(r.error_categories == std::map<std::string, int>{{"text misread", 1}});
    }
    SUBCASE("one of four details inaccurate in a single scene") {
        MemoryTree t = *f.tree;
        t.scenes = {t.scenes[2]};
        t.scenes[0].scene_id = 1;
        for (std::size_t i = 0; i < t.scenes[0].details.size(); ++i) {
            t.scenes[0].details[i].detail_id = make_detail_id(1, static_cast<int>(i) + 1);
        }
        t.storyline = {{1, t.scenes[0].summary_sentence}};
        AnnotationSet a;
        for (const auto& k : statement_keys(t)) a.statement_labels[k] = {};
        a.statement_labels["detail/s1-d2"] = {false, "hallucination"};
        const auto r = score_annotations(t, a);
        CHECK(r.detail_acc == doctest::Approx(0.75));
        CHECK(r.error_categories.at("hallucination") == 1);
    }
    SUBCASE("uncovered and unknown statements are listed") {
        labels.statement_labels.erase("detail/s2-d2");
        labels.statement_labels["detail/s9-d1"] = {};
        try {
            score_annotations(*f.tree, labels);
            FAIL("expected MetricError");
        } catch (const MetricError& e) {
            const std::string what = e.what();
            CHECK(what.find("detail/s2-d2") != std::string::npos);
            CHECK(what.find("detail/s9-d1 (unknown statement)") != std::string::npos);
        }
    }
    SUBCASE("bad label") {
        CHECK_THROWS_AS(AnnotationSet::from_json(Json::parse(R"({"statements": {"storyline/1": "maybe"}})")), ParseError);
    }
}

TEST_CASE("user scripts") {
    const auto s = UserScript::from_json(parse_json_text(read_text_file(fixture("scripts/trip3_fixed.json")), "s"));
    CHECK(s.persona == Persona::compliant);
    CHECK(s.steps.size() == 4);
    CHECK(s.max_turns == 200);
    CHECK(UserScript::from_json(s.to_json()).steps == s.steps);
    CHECK(persona_from_string("scene_hopper") == Persona::scene_hopper);
    CHECK_THROWS(persona_from_string("chatty"));
    CHECK(session_id_for("trip3", EngineKind::baseline, 7) == "trip3-baseline-7");
}

TEST_CASE("scripted sessions") {
    SUBCASE("compliant reviver covers everything and concludes") {
        const auto r = run("trip3", EngineKind::reviver, Persona::compliant);
        CHECK(r.metrics.scene_coverage == 1.0);
        CHECK(r.metrics.concluded);
        CHECK(r.metrics.end_reason == "concluded");
        CHECK(r.metrics.details_emitted == 9);
        CHECK(r.metrics.details_total == 9);
        CHECK(r.metrics.user_turns <= 1 + (2 + 2) + (2 + 3) + (2 + 4));
        CHECK(r.final_state->phase == Phase::concluded);
        CHECK(r.transcript.session_id == "trip3-reviver-0");
    }
    SUBCASE("baseline on the same inputs stays partial") {
        const auto r = run("trip3", EngineKind::baseline, Persona::compliant);
        CHECK(r.metrics.scene_coverage < 1.0);
        CHECK(r.metrics.end_reason == "turn_cap");
        CHECK(r.metrics.non_terminating);
        CHECK(r.metrics.user_turns == 200);
        CHECK_FALSE(r.final_state);
    }
    SUBCASE("scene hopper still reaches full coverage") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            CAPTURE(seed);
            const auto r = run("festival5", EngineKind::reviver, Persona::scene_hopper, seed);
            CHECK(r.metrics.scene_coverage == 1.0);
            CHECK(r.metrics.concluded);
        }
    }
    SUBCASE("curious user concludes") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            CAPTURE(seed);
            const auto r = run("trip3", EngineKind::reviver, Persona::curious, seed);
            CHECK(r.metrics.concluded);
            CHECK(r.metrics.scene_coverage == 1.0);
        }
    }
    SUBCASE("silent quitter stops early") {
        const auto r = run("trip3", EngineKind::reviver, Persona::silent_quitter, 4);
        CHECK(r.metrics.end_reason == "script_ended");
        CHECK(r.metrics.user_turns >= 1);
        CHECK(r.metrics.user_turns <= 3);
        CHECK_FALSE(r.metrics.concluded);
    }
    SUBCASE("same seed, same session") {
        const auto a = run("trip3", EngineKind::reviver, Persona::curious, 11);
        const auto b = run("trip3", EngineKind::reviver, Persona::curious, 11);
        CHECK(a.user_inputs == b.user_inputs);
        CHECK(transcript_to_json_text(a.transcript) == transcript_to_json_text(b.transcript));
    }
    SUBCASE("fixed steps run verbatim") {
        auto f = build_fixture("trip3");
        RunOptions o;
        o.script = UserScript::from_json(parse_json_text(read_text_file(fixture("scripts/trip3_fixed.json")), "s"));
        const auto r = run_scripted_session(f.tree, f.manifest, f.gateway, o);
        CHECK(r.user_inputs == o.script.steps);
        CHECK(r.metrics.end_reason == "script_ended");
        CHECK(r.metrics.user_turns == 4);
        CHECK(r.metrics.scene_coverage == doctest::Approx(2.0 / 3));
    }
}

TEST_CASE("metrics bundle JSON") {
    MetricsBundle m;
    m.scene_coverage = 0.5;
    m.end_reason = "turn_cap";
    const auto j = m.to_json();
    CHECK(j["scene_coverage"] == 0.5);
    CHECK(j["end_reason"] == "turn_cap");
    CHECK(j.contains("non_terminating"));
}

}  // TEST_SUITE
