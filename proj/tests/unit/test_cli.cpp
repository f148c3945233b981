#include "support.hpp"

#include "reviver/eval.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace reviver;
using namespace testsupport;

namespace {

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

// Runs the CLI with arguments; stdout goes to `out`. Returns the exit status.
int run_cli(const std::string& args, const fs::path& out, const std::optional<fs::path>& in = std::nullopt) {
    std::string cmd = "env -u REVIVER_MODEL_MODE " + quoted(REVIVER_CLI_PATH) + " --log-level warn " + args;
    if (in) cmd += " < " + quoted(*in);
    cmd += " > " + quoted(out) + " 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("validate") {
    TempDir dir;
    CHECK(run_cli("validate --tree " + quoted(fixture("trip3/tree.json")), dir / "out.txt") == 0);

    auto j = parse_json_text(read_text_file(fixture("trip3/tree.json")), "tree");
    j["storyline"].erase(j["storyline"].size() - 1);
    write_text_file(dir / "broken.json", dump(j));
    CHECK(run_cli("validate --tree " + quoted(dir / "broken.json") + " --manifest " + quoted(fixture("trip3/manifest.json")),
                  dir / "out.txt") == 1);
    CHECK(read_text_file(dir / "out.txt").find("storyline correspondence") != std::string::npos);
}

TEST_CASE("build is byte-stable in mock mode") {
    TempDir dir;
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    const auto manifest = quoted(fixture("trip3/manifest.json"));
    REQUIRE(run_cli("build --manifest " + manifest + " --out " + quoted(dir / "a/tree.json"), dir / "log.txt") == 0);
    REQUIRE(run_cli("build --manifest " + manifest + " --out " + quoted(dir / "b/tree.json"), dir / "log.txt") == 0);
    const auto a = read_text_file(dir / "a/tree.json");
    CHECK(a == read_text_file(dir / "b/tree.json"));
    const auto tree = tree_from_json_text(a);
    CHECK(tree.scenes.size() == 3);
    CHECK(run_cli("validate --tree " + quoted(dir / "a/tree.json"), dir / "log.txt") == 0);
    CHECK(run_cli("build --manifest " + quoted(dir / "missing.json") + " --out " + quoted(dir / "c.json"), dir / "log.txt") != 0);
}

TEST_CASE("chat replays stdin and writes the same transcript as an in-process run") {
    auto f = build_fixture("trip3");
    eval::RunOptions o;
    o.script.persona = eval::Persona::compliant;
    o.script.steps = {"Okay", "What color is the dress?", "Next scene", "Go on", "Let's talk about the canteen"};
    const auto local = eval::run_scripted_session(f.tree, f.manifest, f.gateway, o);

    TempDir dir;
    std::string input;
    for (const auto& s : o.script.steps) input += s + "\n";
    write_text_file(dir / "in.txt", input);
    REQUIRE(run_cli("chat --tree " + quoted(fixture("trip3/tree.json")) + " --transcript " + quoted(dir / "t.json"),
                    dir / "out.txt", dir / "in.txt") == 0);
    CHECK(read_text_file(dir / "t.json") == transcript_to_json_text(local.transcript));
    const auto out = read_text_file(dir / "out.txt");
    CHECK(out.rfind("bot> Let's relive", 0) == 0);
    CHECK(out.find("bot> Mock reply for scene 2 at turn 6.") != std::string::npos);
}

TEST_CASE("eval writes a report") {
    TempDir dir;
    REQUIRE(run_cli("eval --tree " + quoted(fixture("trip3/tree.json")) + " --engine reviver --script " +
                        quoted(fixture("scripts/compliant.json")) + " --seed 0 --report " + quoted(dir / "r.json") +
                        " --annotations " + quoted(fixture("trip3/labels.json")),
                    dir / "out.txt") == 0);
    const auto r = parse_json_text(read_text_file(dir / "r.json"), "report");
    CHECK(r["collection_id"] == "trip3");
    CHECK(r["engine"] == "reviver");
    CHECK(r["persona"] == "compliant");
    CHECK(r["scene_coverage"] == 1.0);
    CHECK(r["concluded"] == true);
    CHECK(r["segmentation_jaccard"] == 1.0);
    CHECK(r["detail_acc"].get<double>() == doctest::Approx(8.0 / 9));
}

TEST_CASE("unknown subcommand fails") {
    TempDir dir;
    CHECK(run_cli("frobnicate", dir / "out.txt") != 0);
}

}  // TEST_SUITE
