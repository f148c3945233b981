#include "reviver/baseline.hpp"
#include "reviver/dialogue.hpp"
#include "reviver/eval.hpp"
#include "reviver/runtime.hpp"
#include "reviver/serialization.hpp"
#include "reviver/service.hpp"
#include "reviver/tree_builder.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>

namespace fs = std::filesystem;
using namespace reviver;

namespace {

ReviverService* g_service = nullptr;

void on_signal(int) {
    if (g_service != nullptr) g_service->stop();
}

struct TreeContext {
    std::shared_ptr<const MemoryTree> tree;
    std::shared_ptr<const CollectionManifest> manifest;
    fs::path manifest_path;
};

TreeContext load_context(const fs::path& tree_path, const std::optional<fs::path>& manifest_override) {
    TreeContext ctx;
    auto tree = std::make_shared<MemoryTree>(load_tree(tree_path));
    ctx.manifest_path = manifest_path_for_tree(*tree, tree_path, manifest_override);
    ctx.manifest = std::make_shared<CollectionManifest>(load_manifest(ctx.manifest_path));
    ctx.tree = std::move(tree);
    return ctx;
}

int cmd_build(const RuntimeSettings& settings, const fs::path& manifest_path, const std::optional<fs::path>& portrait,
              std::optional<double> threshold, const fs::path& out) {
    const auto manifest = load_manifest(manifest_path);
    ModelGateway gateway(make_backend(settings, manifest_path), settings.gateway);
    BuildOptions options;
    options.threshold = threshold.value_or(settings.threshold);
    options.clock = build_clock(settings.mode);
    options.max_parallel = settings.gateway.max_concurrent_requests;
    options.manifest_path = relative_to(manifest_path, fs::absolute(out).parent_path());
    if (portrait) {
        options.portrait = *portrait;
    } else if (manifest.portrait_photo) {
        options.portrait = *manifest.portrait_photo;
    }
    const auto tree = build_memory_tree(manifest, gateway, options);
    save_tree(tree, out);
    std::cout << "built " << tree.scenes.size() << " scenes, " << tree.detail_count() << " details -> " << out.string() << "\n";
    return 0;
}

int cmd_validate(const fs::path& tree_path, const std::optional<fs::path>& manifest_override) {
    const auto tree = load_tree(tree_path);
    std::optional<CollectionManifest> manifest;
    if (manifest_override || !tree.build_metadata.manifest_path.empty()) {
        manifest = load_manifest(manifest_path_for_tree(tree, tree_path, manifest_override));
    }
    const auto report = validate_tree(tree, manifest ? &*manifest : nullptr);
    if (report.empty()) {
        std::cout << "valid: " << tree.scenes.size() << " scenes, " << tree.detail_count() << " details\n";
        return 0;
    }
    std::cout << describe(report);
    return 1;
}

int cmd_chat(const RuntimeSettings& settings, const fs::path& tree_path, EngineKind engine_kind,
             const std::optional<fs::path>& manifest_override, const std::optional<fs::path>& transcript_out,
             std::uint64_t seed) {
    auto ctx = load_context(tree_path, manifest_override);
    auto gateway = std::make_shared<ModelGateway>(make_backend(settings, ctx.manifest_path), settings.gateway);
    Transcript transcript;
    transcript.session_id = eval::session_id_for(ctx.manifest->collection_id, engine_kind, seed);
    transcript.engine = engine_kind;
    transcript.collection_id = ctx.manifest->collection_id;

    std::string line;
    if (engine_kind == EngineKind::reviver) {
        ReviverEngine engine(ctx.tree, ctx.manifest, gateway, settings.dialogue_for(ctx.manifest->locale));
        auto opening = engine.start_session(transcript.session_id);
        SessionState state = std::move(opening.state);
        std::cout << "bot> " << opening.turn.text << "\n" << std::flush;
        while (state.phase != Phase::concluded && std::getline(std::cin, line)) {
            if (line == "/quit") break;
            const auto bot = engine.reply(state, line);
            std::cout << "bot> " << bot.text << "\n" << std::flush;
        }
        transcript.turns = state.history;
    } else {
        auto prepared = std::make_shared<CollectionManifest>(*ctx.manifest);
        const auto prep = baseline::prepare_descriptions(*prepared, *gateway);
        if (!prep.complete()) {
            std::cerr << "description failed for " << prep.failures.front().photo_id << ": " << prep.failures.front().error << "\n";
            return 1;
        }
        baseline::BaselineChatbot bot(prepared, gateway);
        std::vector<ChatTurn> history{bot.opening_turn()};
        std::cout << "bot> " << history.front().text << "\n" << std::flush;
        while (std::getline(std::cin, line)) {
            if (line == "/quit") break;
            std::cout << "bot> " << bot.reply(history, line).text << "\n" << std::flush;
        }
        transcript.turns = std::move(history);
    }
    if (transcript_out) write_text_file(*transcript_out, transcript_to_json_text(transcript));
    return 0;
}

int cmd_eval(const RuntimeSettings& settings, const fs::path& tree_path, EngineKind engine_kind, const fs::path& script_path,
             std::uint64_t seed, const fs::path& report_path, const std::optional<fs::path>& annotations_path,
             const std::optional<fs::path>& transcript_out, const std::optional<fs::path>& manifest_override) {
    auto ctx = load_context(tree_path, manifest_override);
    auto gateway = std::make_shared<ModelGateway>(make_backend(settings, ctx.manifest_path), settings.gateway);
    eval::RunOptions options;
    options.engine = engine_kind;
    options.script = eval::UserScript::from_json(parse_json_text(read_text_file(script_path), script_path.string()));
    options.seed = seed;
    options.dialogue = settings.dialogue_for(ctx.manifest->locale);
    const auto run = eval::run_scripted_session(ctx.tree, ctx.manifest, gateway, options);

    Json report;
    report["collection_id"] = ctx.manifest->collection_id;
    report["engine"] = to_string(engine_kind);
    report["persona"] = eval::to_string(options.script.persona);
    report["seed"] = seed;
    const Json metrics = run.metrics.to_json();
    for (const auto& [k, v] : metrics.items()) report[k] = v;
    if (annotations_path) {
        const auto annotations =
            eval::AnnotationSet::from_json(parse_json_text(read_text_file(*annotations_path), annotations_path->string()));
        const auto acc = eval::score_annotations(*ctx.tree, annotations);
        report["storyline_acc"] = acc.storyline_acc;
        report["activity_acc"] = acc.activity_acc;
        report["detail_acc"] = acc.detail_acc;
        report["error_categories"] = acc.error_categories;
        if (auto it = annotations.segmentation_points.find(ctx.manifest->collection_id); it != annotations.segmentation_points.end()) {
            report["segmentation_jaccard"] = eval::jaccard(eval::tree_boundaries(*ctx.tree, *ctx.manifest), it->second);
        }
    }
    write_text_file(report_path, dump(report));
    if (transcript_out) write_text_file(*transcript_out, transcript_to_json_text(run.transcript));
    std::cout << "scene_coverage=" << run.metrics.scene_coverage << " turns=" << run.metrics.user_turns
              << " end=" << run.metrics.end_reason << "\n";
    return 0;
}

int cmd_serve(ServiceConfig config, const std::string& host, int port) {
    ReviverService service(std::move(config));
    const int bound = service.bind(host, port);
    if (bound < 0) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
    }
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << host << ":" << bound << "\n" << std::flush;
    service.run();
    g_service = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photo-collection reminiscence chatbot"};
    app.require_subcommand(1);
    std::optional<fs::path> config_file;
    std::optional<std::string> mode;
    std::string log_level = "warn";
    app.add_option("--config", config_file, "JSON config file (model backend, thresholds, keywords)")->check(CLI::ExistingFile);
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error");

    auto* build = app.add_subcommand("build", "Build a memory tree from a collection manifest");
    fs::path build_manifest;
    std::optional<fs::path> portrait;
    std::optional<double> threshold;
    fs::path build_out = "tree.json";
    build->add_option("--manifest", build_manifest)->required()->check(CLI::ExistingFile);
    build->add_option("--portrait", portrait)->check(CLI::ExistingFile);
    build->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
    build->add_option("--mode", mode)->check(CLI::IsMember({"mock", "live"}));
    build->add_option("--out", build_out);

    auto* chat = app.add_subcommand("chat", "Interactive text chat over a tree (one input per line)");
    fs::path tree_path;
    std::string engine_name = "reviver";
    std::optional<fs::path> manifest_override;
    std::optional<fs::path> transcript_out;
    std::uint64_t seed = 0;
    chat->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
    chat->add_option("--engine", engine_name)->check(CLI::IsMember({"reviver", "baseline"}));
    chat->add_option("--manifest", manifest_override)->check(CLI::ExistingFile);
    chat->add_option("--transcript", transcript_out);
    chat->add_option("--seed", seed, "only affects the session id");
    chat->add_option("--mode", mode)->check(CLI::IsMember({"mock", "live"}));

    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    int port = 8080;
    std::string host = "127.0.0.1";
    fs::path store = "reviver-store";
    int workers = 2;
    serve->add_option("--port", port);
    serve->add_option("--host", host);
    serve->add_option("--store", store);
    serve->add_option("--workers", workers)->check(CLI::PositiveNumber);
    serve->add_option("--mode", mode)->check(CLI::IsMember({"mock", "live"}));

    auto* evalc = app.add_subcommand("eval", "Run a scripted session and write a metrics report");
    fs::path script_path;
    fs::path report_path;
    std::optional<fs::path> annotations_path;
    evalc->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
    evalc->add_option("--engine", engine_name)->check(CLI::IsMember({"reviver", "baseline"}));
    evalc->add_option("--script", script_path)->required()->check(CLI::ExistingFile);
    evalc->add_option("--seed", seed);
    evalc->add_option("--report", report_path)->required();
    evalc->add_option("--annotations", annotations_path)->check(CLI::ExistingFile);
    evalc->add_option("--transcript", transcript_out);
    evalc->add_option("--manifest", manifest_override)->check(CLI::ExistingFile);
    evalc->add_option("--mode", mode)->check(CLI::IsMember({"mock", "live"}));

    auto* validate = app.add_subcommand("validate", "Check a tree's invariants");
    validate->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
    validate->add_option("--manifest", manifest_override)->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        auto settings = load_settings(config_file);
        if (mode) settings.mode = model_mode_from_string(*mode);
        const auto engine = engine_kind_from_string(engine_name);
        if (*build) return cmd_build(settings, build_manifest, portrait, threshold, build_out);
        if (*validate) return cmd_validate(tree_path, manifest_override);
        if (*chat) return cmd_chat(settings, tree_path, engine, manifest_override, transcript_out, seed);
        if (*evalc) {
            return cmd_eval(settings, tree_path, engine, script_path, seed, report_path, annotations_path, transcript_out,
                            manifest_override);
        }
        if (*serve) return cmd_serve(ServiceConfig{store, settings, workers}, host, port);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
