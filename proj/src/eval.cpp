#include "reviver/eval.hpp"

#include "reviver/baseline.hpp"
#include "reviver/text.hpp"

#include <algorithm>

namespace reviver::eval {

namespace {

// Bot turns that answer a user turn must carry the engine's selection.
bool answers_user(const Transcript& t, std::size_t i) {
    return i > 0 && t.turns[i].speaker == Speaker::bot && t.turns[i - 1].speaker == Speaker::user &&
           !t.turns[i].annotations.error;
}

constexpr const char* kQuestions[] = {"What color is it?", "Who else was there?", "What was I wearing?",
                                      "Where was this taken?", "Was it daytime or night?"};

}  // namespace

double scene_coverage(const Transcript& transcript, const MemoryTree& tree, EngineKind engine) {
    if (tree.scenes.empty()) return 0.0;
    std::set<SceneId> discussed;
    for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
        if (!answers_user(transcript, i)) continue;
        const auto& a = transcript.turns[i].annotations;
        if (engine == EngineKind::reviver) {
            if (!a.selected_scene) {
                throw MetricError("turn " + std::to_string(transcript.turns[i].turn_index) + " lacks selected_scene");
            }
            if (tree.find_scene(*a.selected_scene)) discussed.insert(*a.selected_scene);
        } else {
            if (!a.selected_photos) {
                throw MetricError("turn " + std::to_string(transcript.turns[i].turn_index) + " lacks selected_photos");
            }
            for (const auto& p : *a.selected_photos) {
                if (auto s = tree.scene_of_photo(p)) discussed.insert(*s);
            }
        }
    }
    return static_cast<double>(discussed.size()) / static_cast<double>(tree.scenes.size());
}

double memory_ratio(std::string_view pre_narrative, std::string_view post_narrative, std::string_view locale) {
    const auto pre = text::word_count(pre_narrative, locale);
    if (pre == 0) {
        throw MetricError("memory ratio undefined: pre-trial narrative has no words");
    }
    return static_cast<double>(text::word_count(post_narrative, locale)) / static_cast<double>(pre);
}

std::set<std::size_t> tree_boundaries(const MemoryTree& tree, const CollectionManifest& manifest) {
    const auto ordered = chronological_order(manifest.photos);
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < ordered.size(); ++i) position[ordered[i].photo_id] = i;
    std::set<std::size_t> cuts;
    for (std::size_t k = 0; k + 1 < tree.scenes.size(); ++k) {
        const auto& ids = tree.scenes[k].photo_ids;
        if (!ids.empty() && position.contains(ids.back())) cuts.insert(position[ids.back()]);
    }
    return cuts;
}

// ---------------------------------------------------------------------------

AnnotationSet AnnotationSet::from_json(const Json& j) {
    AnnotationSet a;
    if (auto it = j.find("statements"); it != j.end()) {
        for (const auto& [key, v] : it->items()) {
            StatementLabel label;
            const auto tag = v.is_string() ? v.get<std::string>() : v.value("label", std::string{"correct"});
            if (tag != "correct" && tag != "inaccurate") {
                throw ParseError("statement " + key + ": label must be correct|inaccurate");
            }
            label.correct = tag == "correct";
            if (v.is_object()) label.reason = v.value("reason", std::string{});
            if (!label.correct && label.reason.empty()) label.reason = "unspecified";
            a.statement_labels[key] = label;
        }
    }
    if (auto it = j.find("segmentation_points"); it != j.end()) {
        for (const auto& [collection, points] : it->items()) {
            a.segmentation_points[collection] = points.get<std::set<std::size_t>>();
        }
    }
    return a;
}

std::vector<std::string> statement_keys(const MemoryTree& tree) {
    std::vector<std::string> keys;
    for (const auto& e : tree.storyline) keys.push_back("storyline/" + std::to_string(e.scene_id));
    for (const auto& s : tree.scenes) keys.push_back("activity/" + std::to_string(s.scene_id));
    for (const auto& s : tree.scenes) {
        for (const auto& d : s.details) keys.push_back("detail/" + d.detail_id);
    }
    return keys;
}

AccuracyReport score_annotations(const MemoryTree& tree, const AnnotationSet& annotations) {
    const auto keys = statement_keys(tree);
    std::vector<std::string> uncovered;
    for (const auto& k : keys) {
        if (!annotations.statement_labels.contains(k)) uncovered.push_back(k);
    }
    for (const auto& [k, _] : annotations.statement_labels) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) uncovered.push_back(k + " (unknown statement)");
    }
    if (!uncovered.empty()) {
        std::string list;
        for (const auto& k : uncovered) list += (list.empty() ? "" : ", ") + k;
        throw MetricError("annotations do not match the tree's statements: " + list);
    }

    AccuracyReport r;
    std::map<std::string, std::pair<int, int>> tally;  // level -> (correct, total)
    for (const auto& k : keys) {
        const auto level = k.substr(0, k.find('/'));
        const auto& label = annotations.statement_labels.at(k);
        auto& [correct, total] = tally[level];
        ++total;
        if (label.correct) {
            ++correct;
        } else {
            ++r.error_categories[label.reason];
        }
    }
    auto ratio = [&](const char* level) {
        auto it = tally.find(level);
        if (it == tally.end() || it->second.second == 0) return 1.0;
        return static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
    };
    r.storyline_acc = ratio("storyline");
    r.activity_acc = ratio("activity");
    r.detail_acc = ratio("detail");
    return r;
}

// ---------------------------------------------------------------------------

std::string to_string(Persona p) {
    switch (p) {
        case Persona::compliant: return "compliant";
        case Persona::curious: return "curious";
        case Persona::scene_hopper: return "scene_hopper";
        case Persona::silent_quitter: return "silent_quitter";
    }
    return "compliant";
}

Persona persona_from_string(const std::string& s) {
    for (auto p : {Persona::compliant, Persona::curious, Persona::scene_hopper, Persona::silent_quitter}) {
        if (to_string(p) == s) return p;
    }
    throw std::invalid_argument("unknown persona '" + s + "'");
}

UserScript UserScript::from_json(const Json& j) {
    UserScript s;
    s.persona = persona_from_string(j.value("persona", std::string{"compliant"}));
    if (auto it = j.find("steps"); it != j.end()) s.steps = it->get<std::vector<std::string>>();
    s.max_turns = j.value("max_turns", 200);
    if (s.max_turns <= 0) throw std::invalid_argument("max_turns must be positive");
    return s;
}

Json UserScript::to_json() const {
    Json j;
    j["persona"] = to_string(persona);
    if (!steps.empty()) j["steps"] = steps;
    j["max_turns"] = max_turns;
    return j;
}

ScriptedUser::ScriptedUser(UserScript script, std::uint64_t seed) : script_(std::move(script)), rng_(seed) {}

// mt19937_64 output is fixed by the standard; distributions are not, so the
// draw is done by hand to keep runs reproducible across standard libraries.
std::size_t ScriptedUser::pick(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(rng_() % n); }

std::optional<std::string> ScriptedUser::next_input(const PersonaContext& ctx) {
    if (!script_.steps.empty()) {
        if (ctx.user_turn < static_cast<int>(script_.steps.size())) return script_.steps[ctx.user_turn];
        return std::nullopt;
    }
    switch (script_.persona) {
        case Persona::compliant: return compliant(ctx);
        case Persona::curious: return curious(ctx);
        case Persona::scene_hopper: return scene_hopper(ctx);
        case Persona::silent_quitter: return silent_quitter(ctx);
    }
    return std::nullopt;
}

std::optional<std::string> ScriptedUser::compliant(const PersonaContext& ctx) const {
    return ctx.user_turn % 2 == 0 ? "Okay" : "Go on";
}

std::optional<std::string> ScriptedUser::curious(const PersonaContext& ctx) {
    const auto& history = *ctx.history;
    const bool suggestion = !history.empty() &&
                            (history.back().annotations.guidance_kind == GuidanceKind::scene_suggestion ||
                             history.back().annotations.guidance_kind == GuidanceKind::storyline);
    if (suggestion) {
        return pick(10) < 8 ? std::optional<std::string>("Okay") : std::optional<std::string>(kQuestions[pick(std::size(kQuestions))]);
    }
    if (pick(100) < 35) return std::string(kQuestions[pick(std::size(kQuestions))]);
    return std::string("Go on");
}

std::optional<std::string> ScriptedUser::scene_hopper(const PersonaContext& ctx) {
    if (ctx.tree == nullptr || ctx.tree->scenes.empty()) return compliant(ctx);
    const auto& tree = *ctx.tree;
    if (hops_left_ < 0) hops_left_ = 2 + static_cast<int>(pick(3));

    if (hops_left_ > 0) {
        --hops_left_;
        const auto roll = pick(10);
        if (roll < 3) return std::string("Next scene");
        if (roll < 4) return std::string("Let's talk about the moon landing");
        const Scene& target = tree.scenes[pick(tree.scenes.size())];
        std::vector<std::string> words;
        for (const auto& d : target.details) {
            for (const auto& t : text::content_tokens(d.description)) words.push_back(t);
        }
        if (words.empty()) {
            for (const auto& t : text::content_tokens(target.summary_sentence)) words.push_back(t);
        }
        if (words.empty()) return std::string("Next scene");
        return "Let's talk about the " + words[pick(words.size())];
    }

    // Walk forward to the last scene, then follow the guidance.
    const SceneId last = tree.scenes.back().scene_id;
    const SceneId current = ctx.state != nullptr ? ctx.state->current_scene : last;
    if (!reached_last_) {
        if (current < last) return std::string("Next scene");
        reached_last_ = true;
    }
    const auto& history = *ctx.history;
    const bool stalled = !history.empty() && history.back().annotations.guidance_kind == GuidanceKind::none;
    if (stalled && ctx.engine != nullptr && ctx.state != nullptr) {
        // Go back to a scene that still has something to show.
        for (const auto& s : tree.scenes) {
            if (s.scene_id != current && ctx.engine->next_undiscussed_detail(*ctx.state, s.scene_id)) {
                return "Let's talk about " + s.summary_sentence;
            }
        }
    }
    return compliant(ctx);
}

std::optional<std::string> ScriptedUser::silent_quitter(const PersonaContext& ctx) {
    if (quit_after_ < 0) quit_after_ = 1 + static_cast<int>(pick(3));
    if (ctx.user_turn >= quit_after_) return std::nullopt;
    return std::string("Okay");
}

Json MetricsBundle::to_json() const {
    Json j;
    j["scene_coverage"] = scene_coverage;
    j["user_turns"] = user_turns;
    j["bot_turns"] = bot_turns;
    j["details_emitted"] = details_emitted;
    j["details_total"] = details_total;
    j["concluded"] = concluded;
    j["non_terminating"] = non_terminating;
    j["end_reason"] = end_reason;
    return j;
}

std::string session_id_for(const std::string& collection_id, EngineKind engine, std::uint64_t seed) {
    return collection_id + "-" + to_string(engine) + "-" + std::to_string(seed);
}

SessionRun run_scripted_session(std::shared_ptr<const MemoryTree> tree, std::shared_ptr<const CollectionManifest> manifest,
                                std::shared_ptr<ModelGateway> gateway, const RunOptions& options) {
    if (!tree || !manifest || !gateway) {
        throw std::invalid_argument("run_scripted_session requires a tree, a manifest and a gateway");
    }
    SessionRun run;
    ScriptedUser user(options.script, options.seed);
    run.transcript.session_id = session_id_for(manifest->collection_id, options.engine, options.seed);
    run.transcript.engine = options.engine;
    run.transcript.collection_id = manifest->collection_id;

    std::string end_reason;
    if (options.engine == EngineKind::reviver) {
        ReviverEngine engine(tree, manifest, gateway, options.dialogue);
        auto opening = engine.start_session(run.transcript.session_id);
        SessionState state = std::move(opening.state);
        for (int turn = 0;; ++turn) {
            if (state.phase == Phase::concluded) {
                end_reason = "concluded";
                break;
            }
            if (turn >= options.script.max_turns) {
                end_reason = "turn_cap";
                break;
            }
            PersonaContext ctx{tree.get(), &engine, &state, &state.history, turn};
            auto input = user.next_input(ctx);
            if (!input) {
                end_reason = "script_ended";
                break;
            }
            run.user_inputs.push_back(*input);
            engine.reply(state, *input);
        }
        run.transcript.turns = state.history;
        run.metrics.concluded = state.phase == Phase::concluded;
        run.final_state = std::move(state);
    } else {
        auto prepared = std::make_shared<CollectionManifest>(*manifest);
        const auto prep = baseline::prepare_descriptions(*prepared, *gateway);
        if (!prep.complete()) {
            throw baseline::DescriptionsMissingError("cannot start baseline session: " + prep.failures.front().photo_id +
                                                     ": " + prep.failures.front().error);
        }
        baseline::BaselineChatbot bot(prepared, gateway);
        std::vector<ChatTurn> history{bot.opening_turn()};
        for (int turn = 0;; ++turn) {
            if (turn >= options.script.max_turns) {
                end_reason = "turn_cap";
                break;
            }
            PersonaContext ctx{tree.get(), nullptr, nullptr, &history, turn};
            auto input = user.next_input(ctx);
            if (!input) {
                end_reason = "script_ended";
                break;
            }
            run.user_inputs.push_back(*input);
            bot.reply(history, *input);
        }
        run.transcript.turns = std::move(history);
    }

    auto& m = run.metrics;
    m.end_reason = end_reason;
    m.non_terminating = end_reason == "turn_cap";
    for (const auto& t : run.transcript.turns) {
        if (t.speaker == Speaker::user) {
            ++m.user_turns;
        } else {
            ++m.bot_turns;
            if (t.annotations.emitted_detail_id) ++m.details_emitted;
        }
    }
    m.details_total = static_cast<int>(tree->detail_count());
    m.scene_coverage = scene_coverage(run.transcript, *tree, options.engine);
    return run;
}

}  // namespace reviver::eval
