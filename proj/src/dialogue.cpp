#include "reviver/dialogue.hpp"

#include "reviver/text.hpp"

#include <algorithm>
#include <sstream>

namespace reviver {

namespace {

bool starts_with_tokens(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    return !phrase.empty() && tokens.size() >= phrase.size() && std::equal(phrase.begin(), phrase.end(), tokens.begin());
}

bool contains_tokens(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    if (phrase.empty() || tokens.size() < phrase.size()) return false;
    return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

bool any_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrases, bool prefix_only) {
    return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) {
        const auto pt = text::tokenize(p);
        return prefix_only ? starts_with_tokens(tokens, pt) : contains_tokens(tokens, pt);
    });
}

// Lowercases ASCII and folds typographic apostrophes to '.
std::string normalize(std::string_view s) {
    std::string out = text::to_lower_ascii(s);
    for (std::size_t pos; (pos = out.find("\xE2\x80\x99")) != std::string::npos;) {
        out.replace(pos, 3, "'");
    }
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

DialogueConfig DialogueConfig::for_locale(const std::string& locale) {
    DialogueConfig c;
    if (text::is_cjk_locale(locale)) {
        c.acceptance_phrases.insert(c.acceptance_phrases.end(), {"好的", "好", "可以", "继续", "行", "嗯"});
        c.rejection_phrases.insert(c.rejection_phrases.end(), {"不", "不要", "等一下", "还没"});
        c.next_scene_phrases.push_back("下一个场景");
        c.switch_prefixes.insert(c.switch_prefixes.end(), {"我们聊聊", "聊聊"});
        c.interrogative_openers.insert(c.interrogative_openers.end(), {"什么", "谁", "哪", "为什么", "怎么", "几"});
        c.question_suffixes.insert(c.question_suffixes.end(), {"吗", "呢"});
    }
    return c;
}

InputClass classify_input(std::string_view raw, bool suggestion_pending, const DialogueConfig& config) {
    const std::string input = text::trim(raw);
    const std::string lowered = normalize(input);

    for (const auto& prefix : config.switch_prefixes) {
        const auto pos = lowered.find(normalize(prefix));
        if (pos == std::string::npos) continue;
        // keyword keeps the user's casing
        const std::string keyword = text::trim_punctuation(input.substr(pos + normalize(prefix).size()));
        if (!keyword.empty()) {
            return {InputKind::switch_cmd, keyword};
        }
    }

    const auto tokens = text::tokenize(lowered);
    if (any_phrase(tokens, config.next_scene_phrases, false)) {
        return {InputKind::next_scene_cmd, std::nullopt};
    }
    if (suggestion_pending) {
        if (any_phrase(tokens, config.acceptance_phrases, true)) return {InputKind::acceptance, std::nullopt};
        if (any_phrase(tokens, config.rejection_phrases, true)) return {InputKind::rejection, std::nullopt};
    }
    const bool question_mark = ends_with(input, "?") || ends_with(input, "\xEF\xBC\x9F");  // ？
    const bool question_suffix = std::any_of(config.question_suffixes.begin(), config.question_suffixes.end(),
                                             [&](const std::string& s) { return ends_with(text::trim_punctuation(input), s); });
    if (question_mark || question_suffix || any_phrase(tokens, config.interrogative_openers, true)) {
        return {InputKind::question, std::nullopt};
    }
    return {InputKind::statement, std::nullopt};
}

InputClass RuleClassifier::classify(std::string_view text, bool suggestion_pending) const {
    return classify_input(text, suggestion_pending, config_);
}

std::string to_string(SelectionRule rule) {
    switch (rule) {
        case SelectionRule::accepted_suggestion: return "accepted_suggestion";
        case SelectionRule::next_scene: return "next_scene";
        case SelectionRule::switch_match: return "switch_match";
        case SelectionRule::switch_miss: return "switch_miss";
        case SelectionRule::unchanged: return "unchanged";
    }
    return "unchanged";
}

// ---------------------------------------------------------------------------

ReviverEngine::ReviverEngine(std::shared_ptr<const MemoryTree> tree, std::shared_ptr<const CollectionManifest> manifest,
                             std::shared_ptr<ModelGateway> gateway, DialogueConfig config,
                             std::shared_ptr<const InputClassifier> classifier)
    : tree_(std::move(tree)),
      manifest_(std::move(manifest)),
      gateway_(std::move(gateway)),
      config_(std::move(config)),
      classifier_(classifier ? std::move(classifier) : std::make_shared<RuleClassifier>(config_)) {
    if (!tree_ || !manifest_ || !gateway_) {
        throw std::invalid_argument("ReviverEngine requires a tree, a manifest and a gateway");
    }
}

ReviverEngine::Opening ReviverEngine::start_session(const std::string& session_id) const {
    if (auto report = validate_tree(*tree_, manifest_.get()); !report.empty()) {
        throw InvalidTreeError(std::move(report));
    }
    Opening o;
    o.state.session_id = session_id;
    o.state.collection_id = tree_->collection_id;
    o.state.current_scene = tree_->scenes.front().scene_id;
    o.state.pending_suggestion = o.state.current_scene;
    o.state.phase = Phase::opened;

    std::ostringstream text;
    const auto n = tree_->storyline.size();
    text << "Let's relive \"" << manifest_->title << "\". The collection has " << n << (n == 1 ? " scene" : " scenes")
         << ":";
    for (const auto& entry : tree_->storyline) {
        text << "\n" << entry.scene_id << ". " << entry.summary_sentence;
    }
    text << "\nShall we start with the first scene?";

    o.turn.turn_index = 0;
    o.turn.speaker = Speaker::bot;
    o.turn.text = text.str();
    o.turn.annotations.guidance_kind = GuidanceKind::storyline;
    o.state.history.push_back(o.turn);
    return o;
}

InputClass ReviverEngine::classify(const SessionState& state, std::string_view text) const {
    return classifier_->classify(text, state.pending_suggestion.has_value());
}

SceneSelection ReviverEngine::select_scene(const SessionState& state, const InputClass& input) const {
    const SceneId last = tree_->scenes.back().scene_id;
    switch (input.kind) {
        case InputKind::switch_cmd: {
            const auto wanted = text::content_tokens(input.keyword.value_or(""));
            std::size_t best_overlap = 0;
            SceneId best = state.current_scene;
            for (const auto& scene : tree_->scenes) {
                std::string haystack = activity_text(scene) + " " + scene.summary_sentence;
                for (const auto& d : scene.details) haystack += " " + d.description;
                const auto have = text::content_tokens(haystack);
                const auto overlap = static_cast<std::size_t>(
                    std::count_if(wanted.begin(), wanted.end(), [&](const std::string& t) { return have.contains(t); }));
                if (overlap > best_overlap) {
                    best_overlap = overlap;
                    best = scene.scene_id;
                }
            }
            if (best_overlap == 0) {
                return {state.current_scene, SelectionRule::switch_miss,
                        "I could not find a scene about \"" + input.keyword.value_or("") + "\", so let's stay in scene " +
                            std::to_string(state.current_scene) + "."};
            }
            return {best, SelectionRule::switch_match, {}};
        }
        case InputKind::next_scene_cmd:
            if (state.current_scene >= last) {
                return {last, SelectionRule::next_scene, "This is already the last scene; there is no later scene."};
            }
            return {state.current_scene + 1, SelectionRule::next_scene, {}};
        case InputKind::acceptance:
            if (state.pending_suggestion) {
                return {*state.pending_suggestion, SelectionRule::accepted_suggestion, {}};
            }
            break;
        default:
            break;
    }
    return {state.current_scene, SelectionRule::unchanged, {}};
}

bool ReviverEngine::mentioned(const SessionState& state, const SceneDetail& detail, std::string_view extra_text) const {
    if (!extra_text.empty() && text::content_overlap(detail.description, extra_text) >= config_.mention_threshold) {
        return true;
    }
    return std::any_of(state.history.begin(), state.history.end(), [&](const ChatTurn& t) {
        return text::content_overlap(detail.description, t.text) >= config_.mention_threshold;
    });
}

std::optional<SceneDetail> ReviverEngine::next_undiscussed_detail(const SessionState& state, SceneId scene_id,
                                                                  std::string_view extra_text) const {
    const Scene* scene = tree_->find_scene(scene_id);
    if (scene == nullptr) return std::nullopt;
    for (const auto& d : scene->details) {
        if (!state.is_discussed(scene_id, d.detail_id) && !mentioned(state, d, extra_text)) {
            return d;
        }
    }
    return std::nullopt;
}

bool ReviverEngine::scene_exhausted(const SessionState& state, SceneId scene) const {
    return !next_undiscussed_detail(state, scene).has_value();
}

bool ReviverEngine::should_suggest_new_scene(const SessionState& state) const {
    if (!scene_exhausted(state, state.current_scene)) return false;
    auto last_user = std::find_if(state.history.rbegin(), state.history.rend(),
                                  [](const ChatTurn& t) { return t.speaker == Speaker::user; });
    if (last_user != state.history.rend() && last_user->annotations.classified_as == InputKind::question) {
        return false;
    }
    return next_scene_suggestion(state).has_value();
}

std::optional<SceneId> ReviverEngine::next_scene_suggestion(const SessionState& state) const {
    for (const auto& entry : tree_->storyline) {
        if (!state.visited_scenes.contains(entry.scene_id)) return entry.scene_id;
    }
    return std::nullopt;
}

std::string ReviverEngine::activity_text(const Scene& scene) const {
    std::string out = scene.activity.sentence;
    for (const auto& r : scene.activity.reasons) out += " " + r;
    return out;
}

Guidance ReviverEngine::compose_guidance(SessionState& state, SceneId scene_id, std::string_view raw_reply) const {
    const Scene* scene = tree_->find_scene(scene_id);
    if (scene == nullptr) {
        throw std::out_of_range("scene " + std::to_string(scene_id) + " not in tree");
    }
    Guidance g;
    if (!state.visited_scenes.contains(scene_id)) {
        state.visited_scenes.insert(scene_id);
        g.kind = GuidanceKind::activity_intro;
        g.text = "Scene " + std::to_string(scene_id) + ": " + activity_text(*scene);
        return g;
    }

    // Details already covered by the conversation (or this raw reply) count as
    // discussed and are skipped.
    for (const auto& d : scene->details) {
        if (state.is_discussed(scene_id, d.detail_id)) continue;
        state.discussed_details[scene_id].insert(d.detail_id);
        if (mentioned(state, d, raw_reply)) continue;
        g.kind = GuidanceKind::detail;
        g.text = d.description;
        g.emitted_detail_id = d.detail_id;
        return g;
    }

    if (should_suggest_new_scene(state)) {
        const SceneId next = *next_scene_suggestion(state);
        const auto discussed = state.discussed_details[scene_id].size();
        std::ostringstream text;
        text << "We have talked about all the key contents in the current scene: " << scene->summary_sentence;
        if (!scene->summary_sentence.empty() && std::string_view(".!?").find(scene->summary_sentence.back()) == std::string_view::npos) {
            text << ".";
        }
        text << " We covered " << discussed << (discussed == 1 ? " detail" : " details")
             << ". Do you want to proceed to the next scene, scene " << next << " of " << tree_->scenes.size() << "?";
        state.pending_suggestion = next;
        g.kind = GuidanceKind::scene_suggestion;
        g.text = text.str();
        g.suggested_scene = next;
        return g;
    }

    const bool all_visited = state.visited_scenes.size() == tree_->scenes.size();
    const bool all_exhausted = std::all_of(tree_->scenes.begin(), tree_->scenes.end(),
                                           [&](const Scene& s) { return scene_exhausted(state, s.scene_id); });
    if (all_visited && all_exhausted && state.phase != Phase::concluded) {
        std::ostringstream text;
        text << "We have explored all " << tree_->scenes.size() << (tree_->scenes.size() == 1 ? " scene" : " scenes")
             << " of this collection. Here is the whole story:";
        for (const auto& entry : tree_->storyline) text << " " << entry.summary_sentence;
        text << " Thank you for reliving these memories with me.";
        state.phase = Phase::concluded;
        g.kind = GuidanceKind::final_summary;
        g.text = text.str();
        return g;
    }
    return g;
}

std::vector<PhotoRecord> ReviverEngine::scene_photos(SceneId scene_id) const {
    std::vector<PhotoRecord> out;
    if (const Scene* scene = tree_->find_scene(scene_id)) {
        for (const auto& id : scene->photo_ids) {
            if (const PhotoRecord* p = manifest_->find(id)) out.push_back(*p);
        }
    }
    return out;
}

ChatTurn ReviverEngine::reply(SessionState& state, const std::string& user_text) const {
    if (state.phase == Phase::concluded) {
        throw SessionConcludedError("session " + state.session_id + " has concluded");
    }
    const InputClass input = classify(state, user_text);

    ChatTurn user_turn;
    user_turn.turn_index = static_cast<int>(state.history.size());
    user_turn.speaker = Speaker::user;
    user_turn.text = user_text;
    user_turn.annotations.classified_as = input.kind;

    ChatTurn bot;
    bot.turn_index = user_turn.turn_index + 1;
    bot.speaker = Speaker::bot;

    const SceneSelection selection = select_scene(state, input);
    const auto photos = scene_photos(selection.scene);
    std::string raw;
    try {
        raw = gateway_->generate_raw_reply(user_text, state.history, photos, selection.scene, bot.turn_index);
    } catch (const std::exception& e) {
        bot.text = "Sorry, I had trouble looking at the photos just now. Could you say that again?";
        bot.annotations.error = true;
        state.history.push_back(std::move(user_turn));
        state.history.push_back(bot);
        return bot;
    }

    SessionState next = state;
    next.history.push_back(user_turn);
    next.pending_suggestion.reset();
    next.current_scene = selection.scene;
    if (next.phase == Phase::opened) next.phase = Phase::exploring;

    const Guidance guidance = compose_guidance(next, selection.scene, raw);

    std::string guidance_text = selection.notice;
    if (!guidance.text.empty()) {
        guidance_text += (guidance_text.empty() ? "" : " ") + guidance.text;
    }
    bot.text = raw;
    if (!guidance_text.empty()) {
        bot.text += (bot.text.empty() ? "" : config_.separator) + guidance_text;
    }
    bot.annotations.selected_scene = selection.scene;
    bot.annotations.guidance_kind = guidance.kind;
    bot.annotations.emitted_detail_id = guidance.emitted_detail_id;
    next.history.push_back(bot);
    state = std::move(next);
    return bot;
}

Progress ReviverEngine::progress(const SessionState& state) const {
    return {state.visited_scenes.size(), tree_->scenes.size()};
}

}  // namespace reviver
