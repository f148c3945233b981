#include "reviver/model_gateway.hpp"

#include "prompts.hpp"
#include "reviver/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <set>
#include <thread>

namespace reviver {

std::string to_string(Task t) {
    switch (t) {
        case Task::describe_photo: return "describe_photo";
        case Task::score_similarity: return "score_similarity";
        case Task::extract_scene: return "extract_scene";
        case Task::gen_storyline: return "gen_storyline";
        case Task::gen_reply: return "gen_reply";
        case Task::select_photos: return "select_photos";
    }
    return "unknown";
}

namespace {

class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<>& s_;
};

Json photo_id_list(std::span<const PhotoRecord> photos) {
    Json ids = Json::array();
    for (const auto& p : photos) ids.push_back(p.photo_id);
    return ids;
}

bool is_absent_aspect(const std::string& v) {
    const auto lower = text::to_lower_ascii(text::trim(v));
    return lower.empty() || lower == "unknown" || lower == "n/a" || lower == "none" || lower == "null";
}

// Position just past the end of a balanced JSON value starting at `open`.
std::optional<std::size_t> balanced_end(const std::string& s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            ++depth;
        } else if (c == '}' || c == ']') {
            if (--depth == 0) {
                return i + 1;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// parsing

std::optional<Json> extract_json_block(const std::string& text) {
    auto try_parse = [](const std::string& s) -> std::optional<Json> {
        auto j = Json::parse(s, nullptr, false);
        if (j.is_discarded()) {
            return std::nullopt;
        }
        return j;
    };
    for (std::size_t fence = text.find("```"); fence != std::string::npos; fence = text.find("```", fence + 3)) {
        std::size_t body = text.find('\n', fence);
        if (body == std::string::npos) {
            break;
        }
        const std::size_t close = text.find("```", body);
        if (close == std::string::npos) {
            break;
        }
        if (auto j = try_parse(text.substr(body + 1, close - body - 1))) {
            return j;
        }
        fence = close;
    }
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{' && text[i] != '[') {
            continue;
        }
        if (auto end = balanced_end(text, i)) {
            if (auto j = try_parse(text.substr(i, *end - i))) {
                return j;
            }
        }
    }
    return std::nullopt;
}

std::optional<double> parse_similarity(const std::string& text) {
    static const std::regex labelled(R"(similarity[^0-9+\-.]{0,20}([+-]?(?:\d+(?:\.\d*)?|\.\d+)))", std::regex::icase);
    static const std::regex bare(R"(([+-]?(?:\d+(?:\.\d*)?|\.\d+)))");
    std::smatch m;
    std::optional<double> value;
    if (std::regex_search(text, m, labelled)) {
        value = std::stod(m[1].str());
    } else if (auto j = extract_json_block(text); j && j->is_object() && j->contains("similarity") &&
                                                   (*j)["similarity"].is_number()) {
        value = (*j)["similarity"].get<double>();
    } else if (std::regex_search(text, m, bare)) {
        value = std::stod(m[1].str());
    }
    if (!value) {
        return std::nullopt;
    }
    return std::clamp(*value, 0.0, 1.0);
}

std::optional<SceneInfo> parse_scene_info(const std::string& text) {
    auto j = extract_json_block(text);
    if (!j || !j->is_object()) {
        return std::nullopt;
    }
    auto activity = j->find("activity");
    if (activity == j->end() || !activity->is_object()) {
        return std::nullopt;
    }
    SceneInfo info;
    auto sentence = activity->find("sentence");
    if (sentence == activity->end() || !sentence->is_string() || text::trim(sentence->get<std::string>()).empty()) {
        return std::nullopt;
    }
    info.activity.sentence = text::trim(sentence->get<std::string>());
    if (auto aspects = activity->find("aspects"); aspects != activity->end() && aspects->is_object()) {
        for (auto aspect : kAllAspects) {
            auto v = aspects->find(to_string(aspect));
            if (v != aspects->end() && v->is_string() && !is_absent_aspect(v->get<std::string>())) {
                info.activity.aspects[aspect] = text::trim(v->get<std::string>());
            }
        }
    }
    if (auto reasons = activity->find("reasons"); reasons != activity->end() && reasons->is_array()) {
        for (const auto& r : *reasons) {
            if (r.is_string() && !text::trim(r.get<std::string>()).empty()) {
                info.activity.reasons.push_back(text::trim(r.get<std::string>()));
            }
        }
    }
    if (auto details = j->find("details"); details != j->end()) {
        if (!details->is_array()) {
            return std::nullopt;
        }
        int ordinal = 0;
        for (const auto& d : *details) {
            if (!d.is_object() || !d.contains("description") || !d["description"].is_string()) {
                return std::nullopt;
            }
            SceneDetail detail;
            detail.detail_id = "d" + std::to_string(++ordinal);
            // Categories outside the closed set are kept as "others".
            detail.category = detail_category_from_string(text::to_lower_ascii(d.value("category", std::string{"others"})))
                                  .value_or(DetailCategory::others);
            detail.description = text::trim(d["description"].get<std::string>());
            info.details.push_back(std::move(detail));
        }
    }
    return info;
}

std::optional<std::vector<std::string>> parse_storyline(const std::string& text) {
    if (auto j = extract_json_block(text)) {
        const Json* list = nullptr;
        if (j->is_array()) {
            list = &*j;
        } else if (j->is_object() && j->contains("summaries") && (*j)["summaries"].is_array()) {
            list = &(*j)["summaries"];
        }
        if (list != nullptr) {
            std::vector<std::string> out;
            for (const auto& s : *list) {
                if (!s.is_string()) {
                    return std::nullopt;
                }
                out.push_back(text::trim(s.get<std::string>()));
            }
            return out;
        }
    }
    // numbered lines: "1. ..." / "2) ..."
    static const std::regex numbered(R"(^\s*\d+\s*[.):]\s*(.+?)\s*$)");
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::smatch m;
        if (std::regex_match(line, m, numbered)) {
            out.push_back(m[1].str());
        }
    }
    if (out.empty()) {
        return std::nullopt;
    }
    return out;
}

std::optional<std::vector<std::string>> parse_photo_ids(const std::string& text) {
    auto j = extract_json_block(text);
    if (!j) {
        return std::nullopt;
    }
    const Json* list = nullptr;
    if (j->is_array()) {
        list = &*j;
    } else if (j->is_object() && j->contains("photo_ids") && (*j)["photo_ids"].is_array()) {
        list = &(*j)["photo_ids"];
    }
    if (list == nullptr) {
        return std::nullopt;
    }
    std::vector<std::string> out;
    for (const auto& id : *list) {
        if (id.is_string()) {
            out.push_back(id.get<std::string>());
        } else if (id.is_number_integer()) {
            out.push_back(std::to_string(id.get<long long>()));
        }
    }
    return out;
}

std::string enforce_char_budget(const std::string& sentence, std::size_t budget) {
    if (text::utf8_length(sentence) <= budget) {
        return sentence;
    }
    const std::string prefix = text::utf8_prefix(sentence, budget);
    std::size_t cut = std::string::npos;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        const char c = prefix[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == prefix.size() || prefix[i + 1] == ' ')) {
            cut = i + 1;
        }
    }
    for (const char* mark : {"\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"}) {  // 。！？
        if (auto p = prefix.rfind(mark); p != std::string::npos && (cut == std::string::npos || p + 3 > cut)) {
            cut = p + 3;
        }
    }
    if (cut == std::string::npos || cut == 0) {
        cut = prefix.rfind(' ');
        if (cut == std::string::npos || cut == 0) {
            return prefix;
        }
    }
    return text::trim(prefix.substr(0, cut));
}

// ---------------------------------------------------------------------------
// gateway

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(config), slots_(std::max(1, config.max_concurrent_requests)) {
    if (!backend_) {
        throw std::invalid_argument("ModelGateway requires a backend");
    }
}

ModelResponse ModelGateway::call(ModelRequest request, const std::string& task_id) {
    request.params.temperature = config_.temperature;
    for (int attempt = 0;; ++attempt) {
        try {
            SlotGuard slot(slots_);
            const auto start = std::chrono::steady_clock::now();
            ++calls_;
            ModelResponse response;
            response.text = backend_->complete(request);
            response.raw_latency_ms = static_cast<long>(
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
            return response;
        } catch (const TransportError& e) {
            if (attempt >= config_.transport_retries) {
                throw GatewayError(request.task, task_id,
                                   "backend failed after " + std::to_string(attempt + 1) + " attempts: " + e.what());
            }
            spdlog::warn("{} [{}]: transport error, retrying: {}", to_string(request.task), task_id, e.what());
            std::this_thread::sleep_for(config_.backoff_base * (1 << attempt));
        }
    }
}

ModelResponse ModelGateway::call_parsed(ModelRequest request, const std::string& task_id,
                                        const std::function<std::optional<Json>(const std::string&)>& parse) {
    const std::string base_prompt = request.prompt_text;
    std::string last_text;
    for (int round = 0; round <= config_.parse_reprompts; ++round) {
        if (round > 0) {
            request.prompt_text = base_prompt + prompts::reprompt_suffix();
            request.task_args["reprompt"] = round;
        }
        ModelResponse response = call(request, task_id);
        response.parsed = parse(response.text);
        if (response.parsed) {
            return response;
        }
        last_text = response.text;
    }
    throw GatewayError(request.task, task_id, "unparseable model output: " + text::utf8_prefix(last_text, 160));
}

void ModelGateway::require_readable(Task task, const std::string& task_id, const std::filesystem::path& path) const {
    std::ifstream in(path, std::ios::binary);
    if (!in || !std::filesystem::is_regular_file(path)) {
        throw GatewayError(task, task_id, "image unreadable: " + path.string());
    }
}

std::string ModelGateway::describe_photo(const PhotoRecord& photo, const std::string& locale) {
    const std::string key = photo.photo_id + '\n' + photo.source_path.string() + '\n' + locale;
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = description_cache_.find(key); it != description_cache_.end()) {
            return it->second;
        }
    }
    require_readable(Task::describe_photo, photo.photo_id, photo.source_path);
    ModelRequest req;
    req.task = Task::describe_photo;
    req.prompt_text = prompts::describe_photo(locale);
    req.image_refs = {photo.source_path};
    req.task_args = {{"photo_id", photo.photo_id}, {"locale", locale}};
    auto response = call_parsed(std::move(req), photo.photo_id, [](const std::string& t) -> std::optional<Json> {
        // single paragraph: collapse line breaks
        std::string flat;
        for (char c : text::trim(t)) flat.push_back(c == '\n' || c == '\r' ? ' ' : c);
        if (flat.empty()) return std::nullopt;
        return Json(flat);
    });
    const std::string description = response.parsed->get<std::string>();
    std::lock_guard lock(cache_mutex_);
    return description_cache_.emplace(key, description).first->second;
}

double ModelGateway::score_similarity(const PhotoRecord& a, const PhotoRecord& b) {
    const std::string task_id = a.photo_id + "|" + b.photo_id;
    require_readable(Task::score_similarity, task_id, a.source_path);
    require_readable(Task::score_similarity, task_id, b.source_path);
    ModelRequest req;
    req.task = Task::score_similarity;
    req.prompt_text = prompts::score_similarity();
    req.image_refs = {a.source_path, b.source_path};
    req.task_args = {{"photo_ids", {a.photo_id, b.photo_id}}};
    auto response = call_parsed(std::move(req), task_id, [](const std::string& t) -> std::optional<Json> {
        if (auto v = parse_similarity(t)) return Json(*v);
        return std::nullopt;
    });
    return std::clamp(response.parsed->get<double>(), 0.0, 1.0);
}

SceneInfo ModelGateway::extract_scene_info(std::span<const PhotoRecord> photos,
                                           const std::optional<std::filesystem::path>& portrait) {
    if (photos.empty()) {
        throw std::invalid_argument("extract_scene_info requires at least one photo");
    }
    const std::string task_id = photos.front().photo_id + ".." + photos.back().photo_id;
    ModelRequest req;
    req.task = Task::extract_scene;
    for (const auto& p : photos) {
        require_readable(Task::extract_scene, task_id, p.source_path);
        req.image_refs.push_back(p.source_path);
    }
    if (portrait) {
        require_readable(Task::extract_scene, task_id, *portrait);
        req.image_refs.push_back(*portrait);
    }
    const int budget = config_.activity_char_budget;
    req.prompt_text = prompts::extract_scene(photos.size(), portrait.has_value(), budget);
    req.task_args = {{"photo_ids", photo_id_list(photos)}, {"char_budget", budget}, {"shorten", false}};

    auto parse = [](const std::string& t) -> std::optional<Json> {
        return parse_scene_info(t) ? std::optional<Json>(Json(t)) : std::nullopt;
    };
    auto response = call_parsed(req, task_id, parse);
    SceneInfo info = *parse_scene_info(response.parsed->get<std::string>());

    if (text::utf8_length(info.activity.sentence) > static_cast<std::size_t>(budget)) {
        ModelRequest shorter = req;
        shorter.prompt_text = req.prompt_text + "\n\n" + prompts::shorten_activity(info.activity.sentence, budget);
        shorter.task_args["shorten"] = true;
        try {
            auto retry = call_parsed(shorter, task_id, parse);
            SceneInfo second = *parse_scene_info(retry.parsed->get<std::string>());
            if (text::utf8_length(second.activity.sentence) < text::utf8_length(info.activity.sentence)) {
                info.activity = second.activity;
            }
        } catch (const GatewayError& e) {
            spdlog::warn("{}: shortening re-prompt failed, truncating: {}", task_id, e.what());
        }
        info.activity.sentence = enforce_char_budget(info.activity.sentence, static_cast<std::size_t>(budget));
    }
    info.activity.char_budget = budget;
    for (const auto& p : photos) info.photo_ids.push_back(p.photo_id);
    return info;
}

std::vector<std::string> ModelGateway::generate_storyline(std::span<const SceneInfo> scenes) {
    if (scenes.empty()) {
        throw std::invalid_argument("generate_storyline requires at least one scene");
    }
    ModelRequest req;
    req.task = Task::gen_storyline;
    req.prompt_text = prompts::generate_storyline(scenes);
    Json args = Json::array();
    for (const auto& s : scenes) {
        args.push_back({{"photo_ids", s.photo_ids}, {"sentence", s.activity.sentence}});
    }
    req.task_args = {{"scenes", std::move(args)}};
    const std::size_t expected = scenes.size();
    auto response = call_parsed(std::move(req), "storyline", [expected](const std::string& t) -> std::optional<Json> {
        auto list = parse_storyline(t);
        if (!list || list->size() != expected) return std::nullopt;
        return Json(*list);
    });
    return response.parsed->get<std::vector<std::string>>();
}

std::string ModelGateway::generate_raw_reply(const std::string& user_input, std::span<const ChatTurn> history,
                                             std::span<const PhotoRecord> scene_photos, SceneId scene_id, int turn_index,
                                             const std::optional<std::filesystem::path>& portrait) {
    if (scene_photos.empty()) {
        throw std::invalid_argument("generate_raw_reply requires scene photos");
    }
    const std::string task_id = "scene " + std::to_string(scene_id) + " turn " + std::to_string(turn_index);
    ModelRequest req;
    req.task = Task::gen_reply;
    for (const auto& p : scene_photos) {
        require_readable(Task::gen_reply, task_id, p.source_path);
        req.image_refs.push_back(p.source_path);
    }
    if (portrait) {
        require_readable(Task::gen_reply, task_id, *portrait);
        req.image_refs.push_back(*portrait);
    }
    req.prompt_text = prompts::generate_reply(user_input, history, portrait.has_value());
    req.task_args = {{"user_input", user_input},
                     {"scene_id", scene_id},
                     {"turn_index", turn_index},
                     {"photo_ids", photo_id_list(scene_photos)}};
    return text::trim(call(std::move(req), task_id).text);
}

std::vector<std::string> ModelGateway::select_photos(const std::string& user_input, std::span<const ChatTurn> history,
                                                     std::span<const PhotoDescription> descriptions) {
    if (descriptions.empty()) {
        throw std::invalid_argument("select_photos requires descriptions");
    }
    const std::size_t limit = config_.max_selected_photos;
    std::vector<std::string> all;
    for (const auto& d : descriptions) all.push_back(d.photo_id);
    if (all.size() <= limit) {
        return all;
    }
    ModelRequest req;
    req.task = Task::select_photos;
    req.prompt_text = prompts::select_photos(user_input, history, descriptions, limit);
    req.task_args = {{"user_input", user_input}, {"photo_ids", all}, {"count", limit}};
    auto response = call_parsed(std::move(req), "select", [](const std::string& t) -> std::optional<Json> {
        if (auto ids = parse_photo_ids(t)) return Json(*ids);
        return std::nullopt;
    });

    const std::set<std::string> known(all.begin(), all.end());
    std::vector<std::string> chosen;
    for (const auto& id : response.parsed->get<std::vector<std::string>>()) {
        if (chosen.size() == limit) break;
        if (!known.contains(id)) {
            spdlog::debug("select_photos: dropping unknown id '{}'", id);
            continue;
        }
        if (std::find(chosen.begin(), chosen.end(), id) == chosen.end()) {
            chosen.push_back(id);
        }
    }
    if (chosen.empty()) {
        spdlog::warn("select_photos: no valid ids in model output, falling back to the first {} photos", limit);
        chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(limit));
    }
    return chosen;
}

}  // namespace reviver
