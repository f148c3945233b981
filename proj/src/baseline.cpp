#include "reviver/baseline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace reviver::baseline {

PreparedDescriptions prepare_descriptions(CollectionManifest& manifest, ModelGateway& gateway) {
    PreparedDescriptions result;
    const auto calls_before = gateway.backend_calls();
    for (auto& photo : manifest.photos) {
        if (photo.cached_description && !photo.cached_description->empty()) continue;
        try {
            photo.cached_description = gateway.describe_photo(photo, manifest.locale);
        } catch (const std::exception& e) {
            spdlog::warn("description failed for {}: {}", photo.photo_id, e.what());
            result.failures.push_back({photo.photo_id, e.what()});
        }
    }
    result.backend_calls = gateway.backend_calls() - calls_before;
    return result;
}

BaselineChatbot::BaselineChatbot(std::shared_ptr<const CollectionManifest> manifest, std::shared_ptr<ModelGateway> gateway)
    : manifest_(std::move(manifest)), gateway_(std::move(gateway)) {
    if (!manifest_ || !gateway_) {
        throw std::invalid_argument("BaselineChatbot requires a manifest and a gateway");
    }
    for (const auto& p : manifest_->photos) {
        if (!p.cached_description || p.cached_description->empty()) {
            throw DescriptionsMissingError("photo " + p.photo_id + " has no description; run prepare_descriptions first");
        }
    }
}

ChatTurn BaselineChatbot::opening_turn() const {
    ChatTurn t;
    t.turn_index = 0;
    t.speaker = Speaker::bot;
    t.text = "Hello! I can see the " + std::to_string(manifest_->photos.size()) + " photos of \"" + manifest_->title +
             "\". What would you like to talk about?";
    t.annotations.guidance_kind = GuidanceKind::none;
    return t;
}

ChatTurn BaselineChatbot::reply(std::vector<ChatTurn>& history, const std::string& user_text) const {
    ChatTurn user;
    user.turn_index = static_cast<int>(history.size());
    user.speaker = Speaker::user;
    user.text = user_text;

    ChatTurn bot;
    bot.turn_index = user.turn_index + 1;
    bot.speaker = Speaker::bot;

    std::vector<PhotoDescription> descriptions;
    for (const auto& p : manifest_->photos) descriptions.push_back({p.photo_id, *p.cached_description});

    try {
        auto selected = gateway_->select_photos(user_text, history, descriptions);
        // Always hand the reply step min(5, n) photos: pad in manifest order.
        const std::size_t want = std::min(gateway_->config().max_selected_photos, manifest_->photos.size());
        for (const auto& p : manifest_->photos) {
            if (selected.size() >= want) break;
            if (std::find(selected.begin(), selected.end(), p.photo_id) == selected.end()) selected.push_back(p.photo_id);
        }
        std::vector<PhotoRecord> photos;
        for (const auto& id : selected) photos.push_back(*manifest_->find(id));

        bot.text = gateway_->generate_raw_reply(user_text, history, photos, 0, bot.turn_index, manifest_->portrait_photo);
        bot.annotations.selected_photos = std::move(selected);
        bot.annotations.guidance_kind = GuidanceKind::none;
    } catch (const std::exception& e) {
        spdlog::warn("baseline turn failed: {}", e.what());
        bot.text = "Sorry, I had trouble looking at the photos just now. Could you say that again?";
        bot.annotations = {};
        bot.annotations.error = true;
    }
    history.push_back(std::move(user));
    history.push_back(bot);
    return bot;
}

}  // namespace reviver::baseline
