#pragma once

#include "reviver/model_gateway.hpp"

#include <span>
#include <string>

// Prompt templates for the six model tasks.
namespace reviver::prompts {

std::string describe_photo(const std::string& locale);
std::string score_similarity();
std::string extract_scene(std::size_t photo_count, bool has_portrait, int char_budget);
std::string shorten_activity(const std::string& sentence, int char_budget);
std::string generate_storyline(std::span<const SceneInfo> scenes);
std::string generate_reply(const std::string& user_input, std::span<const ChatTurn> history, bool has_portrait);
std::string select_photos(const std::string& user_input, std::span<const ChatTurn> history,
                          std::span<const PhotoDescription> descriptions, std::size_t count);
std::string reprompt_suffix();

std::string render_history(std::span<const ChatTurn> history);

}  // namespace reviver::prompts
