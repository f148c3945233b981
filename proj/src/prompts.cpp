#include "prompts.hpp"

#include <sstream>

namespace reviver::prompts {

namespace {

// Where/when/who/what cues people use to work out a scene's activity.
constexpr const char* kActivityGuidelines = R"(Work out the scene activity from these cues:
- Where: landmarks (e.g. a famous tower); surroundings (coast, mountains, dining halls, galleries); places named in texts (entrance signs, holiday banners).
- When: season (clothes, tree leaves); day or night (lighting conditions); time shown in texts (holiday banners, screens).
- Who: visual appearance (age, gender, clothes, hair); names in texts (name tags, name badges).
- What: human actions (e.g. playing an instrument); objects (food, animals, fairground rides); actions named in texts (menus, event banners).)";

// Detail categories and the attributes worth describing for each.
constexpr const char* kDetailGuidelines = R"(List the visual details of the scene, one object or aspect per detail, using these categories:
- people: number of people; gender, age, hair, clothes, facial expression, pose.
- food: name, color, shape.
- animals: breed, color, size.
- plants: species, color, shape, height.
- buildings: color, shape, style.
- texts: the raw text and where it appears (e.g. on a screen).
- others: color, shape.)";

}  // namespace

std::string render_history(std::span<const ChatTurn> history) {
    std::ostringstream out;
    for (const auto& t : history) {
        out << (t.speaker == Speaker::user ? "User: " : "Assistant: ") << t.text << '\n';
    }
    return out.str();
}

std::string describe_photo(const std::string& locale) {
    return "Describe this photo in one paragraph for a blind or low-vision person who was there. "
           "Cover who is present, what is happening, where and when it seems to take place, and any visible text. "
           "Reply in the language with tag '" + locale + "'. Reply with the paragraph only.";
}

std::string score_similarity() {
    return "You are given two neighbouring photos from one event photo collection. "
           "Rate how likely they show one and the same activity, judging by who is present, what they are doing, "
           "and when and where it happens. Use 1 for the same activity and 0 for unrelated activities. "
           "Answer exactly in the form `similarity: <number>` followed by one short reason.";
}

std::string extract_scene(std::size_t photo_count, bool has_portrait, int char_budget) {
    std::ostringstream out;
    out << "The first " << photo_count << " images are all the photos of one scene of an event, in chronological order.";
    if (has_portrait) {
        out << " The last image is a portrait of the user; refer to the user as \"you\" when they appear.";
    }
    out << "\n\n" << kActivityGuidelines << "\n\n"
        << "Write one sentence describing the scene activity that covers the who, what, when and where aspects you can "
           "infer. The sentence must not exceed "
        << char_budget
        << " characters. For every aspect, give the reason it was determined from the photos "
           "(e.g. \"This looks like a canteen: the sign at the entrance says 'student canteen'.\"). "
           "Leave out aspects you cannot infer.\n\n"
        << kDetailGuidelines << "\n\n"
        << "Reply with a fenced JSON block of this shape:\n"
           "```json\n"
           "{\"activity\": {\"sentence\": \"...\", \"aspects\": {\"who\": \"...\", \"what\": \"...\", \"when\": \"...\", "
           "\"where\": \"...\"}, \"reasons\": [\"...\"]},\n"
           " \"details\": [{\"category\": \"people|food|animals|plants|buildings|texts|others\", \"description\": \"...\"}]}\n"
           "```";
    return out.str();
}

std::string shorten_activity(const std::string& sentence, int char_budget) {
    return "The activity sentence \"" + sentence + "\" is longer than " + std::to_string(char_budget) +
           " characters. Rewrite it within the limit and reply with the same JSON block shape as before.";
}

std::string generate_storyline(std::span<const SceneInfo> scenes) {
    std::ostringstream out;
    out << "Below is the information of all " << scenes.size() << " scenes of a photo collection.\n\n";
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        out << "Scene " << (i + 1) << ": " << scenes[i].activity.sentence << '\n';
        for (const auto& d : scenes[i].details) {
            out << "  - " << d.description << '\n';
        }
    }
    out << "\nWrite one short summary sentence per scene, keeping the scenes in the order given (earliest first). "
           "Return exactly "
        << scenes.size()
        << " summaries as a fenced JSON block: ```json\n{\"summaries\": [\"...\"]}\n```";
    return out.str();
}

std::string generate_reply(const std::string& user_input, std::span<const ChatTurn> history, bool has_portrait) {
    std::ostringstream out;
    out << "Answer the user's latest message using the photos and the conversation so far. "
           "The user is blind or has low vision and is reminiscing about the event in the photos.";
    if (has_portrait) {
        out << " The last image is a portrait of the user.";
    }
    out << "\n\nChat history:\n" << render_history(history) << "\nUser input: " << user_input;
    return out.str();
}

std::string select_photos(const std::string& user_input, std::span<const ChatTurn> history,
                          std::span<const PhotoDescription> descriptions, std::size_t count) {
    std::ostringstream out;
    out << "Here are text descriptions of all photos in a collection:\n";
    for (const auto& d : descriptions) {
        out << "[" << d.photo_id << "] " << d.text << '\n';
    }
    out << "\nChat history:\n" << render_history(history) << "\nUser input: " << user_input << "\n\n"
        << "Select the " << count
        << " photos most relevant to the user input. Reply with a fenced JSON block: ```json\n{\"photo_ids\": [\"...\"]}\n```";
    return out.str();
}

std::string reprompt_suffix() {
    return "\n\nYour previous answer could not be parsed. Answer again using exactly the requested format.";
}

}  // namespace reviver::prompts
