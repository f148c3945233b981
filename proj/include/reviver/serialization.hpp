#pragma once

#include "reviver/domain.hpp"

#include <json.hpp>

namespace reviver {

using Json = nlohmann::ordered_json;

Json to_json(const PhotoRecord& photo);
Json to_json(const CollectionManifest& manifest);
Json to_json(const Scene& scene);
Json to_json(const MemoryTree& tree);
Json to_json(const ChatTurn& turn);
Json to_json(const Transcript& transcript);
Json to_json(const SessionState& state);

SceneActivity activity_from_json(const Json& j);
SceneDetail detail_from_json(const Json& j);
ChatTurn turn_from_json(const Json& j);
MemoryTree tree_from_json(const Json& j);
SessionState session_from_json(const Json& j);

// Parses text, converting library errors into ParseError with line/column.
Json parse_json_text(const std::string& text, const std::string& what);

// Canonical file text: two-space indent, trailing newline.
std::string dump(const Json& j);

}  // namespace reviver
