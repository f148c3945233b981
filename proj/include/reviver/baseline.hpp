#pragma once

#include "reviver/domain.hpp"
#include "reviver/model_gateway.hpp"

#include <memory>
#include <string>
#include <vector>

// The naive chatbot: per turn, pick the most relevant photos from their
// pre-generated descriptions, then reply from those photos. It never sees a
// MemoryTree.
namespace reviver::baseline {

struct DescriptionFailure {
    std::string photo_id;
    std::string error;
};

struct PreparedDescriptions {
    std::vector<DescriptionFailure> failures;
    std::size_t backend_calls = 0;
    bool complete() const { return failures.empty(); }
};

// Fills cached_description for every photo lacking one. Per-photo failures
// are recorded and skipped.
PreparedDescriptions prepare_descriptions(CollectionManifest& manifest, ModelGateway& gateway);

class DescriptionsMissingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BaselineChatbot {
public:
    // Throws DescriptionsMissingError unless every photo has a cached description.
    BaselineChatbot(std::shared_ptr<const CollectionManifest> manifest, std::shared_ptr<ModelGateway> gateway);

    ChatTurn opening_turn() const;
    // Appends the user and bot turns to history.
    ChatTurn reply(std::vector<ChatTurn>& history, const std::string& user_text) const;

    const CollectionManifest& manifest() const { return *manifest_; }

private:
    std::shared_ptr<const CollectionManifest> manifest_;
    std::shared_ptr<ModelGateway> gateway_;
};

}  // namespace reviver::baseline
