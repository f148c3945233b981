#pragma once

#include "reviver/domain.hpp"
#include "reviver/model_gateway.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reviver {

// Cut after index i means photos i and i+1 belong to different scenes.
struct SegmentationResult {
    std::set<std::size_t> boundaries;
    std::vector<double> pair_scores;

    // Photo index ranges [first, last] of each scene.
    std::vector<std::pair<std::size_t, std::size_t>> scene_ranges(std::size_t photo_count) const;
};

// Activity similarity of two adjacent photos in [0,1]. Replaceable so an
// embedding-distance scorer can stand in for the model.
class PairScorer {
public:
    virtual ~PairScorer() = default;
    virtual double score(const PhotoRecord& a, const PhotoRecord& b) = 0;
};

class ModelPairScorer : public PairScorer {
public:
    explicit ModelPairScorer(ModelGateway& gateway) : gateway_(gateway) {}
    double score(const PhotoRecord& a, const PhotoRecord& b) override { return gateway_.score_similarity(a, b); }

private:
    ModelGateway& gateway_;
};

class BuildError : public std::runtime_error {
public:
    BuildError(std::string step, std::string subject, const std::string& message)
        : std::runtime_error("build failed at " + step + " (" + subject + "): " + message),
          step_(std::move(step)),
          subject_(std::move(subject)) {}
    const std::string& step() const { return step_; }
    const std::string& subject() const { return subject_; }

private:
    std::string step_;
    std::string subject_;
};

std::vector<PhotoRecord> order_photos(const CollectionManifest& manifest);

// Boundary at i iff pair_scores[i] < threshold (strict).
SegmentationResult segment_from_scores(std::vector<double> pair_scores, double threshold);

// Scores all adjacent pairs (up to `max_parallel` at once) and thresholds
// them. Errors name the failing pair.
SegmentationResult segment_scenes(std::span<const PhotoRecord> ordered, PairScorer& scorer, double threshold = 0.5,
                                  int max_parallel = 1);

struct BuildOptions {
    double threshold = 0.5;
    std::optional<std::filesystem::path> portrait;
    int max_parallel = 4;
    // Recorded in build_metadata; fixed in mock mode for byte-stable trees.
    std::function<Instant()> clock;
    std::string manifest_path;
};

MemoryTree build_memory_tree(const CollectionManifest& manifest, ModelGateway& gateway, const BuildOptions& options,
                             PairScorer* scorer = nullptr);

}  // namespace reviver
