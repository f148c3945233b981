#include "reviver/tree_builder.hpp"

#include <spdlog/spdlog.h>

#include <future>

namespace reviver {

namespace {

// Runs fn(i) for i in [0, n), at most `width` at a time, results in index order.
// Rethrows the lowest-index failure.
template <typename T, typename Fn>
std::vector<T> ordered_fan_out(std::size_t n, int width, Fn fn) {
    std::vector<T> results(n);
    const std::size_t step = static_cast<std::size_t>(std::max(1, width));
    for (std::size_t start = 0; start < n; start += step) {
        const std::size_t end = std::min(n, start + step);
        std::vector<std::future<T>> batch;
        for (std::size_t i = start; i < end; ++i) {
            batch.push_back(std::async(step == 1 ? std::launch::deferred : std::launch::async, fn, i));
        }
        std::exception_ptr first_error;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            try {
                results[start + k] = batch[k].get();
            } catch (...) {
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);
    }
    return results;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> SegmentationResult::scene_ranges(std::size_t photo_count) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (photo_count == 0) return out;
    std::size_t first = 0;
    for (std::size_t cut : boundaries) {
        out.emplace_back(first, cut);
        first = cut + 1;
    }
    out.emplace_back(first, photo_count - 1);
    return out;
}

std::vector<PhotoRecord> order_photos(const CollectionManifest& manifest) {
    return chronological_order(manifest.photos);
}

SegmentationResult segment_from_scores(std::vector<double> pair_scores, double threshold) {
    SegmentationResult r;
    for (std::size_t i = 0; i < pair_scores.size(); ++i) {
        if (pair_scores[i] < threshold) {
            r.boundaries.insert(i);
        }
    }
    r.pair_scores = std::move(pair_scores);
    return r;
}

SegmentationResult segment_scenes(std::span<const PhotoRecord> ordered, PairScorer& scorer, double threshold,
                                  int max_parallel) {
    if (ordered.empty()) {
        throw std::invalid_argument("segment_scenes requires at least one photo");
    }
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("threshold must be in (0, 1]");
    }
    const std::size_t pairs = ordered.size() - 1;
    auto scores = ordered_fan_out<double>(pairs, max_parallel, [&](std::size_t i) {
        try {
            return std::clamp(scorer.score(ordered[i], ordered[i + 1]), 0.0, 1.0);
        } catch (const std::exception& e) {
            throw BuildError("segmentation", "(" + ordered[i].photo_id + "," + ordered[i + 1].photo_id + ")", e.what());
        }
    });
    return segment_from_scores(std::move(scores), threshold);
}

MemoryTree build_memory_tree(const CollectionManifest& manifest, ModelGateway& gateway, const BuildOptions& options,
                             PairScorer* scorer) {
    if (auto report = validate_manifest(manifest); !report.empty()) {
        throw BuildError("manifest", manifest.collection_id, describe(report));
    }
    const auto ordered = order_photos(manifest);

    ModelPairScorer model_scorer(gateway);
    PairScorer& pair_scorer = scorer != nullptr ? *scorer : model_scorer;
    const auto segmentation = segment_scenes(ordered, pair_scorer, options.threshold, options.max_parallel);
    const auto ranges = segmentation.scene_ranges(ordered.size());
    spdlog::info("{}: {} photos segmented into {} scenes", manifest.collection_id, ordered.size(), ranges.size());

    const auto portrait = options.portrait ? options.portrait : manifest.portrait_photo;
    auto infos = ordered_fan_out<SceneInfo>(ranges.size(), options.max_parallel, [&](std::size_t k) {
        const auto [first, last] = ranges[k];
        std::span<const PhotoRecord> photos(ordered.data() + first, last - first + 1);
        try {
            return gateway.extract_scene_info(photos, portrait);
        } catch (const std::exception& e) {
            throw BuildError("extraction", "scene " + std::to_string(k + 1), e.what());
        }
    });

    std::vector<std::string> summaries;
    try {
        summaries = gateway.generate_storyline(infos);
    } catch (const std::exception& e) {
        throw BuildError("storyline", manifest.collection_id, e.what());
    }

    MemoryTree tree;
    tree.collection_id = manifest.collection_id;
    for (std::size_t k = 0; k < infos.size(); ++k) {
        Scene scene;
        scene.scene_id = static_cast<SceneId>(k + 1);
        scene.photo_ids = infos[k].photo_ids;
        scene.activity = infos[k].activity;
        scene.details = infos[k].details;
        for (std::size_t d = 0; d < scene.details.size(); ++d) {
            scene.details[d].detail_id = make_detail_id(scene.scene_id, static_cast<int>(d + 1));
        }
        scene.summary_sentence = summaries[k];
        tree.storyline.push_back({scene.scene_id, scene.summary_sentence});
        tree.scenes.push_back(std::move(scene));
    }
    tree.build_metadata.similarity_threshold = options.threshold;
    tree.build_metadata.model_id = gateway.model_id();
    tree.build_metadata.built_at =
        options.clock ? options.clock() : std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    tree.build_metadata.manifest_path = options.manifest_path;

    if (auto report = validate_tree(tree, &manifest); !report.empty()) {
        throw BuildError("validation", manifest.collection_id, describe(report));
    }
    return tree;
}

}  // namespace reviver
