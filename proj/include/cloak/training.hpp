#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cloak/data.hpp"
#include "cloak/detector.hpp"
#include "cloak/losses.hpp"
#include "cloak/pattern.hpp"

namespace cloak {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 1;
    int batch_size = 8;
    LossWeights weights = LossWeights::yolo_reference();
    Architecture architecture = Architecture::kYolo;
    int pattern_resolution = 400;
    int base_resolution = 400;
    uint64_t seed = 0;
    double eps = 1e-6;

    void validate() const;  // throws ConfigError
};

struct IterationRecord {
    int iteration = 0;
    LossBreakdown losses;
    double mean_matched_score = 0.0;
};

struct TrainResult {
    AdversarialPattern pattern;  // final, at base resolution
    std::vector<IterationRecord> loss_history;
    std::string manifest_json;
    uint64_t detector_checksum_before = 0;
    uint64_t detector_checksum_after = 0;
    int skipped_batches = 0;          // batches that carried constraint losses only
    bool pattern_always_in_range = true;
};

// Warps the pattern onto every garment quad and composites it behind the
// keypoint polygon mask. Images without garments come back unchanged.
Image attack_image(const AnnotatedImage& img, const AdversarialPattern& pattern);

// Optimizes the pattern pixels against a frozen detector: per batch this
// downsamples the base pattern, composites it into each image, runs the
// detector, matches candidates to person boxes, and steps the pattern with
// adaptive-moment gradient descent followed by projection to [0,1].
TrainResult train_pattern(const DatasetManifest& dataset, const DetectorAdapter& adapter,
                          const TrainConfig& config, const Palette& palette,
                          const std::optional<AdversarialPattern>& initial = std::nullopt);

// CSV with columns iteration,cla,coord,wh,bbox,tv,nps,total. Values are
// printed with %.17g so they round-trip exactly.
void write_loss_history(const std::vector<IterationRecord>& history, const std::string& path);
std::vector<IterationRecord> read_loss_history(const std::string& path);

}  // namespace cloak
