#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cloak/geometry.hpp"
#include "cloak/image.hpp"
#include "cloak/losses.hpp"

namespace cloak {

enum class Viewpoint { kFrontal, kSideBack, kNoHuman };

Viewpoint viewpoint_from_string(const std::string& s);  // throws SchemaViolation
std::string to_string(Viewpoint v);

struct GarmentAnnotation {
    std::vector<Vec2> keypoints;  // ordered outline, pixel coordinates
    // Indices of the shoulder-left, shoulder-right, hem-right, hem-left
    // keypoints when the annotation labels them.
    std::optional<std::array<int, 4>> corner_labels;
};

struct AnnotatedImage {
    std::string path;  // relative to the manifest; empty for in-memory scenes
    Image image;
    std::vector<BoxTarget> person_boxes;
    // Non-person objects rendered by the synthetic generator; optional in the
    // manifest schema. They give the detector a second category to learn.
    std::vector<BoxTarget> distractor_boxes;
    std::vector<GarmentAnnotation> garments;
    Viewpoint viewpoint = Viewpoint::kNoHuman;
};

struct DatasetManifest {
    std::string split;  // "train" or "val"
    std::vector<AnnotatedImage> entries;

    int count(Viewpoint v) const;
};

// Reads the JSON manifest and eagerly loads every referenced image. Entries
// violating the schema are collected and reported in one SchemaViolation.
DatasetManifest load_dataset(const std::string& manifest_path);

// Writes manifest JSON plus one PNG per entry under dir/images/.
void save_dataset(const DatasetManifest& manifest, const std::string& dir,
                  const std::string& manifest_name = "manifest.json");

// Picks the 4 destination anchors for the pattern: the labeled corners when
// present, otherwise the polygon vertices nearest the corners of the
// minimum-area oriented bounding box.
Quad keypoints_to_quad(const std::vector<Vec2>& keypoints,
                       const std::optional<std::array<int, 4>>& corner_labels = std::nullopt);

// --- Synthetic scenes ----------------------------------------------------------

struct SynthConfig {
    int image_size = 112;
    int min_persons = 0;
    int max_persons = 2;
    int max_distractors = 3;
    double max_rotation_deg = 60.0;  // in-plane garment/body rotation
    double min_body_height = 44.0;
    double max_body_height = 72.0;
    double garment_jitter = 0.03;  // corner jitter, fraction of body size
    bool emit_corner_labels = true;
};

// Renders body rectangle + head disc persons with a quadrilateral garment
// region at randomized position, scale and rotation. The generator is its own
// ground truth: boxes are the exact painted extents.
AnnotatedImage synth_scene(uint64_t seed, const SynthConfig& config);

DatasetManifest make_synth_dataset(const std::string& split, int count, uint64_t base_seed,
                                   const SynthConfig& config);

}  // namespace cloak
