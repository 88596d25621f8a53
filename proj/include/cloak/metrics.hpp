#pragma once

#include <vector>

#include "cloak/losses.hpp"

namespace cloak {

struct Detection {
    BoxTarget box;
    double score = 0.0;
    int image_id = 0;
};

// Ground-truth person boxes of one image.
struct ImageGroundTruth {
    int image_id = 0;
    std::vector<BoxTarget> boxes;
};

// Intersection over union of axis-aligned boxes; 0 when disjoint.
double iou(const BoxTarget& a, const BoxTarget& b);

// COCO-style AP at one IoU threshold: detections sorted by descending score,
// greedy one-to-one matching against unmatched ground truths with
// iou >= thresh, precision-recall integrated at 101 recall points.
// Zero ground truths => AP defined as 0.
double average_precision(const std::vector<Detection>& dets,
                         const std::vector<ImageGroundTruth>& gts, double iou_thresh);

// Mean of average_precision over thresholds 0.50, 0.55, ..., 0.95.
double ap_range(const std::vector<Detection>& dets, const std::vector<ImageGroundTruth>& gts);

// Greedy non-maximum suppression at the given IoU threshold (per image).
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

}  // namespace cloak
