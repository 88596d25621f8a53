#include "cloak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cloak {

double iou(const BoxTarget& a, const BoxTarget& b) {
    double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2;
    double ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
    double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
    double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
    double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    double inter = ix * iy;
    double uni = a.w * a.h + b.w * b.h - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double average_precision(const std::vector<Detection>& dets,
                         const std::vector<ImageGroundTruth>& gts, double iou_thresh) {
    size_t total_gt = 0;
    std::map<int, const ImageGroundTruth*> by_image;
    for (const auto& g : gts) {
        total_gt += g.boxes.size();
        by_image[g.image_id] = &g;
    }
    if (total_gt == 0) return 0.0;

    // Stable sort keeps insertion order on score ties, so results are
    // deterministic for a fixed detection list.
    std::vector<const Detection*> order;
    order.reserve(dets.size());
    for (const auto& d : dets) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(),
                     [](const Detection* a, const Detection* b) { return a->score > b->score; });

    std::map<int, std::vector<bool>> used;
    for (const auto& g : gts) used[g.image_id].assign(g.boxes.size(), false);

    std::vector<int> tp(order.size(), 0);
    for (size_t i = 0; i < order.size(); ++i) {
        const Detection& d = *order[i];
        auto it = by_image.find(d.image_id);
        if (it == by_image.end()) continue;  // detection on an image with no gt: FP
        const auto& boxes = it->second->boxes;
        auto& flags = used[d.image_id];
        double best = 0.0;
        int best_j = -1;
        for (size_t j = 0; j < boxes.size(); ++j) {
            if (flags[j]) continue;
            double v = iou(d.box, boxes[j]);
            if (v > best) {
                best = v;
                best_j = static_cast<int>(j);
            }
        }
        if (best_j >= 0 && best >= iou_thresh) {
            flags[static_cast<size_t>(best_j)] = true;
            tp[i] = 1;
        }
    }

    // Precision/recall after each detection, then 101-point interpolation.
    std::vector<double> precision(order.size()), recall(order.size());
    int cum_tp = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        cum_tp += tp[i];
        precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(cum_tp) / static_cast<double>(total_gt);
    }

    double ap = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double r = static_cast<double>(k) / 100.0;
        double best_p = 0.0;
        for (size_t i = 0; i < order.size(); ++i) {
            if (recall[i] >= r) best_p = std::max(best_p, precision[i]);
        }
        ap += best_p;
    }
    return ap / 101.0;
}

double ap_range(const std::vector<Detection>& dets, const std::vector<ImageGroundTruth>& gts) {
    double sum = 0.0;
    for (int k = 10; k <= 19; ++k) {
        sum += average_precision(dets, gts, static_cast<double>(k) / 20.0);
    }
    return sum / 10.0;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    for (const auto& d : dets) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (k.image_id == d.image_id && iou(k.box, d.box) > iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

}  // namespace cloak
