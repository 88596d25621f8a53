#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cloak/data.hpp"
#include "cloak/detector.hpp"
#include "cloak/metrics.hpp"
#include "cloak/pattern.hpp"

namespace cloak {

struct MetricsRow {
    std::string detector;
    std::string condition;  // "without_attack", "pattern_attack" or a custom label
    double ap_50_95 = 0.0;
    double ap_50 = 0.0;
    double ap_75 = 0.0;
};

struct MetricsReport {
    std::string pattern_id;
    std::string dataset_id;
    std::vector<MetricsRow> rows;
};

// Runs the adapter over the dataset, clean when `pattern` is absent and with
// the pattern composited onto every garment when present. Detections are
// post-NMS with a 0.05 score floor.
MetricsReport evaluate_attack(const DetectorAdapter& adapter, const DatasetManifest& dataset,
                              const std::optional<AdversarialPattern>& pattern);

void save_report(const MetricsReport& report, const std::string& path);
MetricsReport load_report(const std::string& path);

MetricsReport merge_reports(const std::vector<MetricsReport>& reports);

// Aligned-column table: one row per detector, AP columns grouped by metric
// and condition ("without attack" columns first).
std::string format_report_table(const MetricsReport& merged);

// Resolution-study table: one row per condition label, AP@0.50 per detector.
std::string format_resolution_table(const MetricsReport& merged);

}  // namespace cloak
