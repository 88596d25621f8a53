#include "cloak/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cloak/errors.hpp"
#include "cloak/training.hpp"

using nlohmann::json;

namespace cloak {

MetricsReport evaluate_attack(const DetectorAdapter& adapter, const DatasetManifest& dataset,
                              const std::optional<AdversarialPattern>& pattern) {
    std::vector<Detection> dets;
    std::vector<ImageGroundTruth> gts;
    for (size_t i = 0; i < dataset.entries.size(); ++i) {
        const AnnotatedImage& entry = dataset.entries[i];
        Image img = pattern ? attack_image(entry, *pattern) : entry.image;
        DetectorPredictions preds = adapter.predict(img);
        auto d = post_process(preds, static_cast<int>(i));
        dets.insert(dets.end(), d.begin(), d.end());
        gts.push_back({static_cast<int>(i), entry.person_boxes});
    }

    MetricsRow row;
    row.detector = adapter.name();
    row.condition = pattern ? "pattern_attack" : "without_attack";
    row.ap_50_95 = ap_range(dets, gts);
    row.ap_50 = average_precision(dets, gts, 0.5);
    row.ap_75 = average_precision(dets, gts, 0.75);

    MetricsReport report;
    report.pattern_id = pattern ? "pattern" : "none";
    report.dataset_id = dataset.split + ":" + std::to_string(dataset.entries.size());
    report.rows.push_back(row);
    return report;
}

void save_report(const MetricsReport& report, const std::string& path) {
    json j;
    j["pattern_id"] = report.pattern_id;
    j["dataset_id"] = report.dataset_id;
    j["rows"] = json::array();
    for (const auto& r : report.rows) {
        j["rows"].push_back({{"detector", r.detector},
                             {"condition", r.condition},
                             {"ap_50_95", r.ap_50_95},
                             {"ap_50", r.ap_50},
                             {"ap_75", r.ap_75}});
    }
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

MetricsReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read report: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoFailure("report is not valid JSON: " + path + ": " + e.what());
    }
    MetricsReport r;
    r.pattern_id = j.value("pattern_id", "");
    r.dataset_id = j.value("dataset_id", "");
    for (const auto& jr : j.value("rows", json::array())) {
        MetricsRow row;
        row.detector = jr.at("detector").get<std::string>();
        row.condition = jr.at("condition").get<std::string>();
        row.ap_50_95 = jr.at("ap_50_95").get<double>();
        row.ap_50 = jr.at("ap_50").get<double>();
        row.ap_75 = jr.at("ap_75").get<double>();
        r.rows.push_back(row);
    }
    return r;
}

MetricsReport merge_reports(const std::vector<MetricsReport>& reports) {
    MetricsReport merged;
    for (const auto& r : reports) {
        if (merged.dataset_id.empty()) merged.dataset_id = r.dataset_id;
        if (merged.pattern_id.empty() || merged.pattern_id == "none") {
            merged.pattern_id = r.pattern_id;
        }
        merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    }
    return merged;
}

namespace {

std::vector<std::string> ordered_conditions(const MetricsReport& r) {
    std::vector<std::string> conds;
    auto add = [&](const std::string& c) {
        if (std::find(conds.begin(), conds.end(), c) == conds.end()) conds.push_back(c);
    };
    for (const auto& row : r.rows) {
        if (row.condition == "without_attack") add(row.condition);
    }
    for (const auto& row : r.rows) add(row.condition);
    return conds;
}

std::vector<std::string> ordered_detectors(const MetricsReport& r) {
    std::vector<std::string> dets;
    for (const auto& row : r.rows) {
        if (std::find(dets.begin(), dets.end(), row.detector) == dets.end()) {
            dets.push_back(row.detector);
        }
    }
    return dets;
}

const MetricsRow* find_row(const MetricsReport& r, const std::string& det,
                           const std::string& cond) {
    for (const auto& row : r.rows) {
        if (row.detector == det && row.condition == cond) return &row;
    }
    return nullptr;
}

std::string pad(const std::string& s, size_t width) {
    std::string out = s;
    while (out.size() < width) out.push_back(' ');
    return out;
}

std::string fmt_ap(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

std::string format_report_table(const MetricsReport& merged) {
    auto conds = ordered_conditions(merged);
    auto dets = ordered_detectors(merged);
    const char* metrics[3] = {"AP@0.50:0.95", "AP@0.50", "AP@0.75"};

    size_t det_w = std::string("target model").size();
    for (const auto& d : dets) det_w = std::max(det_w, d.size());
    size_t col_w = 8;
    for (const auto& c : conds) col_w = std::max(col_w, c.size());

    std::ostringstream os;
    os << pad("target model", det_w);
    for (const auto* m : metrics) {
        for (const auto& c : conds) {
            os << "  " << pad(std::string(m) + " " + c, col_w + 13);
        }
    }
    os << "\n";
    for (const auto& d : dets) {
        os << pad(d, det_w);
        for (int mi = 0; mi < 3; ++mi) {
            for (const auto& c : conds) {
                const MetricsRow* row = find_row(merged, d, c);
                std::string cell = "-";
                if (row) {
                    double v = mi == 0 ? row->ap_50_95 : (mi == 1 ? row->ap_50 : row->ap_75);
                    cell = fmt_ap(v);
                }
                os << "  " << pad(cell, col_w + 13);
            }
        }
        os << "\n";
    }
    return os.str();
}

std::string format_resolution_table(const MetricsReport& merged) {
    auto conds = ordered_conditions(merged);
    auto dets = ordered_detectors(merged);

    size_t cond_w = std::string("condition").size();
    for (const auto& c : conds) cond_w = std::max(cond_w, c.size());
    size_t det_w = 8;
    for (const auto& d : dets) det_w = std::max(det_w, d.size());

    std::ostringstream os;
    os << "AP@0.50\n";
    os << pad("condition", cond_w);
    for (const auto& d : dets) os << "  " << pad(d, det_w);
    os << "\n";
    for (const auto& c : conds) {
        os << pad(c, cond_w);
        for (const auto& d : dets) {
            const MetricsRow* row = find_row(merged, d, c);
            os << "  " << pad(row ? fmt_ap(row->ap_50) : "-", det_w);
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace cloak
