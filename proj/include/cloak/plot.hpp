#pragma once

#include <string>
#include <vector>

#include "cloak/evaluation.hpp"
#include "cloak/image.hpp"
#include "cloak/training.hpp"

namespace cloak {

Image render_loss_curve(const std::vector<IterationRecord>& history, int width = 720,
                        int height = 420);

// Grouped bars: one group per detector, one AP@0.50 bar per condition.
Image render_ap_chart(const MetricsReport& merged, int width = 720, int height = 420);

// Reads the loss-history CSV and/or report JSON and writes loss_curve.png and
// ap_chart.png under out_dir. Either input path may be empty.
void emit_plots(const std::string& loss_history_csv, const std::string& report_json,
                const std::string& out_dir);

}  // namespace cloak
