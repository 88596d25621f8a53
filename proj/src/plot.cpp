#include "cloak/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "cloak/errors.hpp"
#include "cloak/image_io.hpp"

namespace cloak {

namespace {

struct Color {
    double r, g, b;
};

const Color kBg{1.0, 1.0, 1.0};
const Color kAxis{0.15, 0.15, 0.15};
const Color kGrid{0.88, 0.88, 0.88};
const Color kSeries[4] = {{0.12, 0.35, 0.75}, {0.85, 0.35, 0.1}, {0.2, 0.6, 0.25}, {0.6, 0.2, 0.6}};

void put_px(Image& img, int x, int y, const Color& c) {
    if (x < 0 || x >= img.w || y < 0 || y >= img.h) return;
    img.at(y, x, 0) = c.r;
    img.at(y, x, 1) = c.g;
    img.at(y, x, 2) = c.b;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, const Color& c) {
    for (int y = std::max(0, y0); y <= std::min(img.h - 1, y1); ++y) {
        for (int x = std::max(0, x0); x <= std::min(img.w - 1, x1); ++x) put_px(img, x, y, c);
    }
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, const Color& c) {
    double dx = x1 - x0, dy = y1 - y0;
    int steps = static_cast<int>(std::max(std::abs(dx), std::abs(dy))) + 1;
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        put_px(img, static_cast<int>(std::lround(x0 + t * dx)),
               static_cast<int>(std::lround(y0 + t * dy)), c);
    }
}

// 5x7 bitmap glyphs, rows top to bottom, low 5 bits used.
const std::map<char, std::array<uint8_t, 7>>& font() {
    static const std::map<char, std::array<uint8_t, 7>> f = {
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
        {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
        {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0E}},
        {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
        {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
        {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
        {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
        {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
        {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
        {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
        {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
        {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
        {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
        {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    };
    return f;
}

void draw_text(Image& img, int x, int y, const std::string& text, const Color& c) {
    int cx = x;
    for (char raw : text) {
        char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        if (ch == '_') ch = ' ';
        auto it = font().find(ch);
        if (it != font().end()) {
            for (int row = 0; row < 7; ++row) {
                for (int col = 0; col < 5; ++col) {
                    if (it->second[static_cast<size_t>(row)] & (1 << (4 - col))) {
                        put_px(img, cx + col, y + row, c);
                    }
                }
            }
        }
        cx += 6;
    }
}

std::string fmt_num(double v) {
    char buf[32];
    if (std::abs(v) >= 1000 || (std::abs(v) < 0.01 && v != 0)) {
        std::snprintf(buf, sizeof(buf), "%.2g", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%.2f", v);
    }
    return buf;
}

}  // namespace

Image render_loss_curve(const std::vector<IterationRecord>& history, int width, int height) {
    if (history.empty()) throw Error("render_loss_curve: empty history");
    Image img(height, width, 3);
    fill_rect(img, 0, 0, width - 1, height - 1, kBg);

    const int ml = 64, mr = 16, mt = 24, mb = 40;
    const int x0 = ml, x1 = width - mr, y0 = mt, y1 = height - mb;

    double vmin = history.front().losses.total, vmax = vmin;
    for (const auto& r : history) {
        vmin = std::min(vmin, r.losses.total);
        vmax = std::max(vmax, r.losses.total);
    }
    if (vmax == vmin) {
        vmax += 1.0;
        vmin -= 1.0;
    }
    double pad_v = 0.05 * (vmax - vmin);
    vmin -= pad_v;
    vmax += pad_v;

    for (int i = 0; i <= 4; ++i) {
        int y = y0 + (y1 - y0) * i / 4;
        draw_line(img, x0, y, x1, y, kGrid);
        double v = vmax - (vmax - vmin) * i / 4;
        draw_text(img, 4, y - 3, fmt_num(v), kAxis);
    }
    draw_line(img, x0, y0, x0, y1, kAxis);
    draw_line(img, x0, y1, x1, y1, kAxis);

    const double n = static_cast<double>(history.size());
    auto px = [&](size_t i) { return x0 + (x1 - x0) * (n == 1 ? 0.5 : i / (n - 1)); };
    auto py = [&](double v) { return y1 - (y1 - y0) * (v - vmin) / (vmax - vmin); };
    if (history.size() == 1) {
        fill_rect(img, static_cast<int>(px(0)) - 2, static_cast<int>(py(history[0].losses.total)) - 2,
                  static_cast<int>(px(0)) + 2, static_cast<int>(py(history[0].losses.total)) + 2,
                  kSeries[0]);
    } else {
        for (size_t i = 0; i + 1 < history.size(); ++i) {
            draw_line(img, px(i), py(history[i].losses.total), px(i + 1),
                      py(history[i + 1].losses.total), kSeries[0]);
        }
    }

    draw_text(img, x0, 8, "TOTAL LOSS", kAxis);
    draw_text(img, (x0 + x1) / 2 - 28, height - 16, "ITERATION", kAxis);
    draw_text(img, x0, height - 16, "0", kAxis);
    draw_text(img, x1 - 30, height - 16, std::to_string(history.back().iteration), kAxis);
    return img;
}

Image render_ap_chart(const MetricsReport& merged, int width, int height) {
    if (merged.rows.empty()) throw Error("render_ap_chart: empty report");
    Image img(height, width, 3);
    fill_rect(img, 0, 0, width - 1, height - 1, kBg);

    std::vector<std::string> dets, conds;
    for (const auto& r : merged.rows) {
        if (std::find(dets.begin(), dets.end(), r.detector) == dets.end()) dets.push_back(r.detector);
        if (std::find(conds.begin(), conds.end(), r.condition) == conds.end()) {
            conds.push_back(r.condition);
        }
    }

    const int ml = 48, mr = 16, mt = 24, mb = 72;
    const int x0 = ml, x1 = width - mr, y0 = mt, y1 = height - mb;
    for (int i = 0; i <= 5; ++i) {
        int y = y0 + (y1 - y0) * i / 5;
        draw_line(img, x0, y, x1, y, kGrid);
        draw_text(img, 8, y - 3, fmt_num(1.0 - 0.2 * i), kAxis);
    }
    draw_line(img, x0, y0, x0, y1, kAxis);
    draw_line(img, x0, y1, x1, y1, kAxis);
    draw_text(img, x0, 8, "AP 0.50", kAxis);

    const int group_w = (x1 - x0) / std::max<size_t>(1, dets.size());
    const int bar_w = std::max(6, static_cast<int>(0.7 * group_w / std::max<size_t>(1, conds.size())));
    for (size_t d = 0; d < dets.size(); ++d) {
        int gx = x0 + static_cast<int>(d) * group_w + group_w / 2 -
                 static_cast<int>(conds.size()) * bar_w / 2;
        for (size_t c = 0; c < conds.size(); ++c) {
            double v = 0.0;
            for (const auto& r : merged.rows) {
                if (r.detector == dets[d] && r.condition == conds[c]) v = r.ap_50;
            }
            int top = y1 - static_cast<int>((y1 - y0) * std::clamp(v, 0.0, 1.0));
            fill_rect(img, gx + static_cast<int>(c) * bar_w, top,
                      gx + static_cast<int>(c + 1) * bar_w - 2, y1 - 1, kSeries[c % 4]);
        }
        draw_text(img, x0 + static_cast<int>(d) * group_w + 4, y1 + 6, dets[d], kAxis);
    }
    for (size_t c = 0; c < conds.size(); ++c) {
        int ly = y1 + 20 + static_cast<int>(c) * 12;
        fill_rect(img, x0, ly, x0 + 8, ly + 8, kSeries[c % 4]);
        draw_text(img, x0 + 14, ly, conds[c], kAxis);
    }
    return img;
}

void emit_plots(const std::string& loss_history_csv, const std::string& report_json,
                const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    if (!loss_history_csv.empty()) {
        auto history = read_loss_history(loss_history_csv);
        if (history.empty()) throw IoFailure("loss history has no rows: " + loss_history_csv);
        write_png(render_loss_curve(history),
                  (std::filesystem::path(out_dir) / "loss_curve.png").string());
    }
    if (!report_json.empty()) {
        MetricsReport report = load_report(report_json);
        write_png(render_ap_chart(report),
                  (std::filesystem::path(out_dir) / "ap_chart.png").string());
    }
}

}  // namespace cloak
