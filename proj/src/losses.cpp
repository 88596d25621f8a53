#include "cloak/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cloak/errors.hpp"

namespace cloak {

namespace {

constexpr double kTvFloor = 1e-12;

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

void check_probs(const std::vector<double>& probs, const ClassTarget& target) {
    if (static_cast<int>(probs.size()) != target.num_classes) {
        throw ShapeMismatch("cla_loss: probability vector length != category count");
    }
    if (target.index < 0 || target.index >= target.num_classes) {
        throw ShapeMismatch("cla_loss: target index out of range");
    }
    double sum = 0.0;
    for (double p : probs) sum += p;
    // Lenient tolerance so finite-difference probes of the gradient stay valid.
    if (std::abs(sum - 1.0) > 1e-3) {
        throw ShapeMismatch("cla_loss: probabilities do not sum to 1");
    }
}

void check_unit(double v, const char* name) {
    if (v < 0.0 || v > 1.0) {
        throw OutOfRangeCoordinate(std::string("coordinate out of [0,1]: ") + name);
    }
}

}  // namespace

Architecture architecture_from_string(const std::string& s) {
    if (s == "yolo") return Architecture::kYolo;
    if (s == "two_stage") return Architecture::kTwoStage;
    throw UnknownArchitecture("expected 'yolo' or 'two_stage', got '" + s + "'");
}

std::string to_string(Architecture a) {
    return a == Architecture::kYolo ? "yolo" : "two_stage";
}

LossWeights LossWeights::yolo_reference() {
    LossWeights w;
    w.theta_cla = 5.0;
    w.theta_coord = 1.0;
    w.theta_wh = 1.0;
    w.alpha_tv = 100.0;
    w.alpha_print = 100.0;
    return w;
}

LossWeights LossWeights::two_stage_reference() {
    LossWeights w;
    w.theta_cla2 = 500.0;
    w.theta_bbox = 10.0;
    w.alpha_tv = 18.0;
    w.alpha_print = 100.0;
    return w;
}

void LossWeights::validate() const {
    const double vals[] = {theta_cla, theta_coord, theta_wh, theta_cla2,
                           theta_bbox, alpha_tv,   alpha_print};
    for (double v : vals) {
        if (v < 0.0 || !std::isfinite(v)) throw Error("loss weights must be non-negative");
    }
}

Palette default_palette() {
    Palette p;
    const double levels[] = {0.0, 0.5, 1.0};
    for (double r : levels) {
        for (double g : levels) {
            for (double b : levels) {
                p.push_back({r, g, b});
            }
        }
    }
    p.push_back({0.25, 0.25, 0.25});
    p.push_back({0.4, 0.4, 0.4});
    p.push_back({0.75, 0.75, 0.75});
    return p;
}

Palette load_palette(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open palette file: " + path);
    Palette p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        double r, g, b;
        if (!(ls >> r)) continue;  // blank / comment-only line
        if (!(ls >> g >> b)) {
            throw IoFailure("palette line " + std::to_string(lineno) + " needs 3 values");
        }
        if (r < 0 || r > 1 || g < 0 || g > 1 || b < 0 || b > 1) {
            throw IoFailure("palette line " + std::to_string(lineno) + " outside [0,1]");
        }
        p.push_back({r, g, b});
    }
    if (p.empty()) throw EmptyPalette("palette file has no colors: " + path);
    return p;
}

void save_palette(const Palette& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write palette file: " + path);
    out << "# printable colors, r g b in [0,1]\n";
    char buf[96];
    for (const auto& c : p) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", c[0], c[1], c[2]);
        out << buf;
    }
}

// --- Attack losses -----------------------------------------------------------

double cla_loss(const std::vector<double>& probs, const ClassTarget& target, double eps) {
    check_probs(probs, target);
    if (eps <= 0.0) throw Error("cla_loss: eps must be positive");
    return std::log(std::max(probs[static_cast<size_t>(target.index)], eps));
}

std::vector<double> cla_loss_grad(const std::vector<double>& probs, const ClassTarget& target,
                                  double eps) {
    check_probs(probs, target);
    std::vector<double> g(probs.size(), 0.0);
    double p = probs[static_cast<size_t>(target.index)];
    if (p > eps) g[static_cast<size_t>(target.index)] = 1.0 / p;
    return g;
}

double coord_loss(const BoxTarget& pred, const BoxTarget& gt, double eps) {
    check_unit(pred.cx, "pred.cx");
    check_unit(pred.cy, "pred.cy");
    check_unit(gt.cx, "gt.cx");
    check_unit(gt.cy, "gt.cy");
    return gt.cx * std::log(std::max(pred.cx, eps)) + gt.cy * std::log(std::max(pred.cy, eps));
}

std::array<double, 2> coord_loss_grad(const BoxTarget& pred, const BoxTarget& gt, double eps) {
    std::array<double, 2> g{0.0, 0.0};
    if (pred.cx > eps) g[0] = gt.cx / pred.cx;
    if (pred.cy > eps) g[1] = gt.cy / pred.cy;
    return g;
}

double wh_loss(const BoxTarget& pred, const BoxTarget& gt) {
    double dw = gt.w - pred.w;
    double dh = gt.h - pred.h;
    return std::exp(-0.5 * (dw * dw + dh * dh));
}

std::array<double, 2> wh_loss_grad(const BoxTarget& pred, const BoxTarget& gt) {
    double v = wh_loss(pred, gt);
    // d/d(pred.w) of -0.5 (gt.w - pred.w)^2 is (gt.w - pred.w)
    return {v * (gt.w - pred.w), v * (gt.h - pred.h)};
}

double bbox_l1_loss(const std::array<double, 4>& pred_t, const std::array<double, 4>& gt_t) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += std::abs(pred_t[static_cast<size_t>(i)] - gt_t[static_cast<size_t>(i)]);
    return std::exp(-s);
}

std::array<double, 4> bbox_l1_loss_grad(const std::array<double, 4>& pred_t,
                                        const std::array<double, 4>& gt_t) {
    double v = bbox_l1_loss(pred_t, gt_t);
    std::array<double, 4> g{};
    for (size_t i = 0; i < 4; ++i) g[i] = -v * sign(pred_t[i] - gt_t[i]);
    return g;
}

// --- Geometric constraint losses ----------------------------------------------

double tv_loss(const Image& pattern) {
    double total = 0.0;
    for (int ch = 0; ch < pattern.c; ++ch) {
        for (int i = 0; i < pattern.h; ++i) {
            for (int j = 0; j < pattern.w; ++j) {
                double a = pattern.at(i, j, ch);
                double dv = (i + 1 < pattern.h) ? a - pattern.at(i + 1, j, ch) : 0.0;
                double dh = (j + 1 < pattern.w) ? a - pattern.at(i, j + 1, ch) : 0.0;
                total += std::sqrt(dv * dv + dh * dh);
            }
        }
    }
    return total;
}

Image tv_loss_grad(const Image& pattern) {
    Image g(pattern.h, pattern.w, pattern.c, 0.0);
    for (int ch = 0; ch < pattern.c; ++ch) {
        for (int i = 0; i < pattern.h; ++i) {
            for (int j = 0; j < pattern.w; ++j) {
                double a = pattern.at(i, j, ch);
                double dv = (i + 1 < pattern.h) ? a - pattern.at(i + 1, j, ch) : 0.0;
                double dh = (j + 1 < pattern.w) ? a - pattern.at(i, j + 1, ch) : 0.0;
                double s = std::sqrt(std::max(dv * dv + dh * dh, kTvFloor));
                double gv = dv / s;
                double gh = dh / s;
                g.at(i, j, ch) += gv + gh;
                if (i + 1 < pattern.h) g.at(i + 1, j, ch) -= gv;
                if (j + 1 < pattern.w) g.at(i, j + 1, ch) -= gh;
            }
        }
    }
    return g;
}

double nps_loss(const Image& pattern, const Palette& palette) {
    if (palette.empty()) throw EmptyPalette("nps_loss: palette is empty");
    if (pattern.c != 3) throw ShapeMismatch("nps_loss: pattern must have 3 channels");
    double total = 0.0;
    for (int i = 0; i < pattern.h; ++i) {
        for (int j = 0; j < pattern.w; ++j) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : palette) {
                double d = std::abs(pattern.at(i, j, 0) - c[0]) +
                           std::abs(pattern.at(i, j, 1) - c[1]) +
                           std::abs(pattern.at(i, j, 2) - c[2]);
                best = std::min(best, d);
            }
            total += best;
        }
    }
    return total;
}

Image nps_loss_grad(const Image& pattern, const Palette& palette) {
    if (palette.empty()) throw EmptyPalette("nps_loss_grad: palette is empty");
    Image g(pattern.h, pattern.w, pattern.c, 0.0);
    for (int i = 0; i < pattern.h; ++i) {
        for (int j = 0; j < pattern.w; ++j) {
            double best = std::numeric_limits<double>::max();
            size_t best_k = 0;
            for (size_t k = 0; k < palette.size(); ++k) {
                double d = std::abs(pattern.at(i, j, 0) - palette[k][0]) +
                           std::abs(pattern.at(i, j, 1) - palette[k][1]) +
                           std::abs(pattern.at(i, j, 2) - palette[k][2]);
                if (d < best) {
                    best = d;
                    best_k = k;
                }
            }
            for (int ch = 0; ch < 3; ++ch) {
                g.at(i, j, ch) = sign(pattern.at(i, j, ch) - palette[best_k][static_cast<size_t>(ch)]);
            }
        }
    }
    return g;
}

// --- Combination ---------------------------------------------------------------

LossBreakdown total_loss(const std::vector<AttackTerms>& terms, const Image& pattern,
                         const Palette& palette, const LossWeights& weights, Architecture arch) {
    weights.validate();
    LossBreakdown b;
    b.matched = static_cast<int>(terms.size());
    if (!terms.empty()) {
        for (const auto& t : terms) {
            b.cla += t.cla;
            b.coord += t.coord;
            b.wh += t.wh;
            b.bbox += t.bbox;
        }
        double inv = 1.0 / static_cast<double>(terms.size());
        b.cla *= inv;
        b.coord *= inv;
        b.wh *= inv;
        b.bbox *= inv;
    }
    b.tv = tv_loss(pattern);
    b.nps = nps_loss(pattern, palette);

    double attack = 0.0;
    switch (arch) {
        case Architecture::kYolo:
            attack = weights.theta_cla * b.cla + weights.theta_coord * b.coord +
                     weights.theta_wh * b.wh;
            break;
        case Architecture::kTwoStage:
            attack = weights.theta_cla2 * b.cla + weights.theta_bbox * b.bbox;
            break;
        default:
            throw UnknownArchitecture("total_loss: unhandled architecture");
    }
    b.total = attack + weights.alpha_tv * b.tv + weights.alpha_print * b.nps;
    return b;
}

}  // namespace cloak
