#pragma once

#include <array>
#include <string>
#include <vector>

#include "cloak/image.hpp"

namespace cloak {

enum class Architecture { kYolo, kTwoStage };

Architecture architecture_from_string(const std::string& s);  // throws UnknownArchitecture
std::string to_string(Architecture a);

// Axis-aligned box, center/size normalized to [0,1] image coordinates.
// `t` carries the parameterized coordinates used by the two-stage loss path.
struct BoxTarget {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    std::array<double, 4> t{0, 0, 0, 0};
};

// One-hot category indicator of length num_classes.
struct ClassTarget {
    int index = 0;
    int num_classes = 1;
};

struct LossWeights {
    double theta_cla = 0.0;    // YOLO-path classification
    double theta_coord = 0.0;  // YOLO-path box center
    double theta_wh = 0.0;     // YOLO-path box size
    double theta_cla2 = 0.0;   // two-stage classification
    double theta_bbox = 0.0;   // two-stage parameterized-box
    double alpha_tv = 0.0;
    double alpha_print = 0.0;

    static LossWeights yolo_reference();       // 5, 1, 1 with alpha 100, 100
    static LossWeights two_stage_reference();  // 500, 10 with alpha 18, 100
    void validate() const;                     // all weights >= 0
};

using PaletteColor = std::array<double, 3>;
using Palette = std::vector<PaletteColor>;

Palette default_palette();                       // 30 printable colors
Palette load_palette(const std::string& path);   // "r g b" per line, # comments
void save_palette(const Palette& p, const std::string& path);

// --- Attack losses -----------------------------------------------------------
// All of these are minimized: lower means a stronger attack.

// sum_i y_i * log(max(p_i, eps)); with a one-hot target this is the log of the
// true-class probability, so minimizing drives it toward eps.
double cla_loss(const std::vector<double>& probs, const ClassTarget& target, double eps);
std::vector<double> cla_loss_grad(const std::vector<double>& probs, const ClassTarget& target,
                                  double eps);

// gt.cx * log(max(pred.cx, eps)) + gt.cy * log(max(pred.cy, eps))
double coord_loss(const BoxTarget& pred, const BoxTarget& gt, double eps);
std::array<double, 2> coord_loss_grad(const BoxTarget& pred, const BoxTarget& gt, double eps);

// exp(-0.5 ((w - w_hat)^2 + (h - h_hat)^2)), 1 at zero deviation.
double wh_loss(const BoxTarget& pred, const BoxTarget& gt);
std::array<double, 2> wh_loss_grad(const BoxTarget& pred, const BoxTarget& gt);

// exp(-sum_i |t_hat_i - t_i|), 1 at zero deviation.
double bbox_l1_loss(const std::array<double, 4>& pred_t, const std::array<double, 4>& gt_t);
std::array<double, 4> bbox_l1_loss_grad(const std::array<double, 4>& pred_t,
                                        const std::array<double, 4>& gt_t);

// --- Geometric constraint losses ----------------------------------------------

// sum_{i,j} sqrt((a(i,j)-a(i+1,j))^2 + (a(i,j)-a(i,j+1))^2) per channel.
// Missing out-of-grid neighbors contribute 0. The gradient path floors the
// sqrt argument at 1e-12; the value path does not, so a constant image is 0.
double tv_loss(const Image& pattern);
Image tv_loss_grad(const Image& pattern);

// sum over pixels of min over palette colors of the channel-wise L1 distance.
double nps_loss(const Image& pattern, const Palette& palette);
Image nps_loss_grad(const Image& pattern, const Palette& palette);

// --- Combination ---------------------------------------------------------------

// Per matched candidate values of the four attack terms.
struct AttackTerms {
    double cla = 0.0;
    double coord = 0.0;
    double wh = 0.0;
    double bbox = 0.0;
};

// Component means are unweighted; `total` applies the weights:
//   yolo:      theta_cla*cla + theta_coord*coord + theta_wh*wh + constraints
//   two_stage: theta_cla2*cla + theta_bbox*bbox + constraints
// Attack terms are averaged over the matched candidates of the batch.
struct LossBreakdown {
    double cla = 0.0;
    double coord = 0.0;
    double wh = 0.0;
    double bbox = 0.0;
    double tv = 0.0;
    double nps = 0.0;
    double total = 0.0;
    int matched = 0;
};

LossBreakdown total_loss(const std::vector<AttackTerms>& terms, const Image& pattern,
                         const Palette& palette, const LossWeights& weights, Architecture arch);

}  // namespace cloak
