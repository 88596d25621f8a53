#include "cloak/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cloak/errors.hpp"
#include "cloak/hash.hpp"
#include "cloak/metrics.hpp"
#include "cloak/rng.hpp"

namespace cloak {

namespace {

constexpr double kLeakySlope = 0.1;
constexpr int kNumConvLayers = 4;

double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

int conv_out_dim(int n) { return (n - 1) / 2 + 1; }  // 3x3, stride 2, pad 1

// w layout: [oc][ic][ky][kx]
void conv3x3_forward(const Image& in, const double* w, const double* b, int out_c, Image& out) {
    const int oh = conv_out_dim(in.h);
    const int ow = conv_out_dim(in.w);
    const int ic_n = in.c;
    out = Image(oh, ow, out_c, 0.0);
    for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * 2 - 1;
        for (int ox = 0; ox < ow; ++ox) {
            const int ix0 = ox * 2 - 1;
            for (int oc = 0; oc < out_c; ++oc) {
                double acc = b[oc];
                const double* wk = w + static_cast<size_t>(oc) * ic_n * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ix0 + kx;
                        if (ix < 0 || ix >= in.w) continue;
                        const double* px = &in.data[(static_cast<size_t>(iy) * in.w + ix) * ic_n];
                        const double* wp = wk + ky * 3 + kx;
                        for (int ic = 0; ic < ic_n; ++ic) {
                            acc += px[ic] * wp[static_cast<size_t>(ic) * 9];
                        }
                    }
                }
                out.at(oy, ox, oc) = acc;
            }
        }
    }
}

void conv3x3_backward(const Image& in, const double* w, int out_c, const Image& grad_out,
                      double* grad_w, double* grad_b, Image* grad_in) {
    const int ic_n = in.c;
    if (grad_in) *grad_in = Image(in.h, in.w, in.c, 0.0);
    for (int oy = 0; oy < grad_out.h; ++oy) {
        const int iy0 = oy * 2 - 1;
        for (int ox = 0; ox < grad_out.w; ++ox) {
            const int ix0 = ox * 2 - 1;
            for (int oc = 0; oc < out_c; ++oc) {
                const double g = grad_out.at(oy, ox, oc);
                if (g == 0.0) continue;
                if (grad_b) grad_b[oc] += g;
                const double* wk = w + static_cast<size_t>(oc) * ic_n * 9;
                double* gwk = grad_w ? grad_w + static_cast<size_t>(oc) * ic_n * 9 : nullptr;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ix0 + kx;
                        if (ix < 0 || ix >= in.w) continue;
                        const size_t base = (static_cast<size_t>(iy) * in.w + ix) * ic_n;
                        for (int ic = 0; ic < ic_n; ++ic) {
                            const size_t widx = static_cast<size_t>(ic) * 9 + ky * 3 + kx;
                            if (gwk) gwk[widx] += g * in.data[base + ic];
                            if (grad_in) grad_in->data[base + ic] += g * wk[widx];
                        }
                    }
                }
            }
        }
    }
}

void conv1x1_forward(const Image& in, const double* w, const double* b, int out_c, Image& out) {
    out = Image(in.h, in.w, out_c, 0.0);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const double* px = &in.data[(static_cast<size_t>(y) * in.w + x) * in.c];
            for (int oc = 0; oc < out_c; ++oc) {
                double acc = b[oc];
                const double* wp = w + static_cast<size_t>(oc) * in.c;
                for (int ic = 0; ic < in.c; ++ic) acc += px[ic] * wp[ic];
                out.at(y, x, oc) = acc;
            }
        }
    }
}

void conv1x1_backward(const Image& in, const double* w, int out_c, const Image& grad_out,
                      double* grad_w, double* grad_b, Image* grad_in) {
    if (grad_in) *grad_in = Image(in.h, in.w, in.c, 0.0);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const size_t base = (static_cast<size_t>(y) * in.w + x) * in.c;
            for (int oc = 0; oc < out_c; ++oc) {
                const double g = grad_out.at(y, x, oc);
                if (g == 0.0) continue;
                if (grad_b) grad_b[oc] += g;
                const double* wp = w + static_cast<size_t>(oc) * in.c;
                double* gwp = grad_w ? grad_w + static_cast<size_t>(oc) * in.c : nullptr;
                for (int ic = 0; ic < in.c; ++ic) {
                    if (gwp) gwp[ic] += g * in.data[base + ic];
                    if (grad_in) grad_in->data[base + ic] += g * wp[ic];
                }
            }
        }
    }
}

void leaky_relu(Image& img) {
    for (double& v : img.data) v = v > 0 ? v : kLeakySlope * v;
}

}  // namespace

ArchitectureFamily family_from_string(const std::string& s) {
    if (s == "yolo") return ArchitectureFamily::kYolo;
    if (s == "two_stage") return ArchitectureFamily::kTwoStage;
    if (s == "other") return ArchitectureFamily::kOther;
    throw AdapterFailure("unknown architecture family '" + s + "'");
}

std::string to_string(ArchitectureFamily f) {
    switch (f) {
        case ArchitectureFamily::kYolo: return "yolo";
        case ArchitectureFamily::kTwoStage: return "two_stage";
        case ArchitectureFamily::kOther: return "other";
    }
    return "other";
}

std::array<double, 4> parameterize_box(const BoxTarget& box, const BoxTarget& anchor) {
    return {(box.cx - anchor.cx) / anchor.w, (box.cy - anchor.cy) / anchor.h,
            std::log(box.w / anchor.w), std::log(box.h / anchor.h)};
}

// --- ToyDetector ---------------------------------------------------------------

namespace {

struct LayerDims {
    std::array<int, kNumConvLayers> in_c;
    std::array<int, kNumConvLayers> out_c;
    std::array<size_t, kNumConvLayers> w_off, b_off;
    size_t head_w_off = 0, head_b_off = 0;
    int head_c = 0;
    size_t total = 0;
};

LayerDims layer_dims(const ToyDetector::Config& cfg) {
    LayerDims d;
    int prev = 3;
    size_t off = 0;
    for (int i = 0; i < kNumConvLayers; ++i) {
        d.in_c[static_cast<size_t>(i)] = prev;
        d.out_c[static_cast<size_t>(i)] = cfg.channels[static_cast<size_t>(i)];
        d.w_off[static_cast<size_t>(i)] = off;
        off += static_cast<size_t>(cfg.channels[static_cast<size_t>(i)]) * prev * 9;
        d.b_off[static_cast<size_t>(i)] = off;
        off += static_cast<size_t>(cfg.channels[static_cast<size_t>(i)]);
        prev = cfg.channels[static_cast<size_t>(i)];
    }
    d.head_c = 5 + cfg.num_classes + 4;
    d.head_w_off = off;
    off += static_cast<size_t>(d.head_c) * prev;
    d.head_b_off = off;
    off += static_cast<size_t>(d.head_c);
    d.total = off;
    return d;
}

}  // namespace

ToyDetector::ToyDetector(const Config& config, ArchitectureFamily family, uint64_t init_seed)
    : config_(config), family_(family), name_("toy") {
    LayerDims d = layer_dims(config_);
    params_.assign(d.total, 0.0);
    Rng rng(mix64(init_seed, 0xde7ec7ULL));
    for (int i = 0; i < kNumConvLayers; ++i) {
        double std = std::sqrt(2.0 / (static_cast<double>(d.in_c[static_cast<size_t>(i)]) * 9));
        size_t n = static_cast<size_t>(d.out_c[static_cast<size_t>(i)]) * d.in_c[static_cast<size_t>(i)] * 9;
        for (size_t k = 0; k < n; ++k) params_[d.w_off[static_cast<size_t>(i)] + k] = rng.normal(0, std);
    }
    double std_h = std::sqrt(2.0 / static_cast<double>(config_.channels[3]));
    size_t nh = static_cast<size_t>(d.head_c) * config_.channels[3];
    for (size_t k = 0; k < nh; ++k) params_[d.head_w_off + k] = rng.normal(0, std_h);
    // Start the objectness prior low so early training is not flooded with boxes.
    params_[d.head_b_off] = -2.0;
}

Image ToyDetector::forward_head(const Image& image, Tape* tape) const {
    if (image.c != 3) throw AdapterFailure("toy detector expects a 3-channel image");
    if (image.h % 16 != 0 || image.w % 16 != 0 || image.h < 16 || image.w < 16) {
        throw AdapterFailure("toy detector needs image sides divisible by 16");
    }
    LayerDims d = layer_dims(config_);
    if (tape) {
        tape->pre_act.clear();
        tape->post_act.clear();
        tape->input = image;
    }
    Image cur = image;
    for (int i = 0; i < kNumConvLayers; ++i) {
        Image z;
        conv3x3_forward(cur, &params_[d.w_off[static_cast<size_t>(i)]], &params_[d.b_off[static_cast<size_t>(i)]],
                        d.out_c[static_cast<size_t>(i)], z);
        if (tape) tape->pre_act.push_back(z);
        leaky_relu(z);
        if (tape) tape->post_act.push_back(z);
        cur = std::move(z);
    }
    Image head;
    conv1x1_forward(cur, &params_[d.head_w_off], &params_[d.head_b_off], d.head_c, head);
    if (tape) tape->head = head;
    return head;
}

BoxTarget ToyDetector::cell_anchor(int row, int col, int grid_h, int grid_w) const {
    BoxTarget a;
    a.cx = (col + 0.5) / grid_w;
    a.cy = (row + 0.5) / grid_h;
    a.w = config_.anchor_w;
    a.h = config_.anchor_h;
    return a;
}

namespace {

DetectorPredictions decode_head(const Image& head, const ToyDetector& det, bool differentiable) {
    const int C = det.config().num_classes;
    const int gh = head.h, gw = head.w;
    DetectorPredictions preds;
    preds.differentiable = differentiable;
    for (int i = 0; i < gh; ++i) {
        for (int j = 0; j < gw; ++j) {
            double obj = sigmoid(head.at(i, j, 0));
            std::vector<double> probs(static_cast<size_t>(C));
            double zmax = -1e300;
            for (int k = 0; k < C; ++k) zmax = std::max(zmax, head.at(i, j, 5 + k));
            double zsum = 0.0;
            for (int k = 0; k < C; ++k) {
                probs[static_cast<size_t>(k)] = std::exp(head.at(i, j, 5 + k) - zmax);
                zsum += probs[static_cast<size_t>(k)];
            }
            for (double& p : probs) p /= zsum;

            Candidate cand;
            cand.score = obj * probs[0];
            if (cand.score < det.config().score_floor) continue;
            cand.class_probs = std::move(probs);
            cand.box.cx = (j + sigmoid(head.at(i, j, 1))) / gw;
            cand.box.cy = (i + sigmoid(head.at(i, j, 2))) / gh;
            cand.box.w = sigmoid(head.at(i, j, 3));
            cand.box.h = sigmoid(head.at(i, j, 4));
            for (int k = 0; k < 4; ++k) {
                cand.box.t[static_cast<size_t>(k)] = head.at(i, j, 5 + C + k);
            }
            cand.anchor = det.cell_anchor(i, j, gh, gw);
            cand.cell_row = i;
            cand.cell_col = j;
            preds.candidates.push_back(std::move(cand));
        }
    }
    return preds;
}

}  // namespace

DetectorPredictions ToyDetector::predict(const Image& image) const {
    Image head = forward_head(image, nullptr);
    return decode_head(head, *this, false);
}

DetectorPredictions ToyDetector::predict_traced(const Image& image, Tape& tape) const {
    Image head = forward_head(image, &tape);
    return decode_head(head, *this, true);
}

void ToyDetector::backward(const Tape& tape, const Image& grad_head,
                           std::vector<double>* grad_params, Image* grad_input) const {
    LayerDims d = layer_dims(config_);
    if (grad_params && grad_params->size() != params_.size()) {
        grad_params->assign(params_.size(), 0.0);
    }

    Image grad_cur;
    const Image& head_in = tape.post_act.back();
    conv1x1_backward(head_in, &params_[d.head_w_off], d.head_c, grad_head,
                     grad_params ? &(*grad_params)[d.head_w_off] : nullptr,
                     grad_params ? &(*grad_params)[d.head_b_off] : nullptr, &grad_cur);

    for (int i = kNumConvLayers - 1; i >= 0; --i) {
        // Backward through the leaky ReLU on this layer's pre-activation.
        const Image& z = tape.pre_act[static_cast<size_t>(i)];
        for (size_t k = 0; k < grad_cur.data.size(); ++k) {
            grad_cur.data[k] *= z.data[k] > 0 ? 1.0 : kLeakySlope;
        }
        const Image& in = (i == 0) ? tape.input : tape.post_act[static_cast<size_t>(i) - 1];
        Image grad_prev;
        bool need_input = grad_input != nullptr || i > 0;
        conv3x3_backward(in, &params_[d.w_off[static_cast<size_t>(i)]], d.out_c[static_cast<size_t>(i)], grad_cur,
                         grad_params ? &(*grad_params)[d.w_off[static_cast<size_t>(i)]] : nullptr,
                         grad_params ? &(*grad_params)[d.b_off[static_cast<size_t>(i)]] : nullptr,
                         need_input ? &grad_prev : nullptr);
        grad_cur = std::move(grad_prev);
    }
    if (grad_input) *grad_input = std::move(grad_cur);
}

Image ToyDetector::backward_input(const Tape& tape, const std::vector<CandidateGrad>& grads,
                                  const DetectorPredictions& preds) const {
    const int C = config_.num_classes;
    const int gh = tape.head.h, gw = tape.head.w;
    Image grad_head(gh, gw, tape.head.c, 0.0);

    for (const auto& g : grads) {
        const Candidate& cand = preds.candidates.at(static_cast<size_t>(g.candidate_index));
        const int i = cand.cell_row, j = cand.cell_col;
        const double obj = sigmoid(tape.head.at(i, j, 0));
        const auto& p = cand.class_probs;

        // score = obj * p0
        grad_head.at(i, j, 0) += g.d_score * p[0] * obj * (1.0 - obj);
        std::vector<double> dp(p.size(), 0.0);
        if (!g.d_probs.empty()) {
            if (g.d_probs.size() != p.size()) throw AdapterFailure("candidate gradient shape");
            dp = g.d_probs;
        }
        dp[0] += g.d_score * obj;
        // softmax jacobian
        double dot = 0.0;
        for (size_t k = 0; k < p.size(); ++k) dot += dp[k] * p[k];
        for (int k = 0; k < C; ++k) {
            grad_head.at(i, j, 5 + k) += p[static_cast<size_t>(k)] * (dp[static_cast<size_t>(k)] - dot);
        }

        auto dsig = [&](int ch) {
            double s = sigmoid(tape.head.at(i, j, ch));
            return s * (1.0 - s);
        };
        grad_head.at(i, j, 1) += g.d_cx * dsig(1) / gw;
        grad_head.at(i, j, 2) += g.d_cy * dsig(2) / gh;
        grad_head.at(i, j, 3) += g.d_w * dsig(3);
        grad_head.at(i, j, 4) += g.d_h * dsig(4);
        for (int k = 0; k < 4; ++k) {
            grad_head.at(i, j, 5 + C + k) += g.d_t[static_cast<size_t>(k)];
        }
    }

    Image grad_input;
    backward(tape, grad_head, nullptr, &grad_input);
    return grad_input;
}

uint64_t ToyDetector::weights_checksum() const {
    Fnv1a h;
    h.update(params_);
    return h.digest();
}

// Checkpoint layout (little-endian): "TOYD", u32 version=1, i32 num_classes,
// 4x i32 channels, f64 anchor_w, f64 anchor_h, f64 score_floor, u8 family,
// u64 param_count, f64 params[]. Documented in README.md.
void ToyDetector::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write checkpoint: " + path);
    out.write("TOYD", 4);
    uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    int32_t nc = config_.num_classes;
    out.write(reinterpret_cast<const char*>(&nc), 4);
    for (int ch : config_.channels) {
        int32_t v = ch;
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    out.write(reinterpret_cast<const char*>(&config_.anchor_w), 8);
    out.write(reinterpret_cast<const char*>(&config_.anchor_h), 8);
    out.write(reinterpret_cast<const char*>(&config_.score_floor), 8);
    uint8_t fam = family_ == ArchitectureFamily::kYolo ? 0 : (family_ == ArchitectureFamily::kTwoStage ? 1 : 2);
    out.write(reinterpret_cast<const char*>(&fam), 1);
    uint64_t count = params_.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw IoFailure("short write on checkpoint: " + path);
}

ToyDetector ToyDetector::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TOYD", 4) != 0) throw IoFailure("bad checkpoint magic: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) throw IoFailure("unsupported checkpoint version");
    Config cfg;
    int32_t nc = 0;
    in.read(reinterpret_cast<char*>(&nc), 4);
    cfg.num_classes = nc;
    for (auto& ch : cfg.channels) {
        int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        ch = v;
    }
    in.read(reinterpret_cast<char*>(&cfg.anchor_w), 8);
    in.read(reinterpret_cast<char*>(&cfg.anchor_h), 8);
    in.read(reinterpret_cast<char*>(&cfg.score_floor), 8);
    uint8_t fam = 0;
    in.read(reinterpret_cast<char*>(&fam), 1);
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in) throw IoFailure("truncated checkpoint header: " + path);

    ArchitectureFamily family = fam == 0 ? ArchitectureFamily::kYolo
                                         : (fam == 1 ? ArchitectureFamily::kTwoStage
                                                     : ArchitectureFamily::kOther);
    ToyDetector det(cfg, family, 0);
    if (count != det.params_.size()) throw IoFailure("checkpoint parameter count mismatch");
    in.read(reinterpret_cast<char*>(det.params_.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw IoFailure("truncated checkpoint payload: " + path);
    return det;
}

// --- Matching --------------------------------------------------------------------

std::vector<MatchedPair> match_candidates(const DetectorPredictions& preds,
                                          const std::vector<BoxTarget>& gt_boxes,
                                          double iou_floor) {
    std::vector<MatchedPair> out;
    for (size_t c = 0; c < preds.candidates.size(); ++c) {
        double best = 0.0;
        int best_g = -1;
        for (size_t g = 0; g < gt_boxes.size(); ++g) {
            double v = iou(preds.candidates[c].box, gt_boxes[g]);
            if (v > best) {
                best = v;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0 && best >= iou_floor) {
            out.push_back({static_cast<int>(c), best_g, best});
        }
    }
    return out;
}

std::vector<Detection> post_process(const DetectorPredictions& preds, int image_id,
                                    double score_floor, double nms_iou) {
    std::vector<Detection> dets;
    for (const auto& c : preds.candidates) {
        if (c.score < score_floor) continue;
        dets.push_back({c.box, c.score, image_id});
    }
    return nms(std::move(dets), nms_iou);
}

// --- Toy training ------------------------------------------------------------------

namespace {

struct CellTarget {
    bool responsible = false;
    int cls = 0;
    double sx = 0, sy = 0, w = 0, h = 0;
    std::array<double, 4> tvec{0, 0, 0, 0};
};

std::vector<CellTarget> build_targets(const AnnotatedImage& img, const ToyDetector& det, int gh,
                                      int gw) {
    std::vector<CellTarget> cells(static_cast<size_t>(gh) * gw);
    auto assign = [&](const BoxTarget& b, int cls) {
        int col = std::clamp(static_cast<int>(b.cx * gw), 0, gw - 1);
        int row = std::clamp(static_cast<int>(b.cy * gh), 0, gh - 1);
        CellTarget& c = cells[static_cast<size_t>(row) * gw + col];
        if (c.responsible) return;  // first object keeps the cell
        c.responsible = true;
        c.cls = cls;
        c.sx = b.cx * gw - col;
        c.sy = b.cy * gh - row;
        c.w = b.w;
        c.h = b.h;
        c.tvec = parameterize_box(b, det.cell_anchor(row, col, gh, gw));
    };
    for (const auto& b : img.person_boxes) assign(b, 0);
    for (const auto& b : img.distractor_boxes) assign(b, 1);
    return cells;
}

// Gradient of the detector-training loss w.r.t. the raw head channels.
double head_loss_grad(const Image& head, const std::vector<CellTarget>& cells, int num_classes,
                      Image& grad_head) {
    constexpr double kNoObjWeight = 0.5;
    constexpr double kBoxWeight = 5.0;
    constexpr double kTvecWeight = 1.0;
    const int gh = head.h, gw = head.w;
    grad_head = Image(gh, gw, head.c, 0.0);
    double loss = 0.0;
    for (int i = 0; i < gh; ++i) {
        for (int j = 0; j < gw; ++j) {
            const CellTarget& t = cells[static_cast<size_t>(i) * gw + j];
            double o = head.at(i, j, 0);
            double z = sigmoid(o);
            double target = t.responsible ? 1.0 : 0.0;
            double wobj = t.responsible ? 1.0 : kNoObjWeight;
            // BCE with logits.
            loss += wobj * (std::max(o, 0.0) - o * target + std::log1p(std::exp(-std::abs(o))));
            grad_head.at(i, j, 0) = wobj * (z - target);
            if (!t.responsible) continue;

            const double targets[4] = {t.sx, t.sy, t.w, t.h};
            for (int k = 0; k < 4; ++k) {
                double s = sigmoid(head.at(i, j, 1 + k));
                loss += kBoxWeight * (s - targets[k]) * (s - targets[k]);
                grad_head.at(i, j, 1 + k) = kBoxWeight * 2.0 * (s - targets[k]) * s * (1.0 - s);
            }

            double zmax = -1e300;
            for (int k = 0; k < num_classes; ++k) zmax = std::max(zmax, head.at(i, j, 5 + k));
            double zsum = 0.0;
            for (int k = 0; k < num_classes; ++k) zsum += std::exp(head.at(i, j, 5 + k) - zmax);
            for (int k = 0; k < num_classes; ++k) {
                double p = std::exp(head.at(i, j, 5 + k) - zmax) / zsum;
                grad_head.at(i, j, 5 + k) = p - (k == t.cls ? 1.0 : 0.0);
                if (k == t.cls) loss += -std::log(std::max(p, 1e-12));
            }

            for (int k = 0; k < 4; ++k) {
                double diff = head.at(i, j, 5 + num_classes + k) - t.tvec[static_cast<size_t>(k)];
                loss += kTvecWeight * diff * diff / 4.0;
                grad_head.at(i, j, 5 + num_classes + k) = kTvecWeight * 2.0 * diff / 4.0;
            }
        }
    }
    return loss;
}

double val_ap50(const ToyDetector& det, const std::vector<AnnotatedImage>& val) {
    std::vector<Detection> dets;
    std::vector<ImageGroundTruth> gts;
    for (size_t i = 0; i < val.size(); ++i) {
        auto preds = det.predict(val[i].image);
        auto d = post_process(preds, static_cast<int>(i));
        dets.insert(dets.end(), d.begin(), d.end());
        gts.push_back({static_cast<int>(i), val[i].person_boxes});
    }
    return average_precision(dets, gts, 0.5);
}

}  // namespace

ToyDetector train_toy_detector(const std::vector<AnnotatedImage>& train,
                               const std::vector<AnnotatedImage>* val,
                               const ToyTrainOptions& opts) {
    if (train.empty()) throw Error("train_toy_detector: dataset is empty");
    bool any_person = false;
    for (const auto& e : train) {
        if (!e.person_boxes.empty()) {
            any_person = true;
            break;
        }
    }
    if (!any_person) throw Error("train_toy_detector: dataset has no person boxes");

    ToyDetector det(opts.arch, opts.family, opts.seed);
    auto& params = det.mutable_params();

    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    int adam_t = 0;
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    Rng rng(mix64(opts.seed, 0x7a17ULL));
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    double best_ap = 0.0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opts.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(opts.batch_size));
            std::vector<double> grad(params.size(), 0.0);
            for (size_t b = start; b < end; ++b) {
                const AnnotatedImage& img = train[order[b]];
                ToyDetector::Tape tape;
                Image head = det.forward_head(img.image, &tape);
                auto cells = build_targets(img, det, head.h, head.w);
                Image grad_head;
                head_loss_grad(head, cells, det.config().num_classes, grad_head);
                det.backward(tape, grad_head, &grad, nullptr);
            }
            double inv = 1.0 / static_cast<double>(end - start);
            ++adam_t;
            double c1 = 1.0 - std::pow(b1, adam_t);
            double c2 = 1.0 - std::pow(b2, adam_t);
            for (size_t k = 0; k < params.size(); ++k) {
                double g = grad[k] * inv;
                m[k] = b1 * m[k] + (1 - b1) * g;
                v[k] = b2 * v[k] + (1 - b2) * g * g;
                params[k] -= opts.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam_eps);
            }
        }
        if (val && !val->empty()) {
            best_ap = val_ap50(det, *val);
            if (best_ap >= opts.early_stop_ap) break;
        }
    }

    if (val && !val->empty() && best_ap < opts.ap_floor) {
        throw ConvergenceFailure("toy detector reached AP@0.50 = " + std::to_string(best_ap) +
                                 " < required " + std::to_string(opts.ap_floor));
    }
    return det;
}

std::shared_ptr<DetectorAdapter> load_adapter(const std::string& name,
                                              const std::string& weights_path) {
    if (name == "toy") {
        return std::make_shared<ToyDetector>(ToyDetector::load_checkpoint(weights_path));
    }
    throw AdapterFailure("no builtin adapter named '" + name +
                         "'; external models must be attached through the adapter contract");
}

}  // namespace cloak
