#include "cloak/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "cloak/errors.hpp"
#include "cloak/geometry.hpp"
#include "cloak/hash.hpp"
#include "cloak/rng.hpp"

using nlohmann::json;

namespace cloak {

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (base_resolution < 8) throw ConfigError("base_resolution must be >= 8");
    if (pattern_resolution < 1 || base_resolution % pattern_resolution != 0) {
        throw ConfigError("pattern_resolution must divide base_resolution");
    }
    if (eps <= 0) throw ConfigError("eps must be positive");
    weights.validate();
}

Image attack_image(const AnnotatedImage& img, const AdversarialPattern& pattern) {
    Image out = img.image;
    const int res = pattern.pixels.h;
    for (const auto& g : img.garments) {
        Quad dst = keypoints_to_quad(g.keypoints, g.corner_labels);
        Homography h = solve_homography(Quad::from_extent(res, res), dst);
        Image warped = warp_pattern(pattern.pixels, h, out.h, out.w);
        MaskImage mask = rasterize_polygon(g.keypoints, out.h, out.w);
        out = composite(out, warped, mask);
    }
    return out;
}

namespace {

// Per-image geometry cache. With several garments the sequential composite
// I_k = (1-M_k) I_{k-1} + M_k W_k expands to
//   I_N = I_0 * prod(1-M_k) + sum_k W_k * M_k * prod_{j>k}(1-M_j),
// so each garment keeps an effective mask and the gradient stays a plain sum.
struct PreparedImage {
    const AnnotatedImage* src = nullptr;
    std::vector<WarpPlan> plans;
    std::vector<MaskImage> eff_masks;
    MaskImage base_keep;  // prod(1-M_k)
    bool has_garment = false;
};

PreparedImage prepare_image(const AnnotatedImage& img, int pattern_res) {
    PreparedImage p;
    p.src = &img;
    const int H = img.image.h, W = img.image.w;
    std::vector<MaskImage> masks;
    for (const auto& g : img.garments) {
        Quad dst = keypoints_to_quad(g.keypoints, g.corner_labels);
        Homography h = solve_homography(Quad::from_extent(pattern_res, pattern_res), dst);
        p.plans.push_back(make_warp_plan(h, pattern_res, pattern_res, H, W));
        masks.push_back(rasterize_polygon(g.keypoints, H, W));
    }
    p.base_keep = MaskImage(H, W, 1, 1.0);
    p.eff_masks.resize(masks.size());
    for (size_t k = masks.size(); k-- > 0;) {
        MaskImage eff = masks[k];
        for (size_t j = k + 1; j < masks.size(); ++j) {
            for (size_t i = 0; i < eff.data.size(); ++i) {
                eff.data[i] *= 1.0 - masks[j].data[i];
            }
        }
        p.eff_masks[k] = std::move(eff);
    }
    for (const auto& m : masks) {
        for (size_t i = 0; i < p.base_keep.data.size(); ++i) {
            p.base_keep.data[i] *= 1.0 - m.data[i];
        }
    }
    p.has_garment = !masks.empty();
    return p;
}

Image compose_prepared(const PreparedImage& p, const Image& pattern_pixels) {
    const Image& I = p.src->image;
    if (!p.has_garment) return I;
    Image out(I.h, I.w, I.c);
    for (int y = 0; y < I.h; ++y) {
        for (int x = 0; x < I.w; ++x) {
            double keep = p.base_keep.at(y, x, 0);
            for (int c = 0; c < I.c; ++c) out.at(y, x, c) = keep * I.at(y, x, c);
        }
    }
    for (size_t k = 0; k < p.plans.size(); ++k) {
        Image warped = apply_warp(p.plans[k], pattern_pixels);
        for (int y = 0; y < I.h; ++y) {
            for (int x = 0; x < I.w; ++x) {
                double m = p.eff_masks[k].at(y, x, 0);
                if (m == 0.0) continue;
                for (int c = 0; c < I.c; ++c) out.at(y, x, c) += m * warped.at(y, x, c);
            }
        }
    }
    return out;
}

// grad wrt the pattern = sum_k plan_k^T (eff_mask_k * grad_attacked)
void accumulate_pattern_grad(const PreparedImage& p, const Image& grad_attacked, Image& grad_pat) {
    for (size_t k = 0; k < p.plans.size(); ++k) {
        Image masked = composite_backward_pattern(p.eff_masks[k], grad_attacked);
        Image g = warp_backward(p.plans[k], masked);
        for (size_t i = 0; i < grad_pat.data.size(); ++i) grad_pat.data[i] += g.data[i];
    }
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["architecture"] = to_string(c.architecture);
    j["pattern_resolution"] = c.pattern_resolution;
    j["base_resolution"] = c.base_resolution;
    j["seed"] = c.seed;
    j["eps"] = c.eps;
    j["weights"] = {{"theta_cla", c.weights.theta_cla},   {"theta_coord", c.weights.theta_coord},
                    {"theta_wh", c.weights.theta_wh},     {"theta_cla2", c.weights.theta_cla2},
                    {"theta_bbox", c.weights.theta_bbox}, {"alpha_tv", c.weights.alpha_tv},
                    {"alpha_print", c.weights.alpha_print}};
    return j;
}

}  // namespace

TrainResult train_pattern(const DatasetManifest& dataset, const DetectorAdapter& adapter,
                          const TrainConfig& config, const Palette& palette,
                          const std::optional<AdversarialPattern>& initial) {
    config.validate();
    if (dataset.entries.empty()) throw Error("train_pattern: dataset is empty");
    if (!adapter.supports_gradients()) {
        throw AdapterFailure("train_pattern needs a gradient-capable adapter");
    }
    const auto* toy = dynamic_cast<const ToyDetector*>(&adapter);
    if (!toy) throw AdapterFailure("adapter reports gradients but exposes no gradient interface");
    if (palette.empty()) throw EmptyPalette("train_pattern: palette is empty");

    TrainResult result;
    result.detector_checksum_before = adapter.weights_checksum();

    AdversarialPattern pat =
        initial ? *initial : init_pattern(config.base_resolution, InitMode::kRandom, config.seed);
    if (pat.pixels.h != config.base_resolution) {
        throw ConfigError("initial pattern does not match base_resolution");
    }

    std::vector<PreparedImage> prepared;
    prepared.reserve(dataset.entries.size());
    for (const auto& e : dataset.entries) {
        prepared.push_back(prepare_image(e, config.pattern_resolution));
    }

    // Adaptive-moment state over the base pattern pixels.
    std::vector<double> m(pat.pixels.data.size(), 0.0), v(pat.pixels.data.size(), 0.0);
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
    int adam_t = 0;

    Rng rng(mix64(config.seed, 0xba7cULL));
    std::vector<size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), 0);

    const ClassTarget person_target{0, toy->config().num_classes};
    int iteration = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));

            Image down = downsample_image(pat.pixels, config.pattern_resolution);

            // Phase 1: forward every batch image, keep tapes and matches so the
            // candidate average is known before any gradient is scattered.
            struct Forwarded {
                const PreparedImage* prep;
                ToyDetector::Tape tape;
                DetectorPredictions preds;
                std::vector<MatchedPair> matches;
            };
            std::vector<Forwarded> fwd;
            std::vector<AttackTerms> terms;
            double score_sum = 0.0;
            int score_n = 0;
            for (size_t b = start; b < end; ++b) {
                const PreparedImage& prep = prepared[order[b]];
                Forwarded f;
                f.prep = &prep;
                Image attacked = compose_prepared(prep, down);
                f.preds = toy->predict_traced(attacked, f.tape);
                f.matches = match_candidates(f.preds, prep.src->person_boxes);
                for (const auto& mt : f.matches) {
                    const Candidate& cand = f.preds.candidates[static_cast<size_t>(mt.candidate)];
                    const BoxTarget& gt = prep.src->person_boxes[static_cast<size_t>(mt.gt)];
                    AttackTerms t;
                    t.cla = cla_loss(cand.class_probs, person_target, config.eps);
                    t.coord = coord_loss(cand.box, gt, config.eps);
                    t.wh = wh_loss(cand.box, gt);
                    t.bbox = bbox_l1_loss(cand.box.t, parameterize_box(gt, cand.anchor));
                    terms.push_back(t);
                    score_sum += cand.score;
                    ++score_n;
                }
                fwd.push_back(std::move(f));
            }

            LossBreakdown breakdown =
                total_loss(terms, down, palette, config.weights, config.architecture);
            if (!std::isfinite(breakdown.total)) {
                throw NonFiniteLoss("total loss is not finite at iteration " +
                                    std::to_string(iteration));
            }
            if (terms.empty()) ++result.skipped_batches;

            // Phase 2: scatter candidate gradients (theta / matched), then add
            // the constraint gradients on the downsampled pattern.
            Image grad_down(down.h, down.w, down.c, 0.0);
            const double inv_m = terms.empty() ? 0.0 : 1.0 / static_cast<double>(terms.size());
            for (auto& f : fwd) {
                if (f.matches.empty()) continue;
                std::vector<CandidateGrad> cgrads;
                for (const auto& mt : f.matches) {
                    const Candidate& cand = f.preds.candidates[static_cast<size_t>(mt.candidate)];
                    const BoxTarget& gt = f.prep->src->person_boxes[static_cast<size_t>(mt.gt)];
                    CandidateGrad cg;
                    cg.candidate_index = mt.candidate;
                    if (config.architecture == Architecture::kYolo) {
                        auto gp = cla_loss_grad(cand.class_probs, person_target, config.eps);
                        cg.d_probs.assign(gp.size(), 0.0);
                        for (size_t k = 0; k < gp.size(); ++k) {
                            cg.d_probs[k] = config.weights.theta_cla * inv_m * gp[k];
                        }
                        auto gc = coord_loss_grad(cand.box, gt, config.eps);
                        cg.d_cx = config.weights.theta_coord * inv_m * gc[0];
                        cg.d_cy = config.weights.theta_coord * inv_m * gc[1];
                        auto gw = wh_loss_grad(cand.box, gt);
                        cg.d_w = config.weights.theta_wh * inv_m * gw[0];
                        cg.d_h = config.weights.theta_wh * inv_m * gw[1];
                    } else {
                        auto gp = cla_loss_grad(cand.class_probs, person_target, config.eps);
                        cg.d_probs.assign(gp.size(), 0.0);
                        for (size_t k = 0; k < gp.size(); ++k) {
                            cg.d_probs[k] = config.weights.theta_cla2 * inv_m * gp[k];
                        }
                        auto gb = bbox_l1_loss_grad(cand.box.t, parameterize_box(gt, cand.anchor));
                        for (size_t k = 0; k < 4; ++k) {
                            cg.d_t[k] = config.weights.theta_bbox * inv_m * gb[k];
                        }
                    }
                    cgrads.push_back(std::move(cg));
                }
                Image grad_attacked = toy->backward_input(f.tape, cgrads, f.preds);
                accumulate_pattern_grad(*f.prep, grad_attacked, grad_down);
            }

            Image gtv = tv_loss_grad(down);
            Image gnps = nps_loss_grad(down, palette);
            for (size_t i = 0; i < grad_down.data.size(); ++i) {
                grad_down.data[i] += config.weights.alpha_tv * gtv.data[i] +
                                     config.weights.alpha_print * gnps.data[i];
            }

            Image grad_base = downsample_backward(grad_down, config.base_resolution);

            ++adam_t;
            double c1 = 1.0 - std::pow(b1, adam_t);
            double c2 = 1.0 - std::pow(b2, adam_t);
            auto& px = pat.pixels.data;
            for (size_t k = 0; k < px.size(); ++k) {
                double g = grad_base.data[k];
                m[k] = b1 * m[k] + (1 - b1) * g;
                v[k] = b2 * v[k] + (1 - b2) * g * g;
                px[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam_eps);
            }
            project_in_place(pat.pixels);
            for (double val : px) {
                if (!(val >= 0.0 && val <= 1.0)) {
                    result.pattern_always_in_range = false;
                    break;
                }
            }

            IterationRecord rec;
            rec.iteration = iteration;
            rec.losses = breakdown;
            rec.mean_matched_score = score_n > 0 ? score_sum / score_n : 0.0;
            result.loss_history.push_back(rec);
            ++iteration;
        }
    }

    result.pattern = std::move(pat);
    result.detector_checksum_after = adapter.weights_checksum();

    Fnv1a pal_hash;
    for (const auto& c : palette) {
        pal_hash.update(c[0]);
        pal_hash.update(c[1]);
        pal_hash.update(c[2]);
    }
    json manifest;
    manifest["config"] = config_to_json(config);
    manifest["adapter"] = {{"name", adapter.name()},
                           {"family", to_string(adapter.architecture_family())},
                           {"checksum", to_hex(result.detector_checksum_after)}};
    manifest["palette_fnv"] = pal_hash.hex();
    manifest["dataset_split"] = dataset.split;
    manifest["dataset_size"] = dataset.entries.size();
    manifest["iterations"] = iteration;
    manifest["skipped_batches"] = result.skipped_batches;
    // Eq-style center coordinates are normalized to image-relative [0,1].
    manifest["coord_parameterization"] = "image_relative_unit";
    manifest["constraint_losses_on"] = "downsampled_pattern";
    result.manifest_json = manifest.dump(2);
    return result;
}

void write_loss_history(const std::vector<IterationRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write loss history: " + path);
    out << "iteration,cla,coord,wh,bbox,tv,nps,total\n";
    char buf[512];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.iteration, r.losses.cla, r.losses.coord, r.losses.wh, r.losses.bbox,
                      r.losses.tv, r.losses.nps, r.losses.total);
        out << buf;
    }
}

std::vector<IterationRecord> read_loss_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read loss history: " + path);
    std::vector<IterationRecord> out;
    std::string line;
    if (!std::getline(in, line)) throw IoFailure("loss history is empty: " + path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        IterationRecord r;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        if (!(ls >> r.iteration >> r.losses.cla >> r.losses.coord >> r.losses.wh >>
              r.losses.bbox >> r.losses.tv >> r.losses.nps >> r.losses.total)) {
            throw IoFailure("malformed loss history row: " + line);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace cloak
