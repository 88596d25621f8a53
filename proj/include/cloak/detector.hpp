#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cloak/data.hpp"
#include "cloak/image.hpp"
#include "cloak/losses.hpp"
#include "cloak/metrics.hpp"

namespace cloak {

enum class ArchitectureFamily { kYolo, kTwoStage, kOther };

ArchitectureFamily family_from_string(const std::string& s);  // throws AdapterFailure
std::string to_string(ArchitectureFamily f);

// One raw detector prediction. `box` holds the decoded normalized box; its
// `t` field is the raw parameterized regression output, relative to `anchor`.
struct Candidate {
    std::vector<double> class_probs;  // sums to 1; index 0 is "person"
    BoxTarget box;
    BoxTarget anchor;
    double score = 0.0;  // objectness * person probability
    int cell_row = 0;
    int cell_col = 0;
};

struct DetectorPredictions {
    std::vector<Candidate> candidates;
    bool differentiable = false;
};

// Uniform contract over detection models. Training requires
// supports_gradients(); black-box evaluation does not.
class DetectorAdapter {
public:
    virtual ~DetectorAdapter() = default;
    virtual std::string name() const = 0;
    virtual ArchitectureFamily architecture_family() const = 0;
    virtual bool supports_gradients() const = 0;
    // All candidates above the adapter's internal score floor; pure in
    // (weights, image).
    virtual DetectorPredictions predict(const Image& image) const = 0;
    virtual uint64_t weights_checksum() const = 0;
};

// Loss gradient w.r.t. one candidate's differentiable outputs.
struct CandidateGrad {
    int candidate_index = 0;
    std::vector<double> d_probs;
    double d_cx = 0, d_cy = 0, d_w = 0, d_h = 0;
    std::array<double, 4> d_t{0, 0, 0, 0};
    double d_score = 0;
};

// Faster-RCNN-style box parameterization relative to an anchor:
// ((cx-xa)/wa, (cy-ya)/ha, log(w/wa), log(h/ha)).
std::array<double, 4> parameterize_box(const BoxTarget& box, const BoxTarget& anchor);

// Small convolutional grid detector: four 3x3 stride-2 blocks down to an
// S x S head that predicts, per cell, objectness, a sigmoid-decoded box, class
// probabilities over {person, distractor} and a raw t-vector regressed from
// the cell anchor (the two-stage path).
class ToyDetector : public DetectorAdapter {
public:
    struct Config {
        int num_classes = 2;
        std::array<int, 4> channels{8, 16, 24, 32};
        double anchor_w = 0.28;
        double anchor_h = 0.52;
        double score_floor = 1e-3;
    };

    // Per-layer inputs and pre-activations retained for the backward pass.
    struct Tape {
        Image input;
        std::vector<Image> pre_act;   // conv outputs before the nonlinearity
        std::vector<Image> post_act;  // layer inputs seen by the next conv
        Image head;                   // raw head channels per cell
    };

    ToyDetector(const Config& config, ArchitectureFamily family, uint64_t init_seed);

    std::string name() const override { return name_; }
    ArchitectureFamily architecture_family() const override { return family_; }
    bool supports_gradients() const override { return true; }
    DetectorPredictions predict(const Image& image) const override;
    uint64_t weights_checksum() const override;

    DetectorPredictions predict_traced(const Image& image, Tape& tape) const;
    // Chains candidate gradients through the decode, head and conv stack back
    // to the input pixels.
    Image backward_input(const Tape& tape, const std::vector<CandidateGrad>& grads,
                         const DetectorPredictions& preds) const;

    const Config& config() const { return config_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& mutable_params() { return params_; }

    void save_checkpoint(const std::string& path) const;  // throws IoFailure
    static ToyDetector load_checkpoint(const std::string& path);

    // Training-internal hooks (also used by the weight-gradient tests).
    Image forward_head(const Image& image, Tape* tape) const;
    void backward(const Tape& tape, const Image& grad_head, std::vector<double>* grad_params,
                  Image* grad_input) const;
    BoxTarget cell_anchor(int row, int col, int grid_h, int grid_w) const;

private:
    Config config_;
    ArchitectureFamily family_;
    std::string name_;
    std::vector<double> params_;
};

// Candidates paired with their highest-IoU ground truth at IoU >= iou_floor.
struct MatchedPair {
    int candidate = 0;
    int gt = 0;
    double iou_value = 0.0;
};
std::vector<MatchedPair> match_candidates(const DetectorPredictions& preds,
                                          const std::vector<BoxTarget>& gt_boxes,
                                          double iou_floor = 0.5);

// Evaluation-side view of raw predictions: drops scores below the floor and
// applies greedy NMS. Training uses the raw (pre-NMS) candidates instead.
std::vector<Detection> post_process(const DetectorPredictions& preds, int image_id,
                                    double score_floor = 0.05, double nms_iou = 0.5);

struct ToyTrainOptions {
    int epochs = 60;
    uint64_t seed = 0;
    double learning_rate = 3e-3;
    int batch_size = 8;
    double ap_floor = 0.9;       // required on val after the epoch budget
    double early_stop_ap = 0.97; // stop as soon as val reaches this
    ToyDetector::Config arch;
    ArchitectureFamily family = ArchitectureFamily::kYolo;
};

// Trains the toy detector on person + distractor boxes. When `val` is given,
// val AP@0.50 gates early stopping and the final floor (ConvergenceFailure).
ToyDetector train_toy_detector(const std::vector<AnnotatedImage>& train,
                               const std::vector<AnnotatedImage>* val,
                               const ToyTrainOptions& opts);

// Adapter lookup for configs: "toy" loads a checkpoint; anything else fails
// with AdapterFailure (external models plug in through this same contract).
std::shared_ptr<DetectorAdapter> load_adapter(const std::string& name,
                                              const std::string& weights_path);

}  // namespace cloak
