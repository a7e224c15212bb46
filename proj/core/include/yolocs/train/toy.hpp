#pragma once

// Self-contained overfit demo: a tiny synthetic detection dataset, the
// anchor-ratio matcher, box decoding with its gradient chain, and a plain
// gradient-descent loop over a model graph.

#include <utility>
#include <vector>

#include "yolocs/config.hpp"
#include "yolocs/losses.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs::train {

struct ToyBox {
    int cls = 0;
    Box box;  // pixels, center/size
};

struct ToySample {
    Tensor4d image;  // {1, 3, img, img}
    std::vector<ToyBox> boxes;
};

// Images of solid class-coded rectangles on a dim background. Deterministic
// for a fixed seed.
std::vector<ToySample> make_toy_dataset(unsigned seed, int count, i64 img, i64 nc);

// One positive assignment: ground-truth box -> (image, level, anchor, cell).
struct Match {
    int image = 0;
    int level = 0;
    int anchor = 0;
    i64 gy = 0, gx = 0;
    Box gt;
    int gt_class = 0;
};

using AnchorTable = std::vector<std::vector<std::pair<double, double>>>;

// Picks, per ground-truth box, the (level, anchor) whose shape is nearest in
// log-ratio distance, then bins the box center into that level's grid.
// Duplicate (image, level, anchor, cell) assignments keep the first box.
std::vector<Match> match_targets(const std::vector<ToySample>& data, const AnchorTable& anchors,
                                 const std::vector<i64>& strides,
                                 const std::vector<Shape4>& level_shapes);

// Raw-output offsets at one cell decoded into a pixel box:
//   bx = ((2 sigma(tx) - 0.5) + gx) * stride,  bw = (2 sigma(tw))^2 * aw
Box decode_box(double tx, double ty, double tw, double th, i64 gx, i64 gy, double stride,
               double aw, double ah);

struct BatchLoss {
    LossParts parts;
    std::vector<Tensor4d> head_grads;  // d total / d raw head outputs
    DetectionTargets targets;          // decoded positives, for inspection
};

// Evaluates the detection loss on raw head outputs ({n, na*(5+nc), h, w} per
// level) and routes gradients back through the decode. Passing frozen_aux
// pins the quality coefficients, making the loss an ordinary differentiable
// function of the head outputs.
BatchLoss batch_loss(const std::vector<Tensor4d>& head_outs, const std::vector<Match>& matches,
                     const AnchorTable& anchors, const std::vector<i64>& strides, i64 nc,
                     const LossWeights& weights, const LossAux* frozen_aux = nullptr);

struct ToyTrainResult {
    std::vector<double> losses;  // one entry per step, pre-update
    bool converged = false;      // final <= half of initial
    int diverged_at = -1;        // step index of the first non-finite loss
    size_t positives = 0;

    double initial() const { return losses.empty() ? 0.0 : losses.front(); }
    double final() const { return losses.empty() ? 0.0 : losses.back(); }
};

ToyTrainResult toy_train(const ModelConfig& cfg, int steps, double lr, unsigned seed,
                         i64 img = 96);

}  // namespace yolocs::train
