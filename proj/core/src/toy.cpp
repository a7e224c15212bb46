#include "yolocs/train/toy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "yolocs/graph.hpp"

namespace yolocs::train {

std::vector<ToySample> make_toy_dataset(unsigned seed, int count, i64 img, i64 nc) {
    require(count > 0 && img >= 32 && nc >= 1 && nc <= 3, "toy dataset wants 1-3 classes");
    std::mt19937 rng(seed);
    auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng()) / 4294967296.0);
    };
    std::vector<ToySample> out;
    for (int s = 0; s < count; ++s) {
        ToySample sample;
        sample.image = Tensor4d(Shape4{1, 3, img, img});
        sample.image.fill(0.05);
        int nb = 1 + static_cast<int>(rng() % 3);
        for (int b = 0; b < nb; ++b) {
            ToyBox tb;
            tb.cls = static_cast<int>(rng() % static_cast<unsigned>(nc));
            tb.box.w = uniform(20.0, 48.0);
            tb.box.h = uniform(20.0, 48.0);
            tb.box.cx = uniform(tb.box.w / 2, static_cast<double>(img) - tb.box.w / 2);
            tb.box.cy = uniform(tb.box.h / 2, static_cast<double>(img) - tb.box.h / 2);
            i64 x1 = static_cast<i64>(std::floor(tb.box.cx - tb.box.w / 2));
            i64 x2 = static_cast<i64>(std::ceil(tb.box.cx + tb.box.w / 2));
            i64 y1 = static_cast<i64>(std::floor(tb.box.cy - tb.box.h / 2));
            i64 y2 = static_cast<i64>(std::ceil(tb.box.cy + tb.box.h / 2));
            for (i64 y = std::max<i64>(0, y1); y < std::min(img, y2); ++y)
                for (i64 x = std::max<i64>(0, x1); x < std::min(img, x2); ++x)
                    for (i64 c = 0; c < 3; ++c)
                        sample.image.at(0, c, y, x) = (c == tb.cls) ? 0.9 : 0.25;
            sample.boxes.push_back(tb);
        }
        out.push_back(std::move(sample));
    }
    return out;
}

std::vector<Match> match_targets(const std::vector<ToySample>& data, const AnchorTable& anchors,
                                 const std::vector<i64>& strides,
                                 const std::vector<Shape4>& level_shapes) {
    require(anchors.size() == strides.size() && anchors.size() == level_shapes.size(),
            "anchor, stride and shape tables must align");
    std::vector<Match> matches;
    std::set<std::tuple<int, int, int, i64, i64>> taken;
    for (size_t n = 0; n < data.size(); ++n)
        for (const ToyBox& tb : data[n].boxes) {
            int best_level = 0, best_anchor = 0;
            double best = 1e300;
            for (size_t l = 0; l < anchors.size(); ++l)
                for (size_t a = 0; a < anchors[l].size(); ++a) {
                    double d = std::abs(std::log(tb.box.w / anchors[l][a].first)) +
                               std::abs(std::log(tb.box.h / anchors[l][a].second));
                    if (d < best) {  // strict: ties keep the first candidate
                        best = d;
                        best_level = static_cast<int>(l);
                        best_anchor = static_cast<int>(a);
                    }
                }
            const Shape4& gs = level_shapes[static_cast<size_t>(best_level)];
            double stride = static_cast<double>(strides[static_cast<size_t>(best_level)]);
            i64 gx = std::clamp<i64>(static_cast<i64>(std::floor(tb.box.cx / stride)), 0,
                                     gs.w - 1);
            i64 gy = std::clamp<i64>(static_cast<i64>(std::floor(tb.box.cy / stride)), 0,
                                     gs.h - 1);
            auto key = std::make_tuple(static_cast<int>(n), best_level, best_anchor, gy, gx);
            if (!taken.insert(key).second) continue;  // first box wins the cell
            Match m;
            m.image = static_cast<int>(n);
            m.level = best_level;
            m.anchor = best_anchor;
            m.gy = gy;
            m.gx = gx;
            m.gt = tb.box;
            m.gt_class = tb.cls;
            matches.push_back(m);
        }
    return matches;
}

Box decode_box(double tx, double ty, double tw, double th, i64 gx, i64 gy, double stride,
               double aw, double ah) {
    Box b;
    b.cx = ((2.0 * sigmoid(tx) - 0.5) + static_cast<double>(gx)) * stride;
    b.cy = ((2.0 * sigmoid(ty) - 0.5) + static_cast<double>(gy)) * stride;
    double sw = 2.0 * sigmoid(tw);
    double sh = 2.0 * sigmoid(th);
    b.w = sw * sw * aw;
    b.h = sh * sh * ah;
    return b;
}

namespace {

// d decode / d raw offset, matching decode_box term by term
double dcenter(double t, double stride) {
    double s = sigmoid(t);
    return 2.0 * s * (1.0 - s) * stride;
}
double dsize(double t, double anchor) {
    double s = sigmoid(t);
    return 8.0 * s * s * (1.0 - s) * anchor;  // d (2s)^2 a / dt
}

}  // namespace

BatchLoss batch_loss(const std::vector<Tensor4d>& head_outs, const std::vector<Match>& matches,
                     const AnchorTable& anchors, const std::vector<i64>& strides, i64 nc,
                     const LossWeights& weights, const LossAux* frozen_aux) {
    const size_t levels = head_outs.size();
    require(levels == anchors.size() && levels == strides.size(),
            "head outputs must align with anchors and strides");
    const i64 step = 5 + nc;

    BatchLoss bl;
    std::vector<std::vector<double>> cls_logits;
    std::vector<std::vector<double>> obj_logits(levels);
    for (size_t l = 0; l < levels; ++l) {
        const Shape4& s = head_outs[l].shape;
        i64 na = static_cast<i64>(anchors[l].size());
        require(s.c == na * step, "head tensor has unexpected channel count");
        obj_logits[l].resize(static_cast<size_t>(s.n * na * s.h * s.w));
        for (i64 n = 0; n < s.n; ++n)
            for (i64 a = 0; a < na; ++a)
                for (i64 y = 0; y < s.h; ++y)
                    for (i64 x = 0; x < s.w; ++x)
                        obj_logits[l][static_cast<size_t>(((n * na + a) * s.h + y) * s.w + x)] =
                            head_outs[l].at(n, a * step + 4, y, x);
    }

    for (const Match& m : matches) {
        const Tensor4d& t = head_outs[static_cast<size_t>(m.level)];
        const Shape4& s = t.shape;
        i64 base = static_cast<i64>(m.anchor) * step;
        double tx = t.at(m.image, base + 0, m.gy, m.gx);
        double ty = t.at(m.image, base + 1, m.gy, m.gx);
        double tw = t.at(m.image, base + 2, m.gy, m.gx);
        double th = t.at(m.image, base + 3, m.gy, m.gx);
        auto [aw, ah] = anchors[static_cast<size_t>(m.level)][static_cast<size_t>(m.anchor)];
        bl.targets.pred.push_back(
            decode_box(tx, ty, tw, th, m.gx, m.gy,
                       static_cast<double>(strides[static_cast<size_t>(m.level)]), aw, ah));
        bl.targets.gt.push_back(m.gt);
        bl.targets.gt_class.push_back(m.gt_class);
        bl.targets.level.push_back(m.level);
        i64 na = static_cast<i64>(anchors[static_cast<size_t>(m.level)].size());
        bl.targets.obj_cell.push_back(
            ((static_cast<i64>(m.image) * na + m.anchor) * s.h + m.gy) * s.w + m.gx);
        std::vector<double> row(static_cast<size_t>(nc));
        for (i64 c = 0; c < nc; ++c)
            row[static_cast<size_t>(c)] = t.at(m.image, base + 5 + c, m.gy, m.gx);
        cls_logits.push_back(std::move(row));
    }

    LossAux aux = frozen_aux ? *frozen_aux : make_loss_aux(bl.targets);
    std::vector<Box> d_pred;
    std::vector<std::vector<double>> d_cls, d_obj;
    bl.parts = detection_loss(bl.targets, cls_logits, obj_logits, nc, aux, weights, &d_pred,
                              &d_cls, &d_obj);

    for (size_t l = 0; l < levels; ++l) bl.head_grads.emplace_back(head_outs[l].shape);
    for (size_t l = 0; l < levels; ++l) {
        Tensor4d& g = bl.head_grads[l];
        const Shape4& s = g.shape;
        i64 na = static_cast<i64>(anchors[l].size());
        for (i64 n = 0; n < s.n; ++n)
            for (i64 a = 0; a < na; ++a)
                for (i64 y = 0; y < s.h; ++y)
                    for (i64 x = 0; x < s.w; ++x)
                        g.at(n, a * step + 4, y, x) =
                            d_obj[l][static_cast<size_t>(((n * na + a) * s.h + y) * s.w + x)];
    }
    for (size_t i = 0; i < matches.size(); ++i) {
        const Match& m = matches[i];
        Tensor4d& g = bl.head_grads[static_cast<size_t>(m.level)];
        const Tensor4d& t = head_outs[static_cast<size_t>(m.level)];
        i64 base = static_cast<i64>(m.anchor) * step;
        auto [aw, ah] = anchors[static_cast<size_t>(m.level)][static_cast<size_t>(m.anchor)];
        double stride = static_cast<double>(strides[static_cast<size_t>(m.level)]);
        g.at(m.image, base + 0, m.gy, m.gx) +=
            d_pred[i].cx * dcenter(t.at(m.image, base + 0, m.gy, m.gx), stride);
        g.at(m.image, base + 1, m.gy, m.gx) +=
            d_pred[i].cy * dcenter(t.at(m.image, base + 1, m.gy, m.gx), stride);
        g.at(m.image, base + 2, m.gy, m.gx) +=
            d_pred[i].w * dsize(t.at(m.image, base + 2, m.gy, m.gx), aw);
        g.at(m.image, base + 3, m.gy, m.gx) +=
            d_pred[i].h * dsize(t.at(m.image, base + 3, m.gy, m.gx), ah);
        for (i64 c = 0; c < nc; ++c)
            g.at(m.image, base + 5 + c, m.gy, m.gx) += d_cls[i][static_cast<size_t>(c)];
    }
    return bl;
}

ToyTrainResult toy_train(const ModelConfig& cfg, int steps, double lr, unsigned seed, i64 img) {
    require(steps > 0, "need at least one training step");
    Graph<double> g(cfg);
    g.init_params(seed);

    const i64 nc = g.nc();
    std::vector<ToySample> data = make_toy_dataset(seed + 1, 8, img, nc);
    Tensor4d batch(Shape4{static_cast<i64>(data.size()), 3, img, img});
    for (size_t n = 0; n < data.size(); ++n)
        std::copy(data[n].image.data.begin(), data[n].image.data.end(),
                  batch.data.begin() + static_cast<i64>(n) * data[n].image.numel());

    std::vector<i64> strides = g.head_strides(img);
    std::vector<Shape4> level_shapes = g.infer_shapes(img).back();
    const AnchorTable& anchors = g.config().anchors;
    std::vector<Match> matches = match_targets(data, anchors, strides, level_shapes);
    require(!matches.empty(), "toy dataset produced no positive matches");

    LossWeights weights;
    require(weights.balance.size() == strides.size(),
            "toy training expects a three-level head");

    ToyTrainResult res;
    res.positives = matches.size();
    for (int step = 0; step < steps; ++step) {
        auto outs = g.forward(batch, true, true);
        BatchLoss bl = batch_loss(outs, matches, anchors, strides, nc, weights);
        res.losses.push_back(bl.parts.total);
        if (!std::isfinite(bl.parts.total)) {
            res.diverged_at = step;
            return res;
        }
        g.zero_grads();
        g.backward(bl.head_grads);
        g.sgd_step(lr);
    }
    res.converged = res.final() <= 0.5 * res.initial();
    return res;
}

}  // namespace yolocs::train
