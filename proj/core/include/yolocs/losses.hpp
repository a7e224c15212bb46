#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "yolocs/tensor.hpp"

namespace yolocs {

// Axis-aligned box in center/size form. Sizes must stay positive; the decode
// path guarantees that by construction.
struct Box {
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

struct CiouEval {
    double value = 0.0;  // iou - dist - alpha * v
    double iou = 0.0;
    double dist = 0.0;  // squared center distance over squared enclosing diagonal
    double v = 0.0;     // aspect-ratio penalty
};

// Complete-IoU with the aspect coefficient alpha supplied by the caller and
// treated as a constant. If ga is non-null it receives d value / d a.
inline CiouEval ciou_eval(const Box& a, const Box& b, double alpha, Box* ga) {
    require(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0, "boxes must have positive size");
    const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
    const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
    const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
    const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;

    const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
    const double ih = std::min(ay2, by2) - std::max(ay1, by1);
    const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
    const double area_a = a.w * a.h;
    const double uni = area_a + b.w * b.h - inter;
    const double iou = inter / uni;

    const double cw = std::max(ax2, bx2) - std::min(ax1, bx1);
    const double ch = std::max(ay2, by2) - std::min(ay1, by1);
    const double c2 = cw * cw + ch * ch;
    const double dx = a.cx - b.cx, dy = a.cy - b.cy;
    const double rho2 = dx * dx + dy * dy;
    const double dist = rho2 / c2;

    const double kFourOverPi2 = 4.0 / (M_PI * M_PI);
    const double u = std::atan(b.w / b.h) - std::atan(a.w / a.h);
    const double v = kFourOverPi2 * u * u;

    CiouEval e{iou - dist - alpha * v, iou, dist, v};
    if (!ga) return e;

    // intersection derivatives w.r.t. the corners of a (zero when detached)
    double di_dax1 = 0, di_dax2 = 0, di_day1 = 0, di_day2 = 0;
    if (inter > 0) {
        di_dax2 = (ax2 < bx2) ? ih : 0.0;
        di_dax1 = (ax1 > bx1) ? -ih : 0.0;
        di_day2 = (ay2 < by2) ? iw : 0.0;
        di_day1 = (ay1 > by1) ? -iw : 0.0;
    }
    // corner -> center/size chain: x1 = cx - w/2, x2 = cx + w/2
    const double di_dcx = di_dax1 + di_dax2;
    const double di_dw = 0.5 * (di_dax2 - di_dax1);
    const double di_dcy = di_day1 + di_day2;
    const double di_dh = 0.5 * (di_day2 - di_day1);
    auto diou = [&](double d_inter, double d_area) {
        return (d_inter * uni - inter * (d_area - d_inter)) / (uni * uni);
    };

    const double dcw_dax2 = (ax2 > bx2) ? 1.0 : 0.0;
    const double dcw_dax1 = (ax1 < bx1) ? -1.0 : 0.0;
    const double dch_day2 = (ay2 > by2) ? 1.0 : 0.0;
    const double dch_day1 = (ay1 < by1) ? -1.0 : 0.0;
    const double dc2_dcx = 2 * cw * (dcw_dax1 + dcw_dax2);
    const double dc2_dw = cw * (dcw_dax2 - dcw_dax1);
    const double dc2_dcy = 2 * ch * (dch_day1 + dch_day2);
    const double dc2_dh = ch * (dch_day2 - dch_day1);
    auto ddist = [&](double d_rho2, double d_c2) {
        return (d_rho2 * c2 - rho2 * d_c2) / (c2 * c2);
    };

    const double denom = a.w * a.w + a.h * a.h;
    const double dv_dw = kFourOverPi2 * 2.0 * u * (-a.h / denom);
    const double dv_dh = kFourOverPi2 * 2.0 * u * (a.w / denom);

    ga->cx = diou(di_dcx, 0.0) - ddist(2 * dx, dc2_dcx);
    ga->cy = diou(di_dcy, 0.0) - ddist(2 * dy, dc2_dcy);
    ga->w = diou(di_dw, a.h) - ddist(0.0, dc2_dw) - alpha * dv_dw;
    ga->h = diou(di_dh, a.w) - ddist(0.0, dc2_dh) - alpha * dv_dh;
    return e;
}

// Aspect coefficient evaluated at the current point; callers freeze it before
// differentiating, mirroring the stop-gradient in the original formulation.
inline double ciou_alpha(const Box& a, const Box& b) {
    CiouEval e = ciou_eval(a, b, 0.0, nullptr);
    return e.v / ((1.0 + 1e-9) - e.iou + e.v);
}

inline double ciou_at(const Box& a, const Box& b, double alpha) {
    return ciou_eval(a, b, alpha, nullptr).value;
}

inline double ciou(const Box& a, const Box& b) { return ciou_at(a, b, ciou_alpha(a, b)); }

inline double box_iou(const Box& a, const Box& b) {
    return ciou_eval(a, b, 0.0, nullptr).iou;
}

// ---------------------------------------------------------------------------
// binary cross entropy on logits, numerically stable for large |x|
// ---------------------------------------------------------------------------

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double bce_with_logits(double logit, double target) {
    return target * softplus(-logit) + (1.0 - target) * softplus(logit);
}

inline double bce_grad(double logit, double target) { return sigmoid(logit) - target; }

// ---------------------------------------------------------------------------
// composite detection loss over matched predictions
// ---------------------------------------------------------------------------

struct LossWeights {
    double box = 0.05;
    double cls = 0.5;
    double obj = 1.0;
    std::vector<double> balance{4.0, 1.0, 0.4};  // per-level objectness weights
};

// One entry per positive match. pred boxes are already decoded to image
// coordinates by the caller, which also owns the chain rule back to raw
// network outputs. obj_cell indexes the flat per-level objectness array.
struct DetectionTargets {
    std::vector<Box> pred;
    std::vector<Box> gt;
    std::vector<int> gt_class;
    std::vector<int> level;
    std::vector<i64> obj_cell;

    size_t size() const { return pred.size(); }
    void check(size_t levels, i64 nc) const {
        require(gt.size() == pred.size() && gt_class.size() == pred.size() &&
                    level.size() == pred.size() && obj_cell.size() == pred.size(),
                "detection target arrays must have equal length");
        for (size_t i = 0; i < pred.size(); ++i) {
            require(level[i] >= 0 && static_cast<size_t>(level[i]) < levels,
                    "positive references a level out of range");
            require(gt_class[i] >= 0 && gt_class[i] < nc, "positive class id out of range");
        }
    }
};

// Coefficients held constant while differentiating: the per-match aspect
// coefficient and the objectness target (clamped box quality).
struct LossAux {
    std::vector<double> alpha;
    std::vector<double> obj_target;
};

inline LossAux make_loss_aux(const DetectionTargets& t) {
    LossAux aux;
    aux.alpha.reserve(t.size());
    aux.obj_target.reserve(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        double a = ciou_alpha(t.pred[i], t.gt[i]);
        aux.alpha.push_back(a);
        aux.obj_target.push_back(std::clamp(ciou_at(t.pred[i], t.gt[i], a), 0.0, 1.0));
    }
    return aux;
}

struct LossParts {
    double total = 0.0;
    double box = 0.0;
    double cls = 0.0;
    double obj = 0.0;
};

// cls_logits: one row of nc logits per positive. obj_logits: the complete
// flattened objectness grid of every level. Gradient outputs are optional and
// sized to mirror their inputs.
inline LossParts detection_loss(const DetectionTargets& t,
                                const std::vector<std::vector<double>>& cls_logits,
                                const std::vector<std::vector<double>>& obj_logits, i64 nc,
                                const LossAux& aux, const LossWeights& w,
                                std::vector<Box>* d_pred = nullptr,
                                std::vector<std::vector<double>>* d_cls = nullptr,
                                std::vector<std::vector<double>>* d_obj = nullptr) {
    const size_t levels = obj_logits.size();
    t.check(levels, nc);
    require(w.balance.size() == levels, "one balance weight per head level");
    require(cls_logits.size() == t.size(), "one class logit row per positive");
    require(aux.alpha.size() == t.size() && aux.obj_target.size() == t.size(),
            "aux arrays must match the positives");
    const size_t P = t.size();

    LossParts parts;
    if (d_pred) d_pred->assign(P, Box{});
    if (d_cls) {
        d_cls->clear();
        for (const auto& row : cls_logits) d_cls->emplace_back(row.size(), 0.0);
    }
    if (d_obj) {
        d_obj->clear();
        for (const auto& grid : obj_logits) d_obj->emplace_back(grid.size(), 0.0);
    }

    if (P > 0) {
        for (size_t i = 0; i < P; ++i) {
            Box ga;
            CiouEval e = ciou_eval(t.pred[i], t.gt[i], aux.alpha[i], d_pred ? &ga : nullptr);
            parts.box += 1.0 - e.value;
            if (d_pred) {
                const double s = -w.box / static_cast<double>(P);
                (*d_pred)[i] = Box{s * ga.cx, s * ga.cy, s * ga.w, s * ga.h};
            }
        }
        parts.box *= w.box / static_cast<double>(P);

        const double cls_scale = w.cls / (static_cast<double>(P) * static_cast<double>(nc));
        for (size_t i = 0; i < P; ++i) {
            require(cls_logits[i].size() == static_cast<size_t>(nc),
                    "class logit row has wrong width");
            for (i64 c = 0; c < nc; ++c) {
                const double target = (c == t.gt_class[i]) ? 1.0 : 0.0;
                const double x = cls_logits[i][static_cast<size_t>(c)];
                parts.cls += bce_with_logits(x, target);
                if (d_cls) (*d_cls)[i][static_cast<size_t>(c)] = cls_scale * bce_grad(x, target);
            }
        }
        parts.cls *= cls_scale;
    }

    for (size_t l = 0; l < levels; ++l) {
        const auto& grid = obj_logits[l];
        require(!grid.empty(), "objectness grid must not be empty");
        std::vector<double> target(grid.size(), 0.0);
        for (size_t i = 0; i < P; ++i)
            if (static_cast<size_t>(t.level[i]) == l) {
                require(t.obj_cell[i] >= 0 &&
                            t.obj_cell[i] < static_cast<i64>(grid.size()),
                        "objectness cell out of range");
                target[static_cast<size_t>(t.obj_cell[i])] = aux.obj_target[i];
            }
        double level_sum = 0.0;
        const double scale = w.obj * w.balance[l] / static_cast<double>(grid.size());
        for (size_t j = 0; j < grid.size(); ++j) {
            level_sum += bce_with_logits(grid[j], target[j]);
            if (d_obj) (*d_obj)[l][j] = scale * bce_grad(grid[j], target[j]);
        }
        parts.obj += w.balance[l] * level_sum / static_cast<double>(grid.size());
    }
    parts.obj *= w.obj;

    parts.total = parts.box + parts.cls + parts.obj;
    return parts;
}

}  // namespace yolocs
