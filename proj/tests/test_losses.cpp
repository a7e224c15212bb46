#include <cmath>

#include "doctest.h"
#include "yolocs/losses.hpp"
#include "yolocs/verify/finite_diff.hpp"

using namespace yolocs;

TEST_CASE("ciou of a box with itself is exactly one") {
    Box a{0.5, -0.25, 2.0, 3.0};
    CHECK(ciou(a, a) == 1.0);
    CHECK(box_iou(a, a) == 1.0);
}

TEST_CASE("ciou of the canonical disjoint pair is -0.4") {
    Box a{0.0, 0.0, 2.0, 2.0};
    Box b{4.0, 0.0, 2.0, 2.0};
    // no overlap, equal aspect: value reduces to -(center gap over diagonal)^2
    CHECK(ciou(a, b) == doctest::Approx(-0.4).epsilon(1e-9));
    CHECK(box_iou(a, b) == 0.0);
}

TEST_CASE("bce at zero logit and half target is ln 2") {
    CHECK(bce_with_logits(0.0, 0.5) == doctest::Approx(0.6931471805599453).epsilon(1e-9));
    CHECK(bce_grad(0.0, 0.5) == 0.0);
}

TEST_CASE("bce stays finite and correct at extreme logits") {
    CHECK(bce_with_logits(100.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bce_with_logits(-100.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bce_with_logits(100.0, 0.0) == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(bce_with_logits(-100.0, 1.0) == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(std::isfinite(bce_grad(500.0, 0.0)));
    CHECK(bce_grad(500.0, 0.0) == doctest::Approx(1.0));
    CHECK(bce_grad(-500.0, 1.0) == doctest::Approx(-1.0));
}

TEST_CASE("ciou is invariant to uniform scaling of both boxes") {
    Box a{2.0, 3.0, 4.0, 5.0};
    Box b{1.0, 1.0, 2.0, 2.0};
    double base = ciou(a, b);
    for (double k : {7.0, 0.125, 300.0}) {
        Box ak{a.cx * k, a.cy * k, a.w * k, a.h * k};
        Box bk{b.cx * k, b.cy * k, b.w * k, b.h * k};
        CHECK(ciou(ak, bk) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("ciou never exceeds iou and improves as boxes align") {
    Box gt{5.0, 5.0, 2.0, 3.0};
    Box near{5.2, 5.1, 2.1, 2.8};
    Box far{8.0, 9.0, 1.0, 6.0};
    CHECK(ciou(near, gt) <= box_iou(near, gt));
    CHECK(ciou(far, gt) <= box_iou(far, gt));
    CHECK(ciou(near, gt) > ciou(far, gt));
    CHECK(ciou(gt, gt) == 1.0);
}

TEST_CASE("ciou analytic gradient matches finite differences") {
    Box gt{1.0, 2.0, 3.0, 2.0};
    // overlapping, contained, disjoint, and diagonal-offset configurations
    // kept clear of exact corner ties, where the enclosing box is not smooth
    Box cases[] = {{1.4, 2.6, 2.0, 2.1},
                   {1.1, 2.2, 0.8, 0.7},
                   {9.0, 2.3, 2.0, 1.7},
                   {-2.0, -1.0, 1.5, 4.0},
                   {1.2, 2.1, 6.0, 5.0}};
    for (Box a : cases) {
        CAPTURE(a.cx);
        CAPTURE(a.cy);
        const double alpha = ciou_alpha(a, gt);
        Box ga;
        ciou_eval(a, gt, alpha, &ga);
        auto f = [&]() { return ciou_at(a, gt, alpha); };
        verify::GradCheck gc;
        gc.check_one("cx", f, &a.cx, ga.cx);
        gc.check_one("cy", f, &a.cy, ga.cy);
        gc.check_one("w", f, &a.w, ga.w);
        gc.check_one("h", f, &a.h, ga.h);
        CAPTURE(gc.result.worst_param);
        CAPTURE(gc.result.max_rel_err);
        CHECK(gc.result.pass(1e-4));
    }
}

namespace {

struct LossFixture {
    DetectionTargets t;
    std::vector<std::vector<double>> cls;
    std::vector<std::vector<double>> obj;
    i64 nc = 3;
    LossWeights w;

    LossFixture() {
        w.balance = {4.0, 1.0};
        t.pred = {{4.2, 4.1, 2.2, 1.9}, {10.5, 3.8, 3.5, 4.2}, {6.0, 6.5, 5.0, 4.0}};
        t.gt = {{4.0, 4.0, 2.0, 2.0}, {11.0, 4.0, 4.0, 4.0}, {13.0, 6.0, 4.5, 4.5}};
        t.gt_class = {0, 2, 1};
        t.level = {0, 0, 1};
        t.obj_cell = {1, 6, 2};
        cls = {{0.3, -0.2, 0.1}, {-1.0, 0.5, 0.8}, {0.0, 2.0, -2.0}};
        obj = {{0.1, -0.4, 0.2, 0.9, -1.2, 0.3, 0.05, -0.6},
               {0.7, -0.3, 0.4, -0.1}};
    }
};

}  // namespace

TEST_CASE("detection loss gradients match finite differences with frozen aux") {
    LossFixture fx;
    LossAux aux = make_loss_aux(fx.t);

    std::vector<Box> d_pred;
    std::vector<std::vector<double>> d_cls, d_obj;
    detection_loss(fx.t, fx.cls, fx.obj, fx.nc, aux, fx.w, &d_pred, &d_cls, &d_obj);

    auto f = [&]() {
        return detection_loss(fx.t, fx.cls, fx.obj, fx.nc, aux, fx.w).total;
    };
    verify::GradCheck gc;
    for (size_t i = 0; i < fx.t.size(); ++i) {
        std::string p = "pred" + std::to_string(i) + ".";
        gc.check_one(p + "cx", f, &fx.t.pred[i].cx, d_pred[i].cx);
        gc.check_one(p + "cy", f, &fx.t.pred[i].cy, d_pred[i].cy);
        gc.check_one(p + "w", f, &fx.t.pred[i].w, d_pred[i].w);
        gc.check_one(p + "h", f, &fx.t.pred[i].h, d_pred[i].h);
    }
    for (size_t i = 0; i < fx.cls.size(); ++i)
        for (size_t c = 0; c < fx.cls[i].size(); ++c)
            gc.check_one("cls" + std::to_string(i) + "_" + std::to_string(c), f, &fx.cls[i][c],
                         d_cls[i][c]);
    for (size_t l = 0; l < fx.obj.size(); ++l)
        for (size_t j = 0; j < fx.obj[l].size(); ++j)
            gc.check_one("obj" + std::to_string(l) + "_" + std::to_string(j), f, &fx.obj[l][j],
                         d_obj[l][j]);
    CAPTURE(gc.result.worst_param);
    CAPTURE(gc.result.max_rel_err);
    CHECK(gc.result.checked == 12 + 9 + 12);
    CHECK(gc.result.pass(1e-4));
}

TEST_CASE("detection loss with no positives reduces to pure objectness") {
    DetectionTargets empty;
    std::vector<std::vector<double>> no_cls;
    std::vector<std::vector<double>> obj = {{0.5, -0.5}, {1.0, 0.0, -1.0}};
    LossWeights w;
    w.balance = {2.0, 1.0};
    LossAux aux;  // empty
    std::vector<Box> d_pred;
    std::vector<std::vector<double>> d_cls, d_obj;
    LossParts parts = detection_loss(empty, no_cls, obj, 3, aux, w, &d_pred, &d_cls, &d_obj);
    CHECK(parts.box == 0.0);
    CHECK(parts.cls == 0.0);
    CHECK(parts.obj > 0.0);
    CHECK(parts.total == parts.obj);
    double want = 2.0 * (bce_with_logits(0.5, 0.0) + bce_with_logits(-0.5, 0.0)) / 2.0 +
                  1.0 * (bce_with_logits(1.0, 0.0) + bce_with_logits(0.0, 0.0) +
                         bce_with_logits(-1.0, 0.0)) /
                      3.0;
    CHECK(parts.obj == doctest::Approx(want).epsilon(1e-12));
    CHECK(d_pred.empty());
    CHECK(d_cls.empty());
    for (const auto& grid : d_obj)
        for (double g : grid) CHECK(g > 0.0);  // every logit pushed toward negative
}

TEST_CASE("objectness targets are the clamped box quality") {
    DetectionTargets t;
    t.pred = {{4.2, 4.1, 2.2, 1.9}, {0.0, 0.0, 2.0, 2.0}};
    t.gt = {{4.0, 4.0, 2.0, 2.0}, {40.0, 0.0, 2.0, 2.0}};
    t.gt_class = {0, 0};
    t.level = {0, 0};
    t.obj_cell = {0, 1};
    LossAux aux = make_loss_aux(t);
    CHECK(aux.obj_target[0] > 0.0);
    CHECK(aux.obj_target[0] <= 1.0);
    CHECK(aux.obj_target[0] == doctest::Approx(ciou(t.pred[0], t.gt[0])).epsilon(1e-12));
    // far-apart pair has negative quality, clamped to zero
    CHECK(ciou(t.pred[1], t.gt[1]) < 0.0);
    CHECK(aux.obj_target[1] == 0.0);
}

TEST_CASE("positive and negative cells pull objectness in opposite directions") {
    LossFixture fx;
    LossAux aux = make_loss_aux(fx.t);
    std::vector<std::vector<double>> d_obj;
    detection_loss(fx.t, fx.cls, fx.obj, fx.nc, aux, fx.w, nullptr, nullptr, &d_obj);
    // positive cell at level 0, index 1 has target > 0; gradient is sigma(x) - t
    double x_pos = fx.obj[0][1];
    double scale0 = fx.w.obj * fx.w.balance[0] / 8.0;
    CHECK(d_obj[0][1] ==
          doctest::Approx(scale0 * (sigmoid(x_pos) - aux.obj_target[0])).epsilon(1e-12));
    // a background cell has target 0, so its gradient is strictly positive
    CHECK(d_obj[0][0] == doctest::Approx(scale0 * sigmoid(fx.obj[0][0])).epsilon(1e-12));
    CHECK(d_obj[0][0] > 0.0);
}

TEST_CASE("loss rejects inconsistent shapes") {
    LossFixture fx;
    LossAux aux = make_loss_aux(fx.t);
    LossWeights bad = fx.w;
    bad.balance = {4.0, 1.0, 0.4};  // three weights for two levels
    CHECK_THROWS_AS(detection_loss(fx.t, fx.cls, fx.obj, fx.nc, aux, bad), std::runtime_error);
    auto short_cls = fx.cls;
    short_cls.pop_back();
    CHECK_THROWS_AS(detection_loss(fx.t, short_cls, fx.obj, fx.nc, aux, fx.w),
                    std::runtime_error);
    auto bad_cells = fx.t;
    bad_cells.obj_cell[0] = 99;
    CHECK_THROWS_AS(detection_loss(bad_cells, fx.cls, fx.obj, fx.nc, aux, fx.w),
                    std::runtime_error);
}
