#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "yolocs/graph.hpp"
#include "yolocs/train/toy.hpp"
#include "yolocs/verify/receptive_field.hpp"

using namespace yolocs;

namespace {

const std::string kConfigDir = std::string(YOLOCS_SOURCE_DIR) + "/configs";

Tensor4d rnd(Shape4 s, unsigned seed) {
    Tensor4d x(s);
    std::mt19937 rng(seed);
    x.fill_uniform(rng, -1.0, 1.0);
    return x;
}

template <typename BlockT>
void randomize_block(BlockT& blk, unsigned seed) {
    std::mt19937 rng(seed);
    std::vector<ParamView<double>> views;
    blk.collect("p", views);
    verify::randomize_params(views, rng);
}

}  // namespace

TEST_CASE("a 1x1 conv touches exactly one output position") {
    CBSBlock<double> blk(4, 8, 1, 1);
    randomize_block(blk, 1);
    Tensor4d x = rnd({1, 4, 9, 9}, 2);
    auto fwd = verify::forward_footprint(blk, x, 4, 5);
    CHECK(fwd == verify::PositionSet{{4, 5}});
    auto bwd = verify::backward_footprint(blk, x, 4, 5);
    CHECK(bwd == verify::PositionSet{{4, 5}});
}

TEST_CASE("a 3x3 conv touches exactly its clipped neighborhood") {
    CBSBlock<double> blk(4, 8, 3, 1);
    randomize_block(blk, 3);
    Tensor4d x = rnd({1, 4, 9, 9}, 4);
    SUBCASE("interior pixel") {
        auto fwd = verify::forward_footprint(blk, x, 4, 4);
        CHECK(fwd == verify::chebyshev_ball(4, 4, 1, 9, 9));
        CHECK(verify::footprint_radius(fwd, 4, 4) == 1);
        auto bwd = verify::backward_footprint(blk, x, 4, 4);
        CHECK(bwd == verify::chebyshev_ball(4, 4, 1, 9, 9));
    }
    SUBCASE("corner pixel clips against the border") {
        auto fwd = verify::forward_footprint(blk, x, 0, 0);
        CHECK(fwd == verify::chebyshev_ball(0, 0, 1, 9, 9));
        CHECK(fwd.size() == 4);
    }
}

TEST_CASE("stacked units widen the receptive field beyond a single bottleneck") {
    Tensor4d x = rnd({1, 8, 13, 13}, 5);
    BottleneckBlock<double> single(8, 8, true);
    randomize_block(single, 6);
    auto single_fwd = verify::forward_footprint(single, x, 6, 6);
    i64 single_radius = verify::footprint_radius(single_fwd, 6, 6);
    CHECK(single_radius == 1);  // one 3x3 inside

    DCFSBlock<double> stacked(8, 8, 3, true, DcfsVariant::ocj);
    randomize_block(stacked, 7);
    auto stacked_fwd = verify::forward_footprint(stacked, x, 6, 6);
    i64 stacked_radius = verify::footprint_radius(stacked_fwd, 6, 6);
    CAPTURE(single_radius);
    CAPTURE(stacked_radius);
    CHECK(stacked_radius > single_radius);
}

TEST_CASE("batch loss gradients match finite differences on raw head tensors") {
    const i64 nc = 2;
    train::AnchorTable anchors = {{{8, 8}, {16, 16}}, {{24, 24}, {48, 48}}};
    std::vector<i64> strides{8, 16};
    std::vector<Tensor4d> heads;
    heads.push_back(rnd({2, 2 * 7, 4, 4}, 11));
    heads.push_back(rnd({2, 2 * 7, 2, 2}, 12));

    std::vector<train::Match> matches;
    auto add = [&](int image, int level, int anchor, i64 gy, i64 gx, Box gt, int cls) {
        train::Match m;
        m.image = image;
        m.level = level;
        m.anchor = anchor;
        m.gy = gy;
        m.gx = gx;
        m.gt = gt;
        m.gt_class = cls;
        matches.push_back(m);
    };
    add(0, 0, 1, 1, 2, Box{21.0, 11.0, 15.0, 17.0}, 0);
    add(1, 0, 0, 3, 0, Box{5.0, 27.0, 9.0, 7.5}, 1);
    add(1, 1, 1, 0, 1, Box{26.0, 9.0, 40.0, 44.0}, 0);

    LossWeights w;
    w.balance = {4.0, 1.0};

    train::BatchLoss first = train::batch_loss(heads, matches, anchors, strides, nc, w);
    LossAux aux = make_loss_aux(first.targets);
    train::BatchLoss analytic =
        train::batch_loss(heads, matches, anchors, strides, nc, w, &aux);

    auto f = [&]() {
        return train::batch_loss(heads, matches, anchors, strides, nc, w, &aux).parts.total;
    };
    verify::GradCheck gc;
    for (size_t l = 0; l < heads.size(); ++l)
        for (i64 i = 0; i < heads[l].numel(); ++i)
            gc.check_one("head" + std::to_string(l) + "[" + std::to_string(i) + "]", f,
                         &heads[l].data[static_cast<size_t>(i)],
                         analytic.head_grads[l].data[static_cast<size_t>(i)]);
    CAPTURE(gc.result.worst_param);
    CAPTURE(gc.result.max_rel_err);
    CHECK(gc.result.checked == static_cast<size_t>(heads[0].numel() + heads[1].numel()));
    CHECK(gc.result.pass(1e-4));
}

TEST_CASE("whole-net gradients match finite differences on sampled parameters") {
    ModelConfig cfg = load_config_file(kConfigDir + "/micro.cfg");
    Graph<double> g(cfg);
    g.init_params(41);

    std::vector<train::ToySample> data = train::make_toy_dataset(42, 1, 64, g.nc());
    const Tensor4d& batch = data[0].image;
    std::vector<i64> strides = g.head_strides(64);
    std::vector<Shape4> level_shapes = g.infer_shapes(64).back();
    std::vector<train::Match> matches =
        train::match_targets(data, g.config().anchors, strides, level_shapes);
    REQUIRE(!matches.empty());
    LossWeights w;

    auto outs0 = g.forward(batch, true, true);
    train::BatchLoss first =
        train::batch_loss(outs0, matches, g.config().anchors, strides, g.nc(), w);
    LossAux aux = make_loss_aux(first.targets);

    auto f = [&]() {
        auto outs = g.forward(batch, true, false);
        return train::batch_loss(outs, matches, g.config().anchors, strides, g.nc(), w, &aux)
            .parts.total;
    };

    train::BatchLoss at0 =
        train::batch_loss(outs0, matches, g.config().anchors, strides, g.nc(), w, &aux);
    g.zero_grads();
    g.backward(at0.head_grads);

    verify::GradCheck gc;
    const i64 stride = 997;  // sample a few dozen parameters across the registry
    for (auto& v : g.params())
        for (i64 i = 0; i < v.count; i += stride)
            gc.check_one(v.name + "[" + std::to_string(i) + "]", f, &v.data[i], v.grad[i]);
    CAPTURE(gc.result.worst_param);
    CAPTURE(gc.result.max_rel_err);
    CHECK(gc.result.checked >= 30);
    CHECK(gc.result.pass(1e-4));
}
