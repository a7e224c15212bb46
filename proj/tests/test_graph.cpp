#include <cmath>
#include <string>

#include "doctest.h"
#include "yolocs/config.hpp"
#include "yolocs/graph.hpp"
#include "yolocs/parallel.hpp"

using namespace yolocs;

namespace {

const std::string kConfigDir = std::string(YOLOCS_SOURCE_DIR) + "/configs";

const char* kTinyText = R"(nc: 2
depth_multiple: 1.0
width_multiple: 1.0
anchors: 8,8, 16,16 ; 24,24, 48,48

backbone:
[-1, 1, CBS, [8, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]

head:
[[3, 4], 1, HeadCoupled, []]
)";

ModelConfig tiny() { return parse_config(kTinyText, "tiny"); }

}  // namespace

TEST_CASE("graph builds from inline text and infers consistent shapes") {
    Graph<float> g(tiny());
    CHECK(g.node_count() == 6);
    CHECK(g.level_count() == 2);
    CHECK(g.na() == 2);
    auto shapes = g.infer_shapes(64);
    CHECK(shapes[0].at(0) == Shape4{1, 8, 32, 32});
    CHECK(shapes[4].at(0) == Shape4{1, 16, 2, 2});
    REQUIRE(shapes.back().size() == 2);
    CHECK(shapes.back()[0] == Shape4{1, 2 * 7, 4, 4});
    CHECK(shapes.back()[1] == Shape4{1, 2 * 7, 2, 2});

    g.init_params(3);
    Tensor4f x({1, 3, 64, 64});
    std::mt19937 rng(5);
    x.fill_uniform(rng, 0.0f, 1.0f);
    auto outs = g.forward(x, false, false);
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].shape == shapes.back()[0]);
    CHECK(outs[1].shape == shapes.back()[1]);
}

TEST_CASE("config errors carry the offending line") {
    // unknown module
    const char* bad1 = R"(nc: 2
anchors: 8,8 ; 16,16

backbone:
[-1, 1, CBS, [8, 3, 2]]
[-1, 1, HeadMystery, [16]]

head:
[[0, 1], 1, HeadCoupled, []]
)";
    CHECK_THROWS_WITH_AS(parse_config(bad1, "tiny"), doctest::Contains("HeadMystery"),
                         std::runtime_error);
    // forward reference
    const char* bad2 = R"(nc: 2
anchors: 8,8 ; 16,16

backbone:
[5, 1, CBS, [8, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]

head:
[[0, 1], 1, HeadCoupled, []]
)";
    CHECK_THROWS_WITH_AS(parse_config(bad2, "tiny"), doctest::Contains("tiny:5"),
                         std::runtime_error);
    // head level count must match anchor groups
    const char* bad3 = R"(nc: 2
anchors: 8,8 ; 16,16 ; 24,24

backbone:
[-1, 1, CBS, [8, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]

head:
[[0, 1], 1, HeadCoupled, []]
)";
    CHECK_THROWS_AS(parse_config(bad3, "tiny"), std::runtime_error);
}

TEST_CASE("width and depth multipliers follow the rounding rules") {
    ModelConfig cfg = load_config_file(kConfigDir + "/yolocs-l.cfg");

    SUBCASE("identity at 1.0") {
        ModelConfig once = apply_multipliers(cfg);
        ModelConfig twice = apply_multipliers(once);
        REQUIRE(once.layers.size() == twice.layers.size());
        for (size_t i = 0; i < once.layers.size(); ++i) {
            CHECK(once.layers[i].repeats == twice.layers[i].repeats);
            if (!once.layers[i].args.empty() &&
                once.layers[i].args[0].kind == Arg::Kind::integer)
                CHECK(once.layers[i].args[0].i == twice.layers[i].args[0].i);
        }
    }

    SUBCASE("small scale: width halves to multiples of 8, repeats floor at 1") {
        cfg.depth_multiple = 0.33;
        cfg.width_multiple = 0.5;
        ModelConfig s = apply_multipliers(cfg);
        CHECK(round_channels(1024 * 0.5) == 512);
        CHECK(round_channels(64 * 0.5) == 32);
        for (const auto& l : s.layers)
            if (l.module == "DCFS") {
                CHECK(l.repeats == 1);  // round(3 * 0.33) = 1
                CHECK(l.args[0].i % 8 == 0);
            }
    }

    SUBCASE("medium scale") {
        cfg.depth_multiple = 0.67;
        cfg.width_multiple = 0.75;
        ModelConfig m = apply_multipliers(cfg);
        CHECK(round_channels(1024 * 0.75) == 768);
        for (const auto& l : m.layers)
            if (l.module == "DCFS") CHECK(l.repeats == 2);  // round(3 * 0.67) = 2
    }

    SUBCASE("single-repeat modules are never depth-scaled") {
        cfg.depth_multiple = 0.33;
        ModelConfig s = apply_multipliers(cfg);
        for (const auto& l : s.layers)
            if (l.module == "SPPF" || l.module == "CBS") CHECK(l.repeats == 1);
    }
}

TEST_CASE("round_channels clamps to the 8-grid") {
    CHECK(round_channels(1) == 8);
    CHECK(round_channels(8) == 8);
    CHECK(round_channels(12) == 16);
    CHECK(round_channels(11.9) == 8);
    CHECK(round_channels(188) == 192);  // 23.5 eighths round half away from zero
}

TEST_CASE("inferred shapes match executed shapes for every shipped model") {
    set_num_threads(4);
    const char* names[] = {"v5l-baseline", "v5l-dcfs", "dcfs-3x3", "dcfs-1x1", "v5l-adh",
                           "v5l-dh",       "yolocs-s", "yolocs-m", "yolocs-l", "micro"};
    for (const char* name : names) {
        CAPTURE(name);
        ModelConfig cfg = load_config_file(resolve_config_path(name, kConfigDir));
        Graph<float> g(cfg);
        g.init_params(1);
        auto expect = g.infer_shapes(64);
        Tensor4f x({1, 3, 64, 64});
        std::mt19937 rng(7);
        x.fill_uniform(rng, 0.0f, 1.0f);
        auto outs = g.forward(x, false, false);
        REQUIRE(outs.size() == expect.back().size());
        for (size_t i = 0; i < outs.size(); ++i) REQUIRE(outs[i].shape == expect.back()[i]);
    }
    set_num_threads(1);
}

TEST_CASE("micro model reports strides 8/16/32 at 96px") {
    ModelConfig cfg = load_config_file(kConfigDir + "/micro.cfg");
    Graph<float> g(cfg);
    auto strides = g.head_strides(96);
    REQUIRE(strides.size() == 3);
    CHECK(strides[0] == 8);
    CHECK(strides[1] == 16);
    CHECK(strides[2] == 32);
}

TEST_CASE("backward reaches at least 99 percent of all parameters") {
    ModelConfig cfg = load_config_file(kConfigDir + "/micro.cfg");
    Graph<double> g(cfg);
    g.init_params(11);
    Tensor4d x({1, 3, 64, 64});
    std::mt19937 rng(13);
    x.fill_uniform(rng, 0.0, 1.0);
    auto outs = g.forward(x, true, true);
    std::vector<Tensor4d> gys;
    for (auto& o : outs) {
        Tensor4d gy(o.shape);
        gy.fill(1.0);
        gys.push_back(std::move(gy));
    }
    g.zero_grads();
    g.backward(gys);
    i64 total = 0, nonzero = 0;
    for (const auto& v : g.params())
        for (i64 i = 0; i < v.count; ++i) {
            ++total;
            if (v.grad[i] != 0.0) ++nonzero;
        }
    CHECK(total == g.total_params());
    CHECK(static_cast<double>(nonzero) >= 0.99 * static_cast<double>(total));
}

TEST_CASE("forward is bit-identical across thread counts and seeds reproduce") {
    ModelConfig cfg = load_config_file(kConfigDir + "/micro.cfg");
    Graph<float> a(cfg);
    Graph<float> b(cfg);
    a.init_params(21);
    b.init_params(21);
    Tensor4f x({2, 3, 64, 64});
    std::mt19937 rng(17);
    x.fill_uniform(rng, 0.0f, 1.0f);
    set_num_threads(1);
    auto outs_serial = a.forward(x, false, false);
    set_num_threads(4);
    auto outs_parallel = b.forward(x, false, false);
    set_num_threads(1);
    REQUIRE(outs_serial.size() == outs_parallel.size());
    for (size_t i = 0; i < outs_serial.size(); ++i)
        REQUIRE(outs_serial[i].data == outs_parallel[i].data);

    Graph<float> c(cfg);
    c.init_params(22);
    bool all_equal = true;
    auto outs_c = c.forward(x, false, false);
    for (size_t i = 0; i < outs_c.size() && all_equal; ++i)
        all_equal = outs_c[i].data == outs_serial[i].data;
    CHECK_FALSE(all_equal);  // a different seed must change the outputs
}

TEST_CASE("parameter initialization respects kinds") {
    ModelConfig cfg = load_config_file(kConfigDir + "/micro.cfg");
    Graph<double> g(cfg);
    g.init_params(31);
    for (const auto& v : g.params()) {
        if (v.kind == ParamKind::bn_gamma)
            for (i64 i = 0; i < v.count; ++i) REQUIRE(v.data[i] == 1.0);
        else if (v.kind == ParamKind::bn_beta || v.kind == ParamKind::conv_bias)
            for (i64 i = 0; i < v.count; ++i) REQUIRE(v.data[i] == 0.0);
        else {
            double bound = std::sqrt(6.0 / static_cast<double>(v.fan_in));
            for (i64 i = 0; i < v.count; ++i) {
                REQUIRE(v.data[i] <= bound);
                REQUIRE(v.data[i] >= -bound);
            }
        }
    }
}

TEST_CASE("config path resolution accepts bare names and full paths") {
    CHECK(resolve_config_path("micro", kConfigDir) == kConfigDir + "/micro.cfg");
    CHECK(resolve_config_path("micro.cfg", kConfigDir) == kConfigDir + "/micro.cfg");
    CHECK(resolve_config_path(kConfigDir + "/micro.cfg", kConfigDir) ==
          kConfigDir + "/micro.cfg");
    CHECK_THROWS_AS(resolve_config_path("no-such-model", kConfigDir), std::runtime_error);
}
