#include <random>

#include "doctest.h"
#include "yolocs/conv.hpp"
#include "yolocs/parallel.hpp"
#include "yolocs/verify/finite_diff.hpp"
#include "yolocs/verify/reference.hpp"

using namespace yolocs;

namespace {

template <typename T>
Tensor4<T> make_tensor(Shape4 s, std::mt19937& rng) {
    Tensor4<T> t(s);
    t.fill_uniform(rng, T(-1), T(1));
    return t;
}

}  // namespace

TEST_CASE("conv 1x1: y = 2x + 1") {
    Tensor4f x({1, 1, 2, 2});
    x.data = {1, 2, 3, 4};
    ConvSpec spec{1, 1, 1, 1, 0, true};
    std::vector<float> w{2.0f}, b{1.0f};
    auto y = conv2d_forward(x, spec, w, b);
    CHECK(y.shape == Shape4{1, 1, 2, 2});
    CHECK(y.data[0] == 3.0f);
    CHECK(y.data[1] == 5.0f);
    CHECK(y.data[2] == 7.0f);
    CHECK(y.data[3] == 9.0f);
}

TEST_CASE("conv 3x3 all-ones, zero pad: window sums with clipped borders") {
    Tensor4f x({1, 1, 3, 3});
    x.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    ConvSpec spec{1, 1, 3, 1, 1, false};
    std::vector<float> w(9, 1.0f), b;
    auto y = conv2d_forward(x, spec, w, b);
    const std::vector<float> expected{12, 21, 16, 27, 45, 33, 24, 39, 28};
    CHECK(y.data == expected);
    // centre element is the full 3x3 neighbourhood sum
    CHECK(y.at(0, 0, 1, 1) == 45.0f);
}

TEST_CASE("conv output geometry") {
    CHECK(conv_out_dim(8, 3, 2, 1) == 4);
    CHECK(conv_out_dim(64, 6, 2, 2) == 32);
    CHECK(conv_out_dim(5, 1, 1, 0) == 5);
    CHECK(conv_out_dim(7, 5, 1, 2) == 7);
}

TEST_CASE("conv forward is bit-exact against the flat-index reference oracle") {
    std::mt19937 rng(1234);
    const i64 kernels[] = {1, 3, 5, 6};
    int cases = 0;
    while (cases < 200) {
        const i64 k = kernels[rng() % 4];
        const i64 s = 1 + static_cast<i64>(rng() % 2);
        const i64 pad = (k == 6) ? 2 : k / 2;
        const i64 h = 1 + static_cast<i64>(rng() % 16);
        const i64 w = 1 + static_cast<i64>(rng() % 16);
        if ((h + 2 * pad - k) / s + 1 < 1 || (w + 2 * pad - k) / s + 1 < 1) continue;
        ConvSpec spec{1 + static_cast<i64>(rng() % 8), 1 + static_cast<i64>(rng() % 8),
                      k,                               s,
                      pad,                             (rng() % 2) == 0};
        Tensor4f x = make_tensor<float>({1 + static_cast<i64>(rng() % 2), spec.in_ch, h, w}, rng);
        std::vector<float> wt(static_cast<size_t>(spec.weight_count()));
        std::vector<float> b(static_cast<size_t>(spec.bias_count()));
        for (auto& v : wt) v = static_cast<float>(rng()) / 4294967296.0f - 0.5f;
        for (auto& v : b) v = static_cast<float>(rng()) / 4294967296.0f - 0.5f;
        auto got = conv2d_forward(x, spec, wt, b);
        auto want = verify::conv_reference(x, spec, wt, b);
        REQUIRE(got.shape == want.shape);
        REQUIRE(got.data == want.data);  // bitwise
        ++cases;
    }
    CHECK(cases == 200);
}

TEST_CASE("conv parallel path matches serial path bitwise") {
    std::mt19937 rng(77);
    ConvSpec spec{5, 7, 3, 1, 1, true};
    Tensor4f x = make_tensor<float>({2, 5, 13, 11}, rng);
    std::vector<float> w(static_cast<size_t>(spec.weight_count()));
    std::vector<float> b(static_cast<size_t>(spec.bias_count()));
    for (auto& v : w) v = static_cast<float>(rng()) / 4294967296.0f - 0.5f;
    for (auto& v : b) v = static_cast<float>(rng()) / 4294967296.0f - 0.5f;

    set_num_threads(1);
    auto serial = conv2d_forward(x, spec, w, b);
    Tensor4f gx_s(x.shape);
    std::vector<float> gw_s(w.size(), 0.0f), gb_s(b.size(), 0.0f);
    Tensor4f gy(serial.shape);
    gy.fill_uniform(rng, -1.0f, 1.0f);
    conv2d_backward(x, spec, w, gy, gx_s, gw_s, gb_s);

    set_num_threads(4);
    auto parallel = conv2d_forward(x, spec, w, b);
    Tensor4f gx_p(x.shape);
    std::vector<float> gw_p(w.size(), 0.0f), gb_p(b.size(), 0.0f);
    conv2d_backward(x, spec, w, gy, gx_p, gw_p, gb_p);
    set_num_threads(1);

    CHECK(serial.data == parallel.data);
    CHECK(gx_s.data == gx_p.data);
    CHECK(gw_s == gw_p);
    CHECK(gb_s == gb_p);
}

TEST_CASE("conv gradients match central finite differences") {
    std::mt19937 rng(42);
    ConvSpec spec{2, 3, 3, 2, 1, true};
    Tensor4d x = make_tensor<double>({2, 2, 5, 6}, rng);
    std::vector<double> w(static_cast<size_t>(spec.weight_count()));
    std::vector<double> b(static_cast<size_t>(spec.bias_count()));
    for (auto& v : w) v = static_cast<double>(rng()) / 4294967296.0 - 0.5;
    for (auto& v : b) v = static_cast<double>(rng()) / 4294967296.0 - 0.5;

    // Scalar objective: fixed random projection of the output.
    Tensor4d proj(conv_out_shape(spec, x.shape));
    proj.fill_uniform(rng, -1.0, 1.0);
    auto f = [&]() {
        auto y = conv2d_forward(x, spec, w, b);
        double s = 0.0;
        for (i64 i = 0; i < y.numel(); ++i)
            s += y.data[static_cast<size_t>(i)] * proj.data[static_cast<size_t>(i)];
        return s;
    };

    Tensor4d gx(x.shape);
    std::vector<double> gw(w.size(), 0.0), gb(b.size(), 0.0);
    conv2d_backward(x, spec, w, proj, gx, gw, gb);

    verify::GradCheck gc;
    for (size_t i = 0; i < w.size(); ++i) gc.check_one("w" + std::to_string(i), f, &w[i], gw[i]);
    for (size_t i = 0; i < b.size(); ++i) gc.check_one("b" + std::to_string(i), f, &b[i], gb[i]);
    for (i64 i = 0; i < x.numel(); i += 7)
        gc.check_one("x" + std::to_string(i), f, &x.data[static_cast<size_t>(i)],
                     gx.data[static_cast<size_t>(i)]);
    INFO("worst: ", gc.result.worst_param, " rel err ", gc.result.max_rel_err);
    CHECK(gc.result.pass(1e-4));
}
