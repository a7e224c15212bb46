#include <random>

#include "doctest.h"
#include "yolocs/pooling.hpp"
#include "yolocs/verify/finite_diff.hpp"
#include "yolocs/verify/reference.hpp"

using namespace yolocs;

TEST_CASE("maxpool 3x3 stride 1 pad 1 on a 3x3 ramp") {
    Tensor4f x({1, 1, 3, 3});
    x.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    PoolSpec p{3, 1, 1};
    std::vector<i64> argmax;
    auto y = maxpool2d_forward(x, p, argmax);
    // each window's max; corners see a 2x2 sub-window
    std::vector<float> want = {5, 6, 6, 8, 9, 9, 8, 9, 9};
    REQUIRE(y.data == want);
    // backward scatters each upstream value onto its argmax element
    Tensor4f gy(y.shape);
    gy.fill(1.0f);
    Tensor4f gx(x.shape);
    maxpool2d_backward(gy, argmax, gx);
    std::vector<float> want_gx = {0, 0, 0, 0, 1, 2, 0, 2, 4};
    CHECK(gx.data == want_gx);
}

TEST_CASE("maxpool ties resolve to the first element in row-major window order") {
    Tensor4f x({1, 1, 2, 2});
    x.data = {3, 3, 3, 3};
    PoolSpec p{2, 1, 0};
    std::vector<i64> argmax;
    auto y = maxpool2d_forward(x, p, argmax);
    REQUIRE(y.numel() == 1);
    CHECK(y.data[0] == 3.0f);
    CHECK(argmax[0] == 0);  // top-left wins the tie
    Tensor4f gy(y.shape);
    gy.data = {2.0f};
    Tensor4f gx(x.shape);
    maxpool2d_backward(gy, argmax, gx);
    CHECK(gx.data == std::vector<float>{2, 0, 0, 0});
}

TEST_CASE("maxpool 5x5 stride 1 pad 2 matches the reference on random input") {
    std::mt19937 rng(21);
    Tensor4f x({2, 3, 7, 6});
    x.fill_uniform(rng, -5.0f, 5.0f);
    PoolSpec p{5, 1, 2};
    std::vector<i64> argmax;
    auto got = maxpool2d_forward(x, p, argmax);
    auto want = verify::maxpool_reference(x, p);
    REQUIRE(got.shape == want.shape);
    REQUIRE(got.data == want.data);
}

TEST_CASE("nearest upsample doubles each pixel into a 2x2 block") {
    Tensor4f x({1, 1, 2, 2});
    x.data = {1, 2, 3, 4};
    auto y = upsample2x_forward(x);
    REQUIRE(y.shape == Shape4{1, 1, 4, 4});
    std::vector<float> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(y.data == want);
    auto ref = verify::upsample2x_reference(x);
    CHECK(y.data == ref.data);
    // backward sums the 2x2 block back onto the source pixel
    Tensor4f gy(y.shape);
    gy.fill(1.0f);
    Tensor4f gx(x.shape);
    upsample2x_backward(gy, gx);
    CHECK(gx.data == std::vector<float>{4, 4, 4, 4});
}

TEST_CASE("pooling gradients match finite differences") {
    std::mt19937 rng(22);
    Tensor4d x({1, 2, 5, 5});
    x.fill_uniform(rng, -3.0, 3.0);
    Tensor4d proj;

    SUBCASE("maxpool") {
        PoolSpec p{3, 2, 1};
        std::vector<i64> argmax;
        auto y0 = maxpool2d_forward(x, p, argmax);
        proj = Tensor4d(y0.shape);
        proj.fill_uniform(rng, -1.0, 1.0);
        auto f = [&]() {
            std::vector<i64> am;
            auto y = maxpool2d_forward(x, p, am);
            double s = 0.0;
            for (i64 i = 0; i < y.numel(); ++i)
                s += y.data[static_cast<size_t>(i)] * proj.data[static_cast<size_t>(i)];
            return s;
        };
        Tensor4d gx(x.shape);
        maxpool2d_backward(proj, argmax, gx);
        verify::GradCheck gc;
        for (i64 i = 0; i < x.numel(); i += 2)
            gc.check_one("x" + std::to_string(i), f, &x.data[static_cast<size_t>(i)],
                         gx.data[static_cast<size_t>(i)]);
        CHECK(gc.result.pass(1e-4));
    }

    SUBCASE("upsample") {
        auto y0 = upsample2x_forward(x);
        proj = Tensor4d(y0.shape);
        proj.fill_uniform(rng, -1.0, 1.0);
        auto f = [&]() {
            auto y = upsample2x_forward(x);
            double s = 0.0;
            for (i64 i = 0; i < y.numel(); ++i)
                s += y.data[static_cast<size_t>(i)] * proj.data[static_cast<size_t>(i)];
            return s;
        };
        Tensor4d gx(x.shape);
        upsample2x_backward(proj, gx);
        verify::GradCheck gc;
        for (i64 i = 0; i < x.numel(); i += 3)
            gc.check_one("x" + std::to_string(i), f, &x.data[static_cast<size_t>(i)],
                         gx.data[static_cast<size_t>(i)]);
        CHECK(gc.result.pass(1e-4));
    }
}
