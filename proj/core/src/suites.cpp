#include "yolocs/verify/suites.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "yolocs/activations.hpp"
#include "yolocs/batchnorm.hpp"
#include "yolocs/blocks.hpp"
#include "yolocs/conv.hpp"
#include "yolocs/parallel.hpp"
#include "yolocs/pooling.hpp"
#include "yolocs/verify/block_check.hpp"
#include "yolocs/verify/receptive_field.hpp"
#include "yolocs/verify/reference.hpp"

namespace yolocs::verify {

namespace {

template <typename T>
Tensor4<T> random_tensor(Shape4 s, std::mt19937& rng) {
    Tensor4<T> t(s);
    t.fill_uniform(rng, static_cast<T>(-1), static_cast<T>(1));
    return t;
}

std::string fmt_count(int good, int total) {
    std::ostringstream os;
    os << good << "/" << total << " exact";
    return os.str();
}

SuiteCheck conv_fuzz(unsigned seed, int cases) {
    std::mt19937 rng(seed);
    int good = 0;
    std::string first_bad;
    for (int i = 0; i < cases; ++i) {
        ConvSpec spec;
        spec.kernel = std::vector<i64>{1, 3, 5}[rng() % 3];
        spec.stride = 1 + static_cast<i64>(rng() % 2);
        spec.pad = static_cast<i64>(rng() % (spec.kernel / 2 + 2));
        spec.in_ch = 1 + static_cast<i64>(rng() % 7);
        spec.out_ch = 1 + static_cast<i64>(rng() % 7);
        spec.has_bias = (rng() % 2) == 0;
        i64 n = 1 + static_cast<i64>(rng() % 2);
        i64 h = spec.kernel + static_cast<i64>(rng() % 11);
        i64 w = spec.kernel + static_cast<i64>(rng() % 11);
        Tensor4f x = random_tensor<float>({n, spec.in_ch, h, w}, rng);
        std::vector<float> wts(static_cast<size_t>(spec.out_ch * spec.in_ch * spec.kernel *
                                                   spec.kernel));
        for (auto& v : wts) v = -0.5f + static_cast<float>(rng()) / 4294967296.0f;
        std::vector<float> bias;
        if (spec.has_bias) {
            bias.resize(static_cast<size_t>(spec.out_ch));
            for (auto& v : bias) v = -0.5f + static_cast<float>(rng()) / 4294967296.0f;
        }
        Tensor4f got = conv2d_forward(x, spec, wts, bias);
        Tensor4f want = conv_reference(x, spec, wts, bias);
        bool same = got.data == want.data;
        if (same) {
            // identical accumulation order is required from the threaded path too
            int prev = num_threads();
            set_num_threads(4);
            Tensor4f par = conv2d_forward(x, spec, wts, bias);
            set_num_threads(prev);
            same = par.data == want.data;
        }
        if (same)
            ++good;
        else if (first_bad.empty()) {
            std::ostringstream os;
            os << "case " << i << " k=" << spec.kernel << " s=" << spec.stride
               << " p=" << spec.pad;
            first_bad = os.str();
        }
    }
    SuiteCheck c{"conv2d fuzz vs reference", good == cases, fmt_count(good, cases)};
    if (!first_bad.empty()) c.detail += " (first mismatch: " + first_bad + ")";
    return c;
}

SuiteCheck bn_eval_oracle() {
    Tensor4d x({1, 1, 1, 1});
    x.at(0, 0, 0, 0) = 2.0;
    BatchNorm<double> bn(1);
    bn.gamma[0] = 3.0;
    bn.beta[0] = -1.0;
    bn.running_mean[0] = 1.0;
    bn.running_var[0] = 4.0;
    BNCache<double> cache;
    Tensor4d y = batchnorm_forward(x, bn, false, cache);
    double got = y.at(0, 0, 0, 0);
    double want = 0.4998125351489273;
    bool ok = std::abs(got - want) < 1e-15;
    std::ostringstream os;
    os << "got " << got;
    return {"batchnorm eval oracle", ok, os.str()};
}

SuiteCheck bn_train_stats_oracle() {
    Tensor4d x({1, 1, 2, 2});
    x.data = {1.0, 2.0, 3.0, 4.0};
    BatchNorm<double> bn(1);
    BNCache<double> cache;
    batchnorm_forward(x, bn, true, cache);
    bool ok = std::abs(bn.running_mean[0] - 0.075) < 1e-15 &&
              std::abs(bn.running_var[0] - 1.02) < 1e-12;
    std::ostringstream os;
    os << "running mean " << bn.running_mean[0] << ", var " << bn.running_var[0];
    return {"batchnorm train running stats", ok, os.str()};
}

SuiteCheck silu_oracle() {
    Tensor4d x({1, 1, 1, 3});
    x.data = {1.0, -1.0, 0.0};
    Tensor4d y = silu_forward(x);
    bool ok = std::abs(y.data[0] - 0.7310585786300049) < 1e-15 &&
              std::abs(y.data[1] + 0.2689414213699951) < 1e-15 && y.data[2] == 0.0;
    return {"silu frozen values", ok, ok ? "3/3 exact" : "mismatch"};
}

SuiteCheck maxpool_oracle() {
    Tensor4d x({1, 1, 3, 3});
    x.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    PoolSpec p{3, 1, 1};
    std::vector<i64> argmax;
    Tensor4d y = maxpool2d_forward(x, p, argmax);
    std::vector<double> want_y = {5, 6, 6, 8, 9, 9, 8, 9, 9};
    Tensor4d gy(y.shape);
    gy.fill(1.0);
    Tensor4d gx({1, 1, 3, 3});
    maxpool2d_backward(gy, argmax, gx);
    std::vector<double> want_gx = {0, 0, 0, 0, 1, 2, 0, 2, 4};
    bool ok = y.data == want_y && gx.data == want_gx;
    return {"maxpool ramp oracle (fwd+bwd)", ok, ok ? "exact" : "mismatch"};
}

SuiteCheck upsample_oracle() {
    std::mt19937 rng(99);
    Tensor4f x = random_tensor<float>({1, 2, 3, 4}, rng);
    Tensor4f got = upsample2x_forward(x);
    Tensor4f want = upsample2x_reference(x);
    bool ok = got.data == want.data;
    return {"upsample nearest-neighbor oracle", ok, ok ? "exact" : "mismatch"};
}

SuiteCheck concat_round_trip() {
    std::mt19937 rng(7);
    Tensor4f a = random_tensor<float>({2, 3, 4, 4}, rng);
    Tensor4f b = random_tensor<float>({2, 5, 4, 4}, rng);
    Tensor4f cat = concat_channels<float>({&a, &b});
    Tensor4f ga({2, 3, 4, 4}), gb({2, 5, 4, 4});
    std::vector<Tensor4f*> parts{&ga, &gb};
    concat_backward(cat, parts);
    bool ok = ga.data == a.data && gb.data == b.data && cat.shape.c == 8;
    return {"concat split round trip", ok, ok ? "exact" : "mismatch"};
}

SuiteCheck grad_entry(const std::string& name, GradCheckResult res, double tol = 1e-4) {
    std::ostringstream os;
    os << "max rel err " << res.max_rel_err << " over " << res.checked << " slots";
    if (!res.pass(tol)) os << " (worst: " << res.worst_param << ")";
    return {name, res.pass(tol), os.str()};
}

Tensor4d rnd_d(Shape4 s, unsigned seed) {
    std::mt19937 rng(seed);
    return random_tensor<double>(s, rng);
}

// finite differences for the standalone primitives, mirroring the block path
GradCheckResult conv_primitive_fd() {
    std::mt19937 rng(50);
    ConvSpec spec{3, 4, 3, 1, 1, true};
    Tensor4d x = random_tensor<double>({1, 3, 5, 5}, rng);
    std::vector<double> w(static_cast<size_t>(4 * 3 * 9)), b(4);
    for (auto& v : w) v = -0.5 + static_cast<double>(rng()) / 4294967296.0;
    for (auto& v : b) v = -0.5 + static_cast<double>(rng()) / 4294967296.0;
    Tensor4d proj = random_tensor<double>(conv_out_shape(spec, x.shape), rng);
    auto f = [&]() { return dot(conv2d_forward(x, spec, w, b), proj); };
    Tensor4d gx(x.shape);
    std::vector<double> gw(w.size()), gb(b.size());
    conv2d_backward(x, spec, w, proj, gx, gw, gb);
    GradCheck gc;
    for (size_t i = 0; i < w.size(); i += 5)
        gc.check_one("w[" + std::to_string(i) + "]", f, &w[i], gw[i]);
    for (size_t i = 0; i < b.size(); ++i)
        gc.check_one("b[" + std::to_string(i) + "]", f, &b[i], gb[i]);
    for (i64 i = 0; i < x.numel(); i += 7)
        gc.check_one("x[" + std::to_string(i) + "]", f, &x.data[static_cast<size_t>(i)],
                     gx.data[static_cast<size_t>(i)]);
    return gc.result;
}

GradCheckResult bn_primitive_fd(bool training) {
    std::mt19937 rng(51);
    Tensor4d x = random_tensor<double>({2, 3, 4, 4}, rng);
    BatchNorm<double> bn(3);
    bn.gamma = {1.2, 0.8, -0.5};
    bn.beta = {0.1, -0.2, 0.3};
    Tensor4d proj = random_tensor<double>(x.shape, rng);
    auto f = [&]() {
        BatchNorm<double> local = bn;  // keep running stats untouched
        BNCache<double> cache;
        return dot(batchnorm_forward(x, local, training, cache), proj);
    };
    BatchNorm<double> work = bn;
    BNCache<double> cache;
    batchnorm_forward(x, work, training, cache);
    Tensor4d gx(x.shape);
    std::vector<double> ggamma(3), gbeta(3);
    batchnorm_backward(x, work, cache, proj, gx, ggamma, gbeta);
    GradCheck gc;
    for (size_t c = 0; c < 3; ++c) {
        gc.check_one("gamma[" + std::to_string(c) + "]", f, &bn.gamma[c], ggamma[c]);
        gc.check_one("beta[" + std::to_string(c) + "]", f, &bn.beta[c], gbeta[c]);
    }
    for (i64 i = 0; i < x.numel(); i += 5)
        gc.check_one("x[" + std::to_string(i) + "]", f, &x.data[static_cast<size_t>(i)],
                     gx.data[static_cast<size_t>(i)]);
    return gc.result;
}

GradCheckResult silu_primitive_fd() {
    Tensor4d x = rnd_d({1, 2, 4, 4}, 52);
    Tensor4d proj = rnd_d({1, 2, 4, 4}, 53);
    auto f = [&]() { return dot(silu_forward(x), proj); };
    silu_forward(x);
    Tensor4d gx(x.shape);
    silu_backward(x, proj, gx);
    GradCheck gc;
    for (i64 i = 0; i < x.numel(); ++i)
        gc.check_one("x[" + std::to_string(i) + "]", f, &x.data[static_cast<size_t>(i)],
                     gx.data[static_cast<size_t>(i)]);
    return gc.result;
}

GradCheckResult maxpool_primitive_fd() {
    Tensor4d x = rnd_d({1, 2, 6, 6}, 54);
    PoolSpec p{3, 2, 1};
    std::vector<i64> argmax;
    Tensor4d y0 = maxpool2d_forward(x, p, argmax);
    Tensor4d proj = rnd_d(y0.shape, 55);
    auto f = [&]() {
        std::vector<i64> am;
        return dot(maxpool2d_forward(x, p, am), proj);
    };
    Tensor4d gx(x.shape);
    maxpool2d_backward(proj, argmax, gx);
    GradCheck gc;
    for (i64 i = 0; i < x.numel(); i += 2)
        gc.check_one("x[" + std::to_string(i) + "]", f, &x.data[static_cast<size_t>(i)],
                     gx.data[static_cast<size_t>(i)]);
    return gc.result;
}

GradCheckResult upsample_primitive_fd() {
    Tensor4d x = rnd_d({1, 2, 3, 3}, 56);
    Tensor4d proj = rnd_d({1, 2, 6, 6}, 57);
    auto f = [&]() { return dot(upsample2x_forward(x), proj); };
    Tensor4d gx(x.shape);
    upsample2x_backward(proj, gx);
    GradCheck gc;
    for (i64 i = 0; i < x.numel(); ++i)
        gc.check_one("x[" + std::to_string(i) + "]", f, &x.data[static_cast<size_t>(i)],
                     gx.data[static_cast<size_t>(i)]);
    return gc.result;
}

}  // namespace

std::vector<SuiteCheck> kernel_suite(unsigned seed, int fuzz_cases) {
    std::vector<SuiteCheck> out;
    out.push_back(conv_fuzz(seed, fuzz_cases));
    out.push_back(bn_eval_oracle());
    out.push_back(bn_train_stats_oracle());
    out.push_back(silu_oracle());
    out.push_back(maxpool_oracle());
    out.push_back(upsample_oracle());
    out.push_back(concat_round_trip());
    return out;
}

std::vector<SuiteCheck> gradient_suite() {
    std::vector<SuiteCheck> out;
    out.push_back(grad_entry("conv2d finite differences", conv_primitive_fd()));
    out.push_back(grad_entry("batchnorm (train) finite differences", bn_primitive_fd(true)));
    out.push_back(grad_entry("batchnorm (eval) finite differences", bn_primitive_fd(false)));
    out.push_back(grad_entry("silu finite differences", silu_primitive_fd()));
    out.push_back(grad_entry("maxpool finite differences", maxpool_primitive_fd()));
    out.push_back(grad_entry("upsample finite differences", upsample_primitive_fd()));

    auto block = [&](const std::string& name, Block<double>& b, std::vector<Tensor4d> ins,
                     unsigned seed) {
        out.push_back(grad_entry(name, check_block_gradients(b, std::move(ins), seed)));
    };
    {
        CBSBlock<double> b(6, 8, 3, 2);
        block("cbs block", b, {rnd_d({1, 6, 6, 6}, 201)}, 61);
    }
    {
        BottleneckBlock<double> b(8, 8, true);
        block("bottleneck (residual)", b, {rnd_d({1, 8, 4, 4}, 202)}, 62);
    }
    {
        BottleneckBlock<double> b(8, 8, false);
        block("bottleneck (plain)", b, {rnd_d({1, 8, 4, 4}, 203)}, 63);
    }
    {
        C3Block<double> b(8, 8, 2, true);
        block("csp c3 block", b, {rnd_d({1, 8, 4, 4}, 204)}, 64);
    }
    {
        DCFSBlock<double> b(8, 8, 3, true, DcfsVariant::ocj);
        block("dcfs block (ocj)", b, {rnd_d({1, 8, 4, 4}, 205)}, 65);
    }
    {
        DCFSBlock<double> b(8, 8, 2, true, DcfsVariant::bn3x3);
        block("dcfs block (bn3x3)", b, {rnd_d({1, 8, 4, 4}, 206)}, 66);
    }
    {
        DCFSBlock<double> b(8, 8, 2, false, DcfsVariant::conv1x1);
        block("dcfs block (conv1x1)", b, {rnd_d({1, 8, 4, 4}, 207)}, 67);
    }
    {
        SPPFBlock<double> b(8, 8, 5);
        block("sppf block", b, {rnd_d({1, 8, 4, 4}, 208)}, 68);
    }
    {
        UpsampleBlock<double> b;
        block("upsample block", b, {rnd_d({1, 4, 3, 3}, 209)}, 69);
    }
    {
        ConcatBlock<double> b;
        block("concat block", b, {rnd_d({1, 3, 4, 4}, 210), rnd_d({1, 5, 4, 4}, 211)}, 70);
    }
    {
        HeadCoupledBlock<double> b({6, 8}, 2, 2);
        block("coupled head", b, {rnd_d({1, 6, 3, 3}, 212), rnd_d({1, 8, 2, 2}, 213)}, 71);
    }
    {
        HeadDHBlock<double> b({6, 8}, 2, 2, 8);
        block("decoupled head", b, {rnd_d({1, 6, 3, 3}, 214), rnd_d({1, 8, 2, 2}, 215)}, 72);
    }
    {
        HeadADHBlock<double> b({6, 8}, 2, 2, 8);
        block("asymmetric head", b, {rnd_d({1, 6, 3, 3}, 216), rnd_d({1, 8, 2, 2}, 217)}, 73);
    }
    return out;
}

std::vector<SuiteCheck> receptive_field_suite() {
    std::vector<SuiteCheck> out;
    std::mt19937 rng(80);
    {
        CBSBlock<double> blk(4, 8, 1, 1);
        std::vector<ParamView<double>> views;
        blk.collect("p", views);
        randomize_params(views, rng);
        Tensor4d x = random_tensor<double>({1, 4, 9, 9}, rng);
        auto fwd = forward_footprint(blk, x, 4, 5);
        auto bwd = backward_footprint(blk, x, 4, 5);
        bool ok = fwd == PositionSet{{4, 5}} && bwd == PositionSet{{4, 5}};
        std::ostringstream os;
        os << "forward touched " << fwd.size() << ", backward touched " << bwd.size();
        out.push_back({"1x1 footprint is a single position", ok, os.str()});
    }
    {
        CBSBlock<double> blk(4, 8, 3, 1);
        std::vector<ParamView<double>> views;
        blk.collect("p", views);
        randomize_params(views, rng);
        Tensor4d x = random_tensor<double>({1, 4, 9, 9}, rng);
        auto fwd = forward_footprint(blk, x, 4, 4);
        auto corner = forward_footprint(blk, x, 0, 0);
        auto bwd = backward_footprint(blk, x, 4, 4);
        bool ok = fwd == chebyshev_ball(4, 4, 1, 9, 9) && corner.size() == 4 &&
                  bwd == chebyshev_ball(4, 4, 1, 9, 9);
        std::ostringstream os;
        os << "interior " << fwd.size() << " positions, corner " << corner.size();
        out.push_back({"3x3 footprint is the clipped neighborhood", ok, os.str()});
    }
    {
        Tensor4d x = random_tensor<double>({1, 8, 13, 13}, rng);
        BottleneckBlock<double> single(8, 8, true);
        std::vector<ParamView<double>> sv;
        single.collect("p", sv);
        randomize_params(sv, rng);
        i64 r1 = footprint_radius(forward_footprint(single, x, 6, 6), 6, 6);
        DCFSBlock<double> stacked(8, 8, 3, true, DcfsVariant::ocj);
        std::vector<ParamView<double>> dv;
        stacked.collect("p", dv);
        randomize_params(dv, rng);
        i64 r3 = footprint_radius(forward_footprint(stacked, x, 6, 6), 6, 6);
        std::ostringstream os;
        os << "bottleneck radius " << r1 << ", stacked radius " << r3;
        out.push_back({"stacked units widen the receptive field", r3 > r1, os.str()});
    }
    return out;
}

}  // namespace yolocs::verify
