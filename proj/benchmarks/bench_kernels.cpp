#include <benchmark/benchmark.h>

#include <random>

#include "yolocs/blocks.hpp"
#include "yolocs/conv.hpp"
#include "yolocs/graph.hpp"
#include "yolocs/parallel.hpp"

using namespace yolocs;

namespace {

Tensor4f random_input(Shape4 s, unsigned seed) {
    std::mt19937 rng(seed);
    Tensor4f x(s);
    x.fill_uniform(rng, -1.0f, 1.0f);
    return x;
}

void bm_conv3x3_forward(benchmark::State& state) {
    set_num_threads(static_cast<int>(state.range(0)));
    ConvSpec spec{64, 64, 3, 1, 1, false};
    std::mt19937 rng(1);
    std::vector<float> w(static_cast<size_t>(spec.weight_count()));
    for (auto& v : w) v = static_cast<float>(rng()) * 2.3e-10f - 0.5f;
    Tensor4f x = random_input({1, 64, 80, 80}, 2);
    std::vector<float> b;
    for (auto _ : state) {
        Tensor4f y = conv2d_forward(x, spec, w, b);
        benchmark::DoNotOptimize(y.data.data());
    }
    Shape4 o = conv_out_shape(spec, x.shape);
    state.SetItemsProcessed(state.iterations() * 2 * spec.kernel * spec.kernel * spec.in_ch *
                            spec.out_ch * o.h * o.w);
    set_num_threads(1);
}

void bm_conv3x3_backward(benchmark::State& state) {
    set_num_threads(static_cast<int>(state.range(0)));
    ConvSpec spec{64, 64, 3, 1, 1, false};
    std::mt19937 rng(1);
    std::vector<float> w(static_cast<size_t>(spec.weight_count()));
    for (auto& v : w) v = static_cast<float>(rng()) * 2.3e-10f - 0.5f;
    Tensor4f x = random_input({1, 64, 80, 80}, 2);
    Tensor4f gy = random_input(conv_out_shape(spec, x.shape), 3);
    std::vector<float> gw(w.size()), gb;
    for (auto _ : state) {
        Tensor4f gx(x.shape);
        std::fill(gw.begin(), gw.end(), 0.0f);
        conv2d_backward(x, spec, w, gy, gx, gw, gb);
        benchmark::DoNotOptimize(gx.data.data());
    }
    set_num_threads(1);
}

void bm_dcfs_forward(benchmark::State& state) {
    set_num_threads(static_cast<int>(state.range(0)));
    DCFSBlock<float> block(128, 128, 3, true, DcfsVariant::ocj);
    std::vector<ParamView<float>> views;
    block.collect("dcfs", views);
    std::mt19937 rng(7);
    for (auto& v : views)
        for (i64 i = 0; i < v.count; ++i)
            v.data[i] = static_cast<float>(rng()) * 4.7e-10f - 1.0f;
    Tensor4f x = random_input({1, 128, 40, 40}, 4);
    for (auto _ : state) {
        auto y = block.forward({&x}, false, false);
        benchmark::DoNotOptimize(y[0].data.data());
    }
    set_num_threads(1);
}

const char* kMicroConfig = R"(nc: 2
depth_multiple: 1.0
width_multiple: 1.0
anchors: 8,8, 16,16 ; 24,24, 48,48 ; 64,64, 88,88
backbone:
[-1, 1, CBS, [8, 3, 2]]
[-1, 1, CBS, [16, 3, 2]]
[-1, 1, DCFS, [16, true, ocj]]
[-1, 1, CBS, [24, 3, 2]]
[-1, 1, CSP_C3, [24, true]]
[-1, 1, CBS, [32, 3, 2]]
[-1, 1, CSP_C3, [32, true]]
[-1, 1, CBS, [48, 3, 2]]
[-1, 1, SPPF, [48, 5]]
head:
[[4, 6, 8], 1, HeadADH, [16]]
)";

void bm_micro_graph_forward(benchmark::State& state) {
    set_num_threads(static_cast<int>(state.range(0)));
    Graph<float> g(parse_config(kMicroConfig, "micro"));
    g.init_params(11);
    Tensor4f x = random_input({1, 3, 96, 96}, 5);
    for (auto _ : state) {
        auto outs = g.forward(x, false, false);
        benchmark::DoNotOptimize(outs[0].data.data());
    }
    set_num_threads(1);
}

}  // namespace

BENCHMARK(bm_conv3x3_forward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv3x3_backward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_dcfs_forward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_micro_graph_forward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
