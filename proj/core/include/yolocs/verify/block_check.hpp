#pragma once

// Block-level gradient checking: randomize a block's parameters, project its
// outputs onto a fixed random direction, and compare analytic gradients of
// every parameter and input element against central differences.

#include <random>
#include <string>
#include <vector>

#include "yolocs/blocks.hpp"
#include "yolocs/verify/finite_diff.hpp"

namespace yolocs::verify {

template <typename T>
inline void randomize_params(std::vector<ParamView<T>>& views, std::mt19937& rng) {
    const double scale = 1.0 / 4294967296.0;
    for (auto& v : views)
        for (i64 i = 0; i < v.count; ++i) {
            double u = static_cast<double>(rng()) * scale;
            // keep BN scales away from zero so normalized paths stay well-conditioned
            if (v.kind == ParamKind::bn_gamma)
                v.data[i] = static_cast<T>(0.75 + 0.5 * u);
            else
                v.data[i] = static_cast<T>(-0.5 + u);
        }
}

template <typename T>
inline const ParamView<T>& find_view(const std::vector<ParamView<T>>& views,
                                     const std::string& name) {
    for (const auto& v : views)
        if (v.name == name) return v;
    fail("no parameter named " + name);
}

template <typename T>
inline std::vector<T> view_copy(const std::vector<ParamView<T>>& views, const std::string& name) {
    const ParamView<T>& v = find_view(views, name);
    return std::vector<T>(v.data, v.data + v.count);
}

inline double dot(const Tensor4d& a, const Tensor4d& b) {
    double s = 0.0;
    for (i64 i = 0; i < a.numel(); ++i)
        s += a.data[static_cast<size_t>(i)] * b.data[static_cast<size_t>(i)];
    return s;
}

// param_stride/input_stride subsample large arrays to keep runtime bounded.
inline GradCheckResult check_block_gradients(Block<double>& block, std::vector<Tensor4d> inputs,
                                             unsigned seed, i64 param_stride = 1,
                                             i64 input_stride = 7, bool training = true) {
    std::mt19937 rng(seed);
    std::vector<ParamView<double>> views;
    block.collect("p", views);
    randomize_params(views, rng);
    for (auto& v : views)
        for (i64 i = 0; i < v.count; ++i) v.grad[i] = 0.0;

    std::vector<const Tensor4d*> in_ptrs;
    std::vector<Shape4> in_shapes;
    for (auto& t : inputs) {
        in_ptrs.push_back(&t);
        in_shapes.push_back(t.shape);
    }
    std::vector<Tensor4d> projs;
    for (const Shape4& s : block.out_shapes(in_shapes)) {
        Tensor4d p(s);
        p.fill_uniform(rng, -1.0, 1.0);
        projs.push_back(std::move(p));
    }

    auto f = [&]() {
        auto outs = block.forward(in_ptrs, training, false);
        double s = 0.0;
        for (size_t k = 0; k < outs.size(); ++k) s += dot(outs[k], projs[k]);
        return s;
    };

    block.forward(in_ptrs, training, true);
    std::vector<Tensor4d> gins;
    std::vector<Tensor4d*> gin_ptrs;
    gins.reserve(inputs.size());
    for (auto& t : inputs) gins.emplace_back(t.shape);
    for (auto& g : gins) gin_ptrs.push_back(&g);
    block.backward(projs, gin_ptrs);

    GradCheck gc;
    for (auto& v : views)
        for (i64 i = 0; i < v.count; i += param_stride)
            gc.check_one(v.name + "[" + std::to_string(i) + "]", f, &v.data[i], v.grad[i]);
    for (size_t k = 0; k < inputs.size(); ++k)
        for (i64 i = 0; i < inputs[k].numel(); i += input_stride)
            gc.check_one("input" + std::to_string(k) + "[" + std::to_string(i) + "]", f,
                         &inputs[k].data[static_cast<size_t>(i)],
                         gins[k].data[static_cast<size_t>(i)]);
    return gc.result;
}

}  // namespace yolocs::verify
