#pragma once

#include "yolocs/parallel.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

// Channel concatenation of same-resolution tensors, in input order.
template <typename T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& xs) {
    require(!xs.empty(), "concat: no inputs");
    i64 c_total = 0;
    for (const auto* x : xs) {
        require(x->shape.n == xs[0]->shape.n && x->shape.h == xs[0]->shape.h &&
                    x->shape.w == xs[0]->shape.w,
                "concat: mismatched shapes");
        c_total += x->shape.c;
    }
    Tensor4<T> y({xs[0]->shape.n, c_total, xs[0]->shape.h, xs[0]->shape.w});
    i64 c_off = 0;
    for (const auto* x : xs) {
        parallel_for(x->shape.n * x->shape.c, [&](i64 r0, i64 r1) {
            for (i64 r = r0; r < r1; ++r) {
                const i64 c = r % x->shape.c;
                const i64 n = r / x->shape.c;
                for (i64 h = 0; h < x->shape.h; ++h)
                    for (i64 w = 0; w < x->shape.w; ++w)
                        y.at(n, c_off + c, h, w) = x->at(n, c, h, w);
            }
        });
        c_off += x->shape.c;
    }
    return y;
}

// Splits the concat gradient back into per-input slices (accumulating).
template <typename T>
void concat_backward(const Tensor4<T>& gy, const std::vector<Tensor4<T>*>& gxs) {
    i64 c_off = 0;
    for (auto* gx : gxs) {
        parallel_for(gx->shape.n * gx->shape.c, [&](i64 r0, i64 r1) {
            for (i64 r = r0; r < r1; ++r) {
                const i64 c = r % gx->shape.c;
                const i64 n = r / gx->shape.c;
                for (i64 h = 0; h < gx->shape.h; ++h)
                    for (i64 w = 0; w < gx->shape.w; ++w)
                        gx->at(n, c, h, w) += gy.at(n, c_off + c, h, w);
            }
        });
        c_off += gx->shape.c;
    }
    require(c_off == gy.shape.c, "concat backward: channel mismatch");
}

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
    require(a.shape == b.shape, "add: shape mismatch");
    Tensor4<T> y(a.shape);
    parallel_for(a.numel(), [&](i64 i0, i64 i1) {
        for (i64 i = i0; i < i1; ++i)
            y.data[static_cast<size_t>(i)] =
                a.data[static_cast<size_t>(i)] + b.data[static_cast<size_t>(i)];
    });
    return y;
}

}  // namespace yolocs
