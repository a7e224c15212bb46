#pragma once

#include "yolocs/parallel.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// silu(x) = x * sigmoid(x)
template <typename T>
Tensor4<T> silu_forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.shape);
    parallel_for(x.numel(), [&](i64 i0, i64 i1) {
        for (i64 i = i0; i < i1; ++i) {
            const T v = x.data[static_cast<size_t>(i)];
            y.data[static_cast<size_t>(i)] = v * sigmoid(v);
        }
    });
    return y;
}

// d silu = sigmoid(x) * (1 + x * (1 - sigmoid(x)))
template <typename T>
void silu_backward(const Tensor4<T>& x, const Tensor4<T>& gy, Tensor4<T>& gx) {
    require(gy.shape == x.shape && gx.shape == x.shape, "silu backward: shape mismatch");
    parallel_for(x.numel(), [&](i64 i0, i64 i1) {
        for (i64 i = i0; i < i1; ++i) {
            const T v = x.data[static_cast<size_t>(i)];
            const T s = sigmoid(v);
            gx.data[static_cast<size_t>(i)] +=
                gy.data[static_cast<size_t>(i)] * s * (T(1) + v * (T(1) - s));
        }
    });
}

}  // namespace yolocs
