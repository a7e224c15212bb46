#pragma once

#include "yolocs/parallel.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

// Per-channel batch normalization. gamma/beta are learnable; running stats are
// buffers updated only by training-mode forward (training steps are externally
// serialized). eps/momentum follow the detector convention.
template <typename T>
struct BatchNorm {
    i64 channels = 0;
    T eps = static_cast<T>(1e-3);
    T momentum = static_cast<T>(0.03);
    std::vector<T> gamma, beta;
    std::vector<T> running_mean, running_var;

    explicit BatchNorm(i64 c = 0)
        : channels(c),
          gamma(static_cast<size_t>(c), T(1)),
          beta(static_cast<size_t>(c), T(0)),
          running_mean(static_cast<size_t>(c), T(0)),
          running_var(static_cast<size_t>(c), T(1)) {}
};

template <typename T>
struct BNCache {
    std::vector<T> mean, inv_std;  // stats used by the forward pass
    bool training = false;
};

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, BatchNorm<T>& bn, bool training,
                             BNCache<T>& cache) {
    require(x.shape.c == bn.channels, "batchnorm: channel mismatch");
    const i64 C = bn.channels;
    const i64 per_channel = x.shape.n * x.shape.h * x.shape.w;
    require(per_channel >= 1, "batchnorm: empty input");
    Tensor4<T> y(x.shape);
    cache.mean.assign(static_cast<size_t>(C), T(0));
    cache.inv_std.assign(static_cast<size_t>(C), T(0));
    cache.training = training;

    std::vector<T> batch_var(training ? static_cast<size_t>(C) : 0, T(0));

    parallel_for(C, [&](i64 c0, i64 c1) {
        for (i64 c = c0; c < c1; ++c) {
            T mean, var;
            if (training) {
                // Two-pass batch stats in a fixed (n,h,w) order.
                T sum = T(0);
                for (i64 n = 0; n < x.shape.n; ++n)
                    for (i64 h = 0; h < x.shape.h; ++h)
                        for (i64 w = 0; w < x.shape.w; ++w) sum += x.at(n, c, h, w);
                mean = sum / static_cast<T>(per_channel);
                T sq = T(0);
                for (i64 n = 0; n < x.shape.n; ++n)
                    for (i64 h = 0; h < x.shape.h; ++h)
                        for (i64 w = 0; w < x.shape.w; ++w) {
                            const T d = x.at(n, c, h, w) - mean;
                            sq += d * d;
                        }
                var = sq / static_cast<T>(per_channel);
                batch_var[static_cast<size_t>(c)] = var;
            } else {
                mean = bn.running_mean[static_cast<size_t>(c)];
                var = bn.running_var[static_cast<size_t>(c)];
            }
            const T inv_std = T(1) / std::sqrt(var + bn.eps);
            cache.mean[static_cast<size_t>(c)] = mean;
            cache.inv_std[static_cast<size_t>(c)] = inv_std;
            const T g = bn.gamma[static_cast<size_t>(c)];
            const T b = bn.beta[static_cast<size_t>(c)];
            for (i64 n = 0; n < x.shape.n; ++n)
                for (i64 h = 0; h < x.shape.h; ++h)
                    for (i64 w = 0; w < x.shape.w; ++w)
                        y.at(n, c, h, w) = g * (x.at(n, c, h, w) - mean) * inv_std + b;
        }
    });

    if (training) {
        // Running variance uses the unbiased estimate when defined.
        const T m = bn.momentum;
        for (i64 c = 0; c < C; ++c) {
            const size_t ci = static_cast<size_t>(c);
            T rvar = batch_var[ci];
            if (per_channel > 1)
                rvar = rvar * static_cast<T>(per_channel) / static_cast<T>(per_channel - 1);
            bn.running_mean[ci] = (T(1) - m) * bn.running_mean[ci] + m * cache.mean[ci];
            bn.running_var[ci] = (T(1) - m) * bn.running_var[ci] + m * rvar;
        }
    }
    return y;
}

template <typename T>
void batchnorm_backward(const Tensor4<T>& x, const BatchNorm<T>& bn, const BNCache<T>& cache,
                        const Tensor4<T>& gy, Tensor4<T>& gx, std::vector<T>& ggamma,
                        std::vector<T>& gbeta) {
    require(gy.shape == x.shape && gx.shape == x.shape, "batchnorm backward: shape mismatch");
    const i64 C = bn.channels;
    const T N = static_cast<T>(x.shape.n * x.shape.h * x.shape.w);

    parallel_for(C, [&](i64 c0, i64 c1) {
        for (i64 c = c0; c < c1; ++c) {
            const size_t ci = static_cast<size_t>(c);
            const T mean = cache.mean[ci];
            const T inv_std = cache.inv_std[ci];
            const T g = bn.gamma[ci];
            T sum_gy = T(0), sum_gy_xhat = T(0);
            for (i64 n = 0; n < x.shape.n; ++n)
                for (i64 h = 0; h < x.shape.h; ++h)
                    for (i64 w = 0; w < x.shape.w; ++w) {
                        const T xhat = (x.at(n, c, h, w) - mean) * inv_std;
                        const T go = gy.at(n, c, h, w);
                        sum_gy += go;
                        sum_gy_xhat += go * xhat;
                    }
            ggamma[ci] += sum_gy_xhat;
            gbeta[ci] += sum_gy;
            if (cache.training) {
                // Batch stats depend on x: full normalization backward.
                for (i64 n = 0; n < x.shape.n; ++n)
                    for (i64 h = 0; h < x.shape.h; ++h)
                        for (i64 w = 0; w < x.shape.w; ++w) {
                            const T xhat = (x.at(n, c, h, w) - mean) * inv_std;
                            const T go = gy.at(n, c, h, w);
                            gx.at(n, c, h, w) +=
                                g * inv_std * (go - sum_gy / N - xhat * sum_gy_xhat / N);
                        }
            } else {
                for (i64 n = 0; n < x.shape.n; ++n)
                    for (i64 h = 0; h < x.shape.h; ++h)
                        for (i64 w = 0; w < x.shape.w; ++w)
                            gx.at(n, c, h, w) += g * inv_std * gy.at(n, c, h, w);
            }
        }
    });
}

}  // namespace yolocs
