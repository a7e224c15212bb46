#pragma once

#include "yolocs/conv.hpp"
#include "yolocs/pooling.hpp"
#include "yolocs/tensor.hpp"

// Reference kernels for verification. Written as direct transliterations of
// the defining sums, independent of the production kernels in conv.hpp etc.
// conv_reference must match conv2d_forward bit for bit: both accumulate each
// output element over channels (outer) and the flattened kernel index
// (inner), skip out-of-bounds taps, and add the bias once at the end.

namespace yolocs::verify {

// Direct convolution with the kernel flattened to a single index k in
// [0, side*side): tap row = floor(k / side), tap col = k mod side, centred by
// floor(side / 2) for stride-1 same-padding layers and generalized to
// (out * stride - pad + tap) for everything else.
template <typename T>
Tensor4<T> conv_reference(const Tensor4<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                          const std::vector<T>& b) {
    const Shape4 os = conv_out_shape(spec, x.shape);
    Tensor4<T> y(os);
    const i64 side = spec.kernel;
    const i64 ks = side * side;
    for (i64 n = 0; n < os.n; ++n)
        for (i64 oc = 0; oc < os.c; ++oc)
            for (i64 oy = 0; oy < os.h; ++oy)
                for (i64 ox = 0; ox < os.w; ++ox) {
                    T acc = T(0);
                    for (i64 c = 0; c < spec.in_ch; ++c)
                        for (i64 k = 0; k < ks; ++k) {
                            const i64 iy = oy * spec.stride - spec.pad + k / side;
                            const i64 ix = ox * spec.stride - spec.pad + k % side;
                            if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w)
                                continue;  // zero padding contributes nothing
                            acc += x.at(n, c, iy, ix) * w[static_cast<size_t>((oc * spec.in_ch + c) * ks + k)];
                        }
                    if (spec.has_bias) acc += b[static_cast<size_t>(oc)];
                    y.at(n, oc, oy, ox) = acc;
                }
    return y;
}

// Per-channel normalization computed elementwise in double, whatever T is.
template <typename T>
Tensor4<T> batchnorm_reference(const Tensor4<T>& x, const std::vector<T>& gamma,
                               const std::vector<T>& beta, const std::vector<T>& mean,
                               const std::vector<T>& var, double eps) {
    Tensor4<T> y(x.shape);
    for (i64 n = 0; n < x.shape.n; ++n)
        for (i64 c = 0; c < x.shape.c; ++c) {
            const size_t ci = static_cast<size_t>(c);
            for (i64 h = 0; h < x.shape.h; ++h)
                for (i64 w = 0; w < x.shape.w; ++w) {
                    const double xhat = (static_cast<double>(x.at(n, c, h, w)) -
                                         static_cast<double>(mean[ci])) /
                                        std::sqrt(static_cast<double>(var[ci]) + eps);
                    y.at(n, c, h, w) = static_cast<T>(static_cast<double>(gamma[ci]) * xhat +
                                                      static_cast<double>(beta[ci]));
                }
        }
    return y;
}

// Training-mode batch stats, accumulated in double.
template <typename T>
void batch_stats_reference(const Tensor4<T>& x, std::vector<T>& mean, std::vector<T>& var) {
    const i64 per_channel = x.shape.n * x.shape.h * x.shape.w;
    mean.assign(static_cast<size_t>(x.shape.c), T(0));
    var.assign(static_cast<size_t>(x.shape.c), T(0));
    for (i64 c = 0; c < x.shape.c; ++c) {
        double sum = 0.0;
        for (i64 n = 0; n < x.shape.n; ++n)
            for (i64 h = 0; h < x.shape.h; ++h)
                for (i64 w = 0; w < x.shape.w; ++w) sum += static_cast<double>(x.at(n, c, h, w));
        const double m = sum / static_cast<double>(per_channel);
        double sq = 0.0;
        for (i64 n = 0; n < x.shape.n; ++n)
            for (i64 h = 0; h < x.shape.h; ++h)
                for (i64 w = 0; w < x.shape.w; ++w) {
                    const double d = static_cast<double>(x.at(n, c, h, w)) - m;
                    sq += d * d;
                }
        mean[static_cast<size_t>(c)] = static_cast<T>(m);
        var[static_cast<size_t>(c)] = static_cast<T>(sq / static_cast<double>(per_channel));
    }
}

template <typename T>
Tensor4<T> maxpool_reference(const Tensor4<T>& x, const PoolSpec& p) {
    const Shape4 os = pool_out_shape(p, x.shape);
    Tensor4<T> y(os);
    for (i64 n = 0; n < os.n; ++n)
        for (i64 c = 0; c < os.c; ++c)
            for (i64 oy = 0; oy < os.h; ++oy)
                for (i64 ox = 0; ox < os.w; ++ox) {
                    bool seen = false;
                    T best = T(0);
                    for (i64 ky = 0; ky < p.kernel; ++ky)
                        for (i64 kx = 0; kx < p.kernel; ++kx) {
                            const i64 iy = oy * p.stride - p.pad + ky;
                            const i64 ix = ox * p.stride - p.pad + kx;
                            if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w) continue;
                            const T v = x.at(n, c, iy, ix);
                            if (!seen || v > best) {
                                best = v;
                                seen = true;
                            }
                        }
                    y.at(n, c, oy, ox) = best;
                }
    return y;
}

template <typename T>
Tensor4<T> upsample2x_reference(const Tensor4<T>& x) {
    Tensor4<T> y({x.shape.n, x.shape.c, 2 * x.shape.h, 2 * x.shape.w});
    for (i64 n = 0; n < y.shape.n; ++n)
        for (i64 c = 0; c < y.shape.c; ++c)
            for (i64 h = 0; h < y.shape.h; ++h)
                for (i64 w = 0; w < y.shape.w; ++w) y.at(n, c, h, w) = x.at(n, c, h / 2, w / 2);
    return y;
}

template <typename T>
Tensor4<T> silu_reference(const Tensor4<T>& x) {
    Tensor4<T> y(x.shape);
    for (i64 i = 0; i < x.numel(); ++i) {
        const double v = static_cast<double>(x.data[static_cast<size_t>(i)]);
        y.data[static_cast<size_t>(i)] = static_cast<T>(v / (1.0 + std::exp(-v)));
    }
    return y;
}

}  // namespace yolocs::verify
