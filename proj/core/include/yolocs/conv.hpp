#pragma once

#include "yolocs/parallel.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

// 2-D convolution geometry. Weight layout is [out_ch][in_ch][k][k] row-major;
// padding is zero-fill. Kernels inside CBS blocks carry no bias (the following
// BN subsumes it); detection-head prediction convs do.
struct ConvSpec {
    i64 in_ch = 0, out_ch = 0;
    i64 kernel = 1, stride = 1, pad = 0;
    bool has_bias = false;

    i64 weight_count() const { return kernel * kernel * in_ch * out_ch; }
    i64 bias_count() const { return has_bias ? out_ch : 0; }
};

inline i64 conv_out_dim(i64 in, i64 k, i64 s, i64 p) {
    i64 out = (in + 2 * p - k) / s + 1;
    require(out >= 1, "conv: output dim < 1");
    return out;
}

inline Shape4 conv_out_shape(const ConvSpec& spec, const Shape4& in) {
    require(in.c == spec.in_ch, "conv: channel mismatch, got " + in.str());
    return {in.n, spec.out_ch, conv_out_dim(in.h, spec.kernel, spec.stride, spec.pad),
            conv_out_dim(in.w, spec.kernel, spec.stride, spec.pad)};
}

// Accumulation-order contract: each output element is the sum of its taps in
// (in_ch, ky, kx) lexicographic order, bias added last, out-of-bounds taps
// skipped. The reference oracle follows the same sequence, so the two paths
// must agree bit for bit. The parallel split is over whole output elements
// and never changes any per-element order.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                          const std::vector<T>& b) {
    require(static_cast<i64>(w.size()) == spec.weight_count(), "conv: weight size mismatch");
    require(static_cast<i64>(b.size()) == spec.bias_count(), "conv: bias size mismatch");
    const Shape4 os = conv_out_shape(spec, x.shape);
    Tensor4<T> y(os);
    const i64 K = spec.kernel, S = spec.stride, P = spec.pad;
    const i64 Cin = spec.in_ch, H = x.shape.h, W = x.shape.w;

    parallel_for(os.n * os.c * os.h, [&](i64 r0, i64 r1) {
        for (i64 r = r0; r < r1; ++r) {
            const i64 oy = r % os.h;
            const i64 oc = (r / os.h) % os.c;
            const i64 n = r / (os.h * os.c);
            for (i64 ox = 0; ox < os.w; ++ox) {
                T acc = T(0);
                for (i64 ic = 0; ic < Cin; ++ic) {
                    for (i64 ky = 0; ky < K; ++ky) {
                        const i64 iy = oy * S - P + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (i64 kx = 0; kx < K; ++kx) {
                            const i64 ix = ox * S - P + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += x.at(n, ic, iy, ix) * w[((oc * Cin + ic) * K + ky) * K + kx];
                        }
                    }
                }
                if (spec.has_bias) acc += b[oc];
                y.at(n, oc, oy, ox) = acc;
            }
        }
    });
    return y;
}

// Gradients accumulate (+=) into caller-owned buffers.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                     const Tensor4<T>& gy, Tensor4<T>& gx, std::vector<T>& gw,
                     std::vector<T>& gb) {
    const Shape4 os = conv_out_shape(spec, x.shape);
    require(gy.shape == os, "conv backward: grad shape mismatch");
    require(gx.shape == x.shape, "conv backward: gx shape mismatch");
    require(static_cast<i64>(gw.size()) == spec.weight_count(), "conv backward: gw size");
    require(static_cast<i64>(gb.size()) == spec.bias_count(), "conv backward: gb size");
    const i64 K = spec.kernel, S = spec.stride, P = spec.pad;
    const i64 Cin = spec.in_ch, H = x.shape.h, W = x.shape.w;

    // d/d input: gather over output positions that read each input element.
    parallel_for(x.shape.n * Cin * H, [&](i64 r0, i64 r1) {
        for (i64 r = r0; r < r1; ++r) {
            const i64 iy = r % H;
            const i64 ic = (r / H) % Cin;
            const i64 n = r / (H * Cin);
            for (i64 ix = 0; ix < W; ++ix) {
                T acc = T(0);
                for (i64 oc = 0; oc < os.c; ++oc) {
                    for (i64 ky = 0; ky < K; ++ky) {
                        const i64 num_y = iy + P - ky;
                        if (num_y < 0 || num_y % S != 0) continue;
                        const i64 oy = num_y / S;
                        if (oy >= os.h) continue;
                        for (i64 kx = 0; kx < K; ++kx) {
                            const i64 num_x = ix + P - kx;
                            if (num_x < 0 || num_x % S != 0) continue;
                            const i64 ox = num_x / S;
                            if (ox >= os.w) continue;
                            acc += gy.at(n, oc, oy, ox) * w[((oc * Cin + ic) * K + ky) * K + kx];
                        }
                    }
                }
                gx.at(n, ic, iy, ix) += acc;
            }
        }
    });

    // d/d weight: one owner per weight entry keeps the scatter race-free.
    parallel_for(os.c * Cin, [&](i64 r0, i64 r1) {
        for (i64 r = r0; r < r1; ++r) {
            const i64 ic = r % Cin;
            const i64 oc = r / Cin;
            for (i64 ky = 0; ky < K; ++ky) {
                for (i64 kx = 0; kx < K; ++kx) {
                    T acc = T(0);
                    for (i64 n = 0; n < os.n; ++n) {
                        for (i64 oy = 0; oy < os.h; ++oy) {
                            const i64 iy = oy * S - P + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (i64 ox = 0; ox < os.w; ++ox) {
                                const i64 ix = ox * S - P + kx;
                                if (ix < 0 || ix >= W) continue;
                                acc += gy.at(n, oc, oy, ox) * x.at(n, ic, iy, ix);
                            }
                        }
                    }
                    gw[((oc * Cin + ic) * K + ky) * K + kx] += acc;
                }
            }
        }
    });

    if (spec.has_bias) {
        for (i64 oc = 0; oc < os.c; ++oc) {
            T acc = T(0);
            for (i64 n = 0; n < os.n; ++n)
                for (i64 oy = 0; oy < os.h; ++oy)
                    for (i64 ox = 0; ox < os.w; ++ox) acc += gy.at(n, oc, oy, ox);
            gb[static_cast<size_t>(oc)] += acc;
        }
    }
}

}  // namespace yolocs
