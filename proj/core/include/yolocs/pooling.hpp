#pragma once

#include "yolocs/parallel.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

struct PoolSpec {
    i64 kernel = 5, stride = 1, pad = 2;
};

inline Shape4 pool_out_shape(const PoolSpec& p, const Shape4& in) {
    return {in.n, in.c, (in.h + 2 * p.pad - p.kernel) / p.stride + 1,
            (in.w + 2 * p.pad - p.kernel) / p.stride + 1};
}

// Max pooling over zero-padded windows; padded positions are never selected.
// Ties resolve to the first maximum in row-major window order, which pins the
// backward scatter target. argmax holds flat input indices.
template <typename T>
Tensor4<T> maxpool2d_forward(const Tensor4<T>& x, const PoolSpec& p, std::vector<i64>& argmax) {
    const Shape4 os = pool_out_shape(p, x.shape);
    require(os.h >= 1 && os.w >= 1, "maxpool: empty output");
    Tensor4<T> y(os);
    argmax.assign(static_cast<size_t>(os.numel()), -1);
    const i64 H = x.shape.h, W = x.shape.w;

    parallel_for(os.n * os.c * os.h, [&](i64 r0, i64 r1) {
        for (i64 r = r0; r < r1; ++r) {
            const i64 oy = r % os.h;
            const i64 c = (r / os.h) % os.c;
            const i64 n = r / (os.h * os.c);
            for (i64 ox = 0; ox < os.w; ++ox) {
                T best = T(0);
                i64 best_idx = -1;
                for (i64 ky = 0; ky < p.kernel; ++ky) {
                    const i64 iy = oy * p.stride - p.pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (i64 kx = 0; kx < p.kernel; ++kx) {
                        const i64 ix = ox * p.stride - p.pad + kx;
                        if (ix < 0 || ix >= W) continue;
                        const T v = x.at(n, c, iy, ix);
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = x.idx(n, c, iy, ix);
                        }
                    }
                }
                require(best_idx >= 0, "maxpool: window has no valid tap");
                y.at(n, c, oy, ox) = best;
                argmax[static_cast<size_t>(y.idx(n, c, oy, ox))] = best_idx;
            }
        }
    });
    return y;
}

template <typename T>
void maxpool2d_backward(const Tensor4<T>& gy, const std::vector<i64>& argmax, Tensor4<T>& gx) {
    require(argmax.size() == static_cast<size_t>(gy.numel()), "maxpool backward: cache mismatch");
    // Sequential scatter: overlapping windows may route several outputs to the
    // same input element.
    for (size_t i = 0; i < argmax.size(); ++i) gx.data[static_cast<size_t>(argmax[i])] += gy.data[i];
}

// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor4<T> upsample2x_forward(const Tensor4<T>& x) {
    Tensor4<T> y({x.shape.n, x.shape.c, x.shape.h * 2, x.shape.w * 2});
    parallel_for(x.shape.n * x.shape.c * x.shape.h, [&](i64 r0, i64 r1) {
        for (i64 r = r0; r < r1; ++r) {
            const i64 h = r % x.shape.h;
            const i64 c = (r / x.shape.h) % x.shape.c;
            const i64 n = r / (x.shape.h * x.shape.c);
            for (i64 w = 0; w < x.shape.w; ++w) {
                const T v = x.at(n, c, h, w);
                y.at(n, c, 2 * h, 2 * w) = v;
                y.at(n, c, 2 * h, 2 * w + 1) = v;
                y.at(n, c, 2 * h + 1, 2 * w) = v;
                y.at(n, c, 2 * h + 1, 2 * w + 1) = v;
            }
        }
    });
    return y;
}

template <typename T>
void upsample2x_backward(const Tensor4<T>& gy, Tensor4<T>& gx) {
    require(gy.shape.h == gx.shape.h * 2 && gy.shape.w == gx.shape.w * 2,
            "upsample backward: shape mismatch");
    parallel_for(gx.shape.n * gx.shape.c * gx.shape.h, [&](i64 r0, i64 r1) {
        for (i64 r = r0; r < r1; ++r) {
            const i64 h = r % gx.shape.h;
            const i64 c = (r / gx.shape.h) % gx.shape.c;
            const i64 n = r / (gx.shape.h * gx.shape.c);
            for (i64 w = 0; w < gx.shape.w; ++w)
                gx.at(n, c, h, w) += gy.at(n, c, 2 * h, 2 * w) + gy.at(n, c, 2 * h, 2 * w + 1) +
                                     gy.at(n, c, 2 * h + 1, 2 * w) +
                                     gy.at(n, c, 2 * h + 1, 2 * w + 1);
        }
    });
}

}  // namespace yolocs
