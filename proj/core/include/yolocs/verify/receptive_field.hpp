#pragma once

// Empirical receptive-field probes: perturb one input pixel, run a forward
// pass, and record which output positions move. The dual probe pushes a unit
// gradient through one output position and records which input pixels receive
// gradient mass.

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "yolocs/blocks.hpp"

namespace yolocs::verify {

using PositionSet = std::set<std::pair<i64, i64>>;

// Output (h, w) positions where any channel changed by more than
// eps * 1e-3 after adding eps to input channel 0 at (h0, w0).
template <typename T>
inline PositionSet forward_footprint(Block<T>& block, const Tensor4<T>& x, i64 h0, i64 w0,
                                     double eps = 1.0) {
    Tensor4<T> base = block.forward({&x}, false, false).at(0);
    Tensor4<T> bumped = x;
    bumped.at(0, 0, h0, w0) += static_cast<T>(eps);
    Tensor4<T> moved = block.forward({&bumped}, false, false).at(0);
    const double threshold = eps * 1e-3;
    PositionSet out;
    Shape4 s = base.shape;
    for (i64 c = 0; c < s.c; ++c)
        for (i64 h = 0; h < s.h; ++h)
            for (i64 w = 0; w < s.w; ++w)
                if (std::abs(static_cast<double>(moved.at(0, c, h, w) - base.at(0, c, h, w))) >
                    threshold)
                    out.insert({h, w});
    return out;
}

// Input (h, w) positions receiving gradient after seeding a unit gradient at
// one output position (all channels).
template <typename T>
inline PositionSet backward_footprint(Block<T>& block, const Tensor4<T>& x, i64 h0, i64 w0,
                                      double eps = 1.0) {
    std::vector<const Tensor4<T>*> ins{&x};
    auto outs = block.forward(ins, false, true);
    Tensor4<T> gy(outs.at(0).shape);
    for (i64 c = 0; c < gy.shape.c; ++c) gy.at(0, c, h0, w0) = static_cast<T>(1.0);
    Tensor4<T> gx(x.shape);
    std::vector<Tensor4<T>*> gins{&gx};
    block.backward({gy}, gins);
    const double threshold = eps * 1e-3;
    PositionSet out;
    Shape4 s = gx.shape;
    for (i64 c = 0; c < s.c; ++c)
        for (i64 h = 0; h < s.h; ++h)
            for (i64 w = 0; w < s.w; ++w)
                if (std::abs(static_cast<double>(gx.at(0, c, h, w))) > threshold)
                    out.insert({h, w});
    return out;
}

// Largest Chebyshev distance from (h0, w0) over the positions.
inline i64 footprint_radius(const PositionSet& pos, i64 h0, i64 w0) {
    i64 r = -1;
    for (const auto& [h, w] : pos)
        r = std::max(r, std::max(std::abs(h - h0), std::abs(w - w0)));
    return r;
}

// The full k x k neighborhood of (h0, w0), clipped to the image bounds; the
// expected stride-1 footprint of a k x k convolution.
inline PositionSet chebyshev_ball(i64 h0, i64 w0, i64 radius, i64 h_max, i64 w_max) {
    PositionSet out;
    for (i64 h = std::max<i64>(0, h0 - radius); h <= std::min(h_max - 1, h0 + radius); ++h)
        for (i64 w = std::max<i64>(0, w0 - radius); w <= std::min(w_max - 1, w0 + radius); ++w)
            out.insert({h, w});
    return out;
}

}  // namespace yolocs::verify
