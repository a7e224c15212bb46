#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace yolocs {

using i64 = std::int64_t;

[[noreturn]] inline void fail(const std::string& msg) {
    throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

// NCHW shape. Batch and channel counts are static properties of a model run;
// spatial dims may vary between calls.
struct Shape4 {
    i64 n = 0, c = 0, h = 0, w = 0;

    i64 numel() const { return n * c * h * w; }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + "]";
    }
};

// Dense row-major NCHW tensor. Element (n,c,h,w) lives at ((n*C+c)*H+h)*W+w.
template <typename T>
struct Tensor4 {
    Shape4 shape;
    std::vector<T> data;

    Tensor4() = default;
    explicit Tensor4(Shape4 s) : shape(s), data(static_cast<size_t>(s.numel()), T(0)) {
        require(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0, "tensor: negative dim");
    }

    static Tensor4 zeros(Shape4 s) { return Tensor4(s); }

    i64 numel() const { return shape.numel(); }

    i64 idx(i64 n, i64 c, i64 h, i64 w) const {
        return ((n * shape.c + c) * shape.h + h) * shape.w + w;
    }
    T& at(i64 n, i64 c, i64 h, i64 w) { return data[static_cast<size_t>(idx(n, c, h, w))]; }
    const T& at(i64 n, i64 c, i64 h, i64 w) const {
        return data[static_cast<size_t>(idx(n, c, h, w))];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    // Deterministic uniform fill in [lo, hi). mt19937 output is fixed by the
    // standard, and the scaling below avoids std::uniform_real_distribution,
    // whose exact sequence is implementation-defined.
    void fill_uniform(std::mt19937& rng, T lo, T hi) {
        const double scale = 1.0 / 4294967296.0;  // 2^-32
        for (auto& v : data) {
            double u = static_cast<double>(rng()) * scale;
            v = static_cast<T>(static_cast<double>(lo) +
                               u * (static_cast<double>(hi) - static_cast<double>(lo)));
        }
    }

    // Order-fixed absolute sum; serves as a cheap content fingerprint in tests
    // and CLI output.
    double checksum() const {
        double s = 0.0;
        for (const auto& v : data) s += std::abs(static_cast<double>(v));
        return s;
    }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace yolocs
