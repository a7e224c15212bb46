#pragma once

#include <memory>
#include <string>
#include <vector>

#include "yolocs/activations.hpp"
#include "yolocs/batchnorm.hpp"
#include "yolocs/combine.hpp"
#include "yolocs/conv.hpp"
#include "yolocs/pooling.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

enum class ParamKind { conv_weight, conv_bias, bn_gamma, bn_beta };

// One registered learnable array: stable name, data/grad storage, and the
// fan-in needed for Kaiming-uniform conv-weight initialization.
template <typename T>
struct ParamView {
    std::string name;
    T* data = nullptr;
    T* grad = nullptr;
    i64 count = 0;
    ParamKind kind = ParamKind::conv_weight;
    i64 fan_in = 0;
};

template <typename T>
inline void accumulate(Tensor4<T>& dst, const Tensor4<T>& src) {
    require(dst.shape == src.shape, "accumulate: shape mismatch");
    for (i64 i = 0; i < dst.numel(); ++i)
        dst.data[static_cast<size_t>(i)] += src.data[static_cast<size_t>(i)];
}

// ---------------------------------------------------------------------------
// Layer building bricks. Each owns its parameters and gradient buffers,
// caches what backward needs (only when want_grad is set), and reports the
// same parameter/FLOP accounting the analyzer prints:
//   conv: 2*k^2*cin*cout per output element, + cout per element when biased
//   BN and activation: 2 per element; pool/upsample/residual add: 1 per element
// ---------------------------------------------------------------------------

template <typename T>
struct ConvLayer {
    ConvSpec spec;
    std::vector<T> w, b, gw, gb;
    Tensor4<T> x_cache;

    ConvLayer() = default;
    ConvLayer(i64 cin, i64 cout, i64 k, i64 s, i64 pad, bool bias) {
        spec = ConvSpec{cin, cout, k, s, pad, bias};
        w.assign(static_cast<size_t>(spec.weight_count()), T(0));
        gw.assign(w.size(), T(0));
        b.assign(static_cast<size_t>(spec.bias_count()), T(0));
        gb.assign(b.size(), T(0));
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool want_grad) {
        if (want_grad) x_cache = x;
        return conv2d_forward(x, spec, w, b);
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx(x_cache.shape);
        conv2d_backward(x_cache, spec, w, gy, gx, gw, gb);
        return gx;
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) {
        i64 fan = spec.in_ch * spec.kernel * spec.kernel;
        out.push_back({p + ".w", w.data(), gw.data(), static_cast<i64>(w.size()),
                       ParamKind::conv_weight, fan});
        if (spec.has_bias)
            out.push_back({p + ".b", b.data(), gb.data(), static_cast<i64>(b.size()),
                           ParamKind::conv_bias, fan});
    }
    i64 params() const { return spec.weight_count() + spec.bias_count(); }
    Shape4 out_shape(const Shape4& in) const { return conv_out_shape(spec, in); }
    double flops(const Shape4& in) const {
        Shape4 o = out_shape(in);
        double hw = static_cast<double>(o.n) * static_cast<double>(o.h) * static_cast<double>(o.w);
        double f = 2.0 * static_cast<double>(spec.kernel * spec.kernel * spec.in_ch * spec.out_ch) * hw;
        if (spec.has_bias) f += static_cast<double>(spec.out_ch) * hw;
        return f;
    }
};

template <typename T>
struct BNLayer {
    BatchNorm<T> bn;
    std::vector<T> ggamma, gbeta;
    Tensor4<T> x_cache;
    BNCache<T> cache;

    BNLayer() : bn(1) {}
    explicit BNLayer(i64 c)
        : bn(c), ggamma(static_cast<size_t>(c), T(0)), gbeta(static_cast<size_t>(c), T(0)) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool training, bool want_grad) {
        if (want_grad) x_cache = x;
        return batchnorm_forward(x, bn, training, cache);
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx(x_cache.shape);
        batchnorm_backward(x_cache, bn, cache, gy, gx, ggamma, gbeta);
        return gx;
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) {
        out.push_back({p + ".g", bn.gamma.data(), ggamma.data(),
                       static_cast<i64>(bn.gamma.size()), ParamKind::bn_gamma, 0});
        out.push_back({p + ".b", bn.beta.data(), gbeta.data(),
                       static_cast<i64>(bn.beta.size()), ParamKind::bn_beta, 0});
    }
    i64 params() const { return 2 * bn.channels; }
    double flops(const Shape4& in) const { return 2.0 * static_cast<double>(in.numel()); }
};

template <typename T>
struct SiLULayer {
    Tensor4<T> x_cache;
    Tensor4<T> forward(const Tensor4<T>& x, bool want_grad) {
        if (want_grad) x_cache = x;
        return silu_forward(x);
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx(x_cache.shape);
        silu_backward(x_cache, gy, gx);
        return gx;
    }
    double flops(const Shape4& in) const { return 2.0 * static_cast<double>(in.numel()); }
};

// conv -> BN -> SiLU, the unit every composite block is assembled from
template <typename T>
struct CBSUnit {
    ConvLayer<T> conv;
    BNLayer<T> bn;
    SiLULayer<T> act;

    CBSUnit() = default;
    CBSUnit(i64 cin, i64 cout, i64 k, i64 s, i64 pad) : conv(cin, cout, k, s, pad, false), bn(cout) {}
    CBSUnit(i64 cin, i64 cout, i64 k, i64 s) : CBSUnit(cin, cout, k, s, k / 2) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool training, bool want_grad) {
        return act.forward(bn.forward(conv.forward(x, want_grad), training, want_grad), want_grad);
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        return conv.backward(bn.backward(act.backward(gy)));
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) {
        conv.collect(p + ".conv", out);
        bn.collect(p + ".bn", out);
    }
    i64 params() const { return conv.params() + bn.params(); }
    Shape4 out_shape(const Shape4& in) const { return conv.out_shape(in); }
    double flops(const Shape4& in) const {
        Shape4 o = conv.out_shape(in);
        return conv.flops(in) + bn.flops(o) + act.flops(o);
    }
};

// 1x1 reduce + 3x3 expand at a fixed width, optional residual add
template <typename T>
struct BottleneckUnit {
    CBSUnit<T> cv1, cv2;
    bool shortcut = true;

    BottleneckUnit() = default;
    BottleneckUnit(i64 c, bool sc) : cv1(c, c, 1, 1), cv2(c, c, 3, 1), shortcut(sc) {}

    Tensor4<T> forward(const Tensor4<T>& x, bool training, bool want_grad) {
        Tensor4<T> y = cv2.forward(cv1.forward(x, training, want_grad), training, want_grad);
        if (shortcut) return add(y, x);
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx = cv1.backward(cv2.backward(gy));
        if (shortcut) accumulate(gx, gy);
        return gx;
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) {
        cv1.collect(p + ".cv1", out);
        cv2.collect(p + ".cv2", out);
    }
    i64 params() const { return cv1.params() + cv2.params(); }
    double flops(const Shape4& in) const {
        double f = cv1.flops(in) + cv2.flops(in);
        if (shortcut) f += static_cast<double>(in.numel());
        return f;
    }
};

// ---------------------------------------------------------------------------
// Graph-level blocks
// ---------------------------------------------------------------------------

template <typename T>
class Block {
  public:
    virtual ~Block() = default;
    virtual const char* kind() const = 0;
    virtual std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const = 0;
    // forward stores whatever backward needs internally when want_grad is set;
    // backward accumulates into the caller's input-grad tensors and into the
    // block's own parameter-grad buffers
    virtual std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins,
                                            bool training, bool want_grad) = 0;
    virtual void backward(const std::vector<Tensor4<T>>& gys,
                          const std::vector<Tensor4<T>*>& gins) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamView<T>>& out) = 0;
    virtual i64 param_count() const = 0;
    virtual double flop_count(const std::vector<Shape4>& ins) const = 0;
};

template <typename T>
class CBSBlock : public Block<T> {
  public:
    CBSBlock(i64 cin, i64 cout, i64 k, i64 s, i64 pad) : u_(cin, cout, k, s, pad) {}
    CBSBlock(i64 cin, i64 cout, i64 k, i64 s) : CBSBlock(cin, cout, k, s, k / 2) {}
    const char* kind() const override { return "CBS"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        return {u_.out_shape(ins.at(0))};
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        std::vector<Tensor4<T>> out;
        out.push_back(u_.forward(*ins.at(0), training, want_grad));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        accumulate(*gins.at(0), u_.backward(gys.at(0)));
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        u_.collect(p, out);
    }
    i64 param_count() const override { return u_.params(); }
    double flop_count(const std::vector<Shape4>& ins) const override {
        return u_.flops(ins.at(0));
    }

  private:
    CBSUnit<T> u_;
};

template <typename T>
class BottleneckBlock : public Block<T> {
  public:
    BottleneckBlock(i64 cin, i64 cout, bool shortcut) : u_(cout, shortcut) {
        require(cin == cout, "BottleneckV5 requires matching in/out channels");
    }
    const char* kind() const override { return "BottleneckV5"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        return {ins.at(0)};
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        std::vector<Tensor4<T>> out;
        out.push_back(u_.forward(*ins.at(0), training, want_grad));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        accumulate(*gins.at(0), u_.backward(gys.at(0)));
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        u_.collect(p, out);
    }
    i64 param_count() const override { return u_.params(); }
    double flop_count(const std::vector<Shape4>& ins) const override {
        return u_.flops(ins.at(0));
    }

  private:
    BottleneckUnit<T> u_;
};

// split-transform-merge: cv1 feeds the bottleneck chain, cv2 bypasses,
// concat([chain, bypass]) -> cv3
template <typename T>
class C3Block : public Block<T> {
  public:
    C3Block(i64 cin, i64 cout, i64 n, bool shortcut) : cin_(cin), cout_(cout) {
        require(cout % 2 == 0, "C3 output channels must be even");
        require(n >= 1, "C3 needs at least one bottleneck");
        i64 c = cout / 2;
        cv1_ = CBSUnit<T>(cin, c, 1, 1);
        cv2_ = CBSUnit<T>(cin, c, 1, 1);
        for (i64 i = 0; i < n; ++i) units_.emplace_back(c, shortcut);
        cv3_ = CBSUnit<T>(2 * c, cout, 1, 1);
    }
    const char* kind() const override { return "CSP_C3"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        return {Shape4{s.n, cout_, s.h, s.w}};
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        const Tensor4<T>& x = *ins.at(0);
        Tensor4<T> a = cv1_.forward(x, training, want_grad);
        for (auto& u : units_) a = u.forward(a, training, want_grad);
        Tensor4<T> b = cv2_.forward(x, training, want_grad);
        Tensor4<T> cat = concat_channels<T>({&a, &b});
        std::vector<Tensor4<T>> out;
        out.push_back(cv3_.forward(cat, training, want_grad));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        Tensor4<T> gcat = cv3_.backward(gys.at(0));
        Shape4 half = gcat.shape;
        half.c = cout_ / 2;
        Tensor4<T> ga(half), gb(half);
        std::vector<Tensor4<T>*> slices = {&ga, &gb};
        concat_backward(gcat, slices);
        for (auto it = units_.rbegin(); it != units_.rend(); ++it) ga = it->backward(ga);
        accumulate(*gins.at(0), cv1_.backward(ga));
        accumulate(*gins.at(0), cv2_.backward(gb));
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        cv1_.collect(p + ".cv1", out);
        cv2_.collect(p + ".cv2", out);
        for (size_t i = 0; i < units_.size(); ++i)
            units_[i].collect(p + ".m" + std::to_string(i), out);
        cv3_.collect(p + ".cv3", out);
    }
    i64 param_count() const override {
        i64 t = cv1_.params() + cv2_.params() + cv3_.params();
        for (const auto& u : units_) t += u.params();
        return t;
    }
    double flop_count(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        Shape4 mid{s.n, cout_ / 2, s.h, s.w};
        Shape4 cat{s.n, cout_, s.h, s.w};
        double f = cv1_.flops(s) + cv2_.flops(s) + cv3_.flops(cat);
        for (const auto& u : units_) f += u.flops(mid);
        return f;
    }

  private:
    i64 cin_, cout_;
    CBSUnit<T> cv1_, cv2_, cv3_;
    std::vector<BottleneckUnit<T>> units_;
};

enum class DcfsVariant { ocj, bn3x3, conv1x1 };

inline const char* dcfs_variant_name(DcfsVariant v) {
    switch (v) {
        case DcfsVariant::ocj: return "ocj";
        case DcfsVariant::bn3x3: return "bn3x3";
        default: return "conv1x1";
    }
}

// Bottleneck chain at half width with a channel-halving compression tap on
// every unit output, plus a bypass branch, all merged by concat.
//   ocj:     taps and bypass are raw convolutions; one shared BN+SiLU
//            normalizes the concatenated distribution before the 1x1 fusion
//   bn3x3:   every branch (bypass included) gets its own 3x3 CBS tap
//   conv1x1: same but with 1x1 CBS taps
template <typename T>
class DCFSBlock : public Block<T> {
  public:
    DCFSBlock(i64 cin, i64 cout, i64 n, bool shortcut, DcfsVariant variant)
        : cin_(cin), cout_(cout), n_(n), variant_(variant) {
        require(cout % 4 == 0, "DCFS output channels must be divisible by 4");
        require(n >= 1, "DCFS needs at least one bottleneck");
        i64 c = cout / 2;
        i64 t = cout / 4;
        entry_ = CBSUnit<T>(cin, c, 1, 1);
        for (i64 i = 0; i < n; ++i) units_.emplace_back(c, shortcut);
        if (variant == DcfsVariant::ocj) {
            bypass_raw_ = ConvLayer<T>(cin, c, 1, 1, 0, false);
            for (i64 i = 0; i < n; ++i) taps_raw_.emplace_back(c, t, 3, 1, 1, false);
            i64 w = c + n * t;
            join_bn_ = BNLayer<T>(w);
            fuse_ = CBSUnit<T>(w, cout, 1, 1);
        } else {
            i64 k = variant == DcfsVariant::bn3x3 ? 3 : 1;
            bypass_ = CBSUnit<T>(cin, c, 1, 1);
            bypass_tap_ = CBSUnit<T>(c, t, k, 1);
            for (i64 i = 0; i < n; ++i) taps_.emplace_back(c, t, k, 1);
            fuse_ = CBSUnit<T>((n + 1) * t, cout, 1, 1);
        }
    }

    const char* kind() const override { return "DCFS"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        return {Shape4{s.n, cout_, s.h, s.w}};
    }

    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        const Tensor4<T>& x = *ins.at(0);
        std::vector<Tensor4<T>> parts;
        parts.reserve(static_cast<size_t>(n_) + 1);
        if (variant_ == DcfsVariant::ocj) {
            parts.push_back(bypass_raw_.forward(x, want_grad));
        } else {
            parts.push_back(
                bypass_tap_.forward(bypass_.forward(x, training, want_grad), training, want_grad));
        }
        Tensor4<T> a = entry_.forward(x, training, want_grad);
        for (i64 i = 0; i < n_; ++i) {
            a = units_[static_cast<size_t>(i)].forward(a, training, want_grad);
            if (variant_ == DcfsVariant::ocj)
                parts.push_back(taps_raw_[static_cast<size_t>(i)].forward(a, want_grad));
            else
                parts.push_back(taps_[static_cast<size_t>(i)].forward(a, training, want_grad));
        }
        std::vector<const Tensor4<T>*> part_ptrs;
        for (const auto& p : parts) part_ptrs.push_back(&p);
        Tensor4<T> cat = concat_channels<T>(part_ptrs);
        std::vector<Tensor4<T>> out;
        if (variant_ == DcfsVariant::ocj) {
            Tensor4<T> normed =
                join_act_.forward(join_bn_.forward(cat, training, want_grad), want_grad);
            out.push_back(fuse_.forward(normed, training, want_grad));
        } else {
            out.push_back(fuse_.forward(cat, training, want_grad));
        }
        return out;
    }

    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        Tensor4<T> gcat = fuse_.backward(gys.at(0));
        if (variant_ == DcfsVariant::ocj) gcat = join_bn_.backward(join_act_.backward(gcat));
        Shape4 s = gcat.shape;
        i64 c = cout_ / 2;
        i64 t = cout_ / 4;
        // bypass part is c wide for the raw-join variant, t wide otherwise
        std::vector<Tensor4<T>> gparts;
        gparts.emplace_back(Shape4{s.n, variant_ == DcfsVariant::ocj ? c : t, s.h, s.w});
        for (i64 i = 0; i < n_; ++i) gparts.emplace_back(Shape4{s.n, t, s.h, s.w});
        std::vector<Tensor4<T>*> gpart_ptrs;
        for (auto& g : gparts) gpart_ptrs.push_back(&g);
        concat_backward(gcat, gpart_ptrs);
        // walk the chain backwards: unit i's output feeds tap i and unit i+1
        Tensor4<T> ga = tap_backward(n_ - 1, gparts[static_cast<size_t>(n_)]);
        for (i64 i = n_ - 1; i >= 1; --i) {
            ga = units_[static_cast<size_t>(i)].backward(ga);
            accumulate(ga, tap_backward(i - 1, gparts[static_cast<size_t>(i)]));
        }
        ga = units_[0].backward(ga);
        accumulate(*gins.at(0), entry_.backward(ga));
        if (variant_ == DcfsVariant::ocj) {
            accumulate(*gins.at(0), bypass_raw_.backward(gparts[0]));
        } else {
            accumulate(*gins.at(0), bypass_.backward(bypass_tap_.backward(gparts[0])));
        }
    }

    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        if (variant_ == DcfsVariant::ocj)
            bypass_raw_.collect(p + ".bypass", out);
        else {
            bypass_.collect(p + ".bypass", out);
            bypass_tap_.collect(p + ".bypass_tap", out);
        }
        entry_.collect(p + ".entry", out);
        for (i64 i = 0; i < n_; ++i) {
            units_[static_cast<size_t>(i)].collect(p + ".m" + std::to_string(i), out);
            if (variant_ == DcfsVariant::ocj)
                taps_raw_[static_cast<size_t>(i)].collect(p + ".tap" + std::to_string(i), out);
            else
                taps_[static_cast<size_t>(i)].collect(p + ".tap" + std::to_string(i), out);
        }
        if (variant_ == DcfsVariant::ocj) join_bn_.collect(p + ".join_bn", out);
        fuse_.collect(p + ".fuse", out);
    }

    i64 param_count() const override {
        i64 tot = entry_.params() + fuse_.params();
        for (const auto& u : units_) tot += u.params();
        if (variant_ == DcfsVariant::ocj) {
            tot += bypass_raw_.params() + join_bn_.params();
            for (const auto& tp : taps_raw_) tot += tp.params();
        } else {
            tot += bypass_.params() + bypass_tap_.params();
            for (const auto& tp : taps_) tot += tp.params();
        }
        return tot;
    }

    double flop_count(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        i64 c = cout_ / 2;
        i64 t = cout_ / 4;
        Shape4 mid{s.n, c, s.h, s.w};
        double f = entry_.flops(s) + fuse_.flops(fuse_in_shape(s));
        for (const auto& u : units_) f += u.flops(mid);
        if (variant_ == DcfsVariant::ocj) {
            f += bypass_raw_.flops(s);
            for (const auto& tp : taps_raw_) f += tp.flops(mid);
            Shape4 cat{s.n, c + n_ * t, s.h, s.w};
            f += join_bn_.flops(cat) + join_act_.flops(cat);
        } else {
            f += bypass_.flops(s) + bypass_tap_.flops(mid);
            for (const auto& tp : taps_) f += tp.flops(mid);
        }
        return f;
    }

  private:
    Shape4 fuse_in_shape(const Shape4& s) const {
        i64 w = variant_ == DcfsVariant::ocj ? cout_ / 2 + n_ * (cout_ / 4)
                                             : (n_ + 1) * (cout_ / 4);
        return Shape4{s.n, w, s.h, s.w};
    }
    Tensor4<T> tap_backward(i64 i, const Tensor4<T>& g) {
        if (variant_ == DcfsVariant::ocj) return taps_raw_[static_cast<size_t>(i)].backward(g);
        return taps_[static_cast<size_t>(i)].backward(g);
    }

    i64 cin_, cout_, n_;
    DcfsVariant variant_;
    CBSUnit<T> entry_, fuse_;
    std::vector<BottleneckUnit<T>> units_;
    // ocj branches
    ConvLayer<T> bypass_raw_;
    std::vector<ConvLayer<T>> taps_raw_;
    BNLayer<T> join_bn_;
    SiLULayer<T> join_act_;
    // per-branch-CBS branches
    CBSUnit<T> bypass_, bypass_tap_;
    std::vector<CBSUnit<T>> taps_;
};

// 1x1 reduce, three chained stride-1 maxpools, concat of all four stages, 1x1 out
template <typename T>
class SPPFBlock : public Block<T> {
  public:
    SPPFBlock(i64 cin, i64 cout, i64 k) : cin_(cin), cout_(cout), pool_{k, 1, k / 2} {
        require(cin % 2 == 0, "SPPF input channels must be even");
        i64 c = cin / 2;
        cv1_ = CBSUnit<T>(cin, c, 1, 1);
        cv2_ = CBSUnit<T>(4 * c, cout, 1, 1);
    }
    const char* kind() const override { return "SPPF"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        return {Shape4{s.n, cout_, s.h, s.w}};
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        Tensor4<T> a = cv1_.forward(*ins.at(0), training, want_grad);
        Tensor4<T> p1 = maxpool2d_forward(a, pool_, argmax_[0]);
        Tensor4<T> p2 = maxpool2d_forward(p1, pool_, argmax_[1]);
        Tensor4<T> p3 = maxpool2d_forward(p2, pool_, argmax_[2]);
        Tensor4<T> cat = concat_channels<T>({&a, &p1, &p2, &p3});
        std::vector<Tensor4<T>> out;
        out.push_back(cv2_.forward(cat, training, want_grad));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        Tensor4<T> gcat = cv2_.backward(gys.at(0));
        Shape4 part = gcat.shape;
        part.c = cin_ / 2;
        Tensor4<T> ga(part), g1(part), g2(part), g3(part);
        std::vector<Tensor4<T>*> slices = {&ga, &g1, &g2, &g3};
        concat_backward(gcat, slices);
        maxpool2d_backward(g3, argmax_[2], g2);
        maxpool2d_backward(g2, argmax_[1], g1);
        maxpool2d_backward(g1, argmax_[0], ga);
        accumulate(*gins.at(0), cv1_.backward(ga));
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        cv1_.collect(p + ".cv1", out);
        cv2_.collect(p + ".cv2", out);
    }
    i64 param_count() const override { return cv1_.params() + cv2_.params(); }
    double flop_count(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        Shape4 mid{s.n, cin_ / 2, s.h, s.w};
        Shape4 cat{s.n, 2 * cin_, s.h, s.w};
        return cv1_.flops(s) + 3.0 * static_cast<double>(mid.numel()) + cv2_.flops(cat);
    }

  private:
    i64 cin_, cout_;
    PoolSpec pool_;
    CBSUnit<T> cv1_, cv2_;
    std::vector<i64> argmax_[3];
};

template <typename T>
class UpsampleBlock : public Block<T> {
  public:
    const char* kind() const override { return "Upsample"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        Shape4 s = ins.at(0);
        return {Shape4{s.n, s.c, 2 * s.h, 2 * s.w}};
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool,
                                    bool) override {
        std::vector<Tensor4<T>> out;
        out.push_back(upsample2x_forward(*ins.at(0)));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        upsample2x_backward(gys.at(0), *gins.at(0));
    }
    void collect(const std::string&, std::vector<ParamView<T>>&) override {}
    i64 param_count() const override { return 0; }
    double flop_count(const std::vector<Shape4>& ins) const override {
        return static_cast<double>(out_shapes(ins)[0].numel());
    }
};

template <typename T>
class ConcatBlock : public Block<T> {
  public:
    const char* kind() const override { return "Concat"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        require(ins.size() >= 2, "Concat needs at least two inputs");
        Shape4 s = ins[0];
        for (size_t i = 1; i < ins.size(); ++i) {
            require(ins[i].n == s.n && ins[i].h == s.h && ins[i].w == s.w,
                    "Concat inputs disagree on spatial shape");
            s.c += ins[i].c;
        }
        return {s};
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool,
                                    bool) override {
        std::vector<Tensor4<T>> out;
        out.push_back(concat_channels<T>(ins));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        concat_backward(gys.at(0), gins);
    }
    void collect(const std::string&, std::vector<ParamView<T>>&) override {}
    i64 param_count() const override { return 0; }
    double flop_count(const std::vector<Shape4>&) const override { return 0.0; }
};

// ---------------------------------------------------------------------------
// Detection heads. All three emit one tensor per pyramid level with
// na*(5+nc) channels laid out anchor-major:
//   channel a*(5+nc)+j, j in {0..3 box, 4 objectness, 5.. class scores}
// ---------------------------------------------------------------------------

// gathers the three per-task prediction tensors into the unified layout
template <typename T>
inline Tensor4<T> assemble_head_level(const Tensor4<T>& box, const Tensor4<T>& obj,
                                      const Tensor4<T>& cls, i64 na, i64 nc) {
    Shape4 s = box.shape;
    require(box.shape.c == na * 4 && obj.shape.c == na && cls.shape.c == na * nc,
            "head prediction channel mismatch");
    Tensor4<T> out(Shape4{s.n, na * (5 + nc), s.h, s.w});
    i64 plane = s.h * s.w;
    for (i64 n = 0; n < s.n; ++n)
        for (i64 a = 0; a < na; ++a) {
            for (i64 j = 0; j < 4; ++j)
                std::copy_n(&box.data[static_cast<size_t>(((n * box.shape.c + a * 4 + j)) * plane)],
                            static_cast<size_t>(plane),
                            &out.data[static_cast<size_t>((n * out.shape.c + a * (5 + nc) + j) * plane)]);
            std::copy_n(&obj.data[static_cast<size_t>((n * obj.shape.c + a) * plane)],
                        static_cast<size_t>(plane),
                        &out.data[static_cast<size_t>((n * out.shape.c + a * (5 + nc) + 4) * plane)]);
            for (i64 j = 0; j < nc; ++j)
                std::copy_n(&cls.data[static_cast<size_t>((n * cls.shape.c + a * nc + j) * plane)],
                            static_cast<size_t>(plane),
                            &out.data[static_cast<size_t>((n * out.shape.c + a * (5 + nc) + 5 + j) * plane)]);
        }
    return out;
}

template <typename T>
inline void split_head_grad(const Tensor4<T>& gy, i64 na, i64 nc, Tensor4<T>& gbox,
                            Tensor4<T>& gobj, Tensor4<T>& gcls) {
    Shape4 s = gy.shape;
    require(s.c == na * (5 + nc), "head gradient channel mismatch");
    gbox = Tensor4<T>(Shape4{s.n, na * 4, s.h, s.w});
    gobj = Tensor4<T>(Shape4{s.n, na, s.h, s.w});
    gcls = Tensor4<T>(Shape4{s.n, na * nc, s.h, s.w});
    i64 plane = s.h * s.w;
    for (i64 n = 0; n < s.n; ++n)
        for (i64 a = 0; a < na; ++a) {
            for (i64 j = 0; j < 4; ++j)
                std::copy_n(&gy.data[static_cast<size_t>((n * s.c + a * (5 + nc) + j) * plane)],
                            static_cast<size_t>(plane),
                            &gbox.data[static_cast<size_t>((n * gbox.shape.c + a * 4 + j) * plane)]);
            std::copy_n(&gy.data[static_cast<size_t>((n * s.c + a * (5 + nc) + 4) * plane)],
                        static_cast<size_t>(plane),
                        &gobj.data[static_cast<size_t>((n * gobj.shape.c + a) * plane)]);
            for (i64 j = 0; j < nc; ++j)
                std::copy_n(&gy.data[static_cast<size_t>((n * s.c + a * (5 + nc) + 5 + j) * plane)],
                            static_cast<size_t>(plane),
                            &gcls.data[static_cast<size_t>((n * gcls.shape.c + a * nc + j) * plane)]);
        }
}

// baseline coupled head: one biased 1x1 conv per level
template <typename T>
class HeadCoupledBlock : public Block<T> {
  public:
    HeadCoupledBlock(const std::vector<i64>& level_channels, i64 nc, i64 na) : nc_(nc), na_(na) {
        for (i64 c : level_channels) preds_.emplace_back(c, na * (5 + nc), 1, 1, 0, true);
    }
    const char* kind() const override { return "HeadCoupled"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        require(ins.size() == preds_.size(), "head level count mismatch");
        std::vector<Shape4> out;
        for (size_t i = 0; i < ins.size(); ++i)
            out.push_back(Shape4{ins[i].n, na_ * (5 + nc_), ins[i].h, ins[i].w});
        return out;
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool,
                                    bool want_grad) override {
        std::vector<Tensor4<T>> out;
        for (size_t i = 0; i < ins.size(); ++i) out.push_back(preds_[i].forward(*ins[i], want_grad));
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        for (size_t i = 0; i < gys.size(); ++i) accumulate(*gins.at(i), preds_[i].backward(gys[i]));
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        for (size_t i = 0; i < preds_.size(); ++i)
            preds_[i].collect(p + ".lvl" + std::to_string(i) + ".pred", out);
    }
    i64 param_count() const override {
        i64 t = 0;
        for (const auto& c : preds_) t += c.params();
        return t;
    }
    double flop_count(const std::vector<Shape4>& ins) const override {
        double f = 0.0;
        for (size_t i = 0; i < preds_.size(); ++i) f += preds_[i].flops(ins[i]);
        return f;
    }

  private:
    i64 nc_, na_;
    std::vector<ConvLayer<T>> preds_;
};

// symmetric decoupled head: 1x1 stem, then two parallel 3x3 CBS pairs
// (classification / regression); objectness predicts off the regression branch
template <typename T>
class HeadDHBlock : public Block<T> {
  public:
    HeadDHBlock(const std::vector<i64>& level_channels, i64 nc, i64 na, i64 stem_width)
        : nc_(nc), na_(na), w_(stem_width) {
        for (i64 c : level_channels) {
            Level lvl;
            lvl.stem = CBSUnit<T>(c, w_, 1, 1);
            lvl.cls0 = CBSUnit<T>(w_, w_, 3, 1);
            lvl.cls1 = CBSUnit<T>(w_, w_, 3, 1);
            lvl.reg0 = CBSUnit<T>(w_, w_, 3, 1);
            lvl.reg1 = CBSUnit<T>(w_, w_, 3, 1);
            lvl.cls_pred = ConvLayer<T>(w_, na * nc, 1, 1, 0, true);
            lvl.box_pred = ConvLayer<T>(w_, na * 4, 1, 1, 0, true);
            lvl.obj_pred = ConvLayer<T>(w_, na * 1, 1, 1, 0, true);
            levels_.push_back(std::move(lvl));
        }
    }
    const char* kind() const override { return "HeadDH"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        require(ins.size() == levels_.size(), "head level count mismatch");
        std::vector<Shape4> out;
        for (const Shape4& s : ins) out.push_back(Shape4{s.n, na_ * (5 + nc_), s.h, s.w});
        return out;
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        std::vector<Tensor4<T>> out;
        for (size_t i = 0; i < ins.size(); ++i) {
            Level& l = levels_[i];
            Tensor4<T> s = l.stem.forward(*ins[i], training, want_grad);
            Tensor4<T> c = l.cls1.forward(l.cls0.forward(s, training, want_grad), training, want_grad);
            Tensor4<T> r = l.reg1.forward(l.reg0.forward(s, training, want_grad), training, want_grad);
            Tensor4<T> cls = l.cls_pred.forward(c, want_grad);
            Tensor4<T> box = l.box_pred.forward(r, want_grad);
            Tensor4<T> obj = l.obj_pred.forward(r, want_grad);
            out.push_back(assemble_head_level(box, obj, cls, na_, nc_));
        }
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        for (size_t i = 0; i < gys.size(); ++i) {
            Level& l = levels_[i];
            Tensor4<T> gbox, gobj, gcls;
            split_head_grad(gys[i], na_, nc_, gbox, gobj, gcls);
            Tensor4<T> gr = l.box_pred.backward(gbox);
            accumulate(gr, l.obj_pred.backward(gobj));
            Tensor4<T> gs = l.reg0.backward(l.reg1.backward(gr));
            accumulate(gs, l.cls0.backward(l.cls1.backward(l.cls_pred.backward(gcls))));
            accumulate(*gins.at(i), l.stem.backward(gs));
        }
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        for (size_t i = 0; i < levels_.size(); ++i) {
            std::string lp = p + ".lvl" + std::to_string(i);
            Level& l = levels_[i];
            l.stem.collect(lp + ".stem", out);
            l.cls0.collect(lp + ".cls0", out);
            l.cls1.collect(lp + ".cls1", out);
            l.reg0.collect(lp + ".reg0", out);
            l.reg1.collect(lp + ".reg1", out);
            l.cls_pred.collect(lp + ".cls_pred", out);
            l.box_pred.collect(lp + ".box_pred", out);
            l.obj_pred.collect(lp + ".obj_pred", out);
        }
    }
    i64 param_count() const override {
        i64 t = 0;
        for (const auto& l : levels_)
            t += l.stem.params() + l.cls0.params() + l.cls1.params() + l.reg0.params() +
                 l.reg1.params() + l.cls_pred.params() + l.box_pred.params() + l.obj_pred.params();
        return t;
    }
    double flop_count(const std::vector<Shape4>& ins) const override {
        double f = 0.0;
        for (size_t i = 0; i < ins.size(); ++i) {
            const Level& l = levels_[i];
            Shape4 s{ins[i].n, w_, ins[i].h, ins[i].w};
            f += l.stem.flops(ins[i]);
            f += l.cls0.flops(s) + l.cls1.flops(s) + l.reg0.flops(s) + l.reg1.flops(s);
            f += l.cls_pred.flops(s) + l.box_pred.flops(s) + l.obj_pred.flops(s);
        }
        return f;
    }

  private:
    struct Level {
        CBSUnit<T> stem, cls0, cls1, reg0, reg1;
        ConvLayer<T> cls_pred, box_pred, obj_pred;
    };
    i64 nc_, na_, w_;
    std::vector<Level> levels_;
};

// asymmetric head: a deep objectness path of 3x3 CBS layers whose widths
// halve step by step, against single 1x1 predictions for class and box
template <typename T>
class HeadADHBlock : public Block<T> {
  public:
    HeadADHBlock(const std::vector<i64>& level_channels, i64 nc, i64 na, i64 stem_width)
        : nc_(nc), na_(na), w_(stem_width) {
        obj_schedule_ = {stem_width, stem_width / 2, stem_width / 4};
        for (size_t i = 0; i + 1 < obj_schedule_.size(); ++i)
            require(obj_schedule_[i] > obj_schedule_[i + 1],
                    "objectness channel schedule must strictly decrease");
        require(obj_schedule_.back() >= 1, "objectness schedule hit zero width");
        for (i64 c : level_channels) {
            Level lvl;
            lvl.stem = CBSUnit<T>(c, w_, 1, 1);
            i64 prev = w_;
            for (i64 s : obj_schedule_) {
                lvl.obj_chain.emplace_back(prev, s, 3, 1);
                prev = s;
            }
            lvl.obj_pred = ConvLayer<T>(prev, na * 1, 1, 1, 0, true);
            lvl.cls_pred = ConvLayer<T>(w_, na * nc, 1, 1, 0, true);
            lvl.box_pred = ConvLayer<T>(w_, na * 4, 1, 1, 0, true);
            levels_.push_back(std::move(lvl));
        }
    }
    const char* kind() const override { return "HeadADH"; }
    std::vector<Shape4> out_shapes(const std::vector<Shape4>& ins) const override {
        require(ins.size() == levels_.size(), "head level count mismatch");
        std::vector<Shape4> out;
        for (const Shape4& s : ins) out.push_back(Shape4{s.n, na_ * (5 + nc_), s.h, s.w});
        return out;
    }
    std::vector<Tensor4<T>> forward(const std::vector<const Tensor4<T>*>& ins, bool training,
                                    bool want_grad) override {
        std::vector<Tensor4<T>> out;
        for (size_t i = 0; i < ins.size(); ++i) {
            Level& l = levels_[i];
            Tensor4<T> s = l.stem.forward(*ins[i], training, want_grad);
            Tensor4<T> o = s;
            for (auto& u : l.obj_chain) o = u.forward(o, training, want_grad);
            Tensor4<T> obj = l.obj_pred.forward(o, want_grad);
            Tensor4<T> cls = l.cls_pred.forward(s, want_grad);
            Tensor4<T> box = l.box_pred.forward(s, want_grad);
            out.push_back(assemble_head_level(box, obj, cls, na_, nc_));
        }
        return out;
    }
    void backward(const std::vector<Tensor4<T>>& gys,
                  const std::vector<Tensor4<T>*>& gins) override {
        for (size_t i = 0; i < gys.size(); ++i) {
            Level& l = levels_[i];
            Tensor4<T> gbox, gobj, gcls;
            split_head_grad(gys[i], na_, nc_, gbox, gobj, gcls);
            Tensor4<T> go = l.obj_pred.backward(gobj);
            for (auto it = l.obj_chain.rbegin(); it != l.obj_chain.rend(); ++it)
                go = it->backward(go);
            accumulate(go, l.cls_pred.backward(gcls));
            accumulate(go, l.box_pred.backward(gbox));
            accumulate(*gins.at(i), l.stem.backward(go));
        }
    }
    void collect(const std::string& p, std::vector<ParamView<T>>& out) override {
        for (size_t i = 0; i < levels_.size(); ++i) {
            std::string lp = p + ".lvl" + std::to_string(i);
            Level& l = levels_[i];
            l.stem.collect(lp + ".stem", out);
            for (size_t j = 0; j < l.obj_chain.size(); ++j)
                l.obj_chain[j].collect(lp + ".obj" + std::to_string(j), out);
            l.obj_pred.collect(lp + ".obj_pred", out);
            l.cls_pred.collect(lp + ".cls_pred", out);
            l.box_pred.collect(lp + ".box_pred", out);
        }
    }
    i64 param_count() const override {
        i64 t = 0;
        for (const auto& l : levels_) {
            t += l.stem.params() + l.obj_pred.params() + l.cls_pred.params() + l.box_pred.params();
            for (const auto& u : l.obj_chain) t += u.params();
        }
        return t;
    }
    double flop_count(const std::vector<Shape4>& ins) const override {
        double f = 0.0;
        for (size_t i = 0; i < ins.size(); ++i) {
            const Level& l = levels_[i];
            f += l.stem.flops(ins[i]);
            Shape4 s{ins[i].n, w_, ins[i].h, ins[i].w};
            for (const auto& u : l.obj_chain) {
                f += u.flops(s);
                s = u.out_shape(s);
            }
            f += l.obj_pred.flops(s);
            Shape4 sw{ins[i].n, w_, ins[i].h, ins[i].w};
            f += l.cls_pred.flops(sw) + l.box_pred.flops(sw);
        }
        return f;
    }
    // exposed so the analyzer tests can assert the objectness/classification
    // cost asymmetry per level
    double obj_path_flops(const Shape4& in) const {
        const Level& l = levels_.front();
        Shape4 s{in.n, w_, in.h, in.w};
        double f = 0.0;
        for (const auto& u : l.obj_chain) {
            f += u.flops(s);
            s = u.out_shape(s);
        }
        return f + l.obj_pred.flops(s);
    }
    double cls_path_flops(const Shape4& in) const {
        Shape4 s{in.n, w_, in.h, in.w};
        return levels_.front().cls_pred.flops(s);
    }

  private:
    struct Level {
        CBSUnit<T> stem;
        std::vector<CBSUnit<T>> obj_chain;
        ConvLayer<T> obj_pred, cls_pred, box_pred;
    };
    i64 nc_, na_, w_;
    std::vector<i64> obj_schedule_;
    std::vector<Level> levels_;
};

}  // namespace yolocs
