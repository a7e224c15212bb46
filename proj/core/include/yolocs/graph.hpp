#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "yolocs/blocks.hpp"
#include "yolocs/config.hpp"
#include "yolocs/profile.hpp"
#include "yolocs/tensor.hpp"

namespace yolocs {

// Executable DAG compiled from a ModelConfig. Multipliers are applied at
// build time; channel widths are inferred statically before any tensor flows.
template <typename T>
class Graph {
  public:
    explicit Graph(const ModelConfig& cfg_raw) : cfg_(apply_multipliers(cfg_raw)) {
        nc_ = cfg_.nc;
        na_ = cfg_.na();
        build();
    }

    const ModelConfig& config() const { return cfg_; }
    i64 nc() const { return nc_; }
    i64 na() const { return na_; }
    size_t node_count() const { return nodes_.size(); }
    const std::string& node_name(size_t i) const { return nodes_[i].name; }
    Block<T>& block(size_t i) { return *nodes_[i].block; }
    size_t head_index() const { return nodes_.size() - 1; }
    size_t level_count() const { return nodes_.back().from.size(); }

    // Per-node output shapes for a square input of the given side.
    std::vector<std::vector<Shape4>> infer_shapes(i64 img) const {
        require(img >= 32 && img % 32 == 0, "input size must be a positive multiple of 32");
        std::vector<std::vector<Shape4>> shapes(nodes_.size());
        Shape4 in0{1, 3, img, img};
        for (size_t i = 0; i < nodes_.size(); ++i) {
            std::vector<Shape4> ins;
            for (int f : nodes_[i].from)
                ins.push_back(f < 0 ? in0 : shapes[static_cast<size_t>(f)].at(0));
            shapes[i] = nodes_[i].block->out_shapes(ins);
        }
        return shapes;
    }

    // Stride of each head level for a given input side (input / feature width).
    std::vector<i64> head_strides(i64 img) const {
        auto shapes = infer_shapes(img);
        std::vector<i64> strides;
        for (const Shape4& s : shapes.back()) strides.push_back(img / s.w);
        return strides;
    }

    std::vector<Tensor4<T>> forward(const Tensor4<T>& input, bool training, bool want_grad) {
        require(input.shape.c == 3, "graph input must have 3 channels");
        require(input.shape.h % 32 == 0 && input.shape.w % 32 == 0,
                "graph input spatial dims must be divisible by 32");
        input_shape_ = input.shape;
        outs_.assign(nodes_.size(), {});
        for (size_t i = 0; i < nodes_.size(); ++i) {
            std::vector<const Tensor4<T>*> ins;
            for (int f : nodes_[i].from)
                ins.push_back(f < 0 ? &input : &outs_[static_cast<size_t>(f)].at(0));
            outs_[i] = nodes_[i].block->forward(ins, training, want_grad);
        }
        return outs_.back();
    }

    // Accumulates parameter gradients for the last forward (which must have
    // run with want_grad). Also exposes the gradient at the network input.
    void backward(const std::vector<Tensor4<T>>& head_grads) {
        require(outs_.size() == nodes_.size() && !outs_.back().empty(),
                "backward without a preceding forward");
        grads_.assign(nodes_.size(), {});
        for (size_t i = 0; i < nodes_.size(); ++i) {
            grads_[i].clear();
            for (const Tensor4<T>& o : outs_[i]) grads_[i].emplace_back(o.shape);
        }
        input_grad_ = Tensor4<T>(input_shape_);
        require(head_grads.size() == grads_.back().size(), "head gradient count mismatch");
        for (size_t k = 0; k < head_grads.size(); ++k) {
            require(head_grads[k].shape == grads_.back()[k].shape,
                    "head gradient shape mismatch");
            grads_.back()[k] = head_grads[k];
        }
        for (size_t ii = nodes_.size(); ii-- > 0;) {
            std::vector<Tensor4<T>*> gins;
            for (int f : nodes_[ii].from)
                gins.push_back(f < 0 ? &input_grad_ : &grads_[static_cast<size_t>(f)].at(0));
            nodes_[ii].block->backward(grads_[ii], gins);
        }
    }

    const Tensor4<T>& input_grad() const { return input_grad_; }
    const std::vector<Tensor4<T>>& node_outputs(size_t i) const { return outs_.at(i); }

    std::vector<ParamView<T>>& params() {
        if (registry_.empty())
            for (size_t i = 0; i < nodes_.size(); ++i)
                nodes_[i].block->collect(nodes_[i].name, registry_);
        return registry_;
    }

    i64 total_params() const {
        i64 t = 0;
        for (const auto& n : nodes_) t += n.block->param_count();
        return t;
    }

    // Kaiming-uniform fan-in for conv weights; gamma = 1, beta and bias = 0.
    // A single generator consumed in registry order makes this reproducible.
    void init_params(unsigned seed) {
        std::mt19937 rng(seed);
        const double scale = 1.0 / 4294967296.0;  // 2^-32, mirrors Tensor4::fill_uniform
        for (ParamView<T>& v : params()) {
            switch (v.kind) {
                case ParamKind::conv_weight: {
                    double bound = std::sqrt(6.0 / static_cast<double>(v.fan_in));
                    for (i64 i = 0; i < v.count; ++i) {
                        double u = static_cast<double>(rng()) * scale;
                        v.data[i] = static_cast<T>(-bound + u * 2.0 * bound);
                    }
                    break;
                }
                case ParamKind::bn_gamma:
                    for (i64 i = 0; i < v.count; ++i) v.data[i] = T(1);
                    break;
                default:
                    for (i64 i = 0; i < v.count; ++i) v.data[i] = T(0);
            }
        }
    }

    void zero_grads() {
        for (ParamView<T>& v : params())
            for (i64 i = 0; i < v.count; ++i) v.grad[i] = T(0);
    }

    void sgd_step(double lr) {
        for (ParamView<T>& v : params())
            for (i64 i = 0; i < v.count; ++i)
                v.data[i] -= static_cast<T>(lr * static_cast<double>(v.grad[i]));
    }

    ProfileReport profile(i64 img) const {
        ProfileReport rep;
        rep.config_name = cfg_.name;
        rep.img_size = img;
        auto shapes = infer_shapes(img);
        Shape4 in0{1, 3, img, img};
        for (size_t i = 0; i < nodes_.size(); ++i) {
            std::vector<Shape4> ins;
            for (int f : nodes_[i].from)
                ins.push_back(f < 0 ? in0 : shapes[static_cast<size_t>(f)].at(0));
            ProfileRow row;
            row.index = static_cast<int>(i);
            row.name = nodes_[i].name;
            row.kind = nodes_[i].block->kind();
            for (size_t k = 0; k < shapes[i].size(); ++k)
                row.out_shape += (k ? " " : "") + shapes[i][k].str();
            row.params = nodes_[i].block->param_count();
            row.flops = nodes_[i].block->flop_count(ins);
            rep.total_params += row.params;
            rep.total_flops += row.flops;
            rep.rows.push_back(std::move(row));
        }
        return rep;
    }

  private:
    struct Node {
        std::string name;
        std::vector<int> from;  // resolved; -1 = graph input
        std::unique_ptr<Block<T>> block;
    };

    static i64 arg_int(const LayerSpec& l, size_t idx) {
        require(idx < l.args.size() && l.args[idx].kind == Arg::Kind::integer,
                "layer line " + std::to_string(l.line) + ": argument " + std::to_string(idx) +
                    " of " + l.module + " must be an integer");
        return l.args[idx].i;
    }
    static i64 arg_int_or(const LayerSpec& l, size_t idx, i64 dflt) {
        return idx < l.args.size() ? arg_int(l, idx) : dflt;
    }
    static bool arg_bool_or(const LayerSpec& l, size_t idx, bool dflt) {
        if (idx >= l.args.size()) return dflt;
        require(l.args[idx].kind == Arg::Kind::boolean,
                "layer line " + std::to_string(l.line) + ": argument " + std::to_string(idx) +
                    " of " + l.module + " must be true/false");
        return l.args[idx].b;
    }
    static std::string arg_word_or(const LayerSpec& l, size_t idx, const std::string& dflt) {
        if (idx >= l.args.size()) return dflt;
        require(l.args[idx].kind == Arg::Kind::word,
                "layer line " + std::to_string(l.line) + ": argument " + std::to_string(idx) +
                    " of " + l.module + " must be a word");
        return l.args[idx].s;
    }
    static void arg_count_max(const LayerSpec& l, size_t mx) {
        require(l.args.size() <= mx, "layer line " + std::to_string(l.line) + ": too many " +
                                         l.module + " arguments");
    }

    std::unique_ptr<Block<T>> make_block(const LayerSpec& l, const std::vector<Shape4>& ins) {
        i64 cin = ins.at(0).c;
        if (l.module == "CBS") {
            i64 c = arg_int(l, 0), k = arg_int(l, 1), s = arg_int(l, 2);
            i64 pad = arg_int_or(l, 3, k / 2);
            arg_count_max(l, 4);
            return std::make_unique<CBSBlock<T>>(cin, c, k, s, pad);
        }
        if (l.module == "BottleneckV5") {
            i64 c = arg_int(l, 0);
            bool sc = arg_bool_or(l, 1, true);
            arg_count_max(l, 2);
            return std::make_unique<BottleneckBlock<T>>(cin, c, sc);
        }
        if (l.module == "CSP_C3") {
            i64 c = arg_int(l, 0);
            bool sc = arg_bool_or(l, 1, true);
            arg_count_max(l, 2);
            return std::make_unique<C3Block<T>>(cin, c, l.repeats, sc);
        }
        if (l.module == "DCFS") {
            i64 c = arg_int(l, 0);
            bool sc = arg_bool_or(l, 1, l.section == Section::backbone);
            std::string vw = arg_word_or(l, 2, "ocj");
            arg_count_max(l, 3);
            DcfsVariant v;
            if (vw == "ocj")
                v = DcfsVariant::ocj;
            else if (vw == "bn3x3")
                v = DcfsVariant::bn3x3;
            else if (vw == "conv1x1")
                v = DcfsVariant::conv1x1;
            else
                fail("layer line " + std::to_string(l.line) + ": unknown DCFS variant '" + vw +
                     "'");
            return std::make_unique<DCFSBlock<T>>(cin, c, l.repeats, sc, v);
        }
        if (l.module == "SPPF") {
            i64 c = arg_int(l, 0);
            i64 k = arg_int_or(l, 1, 5);
            arg_count_max(l, 2);
            return std::make_unique<SPPFBlock<T>>(cin, c, k);
        }
        if (l.module == "Upsample") {
            arg_count_max(l, 0);
            return std::make_unique<UpsampleBlock<T>>();
        }
        if (l.module == "Concat") {
            arg_count_max(l, 0);
            return std::make_unique<ConcatBlock<T>>();
        }
        std::vector<i64> level_channels;
        for (const Shape4& s : ins) level_channels.push_back(s.c);
        if (l.module == "HeadCoupled") {
            arg_count_max(l, 0);
            return std::make_unique<HeadCoupledBlock<T>>(level_channels, nc_, na_);
        }
        if (l.module == "HeadDH") {
            i64 w = arg_int(l, 0);
            arg_count_max(l, 1);
            return std::make_unique<HeadDHBlock<T>>(level_channels, nc_, na_, w);
        }
        if (l.module == "HeadADH") {
            i64 w = arg_int(l, 0);
            arg_count_max(l, 1);
            return std::make_unique<HeadADHBlock<T>>(level_channels, nc_, na_, w);
        }
        fail("unknown module '" + l.module + "'");
    }

    void build() {
        // nominal spatial side for channel inference; channels are independent
        // of it, and real sizes are re-inferred per profile/forward
        std::vector<std::vector<Shape4>> shapes(cfg_.layers.size());
        Shape4 in0{1, 3, 64, 64};
        for (size_t i = 0; i < cfg_.layers.size(); ++i) {
            const LayerSpec& l = cfg_.layers[i];
            Node node;
            for (int f : l.from) {
                int r = f == -1 ? static_cast<int>(i) - 1 : f;
                require(r >= -1 && r < static_cast<int>(i),
                        "layer " + std::to_string(i) + ": bad from reference");
                node.from.push_back(r);
            }
            std::vector<Shape4> ins;
            for (int f : node.from)
                ins.push_back(f < 0 ? in0 : shapes[static_cast<size_t>(f)].at(0));
            try {
                node.block = make_block(l, ins);
                shapes[i] = node.block->out_shapes(ins);
            } catch (const std::runtime_error& e) {
                fail(cfg_.name + ": layer " + std::to_string(i) + " (" + l.module +
                     "): " + e.what());
            }
            node.name = "L" + std::to_string(i) + "." + l.module;
            nodes_.push_back(std::move(node));
        }
    }

    ModelConfig cfg_;
    i64 nc_ = 0, na_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::vector<Tensor4<T>>> outs_;
    std::vector<std::vector<Tensor4<T>>> grads_;
    Tensor4<T> input_grad_;
    Shape4 input_shape_;
    std::vector<ParamView<T>> registry_;
};

}  // namespace yolocs
