#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pifield/math.hpp"
#include "pifield/rng.hpp"

namespace pifield {

enum class OutputActivation { Sigmoid, Tanh01 };

// MLP architecture. Hidden layers use leaky ReLU; hidden layers listed in
// skip_layers consume concat(previous activation, raw input) so depth and
// image-feature information reach every stage. The texture variant squashes
// with tanh remapped to [0,1] since labels are RGB in [0,1].
struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden_widths;
    int output_dim = 1;
    double leaky_slope = 0.01;
    OutputActivation output_activation = OutputActivation::Sigmoid;
    std::vector<int> skip_layers; // hidden indices >= 1
    int embed_layer = -1;         // hidden index after which views are pooled

    void validate() const {
        if (input_dim <= 0 || output_dim <= 0 || hidden_widths.empty())
            throw Error("mlp spec: dimensions must be positive");
        for (int w : hidden_widths)
            if (w <= 0) throw Error("mlp spec: hidden widths must be positive");
        for (int s : skip_layers)
            if (s < 1 || s >= int(hidden_widths.size()))
                throw Error("mlp spec: skip layer out of range");
        if (embed_layer >= int(hidden_widths.size()))
            throw Error("mlp spec: embed layer out of range");
    }

    bool has_skip(int layer) const {
        for (int s : skip_layers)
            if (s == layer) return true;
        return false;
    }
};

// Surface field: input = concat(feature, z); hidden widths follow the
// full-size architecture (1024,512,256,128) or the fast desk preset
// (128,128,128,64); sigmoid output; every hidden layer past the first takes
// a skip; embedding tap after the 4th hidden layer.
inline MlpSpec surface_mlp_spec(int feature_dim, bool paper_size = false) {
    MlpSpec spec;
    spec.input_dim = feature_dim + 1;
    spec.hidden_widths = paper_size ? std::vector<int>{1024, 512, 256, 128}
                                    : std::vector<int>{128, 128, 128, 64};
    spec.output_dim = 1;
    spec.output_activation = OutputActivation::Sigmoid;
    spec.skip_layers = {1, 2, 3};
    spec.embed_layer = 3;
    return spec;
}

// Texture field: input = concat(F_C, F_V, z), 3 outputs through tanh->[0,1].
inline MlpSpec texture_mlp_spec(int fc_dim, int fv_dim, bool paper_size = false) {
    MlpSpec spec = surface_mlp_spec(fc_dim + fv_dim, paper_size);
    spec.output_dim = 3;
    spec.output_activation = OutputActivation::Tanh01;
    return spec;
}

// Scratch for one forward/backward pass; reuse across points.
struct Workspace {
    std::vector<double> v0;
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> act;   // post-activation per layer
    std::vector<std::vector<double>> d_act; // backward scratch
    std::vector<double> d_v0;
};

// Fully-connected implicit field with explicit reverse-mode gradients.
// Parameters live in one contiguous buffer (layer-major W then b) so the
// optimizers, checkpoints, and checksums all share one canonical layout.
class FieldNet {
public:
    struct Layer {
        int in = 0, out = 0;
        std::size_t w_off = 0, b_off = 0;
        bool skip = false; // consumes concat(prev, v0)
    };

    FieldNet() = default;

    explicit FieldNet(MlpSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        int prev = spec_.input_dim;
        std::size_t off = 0;
        int n_hidden = int(spec_.hidden_widths.size());
        for (int l = 0; l < n_hidden; ++l) {
            Layer layer;
            layer.skip = spec_.has_skip(l);
            layer.in = prev + (layer.skip ? spec_.input_dim : 0);
            layer.out = spec_.hidden_widths[l];
            layer.w_off = off;
            off += std::size_t(layer.in) * layer.out;
            layer.b_off = off;
            off += layer.out;
            layers_.push_back(layer);
            prev = layer.out;
        }
        Layer out_layer;
        out_layer.in = prev;
        out_layer.out = spec_.output_dim;
        out_layer.w_off = off;
        off += std::size_t(out_layer.in) * out_layer.out;
        out_layer.b_off = off;
        off += out_layer.out;
        layers_.push_back(out_layer);
        params_.assign(off, 0.0);
    }

    const MlpSpec& spec() const { return spec_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }
    int n_hidden() const { return int(spec_.hidden_widths.size()); }

    void init_params(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "mlp-init"));
        for (const auto& layer : layers_) {
            double bound = std::sqrt(6.0 / double(layer.in + layer.out));
            for (std::size_t i = 0; i < std::size_t(layer.in) * layer.out; ++i)
                params_[layer.w_off + i] = rng.uniform(-bound, bound);
            for (int i = 0; i < layer.out; ++i) params_[layer.b_off + i] = 0.0;
        }
    }

    // ---- forward ----

    void prepare(Workspace& ws) const {
        ws.v0.resize(spec_.input_dim);
        ws.pre.resize(layers_.size());
        ws.act.resize(layers_.size());
        ws.d_act.resize(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            ws.pre[l].resize(layers_[l].out);
            ws.act[l].resize(layers_[l].out);
            ws.d_act[l].resize(layers_[l].out);
        }
        ws.d_v0.resize(spec_.input_dim);
    }

    // Input = concat(feature, z). Output written to ws.act.back().
    std::span<const double> forward(std::span<const double> feature, double z,
                                    Workspace& ws) const {
        if (int(feature.size()) + 1 != spec_.input_dim)
            throw Error("field forward: feature length mismatch");
        prepare(ws);
        std::copy(feature.begin(), feature.end(), ws.v0.begin());
        ws.v0.back() = z;
        run_layers(ws, 0, int(layers_.size()), ws.v0.data());
        return ws.act.back();
    }

    // Activation after hidden layer spec_.embed_layer.
    std::span<const double> embed(std::span<const double> feature, double z,
                                  Workspace& ws) const {
        if (spec_.embed_layer < 0) throw Error("field embed: embed_layer unset");
        if (int(feature.size()) + 1 != spec_.input_dim)
            throw Error("field embed: feature length mismatch");
        prepare(ws);
        std::copy(feature.begin(), feature.end(), ws.v0.begin());
        ws.v0.back() = z;
        run_layers(ws, 0, spec_.embed_layer + 1, ws.v0.data());
        return ws.act[spec_.embed_layer];
    }

    // Multi-view forward: per-view embeddings and raw inputs are mean-pooled,
    // then the tail layers run once on the pooled values. The skip paths past
    // the pooling point consume the pooled raw input. A single view
    // reproduces forward() exactly (mean of one is the identity).
    std::span<const double> fuse_forward(std::span<const std::vector<double>> view_inputs,
                                         std::vector<Workspace>& view_ws,
                                         Workspace& tail_ws) const {
        if (spec_.embed_layer < 0) throw Error("fuse_forward: embed_layer unset");
        if (view_inputs.empty()) throw Error("fuse_forward: no views");
        int e = spec_.embed_layer;
        std::size_t n = view_inputs.size();
        view_ws.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            if (int(view_inputs[v].size()) != spec_.input_dim)
                throw Error("fuse_forward: view input length mismatch");
            prepare(view_ws[v]);
            std::copy(view_inputs[v].begin(), view_inputs[v].end(), view_ws[v].v0.begin());
            run_layers(view_ws[v], 0, e + 1, view_ws[v].v0.data());
        }
        prepare(tail_ws);
        // Pooled raw input and pooled embedding.
        std::fill(tail_ws.v0.begin(), tail_ws.v0.end(), 0.0);
        std::fill(tail_ws.act[e].begin(), tail_ws.act[e].end(), 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            for (int i = 0; i < spec_.input_dim; ++i) tail_ws.v0[i] += view_ws[v].v0[i];
            for (int i = 0; i < layers_[e].out; ++i) tail_ws.act[e][i] += view_ws[v].act[e][i];
        }
        double inv = 1.0 / double(n);
        for (auto& x : tail_ws.v0) x *= inv;
        for (auto& x : tail_ws.act[e]) x *= inv;
        run_layers(tail_ws, e + 1, int(layers_.size()), tail_ws.v0.data());
        return tail_ws.act.back();
    }

    // ---- backward ----

    // Reverse pass over a forward() workspace. Accumulates parameter
    // gradients into grad (params layout) and, when d_input is non-null, the
    // gradient w.r.t. concat(feature, z) into it (overwritten).
    void backward(Workspace& ws, std::span<const double> d_output, double* grad,
                  double* d_input = nullptr) const {
        std::copy(d_output.begin(), d_output.end(), ws.d_act.back().begin());
        std::fill(ws.d_v0.begin(), ws.d_v0.end(), 0.0);
        back_layers(ws, int(layers_.size()), 0, grad, ws.v0.data());
        if (d_input)
            std::copy(ws.d_v0.begin(), ws.d_v0.end(), d_input);
    }

    // Reverse pass matching fuse_forward. d_view_inputs (optional) receives
    // per-view gradients w.r.t. concat(feature, z).
    void fuse_backward(std::vector<Workspace>& view_ws, Workspace& tail_ws,
                       std::span<const double> d_output, double* grad,
                       std::vector<std::vector<double>>* d_view_inputs = nullptr) const {
        int e = spec_.embed_layer;
        std::size_t n = view_ws.size();
        std::copy(d_output.begin(), d_output.end(), tail_ws.d_act.back().begin());
        std::fill(tail_ws.d_v0.begin(), tail_ws.d_v0.end(), 0.0);
        back_layers(tail_ws, int(layers_.size()), e + 1, grad, tail_ws.v0.data());
        // tail_ws.d_act[e] = d(loss)/d(pooled embedding);
        // tail_ws.d_v0    = d(loss)/d(pooled raw input).
        double inv = 1.0 / double(n);
        if (d_view_inputs) d_view_inputs->resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            for (int i = 0; i < layers_[e].out; ++i)
                view_ws[v].d_act[e][i] = tail_ws.d_act[e][i] * inv;
            std::fill(view_ws[v].d_v0.begin(), view_ws[v].d_v0.end(), 0.0);
            back_layers(view_ws[v], e + 1, 0, grad, view_ws[v].v0.data());
            for (int i = 0; i < spec_.input_dim; ++i)
                view_ws[v].d_v0[i] += tail_ws.d_v0[i] * inv;
            if (d_view_inputs) (*d_view_inputs)[v] = view_ws[v].d_v0;
        }
    }

private:
    // Hidden layers [lo, hi) plus the output layer when hi == layer count.
    // skip_src supplies the skip concat (v0, or the pooled v0 in the fused
    // tail). Layer 0 reads ws.v0 directly.
    void run_layers(Workspace& ws, int lo, int hi, const double* skip_src) const {
        int n_hid = n_hidden();
        for (int l = lo; l < hi; ++l) {
            const Layer& layer = layers_[l];
            const double* prev = l == 0 ? ws.v0.data() : ws.act[l - 1].data();
            int prev_n = l == 0 ? spec_.input_dim : layers_[l - 1].out;
            const double* w = params_.data() + layer.w_off;
            const double* b = params_.data() + layer.b_off;
            double* pre = ws.pre[l].data();
            for (int k = 0; k < layer.out; ++k) {
                const double* row = w + std::size_t(k) * layer.in;
                double acc = b[k];
                for (int i = 0; i < prev_n; ++i) acc += row[i] * prev[i];
                if (layer.skip) {
                    const double* srow = row + prev_n;
                    for (int i = 0; i < spec_.input_dim; ++i) acc += srow[i] * skip_src[i];
                }
                pre[k] = acc;
            }
            double* act = ws.act[l].data();
            if (l < n_hid) {
                double slope = spec_.leaky_slope;
                for (int k = 0; k < layer.out; ++k)
                    act[k] = pre[k] > 0.0 ? pre[k] : slope * pre[k];
            } else if (spec_.output_activation == OutputActivation::Sigmoid) {
                for (int k = 0; k < layer.out; ++k) act[k] = 1.0 / (1.0 + std::exp(-pre[k]));
            } else {
                for (int k = 0; k < layer.out; ++k) act[k] = 0.5 * (std::tanh(pre[k]) + 1.0);
            }
        }
    }

    // Reverse of run_layers over layers [lo, hi) walked downward; expects
    // ws.d_act[hi-1] seeded. Skip-path input gradients accumulate into
    // ws.d_v0. grad uses the params layout.
    void back_layers(Workspace& ws, int hi, int lo, double* grad, const double* skip_src) const {
        int n_hid = n_hidden();
        for (int l = hi - 1; l >= lo; --l) {
            const Layer& layer = layers_[l];
            const double* d_act = ws.d_act[l].data();
            const double* pre = ws.pre[l].data();
            const double* act = ws.act[l].data();
            // d_pre = d_act * act'(pre), computed in place into a small stack
            // buffer free manner: reuse ws.pre? keep separate: write into d_act.
            double* d_pre = ws.d_act[l].data();
            if (l < n_hid) {
                double slope = spec_.leaky_slope;
                for (int k = 0; k < layer.out; ++k)
                    d_pre[k] = d_act[k] * (pre[k] > 0.0 ? 1.0 : slope);
            } else if (spec_.output_activation == OutputActivation::Sigmoid) {
                for (int k = 0; k < layer.out; ++k)
                    d_pre[k] = d_act[k] * act[k] * (1.0 - act[k]);
            } else {
                for (int k = 0; k < layer.out; ++k)
                    d_pre[k] = d_act[k] * 2.0 * act[k] * (1.0 - act[k]);
            }
            const double* prev = l == 0 ? ws.v0.data() : ws.act[l - 1].data();
            int prev_n = l == 0 ? spec_.input_dim : layers_[l - 1].out;
            double* d_prev = l == 0 ? ws.d_v0.data() : ws.d_act[l - 1].data();
            if (l > 0) std::fill(ws.d_act[l - 1].begin(), ws.d_act[l - 1].end(), 0.0);
            const double* w = params_.data() + layer.w_off;
            double* gw = grad + layer.w_off;
            double* gb = grad + layer.b_off;
            for (int k = 0; k < layer.out; ++k) {
                double g = d_pre[k];
                if (g == 0.0) continue;
                const double* row = w + std::size_t(k) * layer.in;
                double* grow = gw + std::size_t(k) * layer.in;
                for (int i = 0; i < prev_n; ++i) {
                    grow[i] += g * prev[i];
                    d_prev[i] += g * row[i];
                }
                if (layer.skip) {
                    const double* srow = row + prev_n;
                    double* gsrow = grow + prev_n;
                    for (int i = 0; i < spec_.input_dim; ++i) {
                        gsrow[i] += g * skip_src[i];
                        ws.d_v0[i] += g * srow[i];
                    }
                }
                gb[k] += g;
            }
        }
    }

    MlpSpec spec_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

// ---- spec / parameter serialization ----

inline nlohmann::json mlp_spec_to_json(const MlpSpec& spec) {
    return {
        {"input_dim", spec.input_dim},
        {"hidden_widths", spec.hidden_widths},
        {"output_dim", spec.output_dim},
        {"leaky_slope", spec.leaky_slope},
        {"output_activation",
         spec.output_activation == OutputActivation::Sigmoid ? "sigmoid" : "tanh01"},
        {"skip_layers", spec.skip_layers},
        {"embed_layer", spec.embed_layer},
    };
}

inline MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
    spec.output_dim = j.at("output_dim").get<int>();
    spec.leaky_slope = j.at("leaky_slope").get<double>();
    std::string act = j.at("output_activation").get<std::string>();
    if (act == "sigmoid")
        spec.output_activation = OutputActivation::Sigmoid;
    else if (act == "tanh01")
        spec.output_activation = OutputActivation::Tanh01;
    else
        throw Error("unknown output activation: " + act);
    spec.skip_layers = j.at("skip_layers").get<std::vector<int>>();
    spec.embed_layer = j.at("embed_layer").get<int>();
    spec.validate();
    return spec;
}

} // namespace pifield
