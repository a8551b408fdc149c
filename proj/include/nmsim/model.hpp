#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmsim/common.hpp"

namespace nmsim {

using act_t = int32_t;  // activation word as stored in feature-map memory
using acc_t = int64_t;  // accumulator word (checked against NumericProfile)

enum class LayerKind : uint8_t { Std3x3 = 0, Dw3x3 = 1, Conv1x1 = 2 };
enum class Activation : uint8_t { None = 0, ReLU = 1, ReLU6 = 2 };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Std3x3: return "Std3x3";
        case LayerKind::Dw3x3: return "Dw3x3";
        case LayerKind::Conv1x1: return "Conv1x1";
    }
    return "?";
}

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::None: return "None";
        case Activation::ReLU: return "ReLU";
        case Activation::ReLU6: return "ReLU6";
    }
    return "?";
}

// One convolution layer. For Dw3x3 the f_out field is 1 (one filter per input
// channel); the layer still produces c_in output maps.
struct LayerSpec {
    uint32_t index = 0;  // 1-based position in the model
    LayerKind kind = LayerKind::Conv1x1;
    uint32_t w_in = 0, h_in = 0;
    uint32_t w_out = 0, h_out = 0;
    uint32_t c_in = 0;
    uint32_t f_out = 0;
    uint32_t k = 1;
    uint32_t stride = 1;
    Activation activation = Activation::None;
    bool has_bias = true;
    // Producing layer for this layer's input (1-based); 0 = the external
    // image, unset = the previous layer. Detection-head branches need this.
    std::optional<uint32_t> input_layer;

    uint32_t output_maps() const { return kind == LayerKind::Dw3x3 ? c_in : f_out; }
    uint64_t out_positions() const { return uint64_t(w_out) * h_out; }
    uint64_t in_positions() const { return uint64_t(w_in) * h_in; }
    // Filter count along the weight-store f axis (collapses to c_in for Dw3x3).
    uint32_t filter_count() const { return kind == LayerKind::Dw3x3 ? c_in : f_out; }
    uint32_t channels_per_filter() const { return kind == LayerKind::Dw3x3 ? 1 : c_in; }
    uint64_t weight_count() const {
        return uint64_t(filter_count()) * channels_per_filter() * k * k;
    }
};

struct CnnModel {
    std::string name;
    std::vector<LayerSpec> layers;

    const LayerSpec& layer(uint32_t index1) const { return layers.at(index1 - 1); }
    // Resolved input source of layer i (1-based): 0 means the input image.
    uint32_t input_of(uint32_t index1) const {
        const LayerSpec& l = layers.at(index1 - 1);
        return l.input_layer ? *l.input_layer : index1 - 1;
    }
};

// Per-layer requantization: acc -> activation by multiply and rounding right
// shift, with the ReLU6 clamp level expressed in accumulator units.
struct RequantParams {
    int32_t mult = 1;
    uint32_t rshift = 0;
    acc_t relu6_cap = std::numeric_limits<acc_t>::max();
};

struct NumericProfile {
    uint32_t activation_bits = 8;
    uint32_t weight_bits = 8;
    uint32_t accumulator_bits = 32;
    std::vector<RequantParams> requantize;  // one entry per layer; empty = identity
    std::string name = "quant8";

    act_t act_min() const {
        return activation_bits >= 32 ? std::numeric_limits<act_t>::min()
                                     : -(act_t(1) << (activation_bits - 1));
    }
    act_t act_max() const {
        return activation_bits >= 32 ? std::numeric_limits<act_t>::max()
                                     : (act_t(1) << (activation_bits - 1)) - 1;
    }
    int32_t weight_min() const { return -(int32_t(1) << (weight_bits - 1)); }
    int32_t weight_max() const { return (int32_t(1) << (weight_bits - 1)) - 1; }
    acc_t acc_min() const {
        return accumulator_bits >= 64 ? std::numeric_limits<acc_t>::min()
                                      : -(acc_t(1) << (accumulator_bits - 1));
    }
    acc_t acc_max() const {
        return accumulator_bits >= 64 ? std::numeric_limits<acc_t>::max()
                                      : (acc_t(1) << (accumulator_bits - 1)) - 1;
    }
    acc_t bias_cap() const { return (acc_t(1) << (activation_bits + weight_bits - 1)) - 1; }

    const RequantParams& requant(uint32_t layer_index1) const {
        static const RequantParams identity{};
        if (requantize.empty()) return identity;
        return requantize.at(layer_index1 - 1);
    }

    // 8-bit activations/weights, 32-bit accumulators, per-layer shift chosen
    // so a worst-case accumulation lands back in the activation range.
    static NumericProfile quant8(const CnnModel& model) {
        NumericProfile p;
        p.requantize.reserve(model.layers.size());
        for (const LayerSpec& l : model.layers) {
            RequantParams r;
            uint64_t worst = uint64_t(l.c_in) * l.k * l.k;  // sum terms per output
            uint32_t shift = 0;
            while ((worst >> shift) > 1) ++shift;  // ~log2(C*k*k)
            r.mult = 1;
            r.rshift = shift + 7;
            r.relu6_cap = acc_t(p.act_max()) << r.rshift;
            p.requantize.push_back(r);
        }
        return p;
    }

    // 32-bit activations, 64-bit accumulators, no requantization; used for
    // padding/count studies where saturation would get in the way.
    static NumericProfile wide(const CnnModel& model) {
        NumericProfile p;
        p.activation_bits = 32;
        p.weight_bits = 8;
        p.accumulator_bits = 64;
        p.requantize.assign(model.layers.size(), RequantParams{});
        p.name = "wide";
        return p;
    }
};

// C feature maps of W x H words, planar layout (c-major, then rows).
struct FeatureMapTensor {
    uint32_t c = 0, w = 0, h = 0;
    std::vector<act_t> data;

    FeatureMapTensor() = default;
    FeatureMapTensor(uint32_t c_, uint32_t w_, uint32_t h_)
        : c(c_), w(w_), h(h_), data(size_t(c_) * w_ * h_, 0) {}

    size_t idx(uint32_t ch, uint32_t x, uint32_t y) const {
        return (size_t(ch) * h + y) * w + x;
    }
    // In-bounds access only; zero extension is the masking circuit's job.
    act_t at(uint32_t ch, uint32_t x, uint32_t y) const {
        if (ch >= c || x >= w || y >= h) throw ShapeError("tensor index out of range");
        return data[idx(ch, x, y)];
    }
    void set(uint32_t ch, uint32_t x, uint32_t y, act_t v) {
        if (ch >= c || x >= w || y >= h) throw ShapeError("tensor index out of range");
        data[idx(ch, x, y)] = v;
    }
    bool operator==(const FeatureMapTensor& o) const {
        return c == o.c && w == o.w && h == o.h && data == o.data;
    }
};

// Weights w[f][c][j][i] and biases b[f] for every layer, as signed integers.
struct WeightStore {
    struct LayerWeights {
        std::vector<int8_t> weights;  // [f][c][j][i], j = row
        std::vector<int32_t> biases;  // [f]; empty when the layer has no bias
    };
    std::vector<LayerWeights> layers;

    int32_t weight(const LayerSpec& l, uint32_t f, uint32_t cw, uint32_t j, uint32_t i) const {
        const LayerWeights& lw = layers.at(l.index - 1);
        size_t at = ((size_t(f) * l.channels_per_filter() + cw) * l.k + j) * l.k + i;
        return lw.weights.at(at);
    }
    int32_t bias(const LayerSpec& l, uint32_t f) const {
        const LayerWeights& lw = layers.at(l.index - 1);
        return lw.biases.empty() ? 0 : lw.biases.at(f);
    }
};

// Rounding right shift, half away from zero.
inline acc_t requant_shift(acc_t v, uint32_t shift) {
    if (shift == 0) return v;
    acc_t bias = acc_t(1) << (shift - 1);
    return v >= 0 ? (v + bias) >> shift : -((-v + bias) >> shift);
}

// Post-accumulation path shared by the reference convolution and the SU:
// bias add, activation in the accumulator domain, then requantization and a
// clamp to the activation range.
inline act_t su_apply(acc_t netsum, int32_t bias, Activation act, const RequantParams& rq,
                      const NumericProfile& profile) {
    acc_t v = netsum + bias;
    switch (act) {
        case Activation::None: break;
        case Activation::ReLU: v = std::max<acc_t>(v, 0); break;
        case Activation::ReLU6: v = std::clamp<acc_t>(v, 0, rq.relu6_cap); break;
    }
    acc_t q = requant_shift(acc_t(v) * rq.mult, rq.rshift);
    q = std::clamp<acc_t>(q, profile.act_min(), profile.act_max());
    return static_cast<act_t>(q);
}

struct Diagnostic {
    uint32_t layer_index = 0;  // 0 = model-level
    std::string message;
};

namespace detail {

inline void check_layer_shape(const LayerSpec& l, std::vector<Diagnostic>& out) {
    auto bad = [&](const std::string& m) { out.push_back({l.index, m}); };
    uint32_t want_k = l.kind == LayerKind::Conv1x1 ? 1 : 3;
    if (l.k != 1 && l.k != 3) {
        bad("no hardware configuration for k=" + std::to_string(l.k));
    } else if (l.k != want_k) {
        bad(std::string("kind ") + to_string(l.kind) + " requires k=" + std::to_string(want_k));
    }
    if (l.stride != 1 && l.stride != 2) bad("stride must be 1 or 2");
    if (l.c_in < 1) bad("c_in must be >= 1");
    if (l.f_out < 1) bad("f_out must be >= 1");
    if (l.kind == LayerKind::Dw3x3 && l.f_out != 1) bad("Dw3x3 declares one filter per channel (f_out must be 1)");
    if (l.w_in < 1 || l.h_in < 1) bad("input size must be >= 1");
    if (l.stride > 0) {
        uint32_t wo = uint32_t(ceil_div(l.w_in, l.stride));
        uint32_t ho = uint32_t(ceil_div(l.h_in, l.stride));
        if (l.w_out != wo || l.h_out != ho)
            bad("output size must be ceil(input/stride): expected " + std::to_string(wo) + "x" +
                std::to_string(ho) + ", got " + std::to_string(l.w_out) + "x" + std::to_string(l.h_out));
    }
}

} // namespace detail

// Structural diagnostics: per-layer invariants plus inter-layer chaining.
inline std::vector<Diagnostic> check_model_shape(const CnnModel& model) {
    std::vector<Diagnostic> diags;
    for (size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        if (l.index != i + 1)
            diags.push_back({uint32_t(i + 1), "layer index must be " + std::to_string(i + 1)});
        detail::check_layer_shape(l, diags);
        uint32_t src = l.input_layer ? *l.input_layer : uint32_t(i);
        if (src > i) {
            diags.push_back({l.index, "input layer " + std::to_string(src) + " is not an earlier layer"});
            continue;
        }
        if (src == 0) {
            // every image consumer must agree with layer 1 on the image shape
            const LayerSpec& first = model.layers.front();
            if (i > 0 && (l.c_in != first.c_in || l.w_in != first.w_in || l.h_in != first.h_in))
                diags.push_back({l.index, "reads the input image with a shape different from layer 1"});
            continue;
        }
        const LayerSpec& p = model.layers[src - 1];
        if (p.output_maps() != l.c_in)
            diags.push_back({l.index, "c_in=" + std::to_string(l.c_in) + " but layer " +
                                          std::to_string(src) + " produces " +
                                          std::to_string(p.output_maps()) + " maps"});
        if (p.w_out != l.w_in || p.h_out != l.h_in)
            diags.push_back({l.index, "input size " + std::to_string(l.w_in) + "x" + std::to_string(l.h_in) +
                                          " but layer " + std::to_string(src) + " outputs " +
                                          std::to_string(p.w_out) + "x" + std::to_string(p.h_out)});
    }
    return diags;
}

// Full validation: shape invariants plus the accumulator-overflow bound
// (worst-case |sum of C*k*k products| + bias headroom must fit the
// accumulator). Returns diagnostics instead of throwing.
inline std::vector<Diagnostic> validate_model(const CnnModel& model, const NumericProfile& profile) {
    std::vector<Diagnostic> diags = check_model_shape(model);
    if (!profile.requantize.empty() && profile.requantize.size() != model.layers.size())
        diags.push_back({0, "profile declares " + std::to_string(profile.requantize.size()) +
                                " requantize entries for " + std::to_string(model.layers.size()) + " layers"});
    acc_t max_in = std::max<acc_t>(-acc_t(profile.act_min()), profile.act_max());
    acc_t max_w = std::max<acc_t>(-acc_t(profile.weight_min()), profile.weight_max());
    for (const LayerSpec& l : model.layers) {
        // products are exact; only the running sum can overflow
        long double worst = (long double)max_in * max_w * l.c_in * l.k * l.k + (long double)profile.bias_cap();
        if (worst > (long double)profile.acc_max())
            diags.push_back({l.index, "accumulator_bits=" + std::to_string(profile.accumulator_bits) +
                                          " cannot hold worst-case sum of " + std::to_string(l.c_in) + "*" +
                                          std::to_string(l.k * l.k) + " products"});
    }
    return diags;
}

} // namespace nmsim
