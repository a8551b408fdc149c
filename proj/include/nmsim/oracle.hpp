#pragma once

#include <utility>
#include <vector>

#include "nmsim/model.hpp"

namespace nmsim {

// Multiply-accumulate bookkeeping for one layer or a whole inference.
// total_macs counts every tap of every window, including taps that fell on
// zero padding; effective_macs counts only in-bounds taps. The closed-form
// requirement figure published for a model sits between the two, so both are
// always reported.
struct MacCount {
    uint64_t total_macs = 0;
    uint64_t effective_macs = 0;

    MacCount& operator+=(const MacCount& o) {
        total_macs += o.total_macs;
        effective_macs += o.effective_macs;
        return *this;
    }
};

// Closed-form multiplication requirement of a layer: C * F * Wout * Hout * k^2,
// with F = 1 for depthwise layers. Output positions are counted so stride-2
// layers are not inflated.
inline uint64_t count_mul_eq2(const LayerSpec& l) {
    return uint64_t(l.c_in) * l.f_out * l.w_out * l.h_out * l.k * l.k;
}

// Reference convolution: the deliberately naive quadruple loop over
// (f, y, x, c, j, i) with centered windows and out-of-bounds taps read as
// zero. This is the ground truth the cycle-level executor must match
// bit-exactly; no fast path belongs here.
inline std::pair<FeatureMapTensor, MacCount> conv_layer_ref(const FeatureMapTensor& input,
                                                            const LayerSpec& layer,
                                                            const WeightStore& weights,
                                                            const NumericProfile& profile) {
    if (input.c != layer.c_in || input.w != layer.w_in || input.h != layer.h_in)
        throw ShapeError("layer " + std::to_string(layer.index) + ": input tensor is " +
                         std::to_string(input.c) + "x" + std::to_string(input.w) + "x" +
                         std::to_string(input.h) + ", expected " + std::to_string(layer.c_in) + "x" +
                         std::to_string(layer.w_in) + "x" + std::to_string(layer.h_in));

    const int half = int(layer.k) / 2;
    const int s = int(layer.stride);
    const RequantParams& rq = profile.requant(layer.index);
    const acc_t lo = profile.acc_min(), hi = profile.acc_max();
    const bool depthwise = layer.kind == LayerKind::Dw3x3;

    FeatureMapTensor out(layer.output_maps(), layer.w_out, layer.h_out);
    MacCount mc;

    for (uint32_t f = 0; f < out.c; ++f) {
        const uint32_t c_first = depthwise ? f : 0;
        const uint32_t c_last = depthwise ? f + 1 : layer.c_in;
        const uint32_t wf = f;  // for depthwise the filter axis is the channel axis
        for (uint32_t y = 0; y < layer.h_out; ++y) {
            for (uint32_t x = 0; x < layer.w_out; ++x) {
                acc_t acc = 0;
                for (uint32_t c = c_first; c < c_last; ++c) {
                    for (int j = -half; j <= half; ++j) {
                        for (int i = -half; i <= half; ++i) {
                            ++mc.total_macs;
                            int sx = s * int(x) + i;
                            int sy = s * int(y) + j;
                            if (sx < 0 || sy < 0 || sx >= int(layer.w_in) || sy >= int(layer.h_in))
                                continue;  // zero-padded tap: multiplies 0, contributes nothing
                            ++mc.effective_macs;
                            int32_t wv = weights.weight(layer, wf, depthwise ? 0 : c,
                                                        uint32_t(j + half), uint32_t(i + half));
                            acc += acc_t(input.at(c, uint32_t(sx), uint32_t(sy))) * wv;
                            if (acc < lo || acc > hi)
                                throw OverflowError("layer " + std::to_string(layer.index) +
                                                    ": accumulator overflow at (" + std::to_string(x) +
                                                    "," + std::to_string(y) + ")");
                        }
                    }
                }
                out.set(f, x, y, su_apply(acc, layer.has_bias ? weights.bias(layer, wf) : 0,
                                          layer.activation, rq, profile));
            }
        }
    }
    return {std::move(out), mc};
}

// Layer-by-layer reference inference. Outputs of every layer are kept so
// detection-head branches can read earlier maps and so callers can compare
// each layer against the executor.
inline std::pair<std::vector<FeatureMapTensor>, MacCount> infer_ref(const CnnModel& model,
                                                                    const WeightStore& weights,
                                                                    const FeatureMapTensor& image,
                                                                    const NumericProfile& profile) {
    std::vector<FeatureMapTensor> outs;
    outs.reserve(model.layers.size());
    MacCount agg;
    for (const LayerSpec& l : model.layers) {
        uint32_t src = model.input_of(l.index);
        const FeatureMapTensor& in = src == 0 ? image : outs.at(src - 1);
        auto [out, mc] = conv_layer_ref(in, l, weights, profile);
        agg += mc;
        outs.push_back(std::move(out));
    }
    return {std::move(outs), agg};
}

} // namespace nmsim
