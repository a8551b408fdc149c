#pragma once

#include <string>

#include "nmsim/fuzzgen.hpp"
#include "nmsim/model.hpp"
#include "nmsim/model_io.hpp"

namespace testutil {

inline const std::string kDataDir = NMSIM_DATA_DIR;

inline nmsim::LayerSpec layer(uint32_t index, nmsim::LayerKind kind, uint32_t w_in, uint32_t h_in,
                              uint32_t c_in, uint32_t f_out, uint32_t stride = 1,
                              nmsim::Activation act = nmsim::Activation::None, bool bias = false) {
    nmsim::LayerSpec l;
    l.index = index;
    l.kind = kind;
    l.k = kind == nmsim::LayerKind::Conv1x1 ? 1 : 3;
    l.stride = stride;
    l.w_in = w_in;
    l.h_in = h_in;
    l.w_out = uint32_t(nmsim::ceil_div(w_in, stride));
    l.h_out = uint32_t(nmsim::ceil_div(h_in, stride));
    l.c_in = c_in;
    l.f_out = kind == nmsim::LayerKind::Dw3x3 ? 1 : f_out;
    l.activation = act;
    l.has_bias = bias;
    return l;
}

inline nmsim::CnnModel chain(std::vector<nmsim::LayerSpec> layers, const std::string& name = "test") {
    nmsim::CnnModel m;
    m.name = name;
    m.layers = std::move(layers);
    return m;
}

// Constant-filled weights for simple hand-checked cases.
inline nmsim::WeightStore const_weights(const nmsim::CnnModel& model, int8_t w, int32_t bias = 0) {
    nmsim::WeightStore ws;
    for (const nmsim::LayerSpec& l : model.layers) {
        nmsim::WeightStore::LayerWeights lw;
        lw.weights.assign(l.weight_count(), w);
        if (l.has_bias) lw.biases.assign(l.filter_count(), bias);
        ws.layers.push_back(std::move(lw));
    }
    return ws;
}

inline nmsim::FeatureMapTensor ramp_tensor(uint32_t c, uint32_t w, uint32_t h, int32_t start = 1) {
    nmsim::FeatureMapTensor t(c, w, h);
    int32_t v = start;
    for (nmsim::act_t& d : t.data) d = v++ % 97;  // keep values small
    return t;
}

} // namespace testutil
