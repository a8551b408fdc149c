#pragma once

#include <random>
#include <string>
#include <vector>

#include "nmsim/model_io.hpp"
#include "nmsim/oracle.hpp"
#include "nmsim/sot_control.hpp"

namespace nmsim {

// Deterministic bounded draws. Modulo bias is irrelevant here and, unlike
// std::uniform_int_distribution, the sequence is identical on every platform,
// which the reproducibility contract of seeded runs depends on.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}
    uint64_t next() { return eng_(); }
    int64_t range(int64_t lo, int64_t hi) {  // inclusive
        return lo + int64_t(eng_() % uint64_t(hi - lo + 1));
    }

private:
    std::mt19937_64 eng_;
};

struct FuzzCase {
    CnnModel model;
    WeightStore weights;
    RawImage image;
};

// Random small model: 1..4 chained layers, k in {1,3}, stride in {1,2},
// channels and maps up to 64, maps up to 32x32.
inline CnnModel random_model(Rng& rng, uint32_t max_layers = 4) {
    CnnModel m;
    m.name = "fuzz";
    uint32_t n = uint32_t(rng.range(1, max_layers));
    uint32_t w = uint32_t(rng.range(1, 32));
    uint32_t h = uint32_t(rng.range(1, 32));
    uint32_t c = uint32_t(rng.range(1, 64));
    for (uint32_t i = 1; i <= n; ++i) {
        LayerSpec l;
        l.index = i;
        switch (rng.range(0, 2)) {
            case 0: l.kind = LayerKind::Std3x3; break;
            case 1: l.kind = LayerKind::Dw3x3; break;
            default: l.kind = LayerKind::Conv1x1; break;
        }
        l.k = l.kind == LayerKind::Conv1x1 ? 1 : 3;
        l.stride = uint32_t(rng.range(1, 2));
        l.w_in = w; l.h_in = h;
        l.w_out = uint32_t(ceil_div(w, l.stride));
        l.h_out = uint32_t(ceil_div(h, l.stride));
        l.c_in = c;
        l.f_out = l.kind == LayerKind::Dw3x3 ? 1 : uint32_t(rng.range(1, 64));
        l.activation = Activation(rng.range(0, 2));
        l.has_bias = rng.range(0, 1) == 1;
        m.layers.push_back(l);
        w = l.w_out; h = l.h_out; c = l.output_maps();
    }
    return m;
}

inline WeightStore random_weights(Rng& rng, const CnnModel& model, const NumericProfile& profile) {
    WeightStore ws;
    for (const LayerSpec& l : model.layers) {
        WeightStore::LayerWeights lw;
        lw.weights.resize(l.weight_count());
        for (int8_t& w : lw.weights)
            w = int8_t(rng.range(profile.weight_min(), profile.weight_max()));
        if (l.has_bias) {
            lw.biases.resize(l.filter_count());
            // bias at product scale, inside the validated headroom
            int64_t cap = std::min<int64_t>(profile.bias_cap(), 32767);
            for (int32_t& b : lw.biases) b = int32_t(rng.range(-cap, cap));
        }
        ws.layers.push_back(std::move(lw));
    }
    return ws;
}

inline RawImage random_image(Rng& rng, const CnnModel& model) {
    const LayerSpec& first = model.layers.front();
    RawImage img;
    img.c = first.c_in; img.w = first.w_in; img.h = first.h_in;
    img.planar.resize(size_t(img.c) * img.w * img.h);
    for (uint8_t& b : img.planar) b = uint8_t(rng.range(0, 255));
    return img;
}

inline FuzzCase random_case(uint64_t seed) {
    Rng rng(seed);
    FuzzCase fc;
    fc.model = random_model(rng);
    NumericProfile p = NumericProfile::quant8(fc.model);
    fc.weights = random_weights(rng, fc.model, p);
    fc.image = random_image(rng, fc.model);
    return fc;
}

// Fault-injected reference: masking shifted one column to the right. Used
// only to prove the fuzz harness notices a masking off-by-one; any 3x3 layer
// with real borders then disagrees with the executor.
inline FeatureMapTensor conv_layer_ref_mask_skewed(const FeatureMapTensor& input, const LayerSpec& layer,
                                                   const WeightStore& weights,
                                                   const NumericProfile& profile) {
    const int half = int(layer.k) / 2;
    const int s = int(layer.stride);
    const RequantParams& rq = profile.requant(layer.index);
    const bool depthwise = layer.kind == LayerKind::Dw3x3;
    FeatureMapTensor out(layer.output_maps(), layer.w_out, layer.h_out);
    for (uint32_t f = 0; f < out.c; ++f) {
        uint32_t c_first = depthwise ? f : 0;
        uint32_t c_last = depthwise ? f + 1 : layer.c_in;
        for (uint32_t y = 0; y < layer.h_out; ++y)
            for (uint32_t x = 0; x < layer.w_out; ++x) {
                acc_t acc = 0;
                for (uint32_t c = c_first; c < c_last; ++c)
                    for (int j = -half; j <= half; ++j)
                        for (int i = -half; i <= half; ++i) {
                            int sx = s * int(x) + i, sy = s * int(y) + j;
                            // the deliberate bug: x bound tested one early
                            if (sx < 1 || sy < 0 || sx >= int(layer.w_in) || sy >= int(layer.h_in))
                                continue;
                            acc += acc_t(input.at(c, uint32_t(sx), uint32_t(sy))) *
                                   weights.weight(layer, f, depthwise ? 0 : c, uint32_t(j + half),
                                                  uint32_t(i + half));
                        }
                out.set(f, x, y, su_apply(acc, layer.has_bias ? weights.bias(layer, f) : 0,
                                          layer.activation, rq, profile));
            }
    }
    return out;
}

struct FuzzResult {
    bool ok = true;
    uint64_t failed_seed = 0;
    std::string profile_name;
    std::string message;
};

struct FuzzOptions {
    bool skew_reference = false;  // fault injection for harness self-checks
};

// One fuzz iteration: compile + execute under both numeric profiles, compare
// every layer bit-exactly against the reference inference, and check the
// cycle-model and peak-partition identities.
inline FuzzResult fuzz_check(const FuzzCase& fc, const HwConfig& hw, uint64_t seed,
                             const FuzzOptions& opts = {}) {
    FuzzResult fr;
    fr.failed_seed = seed;
    SotProgram prog = compile_sot(fc.model, hw);
    for (const std::string& pname : {std::string("quant8"), std::string("wide")}) {
        fr.profile_name = pname;
        NumericProfile profile =
            pname == "quant8" ? NumericProfile::quant8(fc.model) : NumericProfile::wide(fc.model);
        if (!validate_model(fc.model, profile).empty()) {
            fr.ok = false;
            fr.message = "generated model failed validation";
            return fr;
        }
        FeatureMapTensor input = image_to_tensor(fc.image, profile);
        ExecResult er = execute(prog, fc.weights, input, hw, profile);
        auto [refs, macs] = infer_ref(fc.model, fc.weights, input, profile);
        for (size_t i = 0; i < prog.rows.size(); ++i) {
            FeatureMapTensor want = refs[i];
            if (opts.skew_reference) {
                uint32_t src = fc.model.input_of(uint32_t(i + 1));
                const FeatureMapTensor& lin = src == 0 ? input : refs[src - 1];
                want = conv_layer_ref_mask_skewed(lin, fc.model.layers[i], fc.weights, profile);
            }
            if (!(er.outputs[i] == want)) {
                fr.ok = false;
                fr.message = "layer " + std::to_string(i + 1) + " output differs from reference (" +
                             pname + " profile)";
                return fr;
            }
            const LayerStats& ls = er.stats.layers[i];
            if (ls.cycles_b != predict_cycles(prog.rows[i], hw)) {
                fr.ok = false;
                fr.message = "layer " + std::to_string(i + 1) + " executed cycles differ from prediction";
                return fr;
            }
            uint64_t sum = ls.effective_muls_a + ls.internal_frag_slots + ls.padding_slots +
                           ls.external_frag_slots + ls.pipeline_slots;
            if (sum != ls.peak_muls_c) {
                fr.ok = false;
                fr.message = "layer " + std::to_string(i + 1) + " slot tallies do not partition B*m";
                return fr;
            }
        }
    }
    return fr;
}

} // namespace nmsim
