#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nmsim/oracle.hpp"

using namespace nmsim;
using namespace testutil;

TEST_CASE("conv_layer_ref: 1x1 identity kernel") {
    CnnModel m = chain({layer(1, LayerKind::Conv1x1, 5, 3, 1, 1)});
    WeightStore ws = const_weights(m, 1);
    FeatureMapTensor in = ramp_tensor(1, 5, 3);
    NumericProfile p = NumericProfile::wide(m);
    auto [out, mc] = conv_layer_ref(in, m.layer(1), ws, p);
    CHECK(out == in);
    CHECK(mc.total_macs == 15);
    CHECK(mc.effective_macs == 15);
}

TEST_CASE("conv_layer_ref: 3x3 on a 2x2 map, zero padding hand enumeration") {
    CnnModel m = chain({layer(1, LayerKind::Std3x3, 2, 2, 1, 1)});
    WeightStore ws = const_weights(m, 1);
    FeatureMapTensor in(1, 2, 2);
    in.set(0, 0, 0, 3); in.set(0, 1, 0, 5);
    in.set(0, 0, 1, 7); in.set(0, 1, 1, 11);
    NumericProfile p = NumericProfile::wide(m);
    auto [out, mc] = conv_layer_ref(in, m.layer(1), ws, p);
    // every window covers the whole in-bounds map
    for (uint32_t y = 0; y < 2; ++y)
        for (uint32_t x = 0; x < 2; ++x) CHECK(out.at(0, x, y) == 3 + 5 + 7 + 11);
    CHECK(mc.effective_macs == 16);
    CHECK(mc.total_macs == 36);
}

TEST_CASE("conv_layer_ref: depthwise total matches the closed form") {
    // the second reference layer: depthwise 3x3 over 32 maps of 150x150
    CnnModel m = chain({layer(1, LayerKind::Dw3x3, 150, 150, 32, 1)});
    WeightStore ws = const_weights(m, 1);
    FeatureMapTensor in(32, 150, 150);
    NumericProfile p = NumericProfile::wide(m);
    auto [out, mc] = conv_layer_ref(in, m.layer(1), ws, p);
    CHECK(mc.total_macs == 32ull * 9 * 150 * 150);  // 6,480,000
    CHECK(mc.total_macs == 6480000);
    CHECK(out.c == 32);
}

TEST_CASE("conv_layer_ref: shape mismatch") {
    CnnModel m = chain({layer(1, LayerKind::Conv1x1, 5, 3, 2, 1)});
    WeightStore ws = const_weights(m, 1);
    FeatureMapTensor in(1, 5, 3);
    CHECK_THROWS_AS(conv_layer_ref(in, m.layer(1), ws, NumericProfile::wide(m)), ShapeError);
}

TEST_CASE("count_mul_eq2: published magnitudes") {
    // first reference layer counts output positions: 3*32*150*150*9
    CHECK(count_mul_eq2(layer(1, LayerKind::Std3x3, 300, 300, 3, 32, 2)) == 19440000);
    CHECK(count_mul_eq2(layer(1, LayerKind::Conv1x1, 4, 4, 1, 1)) == 16);
    // layer 46 of the reference model
    CHECK(count_mul_eq2(layer(46, LayerKind::Conv1x1, 1, 1, 128, 24)) == 3072);
}

TEST_CASE("count_mul_eq2: closed-form total of the reference model") {
    CnnModel m = load_model_file(kDataDir + "/ssd_mobilenet_v1.json");
    uint64_t total = 0;
    for (const LayerSpec& l : m.layers) total += count_mul_eq2(l);
    // ~1.23 billion multiplications for one inference
    CHECK(total == 1237129408);
    CHECK(std::abs(double(total) - 1.233e9) / 1.233e9 < 0.01);
}

TEST_CASE("infer_ref: two chained identity layers") {
    CnnModel m = chain({layer(1, LayerKind::Conv1x1, 4, 4, 1, 1),
                        layer(2, LayerKind::Conv1x1, 4, 4, 1, 1)});
    WeightStore ws = const_weights(m, 1);
    FeatureMapTensor in = ramp_tensor(1, 4, 4);
    auto [outs, mc] = infer_ref(m, ws, in, NumericProfile::wide(m));
    REQUIRE(outs.size() == 2);
    CHECK(outs[1] == in);
    CHECK(mc.total_macs == 32);
}

TEST_CASE("infer_ref: per-layer shapes follow the model chain") {
    for (uint64_t seed = 7; seed < 27; ++seed) {
        Rng rng(seed);
        CnnModel m = random_model(rng, 3);
        NumericProfile p = NumericProfile::quant8(m);
        WeightStore ws = random_weights(rng, m, p);
        FeatureMapTensor img = image_to_tensor(random_image(rng, m), p);
        auto [outs, mc] = infer_ref(m, ws, img, p);
        REQUIRE(outs.size() == m.layers.size());
        for (size_t i = 0; i < outs.size(); ++i) {
            CHECK(outs[i].c == m.layers[i].output_maps());
            CHECK(outs[i].w == m.layers[i].w_out);
            CHECK(outs[i].h == m.layers[i].h_out);
        }
    }
}

TEST_CASE("property: Eq.-2 consistency of the total MAC count") {
    for (uint64_t seed = 40; seed < 60; ++seed) {
        Rng rng(seed);
        CnnModel m = random_model(rng, 2);
        NumericProfile p = NumericProfile::quant8(m);
        WeightStore ws = random_weights(rng, m, p);
        FeatureMapTensor img = image_to_tensor(random_image(rng, m), p);
        uint32_t src = 0;
        std::vector<FeatureMapTensor> outs;
        for (const LayerSpec& l : m.layers) {
            const FeatureMapTensor& in = src == 0 ? img : outs.back();
            auto [out, mc] = conv_layer_ref(in, l, ws, p);
            CHECK(mc.total_macs == count_mul_eq2(l));
            CHECK(mc.effective_macs <= mc.total_macs);
            outs.push_back(std::move(out));
            src = l.index;
        }
    }
}

TEST_CASE("property: linearity with no activation, no bias, wide profile") {
    for (uint64_t seed = 300; seed < 310; ++seed) {
        Rng rng(seed);
        CnnModel m = chain({layer(1, LayerKind::Std3x3, uint32_t(rng.range(2, 10)),
                                  uint32_t(rng.range(2, 10)), uint32_t(rng.range(1, 4)),
                                  uint32_t(rng.range(1, 4)))});
        NumericProfile p = NumericProfile::wide(m);
        WeightStore ws = random_weights(rng, m, p);
        const LayerSpec& l = m.layer(1);
        FeatureMapTensor a(l.c_in, l.w_in, l.h_in), b(l.c_in, l.w_in, l.h_in), sum(l.c_in, l.w_in, l.h_in);
        for (size_t i = 0; i < a.data.size(); ++i) {
            a.data[i] = act_t(rng.range(-100, 100));
            b.data[i] = act_t(rng.range(-100, 100));
            sum.data[i] = a.data[i] + b.data[i];
        }
        auto [oa, ma] = conv_layer_ref(a, l, ws, p);
        auto [ob, mb] = conv_layer_ref(b, l, ws, p);
        auto [os, ms] = conv_layer_ref(sum, l, ws, p);
        for (size_t i = 0; i < os.data.size(); ++i) CHECK(os.data[i] == oa.data[i] + ob.data[i]);
    }
}

TEST_CASE("property: interior output equals the plain dot product") {
    Rng rng(99);
    CnnModel m = chain({layer(1, LayerKind::Std3x3, 8, 8, 3, 2)});
    NumericProfile p = NumericProfile::wide(m);
    WeightStore ws = random_weights(rng, m, p);
    FeatureMapTensor in(3, 8, 8);
    for (act_t& v : in.data) v = act_t(rng.range(-50, 50));
    auto [out, mc] = conv_layer_ref(in, m.layer(1), ws, p);
    uint32_t x = 4, y = 3;  // all taps in bounds
    for (uint32_t f = 0; f < 2; ++f) {
        acc_t want = 0;
        for (uint32_t c = 0; c < 3; ++c)
            for (int j = -1; j <= 1; ++j)
                for (int i = -1; i <= 1; ++i)
                    want += acc_t(in.at(c, uint32_t(int(x) + i), uint32_t(int(y) + j))) *
                            ws.weight(m.layer(1), f, c, uint32_t(j + 1), uint32_t(i + 1));
        CHECK(out.at(f, x, y) == act_t(want));
    }
}
