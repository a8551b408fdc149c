#pragma once

#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmsim/model.hpp"

namespace nmsim {

// ----------------------------------------------------------------------------
// Model config: JSON document with fields matching LayerSpec names.
// ----------------------------------------------------------------------------

inline LayerKind parse_kind(const std::string& s) {
    if (s == "Std3x3") return LayerKind::Std3x3;
    if (s == "Dw3x3") return LayerKind::Dw3x3;
    if (s == "Conv1x1") return LayerKind::Conv1x1;
    throw ParseError("unknown layer kind '" + s + "'");
}

inline Activation parse_activation(const std::string& s) {
    if (s == "None") return Activation::None;
    if (s == "ReLU") return Activation::ReLU;
    if (s == "ReLU6") return Activation::ReLU6;
    throw ParseError("unknown activation '" + s + "'");
}

inline CnnModel load_model(const std::string& config_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(config_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what());
    }
    CnnModel model;
    try {
        model.name = doc.value("name", "unnamed");
        if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
            throw ParseError("model config: missing or empty 'layers' array");
        for (const auto& jl : doc["layers"]) {
            LayerSpec l;
            l.index = jl.at("index").get<uint32_t>();
            l.kind = parse_kind(jl.at("kind").get<std::string>());
            l.w_in = jl.at("w_in").get<uint32_t>();
            l.h_in = jl.at("h_in").get<uint32_t>();
            l.w_out = jl.at("w_out").get<uint32_t>();
            l.h_out = jl.at("h_out").get<uint32_t>();
            l.c_in = jl.at("c_in").get<uint32_t>();
            l.f_out = jl.at("f_out").get<uint32_t>();
            l.k = jl.at("k").get<uint32_t>();
            l.stride = jl.at("stride").get<uint32_t>();
            l.activation = parse_activation(jl.value("activation", "None"));
            l.has_bias = jl.value("has_bias", true);
            if (jl.contains("input")) l.input_layer = jl["input"].get<uint32_t>();
            model.layers.push_back(l);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what());
    }
    std::vector<Diagnostic> diags = check_model_shape(model);
    if (!diags.empty()) {
        const Diagnostic& d = diags.front();
        throw ShapeError("layer " + std::to_string(d.layer_index) + ": " + d.message);
    }
    return model;
}

inline std::string save_model(const CnnModel& model) {
    nlohmann::ordered_json doc;
    doc["name"] = model.name;
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const LayerSpec& l : model.layers) {
        nlohmann::ordered_json jl;
        jl["index"] = l.index;
        jl["kind"] = to_string(l.kind);
        jl["w_in"] = l.w_in; jl["h_in"] = l.h_in;
        jl["w_out"] = l.w_out; jl["h_out"] = l.h_out;
        jl["c_in"] = l.c_in; jl["f_out"] = l.f_out;
        jl["k"] = l.k; jl["stride"] = l.stride;
        jl["activation"] = to_string(l.activation);
        jl["has_bias"] = l.has_bias;
        if (l.input_layer) jl["input"] = *l.input_layer;
        layers.push_back(jl);
    }
    doc["layers"] = layers;
    return doc.dump(2) + "\n";
}

inline CnnModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

// ----------------------------------------------------------------------------
// Weights blob: "NMW1" + version byte + u64 total byte count, then per layer
// weights int8 in [f][c][j][i] order followed by biases int32, little endian.
// ----------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v)); out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16)); out.push_back(uint8_t(v >> 24));
}
inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
inline uint32_t get_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

} // namespace detail

inline uint64_t weights_payload_size(const CnnModel& model) {
    uint64_t n = 0;
    for (const LayerSpec& l : model.layers) {
        n += l.weight_count();
        if (l.has_bias) n += uint64_t(l.filter_count()) * 4;
    }
    return n;
}

inline constexpr size_t kWeightsHeader = 4 + 1 + 8;  // magic, version, byte count

inline std::vector<uint8_t> save_weights(const WeightStore& ws, const CnnModel& model) {
    std::vector<uint8_t> out;
    out.reserve(kWeightsHeader + weights_payload_size(model));
    for (char ch : {'N', 'M', 'W', '1'}) out.push_back(uint8_t(ch));
    out.push_back(1);
    detail::put_u64(out, kWeightsHeader + weights_payload_size(model));
    for (const LayerSpec& l : model.layers) {
        const WeightStore::LayerWeights& lw = ws.layers.at(l.index - 1);
        for (int8_t w : lw.weights) out.push_back(uint8_t(w));
        for (int32_t b : lw.biases) detail::put_u32(out, uint32_t(b));
    }
    return out;
}

inline WeightStore load_weights(const std::vector<uint8_t>& blob, const CnnModel& model) {
    uint64_t expect = kWeightsHeader + weights_payload_size(model);
    if (blob.size() != expect)
        throw SizeError("weights blob: expected " + std::to_string(expect) + " bytes, got " +
                        std::to_string(blob.size()));
    if (std::memcmp(blob.data(), "NMW1", 4) != 0) throw FormatError("weights blob: bad magic");
    if (blob[4] != 1) throw FormatError("weights blob: unsupported version");
    if (detail::get_u64(blob.data() + 5) != expect)
        throw FormatError("weights blob: header byte count mismatch");
    WeightStore ws;
    size_t off = kWeightsHeader;
    for (const LayerSpec& l : model.layers) {
        WeightStore::LayerWeights lw;
        lw.weights.resize(l.weight_count());
        for (size_t i = 0; i < lw.weights.size(); ++i) lw.weights[i] = int8_t(blob[off++]);
        if (l.has_bias) {
            lw.biases.resize(l.filter_count());
            for (size_t i = 0; i < lw.biases.size(); ++i) {
                lw.biases[i] = int32_t(detail::get_u32(blob.data() + off));
                off += 4;
            }
        }
        ws.layers.push_back(std::move(lw));
    }
    return ws;
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open file '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

// ----------------------------------------------------------------------------
// Input image: 8-bit raw planar C x H x W behind a 16-byte header
// ("NMI1", c, w, h as u32 LE), or PGM/PPM for 1/3 channels.
// Raw byte values 0..255 are centered to the signed activation range when the
// profile is narrower than 9 bits.
// ----------------------------------------------------------------------------

struct RawImage {
    uint32_t c = 0, w = 0, h = 0;
    std::vector<uint8_t> planar;  // c*h*w bytes
};

inline RawImage load_image_bytes(const std::vector<uint8_t>& bytes) {
    RawImage img;
    if (bytes.size() >= 16 && std::memcmp(bytes.data(), "NMI1", 4) == 0) {
        img.c = detail::get_u32(bytes.data() + 4);
        img.w = detail::get_u32(bytes.data() + 8);
        img.h = detail::get_u32(bytes.data() + 12);
        uint64_t need = 16 + uint64_t(img.c) * img.w * img.h;
        if (bytes.size() != need)
            throw SizeError("image: expected " + std::to_string(need) + " bytes, got " +
                            std::to_string(bytes.size()));
        img.planar.assign(bytes.begin() + 16, bytes.end());
        return img;
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
        bool color = bytes[1] == '6';
        size_t pos = 2;
        auto next_token = [&]() -> uint64_t {
            while (pos < bytes.size()) {
                if (std::isspace(bytes[pos])) { ++pos; continue; }
                if (bytes[pos] == '#') { while (pos < bytes.size() && bytes[pos] != '\n') ++pos; continue; }
                break;
            }
            uint64_t v = 0;
            bool any = false;
            while (pos < bytes.size() && std::isdigit(bytes[pos])) {
                v = v * 10 + (bytes[pos++] - '0');
                any = true;
            }
            if (!any) throw ParseError("image: malformed PNM header");
            return v;
        };
        img.w = uint32_t(next_token());
        img.h = uint32_t(next_token());
        uint64_t maxval = next_token();
        if (maxval == 0 || maxval > 255) throw ParseError("image: PNM maxval must be <= 255");
        ++pos;  // single whitespace after maxval
        img.c = color ? 3 : 1;
        uint64_t need = uint64_t(img.c) * img.w * img.h;
        if (bytes.size() - pos != need)
            throw SizeError("image: expected " + std::to_string(need) + " pixel bytes, got " +
                            std::to_string(bytes.size() - pos));
        img.planar.resize(need);
        if (color) {
            // PPM interleaves RGB; store planar
            for (uint64_t i = 0; i < uint64_t(img.w) * img.h; ++i)
                for (uint32_t ch = 0; ch < 3; ++ch)
                    img.planar[ch * uint64_t(img.w) * img.h + i] = bytes[pos + i * 3 + ch];
        } else {
            std::copy(bytes.begin() + std::ptrdiff_t(pos), bytes.end(), img.planar.begin());
        }
        return img;
    }
    throw FormatError("image: unrecognized format (need NMI1, PGM, or PPM)");
}

inline std::vector<uint8_t> save_image_bytes(const RawImage& img) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'N', 'M', 'I', '1'});
    detail::put_u32(out, img.c);
    detail::put_u32(out, img.w);
    detail::put_u32(out, img.h);
    out.insert(out.end(), img.planar.begin(), img.planar.end());
    return out;
}

inline FeatureMapTensor image_to_tensor(const RawImage& img, const NumericProfile& profile) {
    FeatureMapTensor t(img.c, img.w, img.h);
    int32_t offset = profile.activation_bits <= 8 ? 128 : 0;
    for (size_t i = 0; i < img.planar.size(); ++i) t.data[i] = int32_t(img.planar[i]) - offset;
    return t;
}

inline RawImage tensor_to_image(const FeatureMapTensor& t, const NumericProfile& profile) {
    RawImage img;
    img.c = t.c; img.w = t.w; img.h = t.h;
    img.planar.resize(t.data.size());
    int32_t offset = profile.activation_bits <= 8 ? 128 : 0;
    for (size_t i = 0; i < t.data.size(); ++i) {
        int32_t v = t.data[i] + offset;
        if (v < 0 || v > 255) throw SizeError("tensor value does not fit an 8-bit image byte");
        img.planar[i] = uint8_t(v);
    }
    return img;
}

// ----------------------------------------------------------------------------
// Numeric profile: either a preset name or a JSON file.
// ----------------------------------------------------------------------------

inline NumericProfile load_profile(const std::string& name_or_path, const CnnModel& model) {
    if (name_or_path.empty() || name_or_path == "quant8") return NumericProfile::quant8(model);
    if (name_or_path == "wide") return NumericProfile::wide(model);
    std::ifstream in(name_or_path, std::ios::binary);
    if (!in) throw ParseError("cannot open profile '" + name_or_path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
        NumericProfile p;
        p.name = doc.value("name", name_or_path);
        p.activation_bits = doc.value("activation_bits", 8u);
        p.weight_bits = doc.value("weight_bits", 8u);
        p.accumulator_bits = doc.value("accumulator_bits", 32u);
        if (doc.contains("requantize")) {
            for (const auto& jr : doc["requantize"]) {
                RequantParams r;
                r.mult = jr.value("mult", 1);
                r.rshift = jr.value("rshift", 0u);
                r.relu6_cap = jr.value("relu6_cap", std::numeric_limits<acc_t>::max());
                p.requantize.push_back(r);
            }
        } else {
            p.requantize = NumericProfile::quant8(model).requantize;
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("profile: ") + e.what());
    }
}

} // namespace nmsim
