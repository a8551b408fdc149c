#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nmsim/hn_core.hpp"
#include "nmsim/memory_part.hpp"
#include "nmsim/model.hpp"

namespace nmsim {

// ----------------------------------------------------------------------------
// Global hardware parameters. The pipeline overhead constant D is a
// calibration: with D = 57 the per-layer cycle model
//   B = passes_c * passes_f * w_out * h_out + w_out + D
// reproduces the reference system's published per-layer counts exactly.
// ----------------------------------------------------------------------------
struct HwConfig {
    uint32_t m = 256;                       // multiplier pool
    uint32_t r = 32;                        // MAU banks
    uint64_t clock_hz = 200'000'000;
    std::map<uint32_t, HwKPQ> config_table = {{3u, HwKPQ{1, 28}}, {1u, HwKPQ{16, 16}}};
    uint32_t pipeline_overhead_const = 57;  // D
    uint32_t bank_depth = 262144;           // words per bank

    void validate() const {
        for (const auto& [k, pq] : config_table) {
            if (uint64_t(pq.q) * k * k * pq.p > m)
                throw ConfigError("config for k=" + std::to_string(k) + " exceeds multiplier pool");
            if (pq.q > r)
                throw ConfigError("config for k=" + std::to_string(k) + " has Q=" + std::to_string(pq.q) +
                                  " > R=" + std::to_string(r) + " write banks");
        }
    }
    HwKPQ kpq(uint32_t k) const {
        auto it = config_table.find(k);
        if (it == config_table.end())
            throw ConfigError("no hardware configuration for k=" + std::to_string(k));
        return it->second;
    }
};

// ----------------------------------------------------------------------------
// One SOT row: the control word for one convolution layer.
// ----------------------------------------------------------------------------
struct SotRow {
    uint32_t layer_index = 0;
    uint32_t k = 1, p = 1, q = 1, stride = 1;
    uint32_t w_in = 0, h_in = 0, w_out = 0, h_out = 0;
    uint32_t c_in = 0, f_out = 0;
    uint32_t passes_c = 1, passes_f = 1;
    uint32_t read_base = 0, write_base = 0;
    uint32_t weight_base = 0;
    uint32_t activation = 0;  // Activation enum value
    uint32_t bias_base = 0;

    // Depthwise rows carry f_out = 1 and fold the channel loop into the
    // HN-group loop (passes_c = 1, passes_f = ceil(C/Q)). A standard layer
    // with C = F = 1 matches the same pattern and schedules identically.
    bool is_depthwise() const { return k == 3 && f_out == 1 && passes_c == 1; }
    uint32_t output_maps() const { return is_depthwise() ? c_in : f_out; }
    uint64_t out_positions() const { return uint64_t(w_out) * h_out; }
    uint64_t compute_cycles() const { return uint64_t(passes_c) * passes_f * w_out * h_out; }

    bool operator==(const SotRow&) const = default;
};

struct SotProgram {
    std::vector<SotRow> rows;
    uint32_t image_base() const { return rows.empty() ? 0 : rows.front().read_base; }
};

// Closed-form cycle prediction for one row.
inline uint64_t predict_cycles(const SotRow& row, const HwConfig& hw) {
    return row.compute_cycles() + row.w_out + hw.pipeline_overhead_const;
}

// ----------------------------------------------------------------------------
// Per-layer execution statistics. The five slot tallies partition the peak
// multiplier-cycles B*m exactly:
//   effective + internal frag + padding + external frag + pipeline = B * m.
// ----------------------------------------------------------------------------
struct LayerStats {
    uint32_t layer_index = 0;
    uint64_t cycles_b = 0;
    uint64_t peak_muls_c = 0;
    uint64_t effective_muls_a = 0;
    uint64_t internal_frag_slots = 0;
    uint64_t padding_slots = 0;
    uint64_t external_frag_slots = 0;
    uint64_t pipeline_slots = 0;
};

struct CycleStats {
    uint32_t m = 0;
    uint64_t clock_hz = 0;
    std::vector<LayerStats> layers;

    uint64_t total_cycles() const {
        uint64_t n = 0;
        for (const LayerStats& l : layers) n += l.cycles_b;
        return n;
    }
    uint64_t total_peak() const {
        uint64_t n = 0;
        for (const LayerStats& l : layers) n += l.peak_muls_c;
        return n;
    }
    uint64_t total_effective() const {
        uint64_t n = 0;
        for (const LayerStats& l : layers) n += l.effective_muls_a;
        return n;
    }
    double fps() const {
        uint64_t c = total_cycles();
        return c == 0 ? 0.0 : double(clock_hz) / double(c);
    }
};

// ----------------------------------------------------------------------------
// SOT compiler: pass structure from the hardware configuration plus a
// lifetime-aware first-fit assignment of bank regions. A region stays
// allocated until the last row that reads it has run, so detection-head rows
// can reach back to earlier feature maps; for a plain chain the assignment
// degenerates to the usual two alternating buffers.
// ----------------------------------------------------------------------------
inline SotProgram compile_sot(const CnnModel& model, const HwConfig& hw) {
    hw.validate();
    {
        std::vector<Diagnostic> diags = check_model_shape(model);
        if (!diags.empty())
            throw ShapeError("layer " + std::to_string(diags.front().layer_index) + ": " +
                             diags.front().message);
    }

    const uint32_t L = uint32_t(model.layers.size());
    // last_read[j]: last layer consuming the output of layer j (0 = image)
    std::vector<uint32_t> last_read(L + 1, 0);
    for (uint32_t i = 1; i <= L; ++i) last_read[model.input_of(i)] = i;

    struct Region {
        uint32_t base = 0;
        uint32_t words = 0;
        uint32_t free_after = 0;
    };
    std::vector<Region> regions(L + 1);  // index 0 = input image

    auto region_words = [&](uint32_t maps, uint32_t w, uint32_t h) {
        return uint32_t(ceil_div(maps, hw.r) * (uint64_t(w) * h));
    };
    auto place = [&](uint32_t layer, uint32_t words) -> uint32_t {
        // gather regions still needed while this layer runs
        std::vector<std::pair<uint32_t, uint32_t>> busy;
        for (uint32_t j = 0; j < layer; ++j)
            if (regions[j].free_after >= layer && regions[j].words > 0)
                busy.emplace_back(regions[j].base, regions[j].words);
        std::sort(busy.begin(), busy.end());
        uint32_t at = 0;
        for (const auto& [b, wds] : busy) {
            if (at + words <= b) break;
            at = std::max(at, b + wds);
        }
        if (uint64_t(at) + words > hw.bank_depth)
            throw CapacityError("layer " + std::to_string(layer) + ": feature maps exceed bank depth (" +
                                std::to_string(uint64_t(at) + words) + " > " +
                                std::to_string(hw.bank_depth) + " words)");
        return at;
    };

    const LayerSpec& first = model.layers.front();
    regions[0] = {0, region_words(first.c_in, first.w_in, first.h_in), std::max(last_read[0], 1u)};

    SotProgram prog;
    uint32_t weight_off = 0, bias_off = 0;
    for (const LayerSpec& l : model.layers) {
        HwKPQ pq = hw.kpq(l.k);
        HnConfig cfg = configure_hn(hw.m, l.k, pq);
        SotRow row;
        row.layer_index = l.index;
        row.k = l.k;
        row.p = cfg.p;
        row.q = cfg.q;
        row.stride = l.stride;
        row.w_in = l.w_in; row.h_in = l.h_in;
        row.w_out = l.w_out; row.h_out = l.h_out;
        row.c_in = l.c_in; row.f_out = l.f_out;
        if (l.kind == LayerKind::Dw3x3) {
            row.passes_c = 1;
            row.passes_f = uint32_t(ceil_div(l.c_in, cfg.q));
        } else {
            row.passes_c = uint32_t(ceil_div(l.c_in, cfg.p));
            row.passes_f = uint32_t(ceil_div(l.f_out, cfg.q));
        }
        row.read_base = regions[model.input_of(l.index)].base;
        uint32_t words = region_words(l.output_maps(), l.w_out, l.h_out);
        row.write_base = place(l.index, words);
        regions[l.index] = {row.write_base, words, std::max(last_read[l.index], l.index)};
        row.weight_base = weight_off;
        row.bias_base = bias_off;
        weight_off += row.passes_c * row.passes_f;  // depth used per distributed memory
        bias_off += l.filter_count();
        row.activation = uint32_t(l.activation);
        prog.rows.push_back(row);
    }
    return prog;
}

// ----------------------------------------------------------------------------
// SOT binary image: "SOT1", version byte, u32 row count, then each row as
// eighteen u32 little-endian words in declaration order.
// ----------------------------------------------------------------------------
inline std::vector<uint8_t> save_sot(const SotProgram& prog) {
    std::vector<uint8_t> out{'S', 'O', 'T', '1', 1};
    auto put = [&](uint32_t v) {
        out.push_back(uint8_t(v)); out.push_back(uint8_t(v >> 8));
        out.push_back(uint8_t(v >> 16)); out.push_back(uint8_t(v >> 24));
    };
    put(uint32_t(prog.rows.size()));
    for (const SotRow& r : prog.rows) {
        put(r.layer_index);
        put(r.k); put(r.p); put(r.q); put(r.stride);
        put(r.w_in); put(r.h_in); put(r.w_out); put(r.h_out);
        put(r.c_in); put(r.f_out);
        put(r.passes_c); put(r.passes_f);
        put(r.read_base); put(r.write_base);
        put(r.weight_base);
        put(r.activation);
        put(r.bias_base);
    }
    return out;
}

inline SotProgram load_sot(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 9) throw FormatError("SOT image: truncated header");
    if (bytes[0] != 'S' || bytes[1] != 'O' || bytes[2] != 'T' || bytes[3] != '1')
        throw FormatError("SOT image: bad magic");
    if (bytes[4] != 1) throw FormatError("SOT image: unsupported version");
    auto get = [&](size_t at) {
        return uint32_t(bytes[at]) | uint32_t(bytes[at + 1]) << 8 | uint32_t(bytes[at + 2]) << 16 |
               uint32_t(bytes[at + 3]) << 24;
    };
    uint32_t count = get(5);
    constexpr size_t kRowWords = 18;
    if (bytes.size() != 9 + size_t(count) * kRowWords * 4)
        throw FormatError("SOT image: expected " + std::to_string(9 + size_t(count) * kRowWords * 4) +
                          " bytes, got " + std::to_string(bytes.size()));
    SotProgram prog;
    size_t at = 9;
    for (uint32_t i = 0; i < count; ++i) {
        SotRow r;
        r.layer_index = get(at); at += 4;
        r.k = get(at); at += 4; r.p = get(at); at += 4; r.q = get(at); at += 4; r.stride = get(at); at += 4;
        r.w_in = get(at); at += 4; r.h_in = get(at); at += 4; r.w_out = get(at); at += 4; r.h_out = get(at); at += 4;
        r.c_in = get(at); at += 4; r.f_out = get(at); at += 4;
        r.passes_c = get(at); at += 4; r.passes_f = get(at); at += 4;
        r.read_base = get(at); at += 4; r.write_base = get(at); at += 4;
        r.weight_base = get(at); at += 4;
        r.activation = get(at); at += 4;
        r.bias_base = get(at); at += 4;
        prog.rows.push_back(r);
    }
    return prog;
}

// ----------------------------------------------------------------------------
// Trace hooks for the debug dumps. The executor consults the wants_* gates
// once per layer, so a null or disinterested sink costs nothing per cycle.
// ----------------------------------------------------------------------------
struct TraceSink {
    virtual ~TraceSink() = default;
    virtual bool wants_receptor(uint32_t /*layer*/, uint32_t /*lane*/) { return false; }
    virtual void receptor_row(uint32_t /*layer*/, uint32_t /*lane*/, int64_t /*t*/, act_t /*input*/,
                              const Receptor& /*r*/, const MaskedWindow& /*w*/) {}
    virtual bool wants_hn(uint32_t /*layer*/, uint32_t /*hn*/) { return false; }
    virtual void hn_row(uint32_t /*layer*/, uint32_t /*hn*/, uint64_t /*cycle*/,
                        std::span<const acc_t> /*products*/, acc_t /*tree*/, acc_t /*netsum*/) {}
};

struct ExecResult {
    std::vector<FeatureMapTensor> outputs;  // one per layer
    CycleStats stats;
};

// ----------------------------------------------------------------------------
// Cycle-level executor. Runs every SOT row through the memory part and the
// hardware-neuron pool, one scheduled cycle at a time:
//
//   for each output-map pass (Q neurons), for each input-group pass
//   (P maps), the MP delivers k*k*lanes window values per cycle and each
//   assigned HN folds them into its Netsum memory; the final input pass
//   releases one output word per HN per cycle through the SU into the banks.
//
// Stride-1 3x3 rows stream pixels through the line-buffer receptors with the
// read cursor leading the window cursor by the fill latency, so scans chain
// with no idle cycle; stride-2 rows use the block read port. Per-slot
// activity is tallied into LayerStats as it happens.
// ----------------------------------------------------------------------------
inline ExecResult execute(const SotProgram& prog, const WeightStore& weights,
                          const FeatureMapTensor& image, const HwConfig& hw,
                          const NumericProfile& profile, TraceSink* trace = nullptr) {
    hw.validate();
    if (prog.rows.empty()) throw ShapeError("empty SOT program");
    if (weights.layers.size() != prog.rows.size())
        throw ShapeError("weight store has " + std::to_string(weights.layers.size()) + " layers for " +
                         std::to_string(prog.rows.size()) + " SOT rows");
    {
        const SotRow& r0 = prog.rows.front();
        if (image.c != r0.c_in || image.w != r0.w_in || image.h != r0.h_in)
            throw ShapeError("image is " + std::to_string(image.c) + "x" + std::to_string(image.w) + "x" +
                             std::to_string(image.h) + ", first row expects " + std::to_string(r0.c_in) +
                             "x" + std::to_string(r0.w_in) + "x" + std::to_string(r0.h_in));
    }

    MemoryArrayUnit mau(hw.r, hw.bank_depth);
    mau.preload(image, prog.image_base());

    ExecResult res;
    res.stats.m = hw.m;
    res.stats.clock_hz = hw.clock_hz;
    res.outputs.reserve(prog.rows.size());

    for (const SotRow& row : prog.rows) {
        const bool dw = row.is_depthwise();
        const uint32_t lanes = dw ? row.q : row.p;
        const uint32_t f_eff = dw ? row.c_in : row.f_out;     // maps distributed over HNs
        const uint32_t slots = row.k * row.k * (dw ? 1 : row.p);
        const uint32_t filters = dw ? row.c_in : row.f_out;   // weight-store f axis
        const uint32_t chans = dw ? 1 : row.c_in;
        const uint64_t wh_in = uint64_t(row.w_in) * row.h_in;
        const uint64_t wh_out = row.out_positions();
        const uint32_t weight_depth = row.passes_c * row.passes_f;
        const RequantParams& rq = profile.requant(row.layer_index);
        const Activation act = Activation(row.activation);
        const acc_t acc_min = profile.acc_min(), acc_max = profile.acc_max();

        const WeightStore::LayerWeights& lw = weights.layers.at(row.layer_index - 1);
        if (lw.weights.size() != size_t(filters) * chans * row.k * row.k)
            throw ShapeError("layer " + std::to_string(row.layer_index) + ": weight array size mismatch");
        if (!lw.biases.empty() && lw.biases.size() != filters)
            throw ShapeError("layer " + std::to_string(row.layer_index) + ": bias array size mismatch");

        configure_hn(hw.m, row.k, HwKPQ{row.p, row.q});  // ConfigError if the row is inconsistent

        // Hardware neurons with preloaded distributed weight memories. The
        // shared read address walks fpass-major, one step per map scan.
        std::vector<HnState> hns;
        hns.reserve(row.q);
        for (uint32_t q = 0; q < row.q; ++q) {
            HnState hn(row.k, dw ? 1 : row.p, uint32_t(wh_out), weight_depth);
            for (uint32_t fp = 0; fp < row.passes_f; ++fp) {
                for (uint32_t cp = 0; cp < row.passes_c; ++cp) {
                    uint32_t addr = fp * row.passes_c + cp;
                    for (uint32_t pp = 0; pp < (dw ? 1u : row.p); ++pp) {
                        for (uint32_t j = 0; j < row.k; ++j) {
                            for (uint32_t i = 0; i < row.k; ++i) {
                                uint32_t f = fp * row.q + q;  // also the filter axis index
                                uint32_t c = dw ? 0 : cp * row.p + pp;
                                int32_t w = 0;
                                if (f < filters && c < chans)
                                    w = lw.weights[((size_t(f) * chans + c) * row.k + j) * row.k + i];
                                hn.load_weight((pp * row.k + j) * row.k + i, addr, w);
                            }
                        }
                    }
                }
            }
            hns.push_back(std::move(hn));
        }

        LayerStats st;
        st.layer_index = row.layer_index;

        // receptors for the stride-1 3x3 path; block receptors for stride 2
        const bool line_path = row.k == 3 && row.stride == 1;
        const bool block_path = row.k == 3 && row.stride == 2;
        ReceptorUnit ru(row.k, lanes, row.w_in, row.h_in);
        const uint32_t lead = row.k == 3 ? row.w_in * (row.k / 2) + row.k / 2 : 0;

        // Pixel at global stream position g of lane ln, reading through the
        // MAU; positions beyond the layer's stream (drain) and lanes bound to
        // channels past C (tree slack) feed zeros.
        auto stream_pixel = [&](uint64_t g, uint32_t ln) -> act_t {
            uint64_t scan = g / wh_in;
            uint64_t rpos = g % wh_in;
            uint32_t fp, c;
            if (dw) {
                fp = uint32_t(scan);
                c = fp * row.q + ln;
            } else {
                fp = uint32_t(scan / row.passes_c);
                c = uint32_t(scan % row.passes_c) * row.p + ln;
            }
            if (fp >= row.passes_f || c >= row.c_in) return 0;
            act_t v = 0;
            mau.read_group(c, 1, row.c_in, row.read_base, row.w_in, row.h_in,
                           uint32_t(rpos % row.w_in), uint32_t(rpos / row.w_in), &v);
            return v;
        };

        uint64_t window_cursor = 0;  // windows emitted so far (line path)
        std::vector<MaskedWindow> wins(lanes);
        if (line_path) {
            // fill latency is uncharged: it is part of the calibrated per-layer
            // overhead, not of the scheduled compute cycles
            for (uint64_t g = 0; g < lead; ++g) {
                for (uint32_t ln = 0; ln < lanes; ++ln) ru.lane(ln).step(stream_pixel(g, ln));
            }
        }

        std::vector<uint8_t> trace_lane(lanes, 0), trace_hn(row.q, 0);
        if (trace) {
            for (uint32_t ln = 0; ln < lanes; ++ln)
                trace_lane[ln] = trace->wants_receptor(row.layer_index, ln) ? 1 : 0;
            for (uint32_t q = 0; q < row.q; ++q)
                trace_hn[q] = trace->wants_hn(row.layer_index, q) ? 1 : 0;
        }

        std::vector<act_t> shared_in(slots, 0);
        std::vector<acc_t> products(slots, 0);

        for (uint32_t fp = 0; fp < row.passes_f; ++fp) {
            const uint32_t q_assigned = std::min(row.q, f_eff - std::min(f_eff, fp * row.q));
            for (uint32_t q = 0; q < row.q; ++q) {
                uint32_t f = fp * row.q + q;
                hns[q].set_bias(!lw.biases.empty() && f < filters ? lw.biases[f] : 0);
            }
            for (uint32_t cp = 0; cp < row.passes_c; ++cp) {
                const uint32_t p_valid = dw ? 1 : std::min(row.p, row.c_in - std::min(row.c_in, cp * row.p));
                for (uint32_t q = 0; q < row.q; ++q) hns[q].set_weight_addr(fp * row.passes_c + cp);
                std::vector<BlockReceptor> brs;
                if (block_path)
                    for (uint32_t ln = 0; ln < lanes; ++ln)
                        brs.emplace_back(row.k, row.stride, row.w_in, row.h_in);

                for (uint64_t rpos = 0; rpos < wh_out; ++rpos) {
                    mau.begin_cycle();
                    const uint32_t ox = uint32_t(rpos % row.w_out);
                    const uint32_t oy = uint32_t(rpos / row.w_out);

                    if (line_path) {
                        uint64_t g = window_cursor + lead;
                        for (uint32_t ln = 0; ln < lanes; ++ln) {
                            act_t px = stream_pixel(g, ln);
                            auto win = ru.lane(ln).step(px);
                            wins[ln] = *win;  // filled: lead pixels already fed
                            if (trace != nullptr && trace_lane[ln])
                                trace->receptor_row(row.layer_index, ln, ru.lane(ln).t() - 1, px,
                                                    ru.lane(ln), wins[ln]);
                        }
                        ++window_cursor;
                    } else if (block_path) {
                        std::array<act_t, 4> block{};
                        for (uint32_t ln = 0; ln < lanes; ++ln) {
                            uint32_t c = dw ? fp * row.q + ln : cp * row.p + ln;
                            if (c < row.c_in)
                                mau.read_block(c, row.read_base, row.w_in, row.h_in, row.stride * ox,
                                               row.stride * oy, row.stride, block.data());
                            else
                                block.fill(0);
                            wins[ln] = brs[ln].step(ox, oy, block.data());
                        }
                    } else {
                        // k = 1: selector read at the strided position, RU bypass
                        mau.read_group(cp * row.p, row.p, row.c_in, row.read_base, row.w_in, row.h_in,
                                       row.stride * ox, row.stride * oy, shared_in.data());
                        ru.step(shared_in.data(), wins);
                    }

                    // ---- activity tally for this cycle ----
                    st.external_frag_slots += hw.m - row.q * slots;
                    st.internal_frag_slots += uint64_t(row.q - q_assigned) * slots;
                    uint32_t eff_taps = 0, pad_taps = 0;
                    if (dw) {
                        // lanes are channels; only assigned ones do real work,
                        // and every lane of one layer masks identically
                        uint32_t nv = wins[0].valid_taps();
                        eff_taps = nv;
                        pad_taps = row.k * row.k - nv;
                        st.effective_muls_a += uint64_t(q_assigned) * eff_taps;
                        st.padding_slots += uint64_t(q_assigned) * pad_taps;
                    } else {
                        st.internal_frag_slots += uint64_t(q_assigned) * (row.p - p_valid) * row.k * row.k;
                        for (uint32_t pp = 0; pp < p_valid; ++pp) {
                            uint32_t nv = wins[pp].valid_taps();
                            eff_taps += nv;
                            pad_taps += row.k * row.k - nv;
                        }
                        st.effective_muls_a += uint64_t(q_assigned) * eff_taps;
                        st.padding_slots += uint64_t(q_assigned) * pad_taps;
                    }

                    // ---- hardware neurons ----
                    if (!dw) {
                        for (uint32_t pp = 0; pp < row.p; ++pp)
                            for (uint32_t tcell = 0; tcell < row.k * row.k; ++tcell)
                                shared_in[pp * row.k * row.k + tcell] = wins[pp].values[tcell];
                    }
                    for (uint32_t q = 0; q < q_assigned; ++q) {
                        std::span<const act_t> in =
                            dw ? std::span<const act_t>(wins[q].values.data(), slots)
                               : std::span<const act_t>(shared_in.data(), slots);
                        std::span<acc_t> pr(products.data(), slots);
                        hns[q].snu_step(in, pr);
                        std::optional<acc_t> done =
                            hns[q].du_step(pr, cp, row.passes_c, uint32_t(rpos), acc_min, acc_max);
                        if (trace != nullptr && trace_hn[q]) {
                            acc_t tree = 0;
                            for (uint32_t i = 0; i < slots; ++i) tree += pr[i];
                            uint64_t cyc = (uint64_t(fp) * row.passes_c + cp) * wh_out + rpos;
                            trace->hn_row(row.layer_index, q, cyc, pr, tree,
                                          hns[q].netsum_at(uint32_t(rpos)));
                        }
                        if (done) {
                            uint32_t f = fp * row.q + q;
                            act_t v = su_step(*done, hns[q].bias(), act, rq, profile);
                            mau.write(f, uint32_t(wh_out), row.write_base, uint32_t(rpos), v);
                        }
                    }
                }
            }
        }

        st.cycles_b = row.compute_cycles() + row.w_out + hw.pipeline_overhead_const;
        st.peak_muls_c = st.cycles_b * hw.m;
        st.pipeline_slots = uint64_t(row.w_out + hw.pipeline_overhead_const) * hw.m;
        res.stats.layers.push_back(st);
        res.outputs.push_back(mau.extract(row.output_maps(), row.w_out, row.h_out, row.write_base));
    }
    return res;
}

// Convenience: Eq.-6-style grouped selector read for test harnesses. t walks
// the input scan of one pass group: channel group t / (w*h), position
// (t % w, (t % (w*h)) / w).
inline std::vector<act_t> mau_read(MemoryArrayUnit& mau, uint64_t t, const LayerSpec& layer, uint32_t p,
                                   uint32_t read_base = 0) {
    uint64_t wh = uint64_t(layer.w_in) * layer.h_in;
    if (t >= ceil_div(layer.c_in, p) * wh) throw ShapeError("mau_read: t beyond the layer's read schedule");
    uint32_t c_first = uint32_t(t / wh) * p;
    uint32_t x = uint32_t((t % wh) % layer.w_in);
    uint32_t y = uint32_t((t % wh) / layer.w_in);
    std::vector<act_t> out(p, 0);
    mau.read_group(c_first, p, layer.c_in, read_base, layer.w_in, layer.h_in, x, y, out.data());
    return out;
}

} // namespace nmsim
