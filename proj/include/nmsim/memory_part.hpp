#pragma once

#include <array>
#include <cassert>
#include <vector>

#include "nmsim/model.hpp"

namespace nmsim {

// ----------------------------------------------------------------------------
// MaskedWindow: k*k taps centered on an output position, with out-of-bounds
// taps forced to zero by position (never by value). masked[] records which
// taps were forced so the activity tally can tell padding work from real work.
// ----------------------------------------------------------------------------
struct MaskedWindow {
    uint32_t k = 0;
    int32_t center_x = 0, center_y = 0;
    std::array<act_t, 9> values{};
    std::array<bool, 9> masked{};

    uint32_t valid_taps() const {
        uint32_t n = 0;
        for (uint32_t i = 0; i < k * k; ++i) n += masked[i] ? 0u : 1u;
        return n;
    }
};

// ----------------------------------------------------------------------------
// MemoryArrayUnit: R dual-port banks behind a write-side barrel shifter and a
// read-side selector. Output map f of any layer lives in bank f % R; when a
// layer has more than R maps, map f sits at slot f / R within its bank's
// region. Each bank accepts one read and one write per cycle.
// ----------------------------------------------------------------------------
class MemoryArrayUnit {
public:
    MemoryArrayUnit(uint32_t banks, uint32_t depth)
        : r_(banks), depth_(depth), mem_(banks, std::vector<act_t>(depth, 0)),
          wrote_this_cycle_(banks, 0) {}

    uint32_t bank_count() const { return r_; }
    uint32_t depth() const { return depth_; }
    uint64_t reads_issued() const { return reads_issued_; }
    uint64_t words_read() const { return words_read_; }
    uint32_t write_shift() const { return write_shift_; }
    uint32_t read_select() const { return read_select_; }

    // Per-cycle dual-port bookkeeping: a bank may be written once per cycle.
    void begin_cycle() {
        for (uint32_t b : dirty_banks_) wrote_this_cycle_[b] = 0;
        dirty_banks_.clear();
    }

    // Store one output word: map f, linear position x + y*w_out inside a
    // region starting at write_base. The barrel shifter is the f % R routing.
    void write(uint32_t f, uint32_t map_words, uint32_t write_base, uint32_t addr, act_t value) {
        uint32_t bank = f % r_;
        write_shift_ = f % r_;
        if (wrote_this_cycle_[bank])
            throw BankConflict("two writes to bank " + std::to_string(bank) + " in one cycle");
        wrote_this_cycle_[bank] = 1;
        dirty_banks_.push_back(bank);
        uint64_t at = uint64_t(write_base) + uint64_t(f / r_) * map_words + addr;
        if (at >= depth_) throw CapacityError("bank write beyond depth");
        mem_[bank][at] = value;
    }

    // Read one word of map c at (x, y) from a region of w x h maps.
    act_t read_word(uint32_t c, uint32_t read_base, uint32_t w, uint32_t h, uint32_t x, uint32_t y) const {
        uint32_t bank = c % r_;
        uint64_t at = uint64_t(read_base) + uint64_t(c / r_) * (uint64_t(w) * h) + uint64_t(y) * w + x;
        if (at >= depth_) throw CapacityError("bank read beyond depth");
        return mem_[bank][at];
    }

    // Selector read: one word from each of `group` consecutive banks, i.e. the
    // same (x, y) of maps c_first .. c_first+group-1. Channels at or beyond
    // c_total read as zero (they exist only as tree slack).
    void read_group(uint32_t c_first, uint32_t group, uint32_t c_total, uint32_t read_base,
                    uint32_t w, uint32_t h, uint32_t x, uint32_t y, act_t* out) {
        read_select_ = c_first % r_;
        for (uint32_t g = 0; g < group; ++g) {
            uint32_t c = c_first + g;
            if (c >= c_total) {
                out[g] = 0;
                continue;
            }
            out[g] = read_word(c, read_base, w, h, x, y);
            ++reads_issued_;
            ++words_read_;
        }
    }

    // Wide read for stride-s layers: an s x s block of map c with top-left
    // (x0, y0); out-of-map words are zero. One port access, s*s words.
    void read_block(uint32_t c, uint32_t read_base, uint32_t w, uint32_t h, uint32_t x0, uint32_t y0,
                    uint32_t s, act_t* out) {
        ++reads_issued_;
        for (uint32_t dy = 0; dy < s; ++dy)
            for (uint32_t dx = 0; dx < s; ++dx) {
                uint32_t x = x0 + dx, y = y0 + dy;
                if (x >= w || y >= h) {
                    out[dy * s + dx] = 0;
                } else {
                    out[dy * s + dx] = read_word(c, read_base, w, h, x, y);
                    ++words_read_;
                }
            }
    }

    // Preload an external tensor as maps of a region (used for the input image).
    void preload(const FeatureMapTensor& t, uint32_t base) {
        for (uint32_t c = 0; c < t.c; ++c)
            for (uint32_t y = 0; y < t.h; ++y)
                for (uint32_t x = 0; x < t.w; ++x) {
                    uint64_t at = uint64_t(base) + uint64_t(c / r_) * (uint64_t(t.w) * t.h) +
                                  uint64_t(y) * t.w + x;
                    if (at >= depth_) throw CapacityError("image does not fit bank depth");
                    mem_[c % r_][at] = t.at(c, x, y);
                }
    }

    // Reassemble a stored region into a tensor (selector + shifter round trip).
    FeatureMapTensor extract(uint32_t maps, uint32_t w, uint32_t h, uint32_t base) const {
        FeatureMapTensor t(maps, w, h);
        for (uint32_t c = 0; c < maps; ++c)
            for (uint32_t y = 0; y < h; ++y)
                for (uint32_t x = 0; x < w; ++x) t.set(c, x, y, read_word(c, base, w, h, x, y));
        return t;
    }

private:
    uint32_t r_;
    uint32_t depth_;
    std::vector<std::vector<act_t>> mem_;
    std::vector<uint8_t> wrote_this_cycle_;
    std::vector<uint32_t> dirty_banks_;
    uint32_t write_shift_ = 0;
    uint32_t read_select_ = 0;
    uint64_t reads_issued_ = 0;
    uint64_t words_read_ = 0;
};

// ----------------------------------------------------------------------------
// Receptor: k shift-register arrays of W registers in sequence, plus the
// masking circuit. One pixel enters per cycle; after the fill latency of
// W*floor(k/2) + floor(k/2) cycles, one masked window leaves per cycle with
// the center walking the map in raster order. Maps streamed back to back keep
// producing windows with no idle cycle: taps that would cross a map edge are
// zeroed by position, so pixels of the next map already in the registers never
// leak into the previous map's windows.
//
// The register file is modeled as one chain (the arrays are connected in
// sequence); the tap for window offset (dx, dy) is chain position
// (floor(k/2)-dy)*W + (floor(k/2)-dx). For maps narrower than k the chain is
// extended so real taps still have somewhere to live.
// ----------------------------------------------------------------------------
class Receptor {
public:
    Receptor(uint32_t k, uint32_t w_in, uint32_t h_in)
        : k_(k), w_(w_in), h_(h_in), half_(int(k) / 2),
          chain_(std::max<size_t>(size_t(k) * w_in, size_t(k - 1) * (w_in + 1) + 1), 0) {}

    uint32_t k() const { return k_; }
    uint32_t w_in() const { return w_; }
    uint32_t h_in() const { return h_; }
    // Pixels that must enter before the first window (masking epoch t = 0).
    uint32_t fill_latency() const { return w_ * uint32_t(half_) + uint32_t(half_); }
    int64_t t() const { return t_; }

    void reset() {
        std::fill(chain_.begin(), chain_.end(), 0);
        head_ = 0;
        fed_ = 0;
        t_ = -int64_t(fill_latency());
    }

    // Shift one pixel in. Returns a window once the fill latency has passed.
    // The window center is (t % W, (t / W) % H): position wraps per map, so a
    // continuous pixel stream yields one window per map position per cycle.
    std::optional<MaskedWindow> step(act_t pixel) {
        // the chain is circular: entry is position 0, older pixels at higher offsets
        head_ = head_ == 0 ? chain_.size() - 1 : head_ - 1;
        chain_[head_] = pixel;
        ++fed_;
        int64_t now = t_++;
        if (now < 0) return std::nullopt;
        uint64_t per_map = uint64_t(now) % (uint64_t(w_) * h_);
        MaskedWindow win;
        win.k = k_;
        win.center_x = int32_t(per_map % w_);
        win.center_y = int32_t(per_map / w_);
        for (int dy = -half_; dy <= half_; ++dy) {
            for (int dx = -half_; dx <= half_; ++dx) {
                size_t tap = size_t(half_ - dy) * w_ + size_t(half_ - dx);
                size_t at = size_t(dy + half_) * k_ + size_t(dx + half_);
                int x = win.center_x + dx, y = win.center_y + dy;
                bool oob = x < 0 || y < 0 || x >= int(w_) || y >= int(h_);
                win.masked[at] = oob;
                win.values[at] = oob ? 0 : chain_at(tap);
            }
        }
        return win;
    }

    // Register-array view for trace dumps: array a (0 = farthest from the
    // input), register q within the array, matching the chained layout.
    act_t reg(uint32_t array, uint32_t q) const { return chain_at(size_t(k_ - 1 - array) * w_ + q); }
    // True once the register has received real data.
    bool reg_valid(uint32_t array, uint32_t q) const {
        return uint64_t(k_ - 1 - array) * w_ + q < fed_;
    }

private:
    act_t chain_at(size_t offset) const {
        size_t at = head_ + offset;
        if (at >= chain_.size()) at -= chain_.size();
        return chain_[at];
    }

    uint32_t k_, w_, h_;
    int half_;
    std::vector<act_t> chain_;
    size_t head_ = 0;
    uint64_t fed_ = 0;
    int64_t t_ = 0;  // set by reset()
};

// ----------------------------------------------------------------------------
// BlockReceptor: stride-s variant. The read port hands it an s x s block per
// cycle and it emits one masked window per output position, so a stride-2
// layer still finishes one output pixel per lane per cycle. Implemented as a
// circular buffer of k+s-1 map rows.
// ----------------------------------------------------------------------------
class BlockReceptor {
public:
    BlockReceptor(uint32_t k, uint32_t stride, uint32_t w_in, uint32_t h_in)
        : k_(k), s_(stride), w_(w_in), h_(h_in), half_(int(k) / 2), rows_(size_t(k) + stride - 1),
          buf_(rows_, std::vector<act_t>(w_in, 0)) {}

    // block: s*s values, row-major, covering input (s*x .. s*x+s-1, s*y .. s*y+s-1)
    // with out-of-map entries zero (as delivered by MemoryArrayUnit::read_block).
    MaskedWindow step(uint32_t x, uint32_t y, const act_t* block) {
        for (uint32_t dy = 0; dy < s_; ++dy) {
            uint32_t row = s_ * y + dy;
            if (row >= h_) break;
            std::vector<act_t>& line = buf_[row % rows_];
            for (uint32_t dx = 0; dx < s_; ++dx) {
                uint32_t col = s_ * x + dx;
                if (col < w_) line[col] = block[dy * s_ + dx];
            }
        }
        MaskedWindow win;
        win.k = k_;
        win.center_x = int32_t(s_ * x);
        win.center_y = int32_t(s_ * y);
        for (int dy = -half_; dy <= half_; ++dy)
            for (int dx = -half_; dx <= half_; ++dx) {
                int cx = win.center_x + dx, cy = win.center_y + dy;
                size_t at = size_t(dy + half_) * k_ + size_t(dx + half_);
                bool oob = cx < 0 || cy < 0 || cx >= int(w_) || cy >= int(h_);
                win.masked[at] = oob;
                win.values[at] = oob ? 0 : buf_[uint32_t(cy) % rows_][uint32_t(cx)];
            }
        return win;
    }

private:
    uint32_t k_, s_, w_, h_;
    int half_;
    size_t rows_;
    std::vector<std::vector<act_t>> buf_;
};

// ----------------------------------------------------------------------------
// ReceptorUnit: a row of parallel receptors turning `lanes` pixels per cycle
// into k*k*lanes window values. For k = 1 the input is bypassed unchanged.
// Standard layers use lanes = P (one window fanned out to all HNs); depthwise
// layers use lanes = Q (one map stream per hardware neuron).
// ----------------------------------------------------------------------------
class ReceptorUnit {
public:
    ReceptorUnit(uint32_t k, uint32_t lanes, uint32_t w_in, uint32_t h_in) : k_(k), lanes_(lanes) {
        receptors_.reserve(lanes);
        for (uint32_t i = 0; i < lanes; ++i) receptors_.emplace_back(k, w_in, h_in);
        for (Receptor& r : receptors_) r.reset();
    }

    uint32_t lanes() const { return lanes_; }
    Receptor& lane(uint32_t i) { return receptors_.at(i); }

    // One cycle: shift every lane; emits lanes windows once filled.
    // k = 1 bypasses: the window is the pixel itself, never masked.
    bool step(const act_t* pixels, std::vector<MaskedWindow>& out) {
        out.resize(lanes_);
        if (k_ == 1) {
            for (uint32_t i = 0; i < lanes_; ++i) {
                out[i].k = 1;
                out[i].values[0] = pixels[i];
                out[i].masked[0] = false;
            }
            return true;
        }
        bool ready = true;
        for (uint32_t i = 0; i < lanes_; ++i) {
            auto win = receptors_[i].step(pixels[i]);
            if (!win) {
                ready = false;
                continue;
            }
            out[i] = *win;
        }
        return ready;
    }

private:
    uint32_t k_, lanes_;
    std::vector<Receptor> receptors_;
};

} // namespace nmsim
