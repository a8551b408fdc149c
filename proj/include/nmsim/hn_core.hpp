#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nmsim/model.hpp"

namespace nmsim {

// Partition of the shared multiplier/adder pool for one window size: Q adder
// trees of k*k*P leaves each. Leftover multipliers are the external
// fragmentation the utilization report accounts for.
struct HnConfig {
    uint32_t k = 1;
    uint32_t p = 1;   // input-map group width
    uint32_t q = 1;   // parallel hardware neurons
    uint32_t m = 256; // pool size
    uint32_t multipliers_used() const { return q * k * k * p; }
    uint32_t multipliers_idle() const { return m - multipliers_used(); }
};

struct HwKPQ {
    uint32_t p = 0, q = 0;
};

// Reshape the pool for window size k using the (P, Q) pair the hardware
// declares for it. Fails when the requested trees do not fit the pool.
inline HnConfig configure_hn(uint32_t m, uint32_t k, HwKPQ pq) {
    HnConfig cfg;
    cfg.k = k;
    cfg.p = pq.p;
    cfg.q = pq.q;
    cfg.m = m;
    if (uint64_t(cfg.q) * k * k * cfg.p > m)
        throw ConfigError("configuration k=" + std::to_string(k) + " needs " +
                          std::to_string(uint64_t(cfg.q) * k * k * cfg.p) + " multipliers, pool has " +
                          std::to_string(m));
    return cfg;
}

// State of one hardware neuron: k*k*P distributed weight memories sharing one
// read address, a Netsum memory of one partial sum per output position, and
// the bias word for the map currently assigned.
class HnState {
public:
    HnState(uint32_t k, uint32_t p, uint32_t netsum_words, uint32_t weight_depth)
        : k_(k), p_(p), slots_(k * k * p), weight_mem_(size_t(k) * k * p * weight_depth, 0),
          weight_depth_(weight_depth), netsum_(netsum_words, 0) {}

    uint32_t slots() const { return slots_; }
    uint32_t weight_addr() const { return weight_addr_; }
    void set_weight_addr(uint32_t a) { weight_addr_ = a; }

    // Distributed memory layout: slot-major so one shared address reads one
    // word from every memory.
    void load_weight(uint32_t slot, uint32_t addr, int32_t w) {
        weight_mem_.at(size_t(slot) * weight_depth_ + addr) = w;
    }
    int32_t weight(uint32_t slot, uint32_t addr) const {
        return weight_mem_[size_t(slot) * weight_depth_ + addr];
    }

    void set_bias(int32_t b) { bias_ = b; }
    int32_t bias() const { return bias_; }

    acc_t netsum_at(uint32_t pos) const { return netsum_.at(pos); }

    // SNU: multiply the k*k*P window values by the weights at the shared
    // address. Products are exact (activation_bits + weight_bits wide).
    void snu_step(std::span<const act_t> inputs, std::span<acc_t> products) const {
        for (uint32_t i = 0; i < slots_; ++i)
            products[i] = acc_t(inputs[i]) * weight_mem_[size_t(i) * weight_depth_ + weight_addr_];
    }

    // DU: adder tree plus accumulator. The first pass overwrites the Netsum
    // word for this position, later passes accumulate, and only the final
    // pass releases the result. The running sum must stay inside the declared
    // accumulator width; validation is supposed to have ruled overflow out.
    std::optional<acc_t> du_step(std::span<const acc_t> products, uint32_t pass_index,
                                 uint32_t pass_count, uint32_t pos, acc_t acc_min, acc_t acc_max) {
        acc_t tree = 0;
        for (uint32_t i = 0; i < slots_; ++i) tree += products[i];
        acc_t sum = pass_index == 0 ? tree : netsum_.at(pos) + tree;
        if (sum < acc_min || sum > acc_max)
            throw OverflowError("netsum overflow at position " + std::to_string(pos));
        netsum_[pos] = sum;
        if (pass_index + 1 == pass_count) return sum;
        return std::nullopt;
    }

private:
    uint32_t k_, p_, slots_;
    std::vector<int32_t> weight_mem_;
    uint32_t weight_depth_;
    std::vector<acc_t> netsum_;
    int32_t bias_ = 0;
    uint32_t weight_addr_ = 0;
};

// SU: bias, activation, requantization (pooling hook is the identity). The
// arithmetic is the same su_apply the reference convolution uses, which is
// what makes executor-vs-oracle bit-exactness a meaningful contract for the
// scheduling and dataflow around it.
inline act_t su_step(acc_t netsum, int32_t bias, Activation act, const RequantParams& rq,
                     const NumericProfile& profile) {
    return su_apply(netsum, bias, act, rq, profile);
}

} // namespace nmsim
