#pragma once

#include <map>
#include <string>
#include <vector>

#include "nmsim/sot_control.hpp"

namespace nmsim {

// ----------------------------------------------------------------------------
// Resource model for the composition rate: cost of each system function and
// the share of the SNU attributable to the multipliers themselves. The
// reference profile ships as data (resources_reference.json) so other cost
// tables (e.g. transistor counts) can be swapped in without code changes.
// ----------------------------------------------------------------------------
struct ResourceModel {
    std::map<std::string, uint64_t> unit_costs;  // SNU, DU, SU, Softmax, SSD_box, NMS, FrameworkControl
    uint64_t multiplier_cost = 0;

    uint64_t total() const {
        uint64_t n = 0;
        for (const auto& [name, c] : unit_costs) n += c;
        return n;
    }
    void validate() const {
        auto it = unit_costs.find("SNU");
        uint64_t snu = it == unit_costs.end() ? 0 : it->second;
        if (multiplier_cost > snu)
            throw ConfigError("multiplier cost exceeds the SNU cost that contains it");
    }

    // Reference system cost table (lookup-table counts per unit).
    static ResourceModel reference() {
        ResourceModel rm;
        rm.unit_costs = {{"SNU", 50432},          {"DU", 13979}, {"SU", 2300},
                         {"Softmax", 2435},       {"SSD_box", 1787}, {"NMS", 909},
                         {"FrameworkControl", 12454}};
        rm.multiplier_cost = 47104;
        return rm;
    }
};

// Multiplier composition rate: share of all system resources spent on the
// multipliers themselves.
inline double composition(const ResourceModel& rm) {
    rm.validate();
    uint64_t all = rm.total();
    if (all == 0) return 0.0;
    return double(rm.multiplier_cost) / double(all);
}

inline double eff_arch(double r_u, double r_c) { return r_u * r_c; }

// ----------------------------------------------------------------------------
// Utilization report: effective share of the peak multiplier-cycles plus the
// exact overhead decomposition. Integer tallies from the executor partition
// the peak, so r_u and the four shares sum to 1 by construction.
// ----------------------------------------------------------------------------
struct OverheadShares {
    double internal_fragmentation = 0.0;
    double padding = 0.0;
    double external_fragmentation = 0.0;
    double pipeline = 0.0;
};

struct LayerUtilization {
    uint32_t layer_index = 0;
    uint64_t effective = 0;
    uint64_t cycles_b = 0;
    uint64_t peak = 0;
    OverheadShares shares;  // fractions of this layer's peak
};

struct UtilizationReport {
    double r_u = 0.0;
    double r_c = 0.0;       // filled by the caller from a ResourceModel
    double eff_arch = 0.0;  // r_u * r_c
    OverheadShares shares;  // fractions of total peak
    uint64_t total_effective = 0;
    uint64_t total_peak = 0;
    uint64_t total_cycles = 0;
    double fps = 0.0;
    std::vector<LayerUtilization> per_layer;
};

inline UtilizationReport utilization(const CycleStats& stats) {
    if (stats.layers.empty()) throw EmptyStats("utilization of an empty run");
    UtilizationReport rep;
    uint64_t eff = 0, internal = 0, padding = 0, external = 0, pipeline = 0, peak = 0;
    for (const LayerStats& l : stats.layers) {
        eff += l.effective_muls_a;
        internal += l.internal_frag_slots;
        padding += l.padding_slots;
        external += l.external_frag_slots;
        pipeline += l.pipeline_slots;
        peak += l.peak_muls_c;
        LayerUtilization lu;
        lu.layer_index = l.layer_index;
        lu.effective = l.effective_muls_a;
        lu.cycles_b = l.cycles_b;
        lu.peak = l.peak_muls_c;
        double lp = double(l.peak_muls_c);
        lu.shares.internal_fragmentation = double(l.internal_frag_slots) / lp;
        lu.shares.padding = double(l.padding_slots) / lp;
        lu.shares.external_fragmentation = double(l.external_frag_slots) / lp;
        lu.shares.pipeline = double(l.pipeline_slots) / lp;
        rep.per_layer.push_back(lu);
    }
    rep.total_effective = eff;
    rep.total_peak = peak;
    rep.total_cycles = stats.total_cycles();
    rep.fps = stats.fps();
    rep.r_u = double(eff) / double(peak);
    rep.shares.internal_fragmentation = double(internal) / double(peak);
    rep.shares.padding = double(padding) / double(peak);
    rep.shares.external_fragmentation = double(external) / double(peak);
    rep.shares.pipeline = double(pipeline) / double(peak);
    return rep;
}

} // namespace nmsim
