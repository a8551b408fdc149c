#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nmsim/metrics.hpp"
#include "nmsim/model_io.hpp"
#include "nmsim/oracle.hpp"

namespace nmsim {

inline HwConfig load_hw_config(const std::string& path) {
    if (path.empty()) return HwConfig{};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open hardware config '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
        HwConfig hw;
        hw.m = doc.value("m", hw.m);
        hw.r = doc.value("r", hw.r);
        hw.clock_hz = doc.value("clock_hz", hw.clock_hz);
        hw.pipeline_overhead_const = doc.value("pipeline_overhead_const", hw.pipeline_overhead_const);
        hw.bank_depth = doc.value("bank_depth", hw.bank_depth);
        if (doc.contains("config_table")) {
            hw.config_table.clear();
            for (auto it = doc["config_table"].begin(); it != doc["config_table"].end(); ++it) {
                HwKPQ pq;
                pq.p = it.value().at("p").get<uint32_t>();
                pq.q = it.value().at("q").get<uint32_t>();
                hw.config_table[uint32_t(std::stoul(it.key()))] = pq;
            }
        }
        hw.validate();
        return hw;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("hardware config: ") + e.what());
    }
}

inline ResourceModel load_resource_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open resource profile '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
        ResourceModel rm;
        for (auto it = doc.at("unit_costs").begin(); it != doc.at("unit_costs").end(); ++it)
            rm.unit_costs[it.key()] = it.value().get<uint64_t>();
        rm.multiplier_cost = doc.at("multiplier_cost").get<uint64_t>();
        rm.validate();
        return rm;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("resource profile: ") + e.what());
    }
}

// Row type label in the published table style.
inline std::string row_type_label(const SotRow& r) {
    if (r.k == 1) return "1x1";
    return r.is_depthwise() ? "DW3x3" : "3x3";
}

// Prediction table: one CSV row per layer with the closed-form requirement A,
// the predicted cycle count B, and the peak C = B * m.
inline std::string predict_table_csv(const CnnModel& model, const SotProgram& prog, const HwConfig& hw) {
    std::ostringstream os;
    os << "L,Type,W_in,H_in,W_out,H_out,C,F,A,B,C_peak\n";
    uint64_t total_a = 0, total_b = 0, total_c = 0;
    for (const SotRow& r : prog.rows) {
        uint64_t a = count_mul_eq2(model.layer(r.layer_index));
        uint64_t b = predict_cycles(r, hw);
        total_a += a;
        total_b += b;
        total_c += b * hw.m;
        os << r.layer_index << ',' << row_type_label(r) << ',' << r.w_in << ',' << r.h_in << ','
           << r.w_out << ',' << r.h_out << ',' << r.c_in << ',' << r.f_out << ',' << a << ',' << b
           << ',' << b * hw.m << '\n';
    }
    os << "Total,,,,,,,," << total_a << ',' << total_b << ',' << total_c << '\n';
    return os.str();
}

// Simulation table: same shape, A = effective multiplications measured by the
// executor's activity tally.
inline std::string simulate_table_csv(const SotProgram& prog, const CycleStats& stats) {
    std::ostringstream os;
    os << "L,Type,W_in,H_in,W_out,H_out,C,F,A,B,C_peak\n";
    uint64_t total_a = 0, total_b = 0, total_c = 0;
    for (size_t i = 0; i < prog.rows.size(); ++i) {
        const SotRow& r = prog.rows[i];
        const LayerStats& l = stats.layers.at(i);
        total_a += l.effective_muls_a;
        total_b += l.cycles_b;
        total_c += l.peak_muls_c;
        os << r.layer_index << ',' << row_type_label(r) << ',' << r.w_in << ',' << r.h_in << ','
           << r.w_out << ',' << r.h_out << ',' << r.c_in << ',' << r.f_out << ','
           << l.effective_muls_a << ',' << l.cycles_b << ',' << l.peak_muls_c << '\n';
    }
    os << "Total,,,,,,,," << total_a << ',' << total_b << ',' << total_c << '\n';
    return os.str();
}

inline nlohmann::ordered_json shares_json(const OverheadShares& s) {
    return nlohmann::ordered_json{{"internal_fragmentation", s.internal_fragmentation},
                                  {"padding", s.padding},
                                  {"external_fragmentation", s.external_fragmentation},
                                  {"pipeline", s.pipeline}};
}

// Simulation report. Per layer the measured effective count A and the
// closed-form requirement are both printed so any gap between the two
// padding conventions stays visible.
inline nlohmann::ordered_json report_json(const CnnModel& model, const UtilizationReport& rep) {
    nlohmann::ordered_json j;
    j["r_u"] = rep.r_u;
    j["r_c"] = rep.r_c;
    j["eff_arch"] = rep.eff_arch;
    j["total_cycles"] = rep.total_cycles;
    j["total_effective_muls"] = rep.total_effective;
    j["total_peak_muls"] = rep.total_peak;
    j["fps"] = rep.fps;
    j["overhead_shares"] = shares_json(rep.shares);
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const LayerUtilization& lu : rep.per_layer) {
        nlohmann::ordered_json jl;
        jl["L"] = lu.layer_index;
        jl["A"] = lu.effective;
        jl["A_eq2"] = count_mul_eq2(model.layer(lu.layer_index));
        jl["B"] = lu.cycles_b;
        jl["C"] = lu.peak;
        jl["overhead_shares"] = shares_json(lu.shares);
        layers.push_back(jl);
    }
    j["per_layer"] = layers;
    return j;
}

} // namespace nmsim
