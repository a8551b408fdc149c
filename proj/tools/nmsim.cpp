// nmsim: batch front end for the accelerator simulator.
//
//   simulate       cycle-level run of a model over one or more images
//   predict        static per-layer cycle/throughput table, no data needed
//   fuzz           randomized executor-vs-reference equivalence runs
//   dump-receptor  per-cycle receptor trace (masking table columns) as CSV
//   dump-hn        per-cycle products/tree/accumulator of one HN as CSV
//   gen            deterministic pseudo-random weights and image for a model
//
// Exit codes: 0 ok, 2 input error, 3 internal invariant violation
// (bank conflict, accumulator overflow, fuzz mismatch).

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "nmsim/fuzzgen.hpp"
#include "nmsim/metrics.hpp"
#include "nmsim/model_io.hpp"
#include "nmsim/oracle.hpp"
#include "nmsim/report.hpp"
#include "nmsim/sot_control.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

uint64_t fnv1a(const std::vector<nmsim::act_t>& data) {
    uint64_t h = 1469598103934665603ull;
    for (nmsim::act_t v : data) {
        for (int i = 0; i < 4; ++i) {
            h ^= uint8_t(uint32_t(v) >> (8 * i));
            h *= 1099511628211ull;
        }
    }
    return h;
}

unsigned batch_threads(size_t jobs) {
    const char* env = std::getenv("NM_SIM_THREADS");
    unsigned cap;
    if (env == nullptr) {
        cap = std::max(1u, std::thread::hardware_concurrency());
    } else {
        long v = std::strtol(env, nullptr, 10);
        cap = v <= 0 ? 1u : unsigned(v);  // 0 = serial
    }
    return unsigned(std::min<size_t>(cap, jobs));
}

struct Common {
    std::string hw_path;
    std::string profile = "quant8";
    std::string format = "csv";
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw nmsim::ParseError("cannot open '" + path + "' for writing");
    out << text;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
int cmd_simulate(const Common& common, const std::string& model_path, const std::string& weights_path,
                 const std::vector<std::string>& image_paths, const std::string& resources_path,
                 const std::string& report_path, const std::string& table_path, bool compare_oracle) {
    using namespace nmsim;
    // the whole manifest must load before any simulation starts
    CnnModel model = load_model_file(model_path);
    NumericProfile profile = load_profile(common.profile, model);
    {
        std::vector<Diagnostic> diags = validate_model(model, profile);
        if (!diags.empty())
            throw ShapeError("layer " + std::to_string(diags.front().layer_index) + ": " +
                             diags.front().message);
    }
    HwConfig hw = load_hw_config(common.hw_path);
    WeightStore weights = load_weights(read_file_bytes(weights_path), model);
    std::vector<FeatureMapTensor> inputs;
    for (const std::string& p : image_paths)
        inputs.push_back(image_to_tensor(load_image_bytes(read_file_bytes(p)), profile));
    ResourceModel rm = resources_path.empty() ? ResourceModel::reference() : load_resource_model(resources_path);

    SotProgram prog = compile_sot(model, hw);

    struct ImageRun {
        ExecResult result;
        std::vector<bool> bit_exact;
        std::exception_ptr error;
    };
    std::vector<ImageRun> runs(inputs.size());

    unsigned nthreads = batch_threads(inputs.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            try {
                runs[i].result = execute(prog, weights, inputs[i], hw, profile);
                if (compare_oracle) {
                    auto [refs, macs] = infer_ref(model, weights, inputs[i], profile);
                    runs[i].bit_exact.resize(refs.size());
                    for (size_t l = 0; l < refs.size(); ++l)
                        runs[i].bit_exact[l] = runs[i].result.outputs[l] == refs[l];
                }
            } catch (...) {
                runs[i].error = std::current_exception();
            }
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned tid = 0; tid < nthreads; ++tid) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    for (ImageRun& r : runs)
        if (r.error) std::rethrow_exception(r.error);

    const CycleStats& stats = runs.front().result.stats;
    UtilizationReport rep = utilization(stats);
    rep.r_c = composition(rm);
    rep.eff_arch = eff_arch(rep.r_u, rep.r_c);

    nlohmann::ordered_json j = report_json(model, rep);
    nlohmann::ordered_json jimages = nlohmann::ordered_json::array();
    bool all_exact = true;
    for (size_t i = 0; i < runs.size(); ++i) {
        nlohmann::ordered_json ji;
        ji["path"] = image_paths[i];
        ji["final_output_digest"] =
            "fnv1a:" + std::to_string(fnv1a(runs[i].result.outputs.back().data));
        if (compare_oracle) {
            nlohmann::ordered_json jb = nlohmann::ordered_json::array();
            for (size_t l = 0; l < runs[i].bit_exact.size(); ++l) {
                jb.push_back(nlohmann::ordered_json{{"L", l + 1}, {"bit_exact", bool(runs[i].bit_exact[l])}});
                all_exact = all_exact && runs[i].bit_exact[l];
            }
            ji["oracle"] = jb;
        }
        jimages.push_back(ji);
    }
    j["images"] = jimages;
    if (!report_path.empty()) write_text(report_path, j.dump(2) + "\n");
    if (!table_path.empty()) write_text(table_path, simulate_table_csv(prog, stats));

    if (common.format == "json") {
        nlohmann::ordered_json brief{{"r_u", rep.r_u},       {"r_c", rep.r_c},
                                     {"eff_arch", rep.eff_arch}, {"total_cycles", rep.total_cycles},
                                     {"fps", rep.fps}};
        if (compare_oracle) brief["bit_exact"] = all_exact;
        std::cout << brief.dump() << "\n";
    } else {
        std::cout << "cycles=" << rep.total_cycles << " fps=" << rep.fps << " R_u=" << rep.r_u
                  << " R_c=" << rep.r_c << " Eff_arch=" << rep.eff_arch << "\n";
        if (compare_oracle)
            std::cout << "bit-exact: " << (all_exact ? "true" : "false") << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------
int cmd_predict(const Common& common, const std::string& model_path, const std::string& table_path) {
    using namespace nmsim;
    CnnModel model = load_model_file(model_path);
    HwConfig hw = load_hw_config(common.hw_path);
    SotProgram prog = compile_sot(model, hw);
    uint64_t total = 0, total_a = 0;
    for (const SotRow& r : prog.rows) {
        total += predict_cycles(r, hw);
        total_a += count_mul_eq2(model.layer(r.layer_index));
    }
    double fps = double(hw.clock_hz) / double(total);
    if (!table_path.empty()) write_text(table_path, predict_table_csv(model, prog, hw));
    if (common.format == "json") {
        std::cout << nlohmann::ordered_json{{"total_cycles", total},
                                            {"total_muls_eq2", total_a},
                                            {"fps", fps}}
                         .dump()
                  << "\n";
    } else {
        std::cout << "layers=" << prog.rows.size() << " total_cycles=" << total
                  << " total_muls_eq2=" << total_a << " fps=" << fps << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// fuzz
// ---------------------------------------------------------------------------
int cmd_fuzz(const Common& common, uint64_t seed, uint64_t count, bool inject_mask_skew) {
    using namespace nmsim;
    HwConfig hw = load_hw_config(common.hw_path);
    FuzzOptions opts;
    opts.skew_reference = inject_mask_skew;
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t case_seed = seed + i;
        FuzzCase fc = random_case(case_seed);
        FuzzResult fr = fuzz_check(fc, hw, case_seed, opts);
        if (!fr.ok) {
            std::string dir = "fuzz_repro_" + std::to_string(case_seed);
            std::filesystem::create_directories(dir);
            write_text(dir + "/model.json", save_model(fc.model));
            write_file_bytes(dir + "/weights.nmw", save_weights(fc.weights, fc.model));
            write_file_bytes(dir + "/image.nmi", save_image_bytes(fc.image));
            nlohmann::ordered_json manifest{{"seed", case_seed},
                                            {"profile", fr.profile_name},
                                            {"message", fr.message},
                                            {"model", dir + "/model.json"},
                                            {"weights", dir + "/weights.nmw"},
                                            {"image", dir + "/image.nmi"}};
            write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
            std::cerr << "fuzz: case " << case_seed << " failed: " << fr.message << "\n"
                      << "fuzz: repro bundle written to " << dir << "/\n";
            return kExitInternal;
        }
    }
    std::cout << "fuzz: " << count << " cases ok (seed " << seed << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// dump-receptor / dump-hn
// ---------------------------------------------------------------------------
struct RangeSpec {
    uint32_t layer = 0;
    uint32_t hn = 0;
    int64_t first = 0, last = 0;
};

RangeSpec parse_range(const std::string& text, bool with_hn) {
    RangeSpec rs;
    char extra = 0;
    if (with_hn) {
        if (std::sscanf(text.c_str(), "%u,%u,%ld:%ld%c", &rs.layer, &rs.hn, &rs.first, &rs.last, &extra) != 4)
            throw nmsim::ParseError("expected layer,hn,first:last, got '" + text + "'");
    } else {
        if (std::sscanf(text.c_str(), "%u,%ld:%ld%c", &rs.layer, &rs.first, &rs.last, &extra) != 3)
            throw nmsim::ParseError("expected layer,first:last, got '" + text + "'");
    }
    if (rs.last < rs.first) throw nmsim::ParseError("empty cycle range '" + text + "'");
    return rs;
}

class ReceptorCsvSink : public nmsim::TraceSink {
public:
    ReceptorCsvSink(std::ostream& os, const RangeSpec& rs, uint32_t lane) : os_(os), rs_(rs), lane_(lane) {}

    bool wants_receptor(uint32_t layer, uint32_t lane) override {
        return layer == rs_.layer && lane == lane_;
    }
    void receptor_row(uint32_t, uint32_t, int64_t t, nmsim::act_t input, const nmsim::Receptor& r,
                      const nmsim::MaskedWindow& w) override {
        if (t < rs_.first || t > rs_.last) return;
        const uint32_t k = r.k();
        if (!wrote_header_) {
            os_ << "t,input";
            for (uint32_t j = 0; j < k; ++j)
                for (uint32_t i = 0; i < k; ++i) os_ << ",reg_r" << j << "c" << i;
            for (uint32_t j = 0; j < k; ++j)
                for (uint32_t i = 0; i < k; ++i) os_ << ",pos_r" << j << "c" << i;
            for (uint32_t j = 0; j < k; ++j)
                for (uint32_t i = 0; i < k; ++i) os_ << ",out_r" << j << "c" << i;
            os_ << "\n";
            wrote_header_ = true;
        }
        const int half = int(k) / 2;
        os_ << t << ',' << input;
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                uint32_t array = uint32_t(half + dy), q = uint32_t(half - dx);
                os_ << ',';
                if (r.reg_valid(array, q)) os_ << r.reg(array, q);
            }
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx)
                os_ << ',' << (w.center_x + dx) << ':' << (w.center_y + dy);
        for (uint32_t i = 0; i < k * k; ++i) os_ << ',' << w.values[i];
        os_ << "\n";
    }

private:
    std::ostream& os_;
    RangeSpec rs_;
    uint32_t lane_;
    bool wrote_header_ = false;
};

class HnCsvSink : public nmsim::TraceSink {
public:
    HnCsvSink(std::ostream& os, const RangeSpec& rs) : os_(os), rs_(rs) {}

    bool wants_hn(uint32_t layer, uint32_t hn) override { return layer == rs_.layer && hn == rs_.hn; }
    void hn_row(uint32_t, uint32_t, uint64_t cycle, std::span<const nmsim::acc_t> products,
                nmsim::acc_t tree, nmsim::acc_t netsum) override {
        if (int64_t(cycle) < rs_.first || int64_t(cycle) > rs_.last) return;
        if (!wrote_header_) {
            os_ << "cycle";
            for (size_t i = 0; i < products.size(); ++i) os_ << ",p" << i;
            os_ << ",tree_sum,accumulator\n";
            wrote_header_ = true;
        }
        os_ << cycle;
        for (nmsim::acc_t p : products) os_ << ',' << p;
        os_ << ',' << tree << ',' << netsum << "\n";
    }

private:
    std::ostream& os_;
    RangeSpec rs_;
    bool wrote_header_ = false;
};

int cmd_dump(const Common& common, const std::string& spec_text, bool hn_dump,
             const std::string& model_path, const std::string& weights_path,
             const std::string& image_path, uint32_t lane, const std::string& out_path) {
    using namespace nmsim;
    RangeSpec rs = parse_range(spec_text, hn_dump);
    CnnModel model = load_model_file(model_path);
    if (rs.layer < 1 || rs.layer > model.layers.size())
        throw ParseError("layer " + std::to_string(rs.layer) + " is out of range");
    NumericProfile profile = load_profile(common.profile, model);
    HwConfig hw = load_hw_config(common.hw_path);
    WeightStore weights = load_weights(read_file_bytes(weights_path), model);
    FeatureMapTensor input = image_to_tensor(load_image_bytes(read_file_bytes(image_path)), profile);
    const LayerSpec& target = model.layer(rs.layer);
    if (!hn_dump && !(target.k == 3 && target.stride == 1))
        throw ParseError("receptor traces exist only for stride-1 3x3 layers");

    SotProgram prog = compile_sot(model, hw);
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw ParseError("cannot open '" + out_path + "' for writing");
    if (hn_dump) {
        HnCsvSink sink(os, rs);
        execute(prog, weights, input, hw, profile, &sink);
    } else {
        ReceptorCsvSink sink(os, rs, lane);
        execute(prog, weights, input, hw, profile, &sink);
    }
    std::cout << "trace written to " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------
int cmd_gen(const Common& common, const std::string& model_path, uint64_t seed,
            const std::string& weights_path, const std::string& image_path) {
    using namespace nmsim;
    CnnModel model = load_model_file(model_path);
    NumericProfile profile = load_profile(common.profile, model);
    Rng rng(seed);
    WeightStore ws = random_weights(rng, model, profile);
    RawImage img = random_image(rng, model);
    if (!weights_path.empty()) write_file_bytes(weights_path, save_weights(ws, model));
    if (!image_path.empty()) write_file_bytes(image_path, save_image_bytes(img));
    std::cout << "generated weights and image for '" << model.name << "' (seed " << seed << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cycle-level simulator for a line-buffer CNN accelerator"};
    app.require_subcommand(1);
    app.fallthrough();  // --hw/--profile/--format may follow the subcommand

    Common common;
    app.add_option("--hw", common.hw_path, "hardware config JSON (default: reference system)");
    app.add_option("--profile", common.profile, "numeric profile: quant8, wide, or a JSON path");
    app.add_option("--format", common.format, "stdout summary format")->check(CLI::IsMember({"csv", "json"}));

    std::string model_path, weights_path, image_path, resources_path, report_path, table_path, out_path;
    std::vector<std::string> image_paths;
    bool compare_oracle = false, inject_mask_skew = false;
    uint64_t seed = 0, count = 100;
    uint32_t lane = 0;
    std::string range_text;

    CLI::App* sim = app.add_subcommand("simulate", "cycle-level run over one or more images");
    sim->add_option("--model", model_path)->required();
    sim->add_option("--weights", weights_path)->required();
    sim->add_option("--image", image_paths, "input image (repeatable)")->required();
    sim->add_option("--resources", resources_path, "resource cost table JSON");
    sim->add_option("--report", report_path, "report JSON output path");
    sim->add_option("--table", table_path, "per-layer CSV output path");
    sim->add_flag("--compare-oracle", compare_oracle, "also run the reference inference and compare");

    CLI::App* pre = app.add_subcommand("predict", "static cycle and throughput table");
    pre->add_option("--model", model_path)->required();
    pre->add_option("--table", table_path, "per-layer CSV output path");

    CLI::App* fz = app.add_subcommand("fuzz", "randomized equivalence runs");
    fz->add_option("--seed", seed);
    fz->add_option("--count", count);
    fz->add_flag("--inject-mask-skew", inject_mask_skew,
                 "fault injection: compare against an off-by-one masking reference (harness self-check)");

    CLI::App* dr = app.add_subcommand("dump-receptor", "receptor trace CSV for layer,first:last");
    dr->add_option("spec", range_text, "layer,first:last (cycles relative to the masking epoch)")->required();
    dr->add_option("--model", model_path)->required();
    dr->add_option("--weights", weights_path)->required();
    dr->add_option("--image", image_path)->required();
    dr->add_option("--lane", lane, "receptor lane (default 0)");
    dr->add_option("--out", out_path)->required();

    CLI::App* dh = app.add_subcommand("dump-hn", "HN trace CSV for layer,hn,first:last");
    dh->add_option("spec", range_text, "layer,hn,first:last")->required();
    dh->add_option("--model", model_path)->required();
    dh->add_option("--weights", weights_path)->required();
    dh->add_option("--image", image_path)->required();
    dh->add_option("--out", out_path)->required();

    CLI::App* gen = app.add_subcommand("gen", "deterministic pseudo-random weights/image for a model");
    gen->add_option("--model", model_path)->required();
    gen->add_option("--seed", seed);
    gen->add_option("--weights", weights_path, "weights output path");
    gen->add_option("--image", image_path, "image output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(common, model_path, weights_path, image_paths, resources_path,
                                report_path, table_path, compare_oracle);
        if (pre->parsed()) return cmd_predict(common, model_path, table_path);
        if (fz->parsed()) return cmd_fuzz(common, seed, count, inject_mask_skew);
        if (dr->parsed())
            return cmd_dump(common, range_text, false, model_path, weights_path, image_path, lane, out_path);
        if (dh->parsed())
            return cmd_dump(common, range_text, true, model_path, weights_path, image_path, lane, out_path);
        if (gen->parsed()) return cmd_gen(common, model_path, seed, weights_path, image_path);
    } catch (const nmsim::BankConflict& e) {
        std::cerr << "internal: " << e.what() << "\n";
        return kExitInternal;
    } catch (const nmsim::OverflowError& e) {
        std::cerr << "internal: " << e.what() << "\n";
        return kExitInternal;
    } catch (const nmsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return 0;
}
