#include <doctest.h>

#include "helpers.hpp"
#include "nmsim/memory_part.hpp"
#include "nmsim/sot_control.hpp"

using namespace nmsim;
using namespace testutil;

TEST_CASE("mau_write: map index routes through f %% R") {
    MemoryArrayUnit mau(32, 4096);
    mau.begin_cycle();
    mau.write(33, 16, 0, 5, 77);
    CHECK(mau.write_shift() == 1);  // bank 33 % 32
    CHECK(mau.read_word(33, 0, 4, 4, 1, 1) == 77);
}

TEST_CASE("mau_write: 28 simultaneous writes to distinct banks") {
    MemoryArrayUnit mau(32, 4096);
    mau.begin_cycle();
    for (uint32_t f = 0; f < 28; ++f) CHECK_NOTHROW(mau.write(f, 16, 0, 0, act_t(f)));
    mau.begin_cycle();  // next cycle, same banks are writable again
    for (uint32_t f = 0; f < 28; ++f) CHECK_NOTHROW(mau.write(f, 16, 0, 1, act_t(f)));
}

TEST_CASE("mau_write: 33 same-cycle writes cannot fit 32 banks") {
    MemoryArrayUnit mau(32, 4096);
    mau.begin_cycle();
    for (uint32_t f = 0; f < 32; ++f) mau.write(f, 16, 0, 0, 1);
    CHECK_THROWS_AS(mau.write(32, 16, 0, 0, 1), BankConflict);
}

TEST_CASE("mau_read: selector schedule over the input scan") {
    LayerSpec l = layer(1, LayerKind::Conv1x1, 4, 3, 32, 8);
    MemoryArrayUnit mau(32, 4096);
    FeatureMapTensor maps(32, 4, 3);
    for (uint32_t c = 0; c < 32; ++c)
        for (uint32_t y = 0; y < 3; ++y)
            for (uint32_t x = 0; x < 4; ++x) maps.set(c, x, y, act_t(1000 * c + 10 * y + x));
    mau.preload(maps, 0);
    uint64_t wh = 12;

    SUBCASE("P=1, t=0 reads the first element of the scan") {
        std::vector<act_t> v = mau_read(mau, 0, l, 1);
        REQUIRE(v.size() == 1);
        CHECK(v[0] == maps.at(0, 0, 0));
    }
    SUBCASE("P=16, t=w*h starts the second channel group at (0,0)") {
        std::vector<act_t> v = mau_read(mau, wh, l, 16);
        REQUIRE(v.size() == 16);
        for (uint32_t g = 0; g < 16; ++g) CHECK(v[g] == maps.at(16 + g, 0, 0));
    }
    SUBCASE("P=1: map boundary has no idle gap") {
        CHECK(mau_read(mau, wh - 1, l, 1)[0] == maps.at(0, 3, 2));
        CHECK(mau_read(mau, wh, l, 1)[0] == maps.at(1, 0, 0));
        CHECK_THROWS_AS(mau_read(mau, 32 * wh, l, 1), ShapeError);
    }
}

namespace {

// Feed a back-to-back stream of single-channel maps through one receptor and
// collect every emitted window. Stream pixels beyond the data drain as zero.
std::vector<MaskedWindow> scan_maps(Receptor& r, const std::vector<FeatureMapTensor>& maps,
                                    std::vector<act_t>* inputs_fed = nullptr) {
    r.reset();
    uint32_t w = maps[0].w, h = maps[0].h;
    uint64_t wh = uint64_t(w) * h, total = maps.size() * wh;
    auto pixel = [&](uint64_t g) -> act_t {
        if (g >= total) return 0;
        return maps[size_t(g / wh)].at(0, uint32_t(g % wh % w), uint32_t(g % wh / w));
    };
    std::vector<MaskedWindow> wins;
    for (uint64_t g = 0; g < total + r.fill_latency(); ++g) {
        act_t px = pixel(g);
        if (inputs_fed) inputs_fed->push_back(px);
        auto win = r.step(px);
        if (win && wins.size() < total) wins.push_back(*win);
    }
    return wins;
}

} // namespace

TEST_CASE("receptor: masking table rows at the epoch, row end, and map boundary") {
    const uint32_t W = 5, H = 4;
    FeatureMapTensor m0(1, W, H), m1(1, W, H);
    auto d = [&](uint32_t x, uint32_t y) { return act_t(100 + 10 * y + x); };  // map 0 values
    auto e = [&](uint32_t x, uint32_t y) { return act_t(500 + 10 * y + x); };  // map 1 values
    for (uint32_t y = 0; y < H; ++y)
        for (uint32_t x = 0; x < W; ++x) {
            m0.set(0, x, y, d(x, y));
            m1.set(0, x, y, e(x, y));
        }
    Receptor r(3, W, H);
    CHECK(r.fill_latency() == W + 1);
    std::vector<act_t> fed;
    std::vector<MaskedWindow> wins = scan_maps(r, {m0, m1}, &fed);
    REQUIRE(wins.size() == 2 * W * H);

    SUBCASE("t = 0: window for (0,0); top row and left column masked") {
        const MaskedWindow& w = wins[0];
        CHECK(fed[r.fill_latency() + 0] == d(1, 1));  // pixel entering at the epoch
        CHECK(w.center_x == 0);
        CHECK(w.center_y == 0);
        std::array<act_t, 9> want{0, 0, 0, 0, d(0, 0), d(1, 0), 0, d(0, 1), d(1, 1)};
        CHECK(w.values == want);
    }
    SUBCASE("t = 1: window for (1,0); only the top row masked") {
        std::array<act_t, 9> want{0, 0, 0, d(0, 0), d(1, 0), d(2, 0), d(0, 1), d(1, 1), d(2, 1)};
        CHECK(wins[1].values == want);
    }
    SUBCASE("t = W-1: window for (W-1,0); right column masked") {
        std::array<act_t, 9> want{0, 0, 0, d(W - 2, 0), d(W - 1, 0), 0, d(W - 2, 1), d(W - 1, 1), 0};
        CHECK(wins[W - 1].values == want);
    }
    SUBCASE("t = W: window for (0,1); left column masked") {
        std::array<act_t, 9> want{0, d(0, 0), d(1, 0), 0, d(0, 1), d(1, 1), 0, d(0, 2), d(1, 2)};
        CHECK(wins[W].values == want);
    }
    SUBCASE("t = WH-1 and t = WH: seamless map transition") {
        const MaskedWindow& last = wins[W * H - 1];
        CHECK(last.center_x == int(W - 1));
        CHECK(last.center_y == int(H - 1));
        std::array<act_t, 9> want_last{d(W - 2, H - 2), d(W - 1, H - 2), 0,
                                       d(W - 2, H - 1), d(W - 1, H - 1), 0, 0, 0, 0};
        CHECK(last.values == want_last);
        // at t = WH-1 the entering pixel is already (0,1) of the next map
        CHECK(fed[r.fill_latency() + W * H - 1] == e(0, 1));
        const MaskedWindow& first = wins[W * H];
        CHECK(first.center_x == 0);
        CHECK(first.center_y == 0);
        std::array<act_t, 9> want_first{0, 0, 0, 0, e(0, 0), e(1, 0), 0, e(0, 1), e(1, 1)};
        CHECK(first.values == want_first);
    }
}

TEST_CASE("property: receptor windows equal brute-force extraction") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        uint32_t W = uint32_t(rng.range(1, 6)), H = uint32_t(rng.range(1, 6));
        uint32_t G = uint32_t(rng.range(1, 3));
        std::vector<FeatureMapTensor> maps;
        for (uint32_t g = 0; g < G; ++g) {
            FeatureMapTensor t(1, W, H);
            for (act_t& v : t.data) v = act_t(rng.range(1, 250));
            maps.push_back(std::move(t));
        }
        Receptor r(3, W, H);
        std::vector<MaskedWindow> wins = scan_maps(r, maps);
        REQUIRE(wins.size() == uint64_t(G) * W * H);
        for (uint64_t t = 0; t < wins.size(); ++t) {
            const FeatureMapTensor& src = maps[size_t(t / (uint64_t(W) * H))];
            uint64_t per = t % (uint64_t(W) * H);
            int cx = int(per % W), cy = int(per / W);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int x = cx + dx, y = cy + dy;
                    act_t want = (x < 0 || y < 0 || x >= int(W) || y >= int(H))
                                     ? 0
                                     : src.at(0, uint32_t(x), uint32_t(y));
                    CHECK(wins[t].values[size_t(dy + 1) * 3 + size_t(dx + 1)] == want);
                }
        }
    }
}

TEST_CASE("property: seamless scan emits G*W*H windows after fill") {
    Receptor r(3, 7, 5);
    std::vector<FeatureMapTensor> maps(4, FeatureMapTensor(1, 7, 5));
    std::vector<act_t> fed;
    std::vector<MaskedWindow> wins = scan_maps(r, maps, &fed);
    CHECK(wins.size() == 4 * 7 * 5);
    CHECK(fed.size() == wins.size() + r.fill_latency());  // zero idle cycles after fill
}

TEST_CASE("ru_step: k=1 bypasses the input") {
    ReceptorUnit ru(1, 16, 4, 4);
    std::array<act_t, 16> pixels{};
    for (uint32_t i = 0; i < 16; ++i) pixels[i] = act_t(i * 3 + 1);
    std::vector<MaskedWindow> wins;
    CHECK(ru.step(pixels.data(), wins));
    REQUIRE(wins.size() == 16);
    for (uint32_t i = 0; i < 16; ++i) {
        CHECK(wins[i].values[0] == pixels[i]);
        CHECK(wins[i].masked[0] == false);
    }
}

TEST_CASE("ru_step: k=3 lanes keep their maps apart") {
    const uint32_t W = 4, H = 3;
    ReceptorUnit ru(3, 2, W, H);
    std::vector<MaskedWindow> wins;
    // constant maps: lane 0 streams value 5, lane 1 streams value 9
    uint64_t emitted = 0;
    for (uint64_t g = 0; g < uint64_t(W) * H + W + 1; ++g) {
        std::array<act_t, 2> px{5, 9};
        if (ru.step(px.data(), wins)) {
            ++emitted;
            for (uint32_t i = 0; i < 9; ++i) {
                if (!wins[0].masked[i]) CHECK(wins[0].values[i] == 5);
                if (!wins[1].masked[i]) CHECK(wins[1].values[i] == 9);
            }
        }
    }
    CHECK(emitted == uint64_t(W) * H);
}

TEST_CASE("block receptor: stride-2 windows match direct extraction") {
    for (uint64_t seed = 70; seed < 90; ++seed) {
        Rng rng(seed);
        uint32_t W = uint32_t(rng.range(1, 9)), H = uint32_t(rng.range(1, 9));
        uint32_t wo = uint32_t(ceil_div(W, 2)), ho = uint32_t(ceil_div(H, 2));
        FeatureMapTensor t(1, W, H);
        for (act_t& v : t.data) v = act_t(rng.range(1, 200));
        MemoryArrayUnit mau(32, 1024);
        mau.preload(t, 0);
        BlockReceptor br(3, 2, W, H);
        std::array<act_t, 4> block{};
        for (uint32_t y = 0; y < ho; ++y)
            for (uint32_t x = 0; x < wo; ++x) {
                mau.read_block(0, 0, W, H, 2 * x, 2 * y, 2, block.data());
                MaskedWindow win = br.step(x, y, block.data());
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int sx = int(2 * x) + dx, sy = int(2 * y) + dy;
                        act_t want = (sx < 0 || sy < 0 || sx >= int(W) || sy >= int(H))
                                         ? 0
                                         : t.at(0, uint32_t(sx), uint32_t(sy));
                        CHECK(win.values[size_t(dy + 1) * 3 + size_t(dx + 1)] == want);
                    }
            }
    }
}

TEST_CASE("property: one memory word in, k*k window values out") {
    // the bandwidth contract of the receptor path: P reads per cycle feed
    // k*k*P values to the compute side
    const uint32_t W = 6, H = 6;
    FeatureMapTensor t(1, W, H);
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = act_t(i + 1);
    MemoryArrayUnit mau(32, 1024);
    mau.preload(t, 0);
    Receptor r(3, W, H);
    r.reset();
    uint64_t windows = 0, values_delivered = 0;
    uint64_t before = mau.words_read();
    for (uint64_t g = 0; g < uint64_t(W) * H; ++g) {
        act_t px = 0;
        mau.read_group(0, 1, 1, 0, W, H, uint32_t(g % W), uint32_t(g / W), &px);
        if (auto win = r.step(px)) {
            ++windows;
            values_delivered += 9;
        }
    }
    CHECK(mau.words_read() - before == uint64_t(W) * H);  // one word per cycle
    CHECK(windows == uint64_t(W) * H - r.fill_latency());
    CHECK(values_delivered == windows * 9);
}

TEST_CASE("bank placement round trip") {
    for (uint32_t maps : {3u, 28u, 50u, 64u}) {
        MemoryArrayUnit mau(32, 4096);
        FeatureMapTensor t = ramp_tensor(maps, 5, 4);
        mau.preload(t, 100);
        CHECK(mau.extract(maps, 5, 4, 100) == t);
    }
}
