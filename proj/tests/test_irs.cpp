// SPDX-License-Identifier: Apache-2.0
//
// Channel physics oracles: coherent-combining identity, dominance of the
// closed-form optimum, brute-force quantized search agreement, quantizer
// bounds, and dataset generation/persistence properties.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "psic/dataset.hpp"
#include "psic/irs.hpp"
#include "psic/rng.hpp"

using namespace psic;

namespace {

SystemConfig small_cfg(int n = 8) {
    SystemConfig cfg;
    cfg.rows = n;
    cfg.cols = n;
    return cfg;
}

double coherent_target(const ChannelRealization& ch) {
    double s = std::abs(ch.h_direct);
    for (const auto& c : ch.cascade) s += std::abs(c);
    return s * s;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
        std::filesystem::remove(path);
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("channel: determinism under seed") {
    const SystemConfig cfg = small_cfg();
    Rng r1(123), r2(123);
    const ChannelRealization a = generate_channel(cfg, ChannelType::kLos, r1);
    const ChannelRealization b = generate_channel(cfg, ChannelType::kLos, r2);
    CHECK(a.h_direct == b.h_direct);
    CHECK(a.cascade == b.cascade);
}

TEST_CASE("channel: coherent-combining identity to 1e-9 relative") {
    const SystemConfig cfg = small_cfg();
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const ChannelType type = (i % 2) ? ChannelType::kLos : ChannelType::kNlos;
        const ChannelRealization ch = generate_channel(cfg, type, rng);
        const double p = received_power(ch, optimal_psi(ch));
        const double target = coherent_target(ch);
        CHECK(std::abs(p - target) / target < 1e-9);
    }
}

TEST_CASE("channel: optimum dominates random and zero phase matrices") {
    const SystemConfig cfg = small_cfg(4);
    Rng rng(8);
    int violations = 0;
    for (int i = 0; i < 200; ++i) {
        const ChannelRealization ch = generate_channel(cfg, ChannelType::kNlos, rng);
        const double best = received_power(ch, optimal_psi(ch));
        PsiMatrix probe;
        probe.rows = cfg.rows;
        probe.cols = cfg.cols;
        probe.phases.assign(static_cast<std::size_t>(cfg.elements()), 0.0);
        if (received_power(ch, probe) > best) ++violations;
        for (int t = 0; t < 100; ++t) {
            for (auto& p : probe.phases) p = rng.uniform(0.0, kTwoPi);
            if (received_power(ch, probe) > best) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("channel: aligned inputs have zero optimal phases") {
    ChannelRealization ch;
    ch.rows = ch.cols = 2;
    ch.h_direct = {2.0, 0.0};
    ch.cascade = {{1.0, 0.0}, {0.5, 0.0}, {3.0, 0.0}, {0.25, 0.0}};
    for (double p : optimal_psi(ch).phases) CHECK(p == 0.0);
}

TEST_CASE("channel: zero cascade entry handled, zero cascade is direct-only") {
    ChannelRealization ch;
    ch.rows = ch.cols = 2;
    ch.h_direct = {0.6, -0.8};
    ch.cascade.assign(4, {0.0, 0.0});
    const PsiMatrix psi = optimal_psi(ch);
    for (double p : psi.phases) CHECK(p == 0.0);
    CHECK(received_power(ch, psi) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("channel: global phase invariance without a direct link") {
    const SystemConfig cfg = small_cfg(4);
    Rng rng(9);
    ChannelRealization ch = generate_channel(cfg, ChannelType::kNlos, rng);
    ch.h_direct = {0.0, 0.0};
    PsiMatrix psi = optimal_psi(ch);
    const double p0 = received_power(ch, psi);
    for (auto& p : psi.phases) p = wrap_two_pi(p + kTwoPi * 0.5);
    CHECK(received_power(ch, psi) == doctest::Approx(p0).epsilon(1e-12));
}

TEST_CASE("channel: received_power rejects shape mismatch") {
    const SystemConfig cfg = small_cfg(4);
    Rng rng(10);
    const ChannelRealization ch = generate_channel(cfg, ChannelType::kNlos, rng);
    PsiMatrix psi;
    psi.rows = psi.cols = 3;
    psi.phases.assign(9, 0.0);
    CHECK_THROWS_AS(received_power(ch, psi), std::invalid_argument);
}

TEST_CASE("channel: pure dominant path is a planar ramp") {
    SystemConfig cfg = small_cfg();
    cfg.paths_nlos = 1;
    cfg.rician_k_db = std::numeric_limits<double>::infinity();
    Rng rng(11);
    const ChannelRealization ch = generate_channel(cfg, ChannelType::kLos, rng);
    // wrapped column-to-column and row-to-row phase steps must be constant
    const double dc = wrap_pi(std::arg(ch.at(0, 1)) - std::arg(ch.at(0, 0)));
    const double dr = wrap_pi(std::arg(ch.at(1, 0)) - std::arg(ch.at(0, 0)));
    for (int r = 0; r < cfg.rows; ++r)
        for (int c = 0; c < cfg.cols; ++c) {
            if (c + 1 < cfg.cols)
                CHECK(std::abs(wrap_pi(std::arg(ch.at(r, c + 1)) - std::arg(ch.at(r, c)) - dc)) < 1e-9);
            if (r + 1 < cfg.rows)
                CHECK(std::abs(wrap_pi(std::arg(ch.at(r + 1, c)) - std::arg(ch.at(r, c)) - dr)) < 1e-9);
        }
    // and the optimal PSI is then a ramp plus constant as well
    const PsiMatrix psi = optimal_psi(ch);
    for (int r = 0; r < cfg.rows; ++r)
        for (int c = 0; c + 1 < cfg.cols; ++c)
            CHECK(std::abs(wrap_pi(psi.at(r, c + 1) - psi.at(r, c) + dc)) < 1e-9);
}

TEST_CASE("channel: per-element cascade power is unit on average") {
    SystemConfig cfg = small_cfg(4);
    const int n = 10000;
    for (ChannelType type : {ChannelType::kNlos, ChannelType::kLos}) {
        Rng rng(12);
        std::vector<double> p2(static_cast<std::size_t>(cfg.elements()), 0.0);
        for (int i = 0; i < n; ++i) {
            const ChannelRealization ch = generate_channel(cfg, type, rng);
            for (std::size_t e = 0; e < p2.size(); ++e) p2[e] += std::norm(ch.cascade[e]);
        }
        for (double v : p2) CHECK(std::abs(v / n - 1.0) < 0.05);
    }
}

TEST_CASE("quantizer: bound, idempotence and the B=1 cell centers") {
    PsiMatrix psi;
    psi.rows = 1;
    psi.cols = 1;
    psi.phases = {0.1};
    const QuantizedPsi q1 = quantize(psi, 1);
    CHECK(q1.indices[0] == 0);
    CHECK(dequantize(q1).phases[0] == doctest::Approx(kTwoPi / 4.0));

    Rng rng(13);
    for (int bits = 1; bits <= 8; ++bits) {
        const double width = kTwoPi / (1 << bits);
        const double bound = kTwoPi / 2.0 / (1 << bits);  // π / 2^B
        std::vector<double> sweep;
        for (int k = 0; k < (1 << bits); ++k) {
            const double edge = k * width;
            sweep.push_back(edge);
            sweep.push_back(std::nextafter(edge, 0.0) < 0 ? 0.0 : std::nextafter(edge, kTwoPi));
            sweep.push_back(edge + 0.5 * width);
            if (edge > 0.0) sweep.push_back(std::nextafter(edge, 0.0));
        }
        sweep.push_back(std::nextafter(kTwoPi, 0.0));
        for (int i = 0; i < 2000; ++i) sweep.push_back(rng.uniform(0.0, kTwoPi));

        PsiMatrix m;
        m.rows = 1;
        m.cols = static_cast<int>(sweep.size());
        m.phases = sweep;
        const QuantizedPsi q = quantize(m, bits);
        for (auto idx : q.indices) CHECK(idx < (1u << bits));
        const PsiMatrix rt = dequantize(q);
        for (std::size_t i = 0; i < sweep.size(); ++i)
            CHECK(std::abs(rt.phases[i] - sweep[i]) <= bound + 1e-15);
        // cell centers are fixed points
        const PsiMatrix rt2 = dequantize(quantize(rt, bits));
        CHECK(rt2.phases == rt.phases);
    }
}

TEST_CASE("quantizer: brute-force search on 2x2 agrees within one step per element") {
    SystemConfig cfg;
    cfg.rows = cfg.cols = 2;
    cfg.paths_nlos = 2;
    Rng rng(14);
    for (int bits : {2, 3}) {
        const int levels = 1 << bits;
        const double width = kTwoPi / levels;
        for (int trial = 0; trial < 40; ++trial) {
            const ChannelRealization ch =
                generate_channel(cfg, trial % 2 ? ChannelType::kLos : ChannelType::kNlos, rng);
            PsiMatrix probe;
            probe.rows = probe.cols = 2;
            probe.phases.assign(4, 0.0);
            double best = -1.0;
            std::vector<int> best_idx(4, 0);
            std::vector<int> idx(4, 0);
            for (idx[0] = 0; idx[0] < levels; ++idx[0])
                for (idx[1] = 0; idx[1] < levels; ++idx[1])
                    for (idx[2] = 0; idx[2] < levels; ++idx[2])
                        for (idx[3] = 0; idx[3] < levels; ++idx[3]) {
                            for (int e = 0; e < 4; ++e) probe.phases[e] = (idx[e] + 0.5) * width;
                            const double p = received_power(ch, probe);
                            if (p > best) {
                                best = p;
                                best_idx = idx;
                            }
                        }
            const QuantizedPsi q = quantize(optimal_psi(ch), bits);
            for (int e = 0; e < 4; ++e) {
                const int d = std::abs(static_cast<int>(q.indices[e]) - best_idx[e]);
                CHECK(std::min(d, levels - d) <= 1);
            }
        }
    }
}

TEST_CASE("dataset: deterministic across runs and worker counts") {
    const SystemConfig cfg = small_cfg(4);
    const Dataset a = generate_dataset(cfg, ChannelType::kNlos, 64, 99, 1);
    const Dataset b = generate_dataset(cfg, ChannelType::kNlos, 64, 99, 4);
    CHECK(a.values == b.values);
    const Dataset c = generate_dataset(cfg, ChannelType::kNlos, 64, 100, 1);
    CHECK(a.values != c.values);
    for (double v : a.values) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("dataset: save/load round trip and byte-identical rewrites") {
    const SystemConfig cfg = small_cfg(4);
    Dataset ds = generate_dataset(cfg, ChannelType::kLos, 16, 5, 2);
    ds.config_digest = 0xabcdef;
    TempFile f1("psic_test_ds1.psid"), f2("psic_test_ds2.psid");
    save_dataset(ds, f1.path);
    save_dataset(ds, f2.path);
    CHECK(file_digest(f1.path) == file_digest(f2.path));

    const Dataset back = load_dataset(f1.path);
    CHECK(back.rows == ds.rows);
    CHECK(back.cols == ds.cols);
    CHECK(back.channel == ds.channel);
    CHECK(back.rician_k_db == ds.rician_k_db);
    CHECK(back.paths == ds.paths);
    CHECK(back.quant_bits == ds.quant_bits);
    CHECK(back.seed == ds.seed);
    CHECK(back.config_digest == ds.config_digest);
    CHECK(back.values == ds.values);

    CHECK_THROWS_AS(load_dataset("/nonexistent/nowhere.psid"), std::runtime_error);
}

TEST_CASE("dataset: phase marginal is uniform (chi-square at 1%)") {
    const SystemConfig cfg = small_cfg(4);
    const Dataset ds = generate_dataset(cfg, ChannelType::kNlos, 20000, 17, 4);
    // one element per sample keeps the counts independent
    const int bins = 32;
    std::vector<double> counts(bins, 0.0);
    for (std::int64_t i = 0; i < ds.count; ++i) {
        const double v = ds.sample(i)[i % ds.sample_size()];
        counts[static_cast<std::size_t>(v * bins)] += 1.0;
    }
    const double expect = static_cast<double>(ds.count) / bins;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < 52.191);  // chi-square(31) critical value at the 1% level
}

TEST_CASE("dataset: pure-dominant samples are ramps and quantized option snaps to centers") {
    SystemConfig cfg = small_cfg(4);
    cfg.paths_nlos = 1;
    cfg.rician_k_db = std::numeric_limits<double>::infinity();
    const Dataset ds = generate_dataset(cfg, ChannelType::kLos, 8, 3, 1);
    for (std::int64_t i = 0; i < ds.count; ++i) {
        const PsiMatrix psi = PsiMatrix::from_normalized(ds.sample_copy(i), ds.rows, ds.cols);
        const double dc = wrap_pi(psi.at(0, 1) - psi.at(0, 0));
        for (int r = 0; r < ds.rows; ++r)
            for (int c = 0; c + 1 < ds.cols; ++c)
                CHECK(std::abs(wrap_pi(psi.at(r, c + 1) - psi.at(r, c) - dc)) < 1e-9);
    }

    const Dataset qds = generate_dataset(small_cfg(4), ChannelType::kNlos, 8, 3, 1, 3);
    for (double v : qds.values) {
        const double cell = v * 8.0 - 0.5;  // (index + 0.5)/2^3 grid
        CHECK(std::abs(cell - std::round(cell)) < 1e-9);
    }
}

TEST_CASE("dataset: smoother phase fields under a dominant path") {
    const SystemConfig cfg = small_cfg(16);
    const Dataset los = generate_dataset(cfg, ChannelType::kLos, 200, 21, 4);
    const Dataset nlos = generate_dataset(cfg, ChannelType::kNlos, 200, 22, 4);
    auto mean_tv = [](const Dataset& ds) {
        double s = 0.0;
        for (std::int64_t i = 0; i < ds.count; ++i)
            s += mean_spatial_tv(PsiMatrix::from_normalized(ds.sample_copy(i), ds.rows, ds.cols));
        return s / static_cast<double>(ds.count);
    };
    CHECK(mean_tv(los) < mean_tv(nlos));
}

TEST_CASE("dataset: split sizes, disjointness and determinism") {
    const SplitIndices s = split_dataset(5000, 4242);
    CHECK(s.train.size() == 4000);
    CHECK(s.val.size() == 500);
    CHECK(s.test.size() == 500);
    std::vector<char> seen(5000, 0);
    for (const auto* part : {&s.train, &s.val, &s.test})
        for (int i : *part) {
            CHECK(i >= 0);
            CHECK(i < 5000);
            CHECK(seen[static_cast<std::size_t>(i)] == 0);
            seen[static_cast<std::size_t>(i)] = 1;
        }
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    const SplitIndices again = split_dataset(5000, 4242);
    CHECK(again.train == s.train);
    CHECK(indices_digest(again.test) == indices_digest(s.test));
    const SplitIndices other = split_dataset(5000, 4243);
    CHECK(other.train != s.train);
}

TEST_CASE("dataset: mean predictor bound is near -6 dB for uniform phases") {
    const SystemConfig cfg = small_cfg(8);
    const Dataset ds = generate_dataset(cfg, ChannelType::kNlos, 400, 31, 4);
    const SplitIndices s = split_dataset(ds.count, 77);
    const double bound = mean_predictor_nmse_db(ds, s.train, s.test);
    CHECK(bound < -4.0);
    CHECK(bound > -9.0);
}
