// SPDX-License-Identifier: Apache-2.0
//
// Codec: encoder/decoder graphs, gated variable-rate latent, channel noise,
// baseline probes, matching features, NMSE accounting, and the end-to-end
// finite-difference gradient check at toy scale.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "psic/codec.hpp"
#include "psic/params.hpp"
#include "psic/rng.hpp"

using namespace psic;

namespace {

CodecDims toy_dims() {
    CodecDims d;
    d.rows = 4;
    d.cols = 4;
    d.patch = 2;
    d.d_model = 8;
    d.d_p = 8;
    d.dec_hidden = 8;
    d.cr_embed_dim = 4;
    return d;
}

std::vector<TaskDescriptor> toy_tasks() {
    return {{0.5, 12.0, ChannelType::kNlos}, {0.25, 12.0, ChannelType::kNlos}};
}

std::vector<double> random_psi(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform();
    return v;
}

// Full pipeline loss for the finite-difference check: encode with prompt 0,
// add a frozen noise draw, decode, MSE against the input sample.
double e2e_gradcheck(std::uint64_t seed, bool pool, double cr) {
    CodecDims dims = toy_dims();
    dims.adaptive_pool = pool;
    CodecModel model = CodecModel::init(dims, toy_tasks(), seed);

    Rng rng(derive_seed(seed, {7}));
    const std::vector<double> psi = random_psi(dims.elements(), derive_seed(seed, {8}));
    const int m = dims.latent_len(cr);
    std::vector<double> noise(static_cast<std::size_t>(m));
    const double sigma = std::pow(10.0, -12.0 / 20.0);
    for (auto& v : noise) v = sigma * rng.gaussian();

    std::vector<std::string> names;
    std::vector<ad::Tensor> leaves;
    for (const auto& [n, t] : model.params) {
        names.push_back(n);
        leaves.push_back(t);
    }
    auto build = [&](ad::Graph& g, const std::vector<ad::NodeId>& ids) {
        Bindings b;
        for (std::size_t i = 0; i < names.size(); ++i) b.ids[names[i]] = ids[i];
        ad::NodeId patches = g.constant(patchify(psi, dims));
        ad::NodeId lat = build_encoder(g, b, dims, patches, b.at(bank_value_name(0)), m, nullptr);
        ad::Tensor nz({1, m});
        nz.data = noise;
        ad::NodeId noisy = g.add(lat, g.constant(nz));
        ad::NodeId rec = build_decoder(g, b, dims, noisy, dims.cr_index(cr));
        ad::Tensor tgt({1, dims.elements()});
        tgt.data = psi;
        return g.mse_loss(rec, g.constant(tgt));
    };
    return ad::grad_check(build, leaves, 1e-5);
}

}  // namespace

TEST_CASE("dims validation rejects bad geometry and mismatched widths") {
    CodecDims d = toy_dims();
    d.patch = 3;  // does not tile 4x4
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d = toy_dims();
    d.d_p = 4;  // prompt token requires d_p == d_model
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d = toy_dims();
    d.d_p = 4;
    d.use_prompt_token = false;
    CHECK_NOTHROW(d.validate());
    d = toy_dims();
    d.grid_crs = {1.5};
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d = toy_dims();
    d.grid_crs.clear();
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d = toy_dims();
    d.grid_crs = {0.01};  // latent length rounds to zero on 4x4
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("latent lengths follow the grid at desk scale") {
    CodecDims d;  // defaults: 16x16, crs {0.125, 0.25, 0.5}
    d.validate();
    CHECK(d.latent_len(0.125) == 32);
    CHECK(d.latent_len(0.25) == 64);
    CHECK(d.latent_len(0.5) == 128);
    CHECK(d.latent_max() == 128);
    CHECK(d.tokens() == 16);
    CHECK(d.feature_dim() == 48);
    CHECK(d.cr_index(0.25) == 1);
    CHECK(d.cr_index(0.3) == -1);
}

TEST_CASE("patchify lays out row-major patches") {
    CodecDims d = toy_dims();
    std::vector<double> psi(16);
    for (int i = 0; i < 16; ++i) psi[static_cast<std::size_t>(i)] = i;
    ad::Tensor p = patchify(psi, d);
    REQUIRE(p.shape == ad::Shape{4, 4});
    // patch 0 covers rows 0-1, cols 0-1 of the 4x4 surface
    CHECK(p.at(0, 0) == 0.0);
    CHECK(p.at(0, 1) == 1.0);
    CHECK(p.at(0, 2) == 4.0);
    CHECK(p.at(0, 3) == 5.0);
    // patch 3 covers rows 2-3, cols 2-3
    CHECK(p.at(3, 0) == 10.0);
    CHECK(p.at(3, 3) == 15.0);
    CHECK_THROWS_AS(patchify(std::vector<double>(15, 0.0), d), std::invalid_argument);
}

TEST_CASE("encoded latents are power normalized at every grid ratio") {
    CodecModel model = CodecModel::init(toy_dims(), toy_tasks(), 21);
    const auto psi = random_psi(16, 5);
    for (double cr : {0.125, 0.25, 0.5}) {
        LatentCode z = encode(model, psi, 0, cr);
        const int m = model.dims.latent_len(cr);
        CHECK(static_cast<int>(z.values.size()) == m);
        double p = 0.0;
        for (double v : z.values) p += v * v;
        CHECK(std::abs(p / m - 1.0) < 1e-9);
    }
}

TEST_CASE("gated selection keeps the largest magnitudes, ties to lower index, ascending order") {
    CodecDims dims = toy_dims();
    CodecModel model = CodecModel::init(dims, toy_tasks(), 4);
    // Zero the gate weights so the pre-latent equals the bias exactly.
    model.params.at("enc.gate.w") = ad::Tensor({dims.d_model + dims.d_p, dims.latent_max()});
    model.params.at("enc.gate.b") = ad::Tensor::row({3.0, -3.0, 1.0, 2.0, -2.0, 1.0, 0.5, 3.0});

    std::vector<int> sel;
    LatentCode z = encode(model, random_psi(16, 6), 0, 0.25, &sel);
    REQUIRE(sel == std::vector<int>{0, 1, 3, 7});
    // latent = power-normalized gather of the bias at the selected indices
    const std::vector<double> kept = {3.0, -3.0, 2.0, 3.0};
    const double scale = std::sqrt(4.0 / 31.0);
    REQUIRE(z.values.size() == 4);
    for (int i = 0; i < 4; ++i)
        CHECK(z.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(kept[static_cast<std::size_t>(i)] * scale).epsilon(1e-12));

    // at cr 0.5 every position is kept in index order
    LatentCode full = encode(model, random_psi(16, 6), 0, 0.5, &sel);
    CHECK(sel == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(full.values.size() == 8);
}

TEST_CASE("encoding is deterministic and prompt-dependent") {
    CodecModel model = CodecModel::init(toy_dims(), toy_tasks(), 31);
    const auto psi = random_psi(16, 9);
    LatentCode a = encode(model, psi, 0, 0.25);
    LatentCode b = encode(model, psi, 0, 0.25);
    CHECK(a.values == b.values);
    LatentCode c = encode(model, psi, 1, 0.25);
    CHECK(a.values != c.values);
}

TEST_CASE("off-grid ratios and malformed latents are rejected") {
    CodecModel model = CodecModel::init(toy_dims(), toy_tasks(), 8);
    const auto psi = random_psi(16, 2);
    CHECK_THROWS_AS(encode(model, psi, 0, 0.3, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(encode(model, psi, 5, 0.25, nullptr), std::invalid_argument);

    NoisyLatent wrong{std::vector<double>(3, 0.1), 12.0};
    CHECK_THROWS_AS(decode(model, wrong, 0.25), std::invalid_argument);
    NoisyLatent right{std::vector<double>(4, 0.1), 12.0};
    CHECK_THROWS_AS(decode(model, right, 0.3), std::invalid_argument);
    CHECK_NOTHROW(decode(model, right, 0.25));
}

TEST_CASE("sessions match the one-shot wrappers") {
    CodecModel model = CodecModel::init(toy_dims(), toy_tasks(), 13);
    EncoderSession session(model, 1);
    for (int i = 0; i < 5; ++i) {
        const auto psi = random_psi(16, 100 + static_cast<std::uint64_t>(i));
        const double cr = (i % 2 == 0) ? 0.25 : 0.5;
        LatentCode one = encode(model, psi, 1, cr);
        LatentCode ses = session.encode(psi, cr);
        CHECK(one.values == ses.values);
    }

    BaselineModel base = BaselineModel::init(toy_dims(), {0.25, 15.0, ChannelType::kNlos}, 13);
    BaselineEncoderSession bs(base);
    for (int i = 0; i < 5; ++i) {
        const auto psi = random_psi(16, 200 + static_cast<std::uint64_t>(i));
        CHECK(baseline_encode(base, psi).values == bs.encode(psi).values);
    }
}

TEST_CASE("control channel adds noise at the configured level and passes +inf through") {
    LatentCode z{std::vector<double>(8, 0.5), 0.25};
    Rng rng(77);
    NoisyLatent clean = control_channel(z, std::numeric_limits<double>::infinity(), rng);
    CHECK(clean.values == z.values);

    Rng r1(42), r2(42), r3(43);
    NoisyLatent n1 = control_channel(z, 10.0, r1);
    NoisyLatent n2 = control_channel(z, 10.0, r2);
    NoisyLatent n3 = control_channel(z, 10.0, r3);
    CHECK(n1.values == n2.values);  // frozen draw is reproducible
    CHECK(n1.values != n3.values);
    CHECK(n1.values != z.values);
}

TEST_CASE("empirical channel SNR is within 0.2 dB at 10 and 15 dB") {
    const int dims_total = 100000;
    for (double snr : {10.0, 15.0}) {
        Rng gen(901);
        Rng noise_rng(derive_seed(902, {static_cast<std::uint64_t>(snr)}));
        double sig = 0.0, err = 0.0;
        int done = 0;
        while (done < dims_total) {
            const int m = 128;
            // synthetic power-normalized row
            std::vector<double> x(m);
            double p = 0.0;
            for (auto& v : x) {
                v = gen.gaussian();
                p += v * v;
            }
            const double s = std::sqrt(m / p);
            for (auto& v : x) v *= s;
            std::vector<double> y(x);
            add_awgn(y, snr, noise_rng);
            for (int i = 0; i < m; ++i) {
                sig += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
                const double d = y[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)];
                err += d * d;
            }
            done += m;
        }
        const double emp_db = 10.0 * std::log10(sig / err);
        CHECK(std::abs(emp_db - snr) < 0.2);
    }
}

TEST_CASE("decode batch equals stacked single decodes") {
    CodecModel model = CodecModel::init(toy_dims(), toy_tasks(), 55);
    Rng rng(3);
    const int m = 4;
    std::vector<double> flat;
    std::vector<std::vector<double>> singles;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> v(static_cast<std::size_t>(m));
        for (auto& x : v) x = rng.gaussian();
        flat.insert(flat.end(), v.begin(), v.end());
        singles.push_back(decode(model, {v, 12.0}, 0.25));
    }
    const std::vector<double> batch = decode_batch(model, flat, 3, 0.25);
    REQUIRE(batch.size() == 3 * 16);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 16; ++j)
            CHECK(batch[static_cast<std::size_t>(i * 16 + j)] ==
                  doctest::Approx(singles[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                      .epsilon(1e-12));
}

TEST_CASE("decoder output lies in (0,1) and reconstruction error is sane untrained") {
    CodecModel model = CodecModel::init(toy_dims(), toy_tasks(), 99);
    Rng noise(1);
    NmseAccumulator acc;
    for (int i = 0; i < 50; ++i) {
        const auto psi = random_psi(16, 300 + static_cast<std::uint64_t>(i));
        LatentCode z = encode(model, psi, 0, 0.25);
        NoisyLatent n = control_channel(z, 12.0, noise);
        const auto rec = decode(model, n, 0.25);
        for (double v : rec) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        acc.add(psi.data(), rec.data(), 16);
    }
    CHECK(acc.count() == 50);
    CHECK(acc.excluded() == 0);
    // untrained: roughly at the scale of guessing; nowhere near the floor
    CHECK(acc.value_db() > -10.0);
    CHECK(acc.value_db() < 10.0);
}

TEST_CASE("baseline model probes across ratios by truncation and zero padding") {
    CodecDims dims = toy_dims();
    BaselineModel base = BaselineModel::init(dims, {0.25, 15.0, ChannelType::kNlos}, 71);
    CHECK(base.fixed_latent() == 4);
    const auto psi = random_psi(16, 11);
    LatentCode native = baseline_encode(base, psi);
    REQUIRE(native.values.size() == 4);
    double p = 0.0;
    for (double v : native.values) p += v * v;
    CHECK(std::abs(p / 4.0 - 1.0) < 1e-9);

    const auto tx_low = baseline_probe_tx(base, native, 0.125);
    REQUIRE(tx_low.size() == 2);
    CHECK(tx_low[0] == native.values[0]);
    CHECK(tx_low[1] == native.values[1]);

    const auto tx_same = baseline_probe_tx(base, native, 0.25);
    CHECK(tx_same == native.values);

    const auto tx_high = baseline_probe_tx(base, native, 0.5);
    REQUIRE(tx_high.size() == 8);
    for (int i = 0; i < 4; ++i)
        CHECK(tx_high[static_cast<std::size_t>(i)] == native.values[static_cast<std::size_t>(i)]);
    for (int i = 4; i < 8; ++i) CHECK(tx_high[static_cast<std::size_t>(i)] == 0.0);

    CHECK_THROWS_AS(baseline_probe_tx(base, native, 0.3), std::invalid_argument);

    Rng rng(5);
    auto noisy = tx_high;
    add_awgn(noisy, 10.0, rng);
    const auto rec = baseline_decode(base, noisy, 0.5);
    CHECK(rec.size() == 16);
    CHECK_THROWS_AS(baseline_decode(base, noisy, 0.25), std::invalid_argument);
}

TEST_CASE("baseline rejects an off-grid home ratio") {
    CHECK_THROWS_AS(BaselineModel::init(toy_dims(), {0.3, 15.0, ChannelType::kNlos}, 1),
                    std::invalid_argument);
}

TEST_CASE("decoder is under a quarter of the encoder parameter count at desk scale") {
    CodecDims d;  // 16x16 defaults
    CodecModel model = CodecModel::init(d, TaskGrid{}.tasks(), 7);
    const std::int64_t enc = params_count(model.params, "enc.");
    const std::int64_t dec = params_count(model.params, "dec.");
    CHECK(enc == 266368);
    CHECK(dec == 56872);
    CHECK(dec * 4 < enc);
}

TEST_CASE("matching features: zero input embeds to the bias row") {
    CodecDims d = toy_dims();
    CodecModel model = CodecModel::init(d, toy_tasks(), 17);
    const std::vector<double> zeros(16, 0.0);
    const auto f = embed_features(zeros, d);
    for (double v : f) CHECK(v == 0.0);
    const auto e = embed_psi(model, zeros);
    const auto& bias = model.params.at("match.b");
    REQUIRE(static_cast<int>(e.size()) == d.d_p);
    for (int i = 0; i < d.d_p; ++i) CHECK(e[static_cast<std::size_t>(i)] == bias.data[static_cast<std::size_t>(i)]);
}

TEST_CASE("matching features separate flat from striped patterns") {
    CodecDims d = toy_dims();
    std::vector<double> flat(16, 0.4);
    auto ff = embed_features(flat, d);
    // constant surface: means 0.4, gradients zero
    for (int t = 0; t < 4; ++t) {
        CHECK(ff[static_cast<std::size_t>(3 * t)] == doctest::Approx(0.4));
        CHECK(ff[static_cast<std::size_t>(3 * t + 1)] == 0.0);
        CHECK(ff[static_cast<std::size_t>(3 * t + 2)] == 0.0);
    }
    std::vector<double> stripes(16);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) stripes[static_cast<std::size_t>(r * 4 + c)] = (c % 2) * 0.4;
    auto fs = embed_features(stripes, d);
    CHECK(fs[1] == doctest::Approx(0.4));  // wrapped x-gradient
    CHECK(fs[2] == 0.0);                   // no y variation
    // a 0.9 stripe wraps to a 0.1 step on the unit circle
    for (auto& v : stripes) v *= 2.25;
    CHECK(embed_features(stripes, d)[1] == doctest::Approx(0.1));
}

TEST_CASE("wrapped gradients treat 0.95 to 0.05 as a small step") {
    CodecDims d = toy_dims();
    std::vector<double> psi(16, 0.0);
    psi[0] = 0.95;
    psi[1] = 0.05;  // wrapped difference 0.1, not 0.9
    auto f = embed_features(psi, d);
    // patch 0 x-gradients: rows (0.95,0.05) and (0,0) -> mean wrap = (0.1 + 0)/2
    CHECK(f[1] == doctest::Approx(0.05));
}

TEST_CASE("opposing wrapped gradients cancel in the patch feature") {
    CodecDims d = toy_dims();
    std::vector<double> psi(16, 0.0);
    psi[0] = 0.0;
    psi[1] = 0.1;  // row 0 of patch 0: +0.1 step
    psi[4] = 0.1;
    psi[5] = 0.0;  // row 1 of patch 0: -0.1 step
    auto f = embed_features(psi, d);
    // signed mean cancels: the feature reads directionality, not roughness
    CHECK(f[1] == doctest::Approx(0.0));
    // same steps aligned instead of opposed do not cancel
    psi[4] = 0.0;
    psi[5] = 0.1;
    CHECK(embed_features(psi, d)[1] == doctest::Approx(0.1));
}

TEST_CASE("graph embedding matches the eager embedding") {
    CodecDims d = toy_dims();
    CodecModel model = CodecModel::init(d, toy_tasks(), 23);
    const auto psi = random_psi(16, 40);
    const auto eager = embed_psi(model, psi);

    ad::Graph g;
    Bindings b = bind_all(g, model.params, false);
    ad::Tensor f({1, d.feature_dim()});
    f.data = embed_features(psi, d);
    const ad::NodeId out = build_embed(g, b, g.constant(f));
    const auto& gv = g.value(out).data;
    REQUIRE(gv.size() == eager.size());
    for (std::size_t i = 0; i < gv.size(); ++i) CHECK(gv[i] == doctest::Approx(eager[i]).epsilon(1e-12));
}

TEST_CASE("prompt value receives gradient through the full pipeline") {
    CodecDims dims = toy_dims();
    CodecModel model = CodecModel::init(dims, toy_tasks(), 61);
    ad::Graph g;
    Bindings b = bind_params(g, model.params,
                             [](const std::string& n) { return n.rfind("bank.", 0) == 0; });
    const auto psi = random_psi(16, 50);
    ad::NodeId patches = g.constant(patchify(psi, dims));
    ad::NodeId lat = build_encoder(g, b, dims, patches, b.at(bank_value_name(0)), 8, nullptr);
    ad::Tensor tgt({1, 16});
    tgt.data = psi;
    ad::NodeId rec = build_decoder(g, b, dims, lat, dims.cr_index(0.5));
    ad::NodeId loss = g.mse_loss(rec, g.constant(tgt));
    const auto grads = g.backward(loss);

    const auto& gv = grads[static_cast<std::size_t>(b.at(bank_value_name(0)))];
    REQUIRE(gv.size() == dims.d_p);
    CHECK(squared_norm(gv) > 0.0);
    // frozen encoder weights get no gradient tensor at all
    CHECK(grads[static_cast<std::size_t>(b.at("enc.patch.w"))].size() == 0);
    // the other prompt's value does not participate: zero-materialized
    const auto& other = grads[static_cast<std::size_t>(b.at(bank_value_name(1)))];
    REQUIRE(other.size() == dims.d_p);
    CHECK(squared_norm(other) == 0.0);
}

TEST_CASE("adaptive pooling variant produces normalized latents and passes gradcheck") {
    CodecDims dims = toy_dims();
    dims.adaptive_pool = true;
    CodecModel model = CodecModel::init(dims, toy_tasks(), 83);
    std::vector<int> sel = {9, 9};
    LatentCode z = encode(model, random_psi(16, 60), 0, 0.25, &sel);
    CHECK(sel.empty());  // no index selection in pooling mode
    REQUIRE(z.values.size() == 4);
    double p = 0.0;
    for (double v : z.values) p += v * v;
    CHECK(std::abs(p / 4.0 - 1.0) < 1e-9);

    // pooled path is smooth end to end, including the decoder zero-pad
    CHECK(e2e_gradcheck(5, true, 0.25) < 1e-4);
}

TEST_CASE("end-to-end gradient check across 10 seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const double err = e2e_gradcheck(seed, false, 0.5);
        INFO("seed ", seed, " rel err ", err);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("batched encoder rows are bitwise equal to single-sample encodes") {
    for (const bool pool : {false, true}) {
        CodecDims dims = toy_dims();
        dims.adaptive_pool = pool;
        CodecModel model = CodecModel::init(dims, toy_tasks(), 77);
        BaselineModel base = BaselineModel::init(dims, {0.25, 12.0, ChannelType::kNlos}, 77);
        const int m = dims.latent_len(0.5);

        for (const int n : {1, 3, 5}) {
            std::vector<std::vector<double>> psis;
            std::vector<const double*> rows;
            for (int i = 0; i < n; ++i) {
                psis.push_back(random_psi(dims.elements(), 900 + static_cast<std::uint64_t>(i)));
                rows.push_back(psis.back().data());
            }

            ad::Graph g;
            Bindings b = bind_params(g, model.params, [](const std::string&) { return false; });
            std::vector<std::vector<int>> sels;
            ad::NodeId lat = build_encoder_batch(g, b, dims, g.constant(patchify_batch(rows, dims)),
                                                 b.at(bank_value_name(0)), n, m, &sels);
            const std::vector<double>& flat = g.value(lat).data;
            REQUIRE(flat.size() == static_cast<std::size_t>(n) * m);
            REQUIRE(sels.size() == static_cast<std::size_t>(n));

            ad::Graph gb;
            Bindings bb = bind_params(gb, base.params, [](const std::string&) { return false; });
            ad::NodeId blat = build_baseline_encoder_batch(
                gb, bb, dims, gb.constant(patchify_batch(rows, dims)), n, base.fixed_latent());
            const std::vector<double>& bflat = gb.value(blat).data;

            for (int i = 0; i < n; ++i) {
                std::vector<int> sel;
                const LatentCode one = encode(model, psis[static_cast<std::size_t>(i)], 0, 0.5, &sel);
                CHECK(sel == sels[static_cast<std::size_t>(i)]);
                for (int j = 0; j < m; ++j)
                    CHECK(one.values[static_cast<std::size_t>(j)] ==
                          flat[static_cast<std::size_t>(i) * m + static_cast<std::size_t>(j)]);
                const LatentCode bone = baseline_encode(base, psis[static_cast<std::size_t>(i)]);
                for (int j = 0; j < base.fixed_latent(); ++j)
                    CHECK(bone.values[static_cast<std::size_t>(j)] ==
                          bflat[static_cast<std::size_t>(i) * base.fixed_latent() +
                                static_cast<std::size_t>(j)]);
            }
        }
    }
}

TEST_CASE("nmse floors at -100 dB and rejects zero references") {
    std::vector<double> x = {0.5, 0.25, 0.75};
    CHECK(nmse_db(x, x) == kNmseFloorDb);
    std::vector<double> off = {0.6, 0.25, 0.75};
    CHECK(nmse_db(x, off) == doctest::Approx(10.0 * std::log10(0.01 / 0.875)));
    CHECK_THROWS_AS(nmse_db({0.0, 0.0}, {0.1, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(nmse_db({1.0}, {1.0, 2.0}), std::invalid_argument);

    NmseAccumulator acc;
    const double z[2] = {0.0, 0.0};
    const double y[2] = {0.1, 0.1};
    acc.add(z, y, 2);
    CHECK(acc.excluded() == 1);
    CHECK(acc.count() == 0);
    acc.add_ratio(0.1);
    acc.add_ratio(0.001);
    CHECK(acc.value_db() == doctest::Approx(10.0 * std::log10(0.0505)));
}
