// SPDX-License-Identifier: Apache-2.0
//
// Dataset generation, the PSID1 file format and the 80/10/10 split.

#include "psic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "psic/binio.hpp"
#include "psic/digest.hpp"

namespace psic {

namespace {
constexpr char kMagic[] = "PSID1";

void generate_range(const SystemConfig& cfg, ChannelType type, std::uint64_t seed, int quant_bits,
                    std::int64_t begin, std::int64_t end, double* out) {
    const int s = cfg.elements();
    for (std::int64_t i = begin; i < end; ++i) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        const ChannelRealization ch = generate_channel(cfg, type, rng);
        PsiMatrix psi = optimal_psi(ch);
        if (quant_bits > 0) psi = dequantize(quantize(psi, quant_bits));
        const std::vector<double> unit = psi.normalized();
        std::copy(unit.begin(), unit.end(), out + i * s);
    }
}

}  // namespace

Dataset generate_dataset(const SystemConfig& cfg, ChannelType type, std::int64_t n, std::uint64_t seed,
                         int workers, int quant_bits) {
    cfg.validate();
    if (n < 1) throw std::invalid_argument("dataset: sample count must be at least 1");
    if (quant_bits != 0 && (quant_bits < 1 || quant_bits > 8))
        throw std::invalid_argument("dataset: quant_bits must be 0 or in [1,8]");

    Dataset ds;
    ds.rows = cfg.rows;
    ds.cols = cfg.cols;
    ds.channel = type;
    ds.rician_k_db = cfg.rician_k_db;
    ds.paths = cfg.paths_nlos;
    ds.quant_bits = quant_bits;
    ds.seed = seed;
    ds.count = n;
    ds.values.resize(static_cast<std::size_t>(n) * cfg.elements());

    const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (w == 1) {
        generate_range(cfg, type, seed, quant_bits, 0, n, ds.values.data());
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (n + w - 1) / w;
        for (int t = 0; t < w; ++t) {
            const std::int64_t b = t * chunk;
            const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back(generate_range, std::cref(cfg), type, seed, quant_bits, b, e, ds.values.data());
        }
        for (auto& th : pool) th.join();
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    io::write_bytes(out, kMagic, 5);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.rows));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.cols));
    io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(ds.count));
    io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(ds.channel));
    io::write_f64(out, ds.rician_k_db);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.paths));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.quant_bits));
    io::write_le<std::uint64_t>(out, ds.seed);
    io::write_le<std::uint64_t>(out, ds.config_digest);
    io::write_f64_array(out, ds.values);
    if (!out) throw std::runtime_error(path + ": write failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    io::expect_magic(in, kMagic, path);
    Dataset ds;
    ds.rows = static_cast<int>(io::read_le<std::uint32_t>(in, "rows"));
    ds.cols = static_cast<int>(io::read_le<std::uint32_t>(in, "cols"));
    ds.count = static_cast<std::int64_t>(io::read_le<std::uint64_t>(in, "count"));
    ds.channel = static_cast<ChannelType>(io::read_le<std::uint8_t>(in, "channel"));
    ds.rician_k_db = io::read_f64(in, "k_db");
    ds.paths = static_cast<int>(io::read_le<std::uint32_t>(in, "paths"));
    ds.quant_bits = static_cast<int>(io::read_le<std::uint32_t>(in, "quant_bits"));
    ds.seed = io::read_le<std::uint64_t>(in, "seed");
    ds.config_digest = io::read_le<std::uint64_t>(in, "config_digest");
    if (ds.rows < 2 || ds.cols < 2 || ds.count < 1)
        throw std::runtime_error(path + ": corrupt header");
    ds.values.resize(static_cast<std::size_t>(ds.count) * ds.sample_size());
    io::read_f64_array(in, ds.values, "samples");
    return ds;
}

std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    Digest d;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) d.update(buf, static_cast<std::size_t>(in.gcount()));
    return d.value();
}

SplitIndices split_dataset(std::int64_t n, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("split: need at least 3 samples");
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::int64_t i = n - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);

    const auto n_train = static_cast<std::size_t>(n * 8 / 10);
    const auto n_val = static_cast<std::size_t>(n / 10);
    SplitIndices s;
    s.train.assign(perm.begin(), perm.begin() + n_train);
    s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    s.test.assign(perm.begin() + n_train + n_val, perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::uint64_t indices_digest(const std::vector<int>& idx) {
    Digest d;
    for (int i : idx) d.update_pod(static_cast<std::int32_t>(i));
    return d.value();
}

double mean_predictor_nmse_db(const Dataset& ds, const std::vector<int>& fit_idx,
                              const std::vector<int>& eval_idx) {
    if (fit_idx.empty() || eval_idx.empty())
        throw std::invalid_argument("mean predictor: index sets must be non-empty");
    const int s = ds.sample_size();
    std::vector<double> mean(static_cast<std::size_t>(s), 0.0);
    for (int i : fit_idx) {
        const double* x = ds.sample(i);
        for (int j = 0; j < s; ++j) mean[static_cast<std::size_t>(j)] += x[j];
    }
    for (auto& v : mean) v /= static_cast<double>(fit_idx.size());

    double ratio_sum = 0.0;
    std::int64_t used = 0;
    for (int i : eval_idx) {
        const double* x = ds.sample(i);
        double err = 0.0, ref = 0.0;
        for (int j = 0; j < s; ++j) {
            const double d = x[j] - mean[static_cast<std::size_t>(j)];
            err += d * d;
            ref += x[j] * x[j];
        }
        if (ref <= 0.0) continue;
        ratio_sum += err / ref;
        ++used;
    }
    if (!used) throw std::invalid_argument("mean predictor: no evaluable samples");
    return 10.0 * std::log10(ratio_sum / static_cast<double>(used));
}

}  // namespace psic
