// SPDX-License-Identifier: Apache-2.0
//
// Persistent PSI sample sets: deterministic generation from a seed, the
// "PSID1" on-disk format, and the fixed 80/10/10 split.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psic/irs.hpp"
#include "psic/task.hpp"

namespace psic {

struct Dataset {
    int rows = 16;
    int cols = 16;
    ChannelType channel = ChannelType::kNlos;
    double rician_k_db = 10.0;
    int paths = 3;
    int quant_bits = 0;  // 0 = continuous phases
    std::uint64_t seed = 0;
    std::uint64_t config_digest = 0;
    std::int64_t count = 0;
    std::vector<double> values;  // count × rows·cols normalized phases in [0,1)

    int sample_size() const { return rows * cols; }
    const double* sample(std::int64_t i) const { return values.data() + i * sample_size(); }
    std::vector<double> sample_copy(std::int64_t i) const {
        return {sample(i), sample(i) + sample_size()};
    }
};

// n optimal-PSI samples from i.i.d. channel realizations. Sample i uses the
// substream derived from (seed, i), so results are byte-identical for any
// worker count. quant_bits > 0 passes each sample through the quantizer.
Dataset generate_dataset(const SystemConfig& cfg, ChannelType type, std::int64_t n, std::uint64_t seed,
                         int workers = 1, int quant_bits = 0);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// FNV-1a over the raw file bytes, for manifests.
std::uint64_t file_digest(const std::string& path);

struct SplitIndices {
    std::vector<int> train, val, test;
};

// Seeded permutation split, 80/10/10, each part sorted ascending.
SplitIndices split_dataset(std::int64_t n, std::uint64_t seed);

std::uint64_t indices_digest(const std::vector<int>& idx);

// NMSE (dB) of predicting every sample by the mean of the fit samples; the
// floor any trained model must beat.
double mean_predictor_nmse_db(const Dataset& ds, const std::vector<int>& fit_idx,
                              const std::vector<int>& eval_idx);

}  // namespace psic
