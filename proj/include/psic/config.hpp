// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a sectioned key=value file merged over defaults, fully
// validated up front. The canonical echo of the effective config is embedded
// in every artifact and its digest ties artifacts of one run together.

#pragma once

#include <cstdint>
#include <string>

#include "psic/codec.hpp"
#include "psic/irs.hpp"
#include "psic/task.hpp"
#include "psic/training.hpp"

namespace psic {

struct RunConfig {
    std::uint64_t seed = 1;              // [run] master seed
    SystemConfig system;                 // [system] surface and channel model
    TaskGrid grid;                       // [grid] training/evaluation tasks
    std::int64_t samples_per_task = 5000;  // [data]
    CodecDims dims;                      // [model] (rows/cols mirror [system])
    TaskDescriptor baseline_home{0.25, 15.0, ChannelType::kNlos};  // [model]
    TrainConfig train;                   // [train]
    int eval_draws = 200;                // [eval] noise draws per sample

    std::string home;  // artifact root; from PSI_HOME, never part of the digest

    // Cross-field consistency; throws std::invalid_argument.
    void validate() const;

    // Canonical key=value rendering of every semantic field, fixed order.
    std::string echo() const;

    // FNV-1a over echo(): the run identity embedded in artifacts.
    std::uint64_t digest() const;
};

// Defaults merged with `path` (empty = pure defaults). Unknown sections or
// keys and malformed values are rejected. The result is validated.
RunConfig load_run_config(const std::string& path);

// Parse "cr,snr,channel" (e.g. "0.25,12,nlos") into a task descriptor.
TaskDescriptor parse_task(const std::string& text);

}  // namespace psic
