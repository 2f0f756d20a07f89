// SPDX-License-Identifier: Apache-2.0
//
// On-disk model container ("PSIC1") and mid-training checkpoints ("PSCK1").
// Both are byte-deterministic: parameters serialize in name order with
// explicit little-endian doubles, so identical state yields identical files.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "psic/adam.hpp"
#include "psic/codec.hpp"
#include "psic/params.hpp"

namespace psic {

// Digests tying a trained model to the exact data it saw. Evaluation
// cross-checks these before scoring and refuses train-split reuse.
struct TaskProvenance {
    std::uint64_t dataset_digest = 0;  // PSID1 file bytes
    std::uint64_t train_digest = 0;    // split index digests
    std::uint64_t val_digest = 0;
    std::uint64_t test_digest = 0;

    bool operator==(const TaskProvenance& o) const {
        return dataset_digest == o.dataset_digest && train_digest == o.train_digest &&
               val_digest == o.val_digest && test_digest == o.test_digest;
    }
};

struct Provenance {
    std::uint64_t config_digest = 0;  // semantic run-config digest
    std::uint64_t master_seed = 0;
    std::uint64_t split_seed = 0;
    std::map<std::string, TaskProvenance> tasks;  // keyed by task_key()

    bool operator==(const Provenance& o) const {
        return config_digest == o.config_digest && master_seed == o.master_seed &&
               split_seed == o.split_seed && tasks == o.tasks;
    }
};

enum class ModelKind : std::uint8_t { kPrompt = 0, kBaseline = 1 };

// One container for both model families; `kind` selects the active member.
struct ModelFile {
    ModelKind kind = ModelKind::kPrompt;
    CodecModel prompt;
    BaselineModel baseline;
    Provenance prov;

    const ParamMap& params() const {
        return kind == ModelKind::kPrompt ? prompt.params : baseline.params;
    }
    ParamMap& params() { return kind == ModelKind::kPrompt ? prompt.params : baseline.params; }
    const CodecDims& dims() const {
        return kind == ModelKind::kPrompt ? prompt.dims : baseline.dims;
    }
};

void save_model(const ModelFile& mf, const std::string& path);
ModelFile load_model(const std::string& path);

// Training state sufficient to resume and reproduce the uninterrupted run
// bit for bit: model, optimizer moments, early-stopping bookkeeping and the
// best-so-far parameter snapshot.
struct Checkpoint {
    ModelFile model;
    std::int64_t adam_t = 0;
    ParamMap adam_m, adam_v;
    int next_epoch = 0;
    double best_val_db = 1e300;
    int since_improve = 0;
    ParamMap best_params;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace psic
