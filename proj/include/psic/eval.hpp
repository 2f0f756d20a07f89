// SPDX-License-Identifier: Apache-2.0
//
// Evaluation harness: per-cell NMSE over the task grid for the prompt model
// and the fixed baseline, prompt-matching accuracy, and report export.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "psic/codec.hpp"
#include "psic/dataset.hpp"
#include "psic/model_io.hpp"
#include "psic/task.hpp"

#include <json.hpp>

namespace psic {

// Seed-tree tags: one constant per pipeline stage so substreams never
// collide across phases.
enum SeedTag : std::uint64_t {
    kTagData = 1,
    kTagSplit = 2,
    kTagBase = 3,
    kTagEpisodic = 4,
    kTagAdapt = 5,
    kTagBaseline = 6,
    kTagEval = 7,
};

// Mean NMSE (dB) of the prompt model on the given sample indices of one
// dataset: encode at task.cr with the bank prompt, `draws` noise draws per
// sample at task.snr_db, decode, per-sample ratio averaged before the log.
double prompt_task_nmse_db(const CodecModel& model, int bank_index, const TaskDescriptor& task,
                           const Dataset& ds, const std::vector<int>& indices, int draws,
                           std::uint64_t noise_seed, NmseAccumulator* out = nullptr);

// Same protocol for the baseline probed at task.cr via truncation/padding.
double baseline_task_nmse_db(const BaselineModel& model, const TaskDescriptor& task, const Dataset& ds,
                             const std::vector<int>& indices, int draws, std::uint64_t noise_seed,
                             NmseAccumulator* out = nullptr);

struct CellResult {
    TaskDescriptor task;
    std::string model;  // "prompt" or "baseline"
    double nmse_db = 0.0;
    std::int64_t n = 0;
    std::int64_t excluded = 0;
    bool present = true;  // false only under allow_partial with missing data

    bool operator==(const CellResult& o) const {
        return task == o.task && model == o.model && nmse_db == o.nmse_db && n == o.n &&
               excluded == o.excluded && present == o.present;
    }
};

struct MatchReport {
    double channel_accuracy = 0.0;
    double tuple_accuracy = 0.0;
    std::int64_t n = 0;
};

struct EvalReport {
    std::vector<CellResult> cells;  // grid order, prompt rows then baseline per cell
    MatchReport matching;
    std::uint64_t config_digest = 0;
    std::uint64_t seed = 0;
};

// One evaluation input cell: the task, its dataset, and the recomputed split.
struct EvalTask {
    TaskDescriptor task;
    const Dataset* data = nullptr;
    SplitIndices split;
    std::uint64_t dataset_digest = 0;  // file digest, checked against provenance
};

// Refuses evaluation when `indices` matches the recorded training split of
// `key`, or when digests prove the dataset is not the one trained on.
void check_eval_indices(const Provenance& prov, const std::string& key, std::uint64_t dataset_digest,
                        const std::vector<int>& indices);

// Full grid evaluation per the reporting protocol: `draws` noise draws per
// sample (default 200). Tasks missing from `cells` fail the run unless
// allow_partial, in which case the cell is marked absent.
EvalReport evaluate_grid(const CodecModel& prompt, const Provenance& prompt_prov,
                         const BaselineModel& baseline, const Provenance& baseline_prov,
                         const std::vector<TaskDescriptor>& grid, const std::vector<EvalTask>& cells,
                         std::uint64_t seed, int draws, bool allow_partial, int workers = 1);

// Fraction of held-out samples whose matched prompt agrees with the true
// descriptor on channel type, and on the full tuple.
MatchReport matching_accuracy(const CodecModel& model, const std::vector<EvalTask>& cells);

void export_report_csv(const EvalReport& report, const std::string& path);
void export_report_json(const EvalReport& report, const std::string& path,
                        const std::string& config_echo);
EvalReport parse_report_csv(const std::string& path);

}  // namespace psic
