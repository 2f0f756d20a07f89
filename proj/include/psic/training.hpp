// SPDX-License-Identifier: Apache-2.0
//
// Three-phase optimization: joint base training over the task mix, episodic
// prompt-only refinement with frozen encoder/decoder, and few-shot prompt
// adaptation for off-grid tasks. Every phase is a pure function of
// (inputs, seed); the baseline trainer shares the optimizer and step budget
// for a controlled comparison.

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "psic/codec.hpp"
#include "psic/dataset.hpp"
#include "psic/eval.hpp"
#include "psic/model_io.hpp"

namespace psic {

struct TrainConfig {
    int epochs_base = 24;       // joint phase epochs
    int steps_per_task = 16;    // batches per task per base epoch
    int epochs_episodic = 4;    // prompt-only phase epochs
    int episodes_per_task = 8;  // episodes per task per episodic epoch
    int batch_size = 32;
    int support_size = 32;  // K_s per episode / adaptation
    int query_size = 64;    // K_q per episode / adaptation report
    int adapt_steps = 20;   // S
    double lr_base = 1e-3;
    double lr_prompt = 1e-3;
    double lr_adapt = 1e-2;
    double contrastive_weight = 0.1;
    double contrastive_margin = 0.2;
    int patience = 10;          // early-stopping epochs without improvement
    double min_improve_db = 1e-3;
    int val_samples = 128;      // per task per epoch
    int val_draws = 4;          // noise draws per validation sample
    int checkpoint_every = 4;   // epochs between checkpoint writes (0 = off)
    std::uint64_t seed = 1;

    void validate() const;
};

// One task's training inputs; order must follow the model's bank order.
struct TaskData {
    TaskDescriptor task;
    const Dataset* data = nullptr;
    SplitIndices split;
};

// Line-oriented training log: epoch,phase,task,split,nmse_db.
class TrainLog {
  public:
    TrainLog(const std::string& path, bool append);
    void row(int epoch, const std::string& phase, const std::string& task, const std::string& split,
             double nmse_db);

  private:
    std::ofstream out_;
};

struct TrainResult {
    double best_val_db = 0.0;
    int epochs_run = 0;  // epochs executed in this call (resume runs fewer)
    double wall_seconds = 0.0;
};

// Joint phase: encoder, decoder, prompts and matching head trained on
// batches sampled across all grid tasks, reconstruction MSE plus the
// contrastive key objective. Returns the best-validation snapshot in
// `model`; logs per-task train/val NMSE per epoch; writes resumable
// checkpoints when `checkpoint_path` is non-empty.
TrainResult train_base(CodecModel& model, const std::vector<TaskData>& tasks, const TrainConfig& cfg,
                       TrainLog* log, const Provenance& prov, const std::string& checkpoint_path,
                       const Checkpoint* resume);

struct EpisodicResult {
    double query_before_db = 0.0;
    double query_after_db = 0.0;
    double wall_seconds = 0.0;
    int episodes = 0;
};

// Episodic phase: encoder/decoder frozen (hash-guarded), each episode takes
// one optimizer step on support reconstruction loss touching bank parameters
// only, then scores the query set. The refined bank is kept only if mean
// query NMSE did not degrade.
EpisodicResult train_prompts_episodic(CodecModel& model, const std::vector<TaskData>& tasks,
                                      const TrainConfig& cfg, TrainLog* log);

struct AdaptResult {
    CodecModel model;  // bank extended by exactly one prompt
    int nearest_index = -1;
    int new_index = -1;
    double wall_seconds = 0.0;
};

// Few-shot adaptation for an off-grid task: initialize a new prompt from the
// nearest grid prompt (cosine over keys of the embedded support mean), run S
// optimizer steps on support reconstruction loss updating only the new
// prompt, and return the extended model. The input model is untouched.
AdaptResult adapt_prompt(const CodecModel& model, const std::vector<std::vector<double>>& support,
                         const TaskDescriptor& task, const TrainConfig& cfg, std::uint64_t seed);

// Baseline trainer: identical optimizer and total step budget as the joint
// phase (steps_per_task × grid_tasks per epoch on its single task).
TrainResult train_baseline(BaselineModel& model, const TaskData& home, const TrainConfig& cfg,
                           TrainLog* log, const Provenance& prov, const std::string& checkpoint_path,
                           const Checkpoint* resume, int grid_tasks);

}  // namespace psic
