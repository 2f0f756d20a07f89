// SPDX-License-Identifier: Apache-2.0
//
// Pipeline commands behind the CLI: dataset generation, the two trainers,
// few-shot adaptation, and grid evaluation. Each command is a function of
// (validated config, options); run_command maps failures to exit codes.

#pragma once

#include <cstdint>
#include <string>

#include "psic/config.hpp"

namespace psic {

struct CliOptions {
    std::string config_path;   // --config
    bool has_seed = false;     // --seed given
    std::uint64_t seed = 0;
    bool force = false;        // --force: overwrite existing artifacts
    int workers = 1;           // --workers
    std::string grid_slice = "full";  // --grid {full,fig4a,fig4b}
    std::string format = "csv";       // --format {csv,json}
    bool allow_partial = false;       // --allow-partial
    std::string models;        // --models a,b (eval)
    std::string out;           // --out (eval report path)
    std::string task;          // --task cr,snr,channel (adapt)
    int support_size = 32;     // --support-size (adapt)
};

// Config file + seed override + PSI_HOME resolution, fully validated.
RunConfig effective_config(const CliOptions& opt);

int cmd_gen_data(const RunConfig& cfg, const CliOptions& opt);
int cmd_train(const RunConfig& cfg, const CliOptions& opt);
int cmd_train_baseline(const RunConfig& cfg, const CliOptions& opt);
int cmd_adapt(const RunConfig& cfg, const CliOptions& opt);
int cmd_eval(const RunConfig& cfg, const CliOptions& opt);

// Dispatch by command name with the documented exit-code mapping:
// 0 success, 2 usage, 3 missing inputs, 4 numeric failure.
int run_command(const std::string& name, const CliOptions& opt);

}  // namespace psic
