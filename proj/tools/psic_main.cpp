// SPDX-License-Identifier: Apache-2.0
//
// psic: single executable driving the full pipeline.

#include <CLI11.hpp>

#include "psic/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"prompt-conditioned PSI compression pipeline"};
    app.require_subcommand(1);
    psic::CliOptions opt;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "config file (sectioned key = value)");
        sub->add_option("--seed", opt.seed, "master seed override");
        sub->add_flag("--force", opt.force, "overwrite existing artifacts");
        sub->add_option("--workers", opt.workers, "worker threads; results are worker-invariant");
        return sub;
    };

    add_common(app.add_subcommand("gen-data", "generate one dataset per grid task plus a manifest"));
    add_common(app.add_subcommand("train", "base + episodic training of the prompt model"));
    add_common(app.add_subcommand("train-baseline", "train the fixed-configuration baseline"));
    CLI::App* adapt =
        add_common(app.add_subcommand("adapt", "few-shot prompt adaptation for an off-grid task"));
    adapt->add_option("--task", opt.task, "target task as cr,snr,channel (e.g. 0.25,12,nlos)");
    adapt->add_option("--support-size", opt.support_size, "number of support samples");
    CLI::App* eval =
        add_common(app.add_subcommand("eval", "NMSE grid report for the prompt model and the baseline"));
    eval->add_option("--grid", opt.grid_slice, "full | fig4a (cross-CR strip) | fig4b (cross-condition strip)");
    eval->add_option("--format", opt.format, "csv | json");
    eval->add_flag("--allow-partial", opt.allow_partial, "mark cells without data absent instead of failing");
    eval->add_option("--models", opt.models, "comma-separated model files (default: the trained pair)");
    eval->add_option("--out", opt.out, "report output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2; --help exits 0
    }

    CLI::App* sub = app.get_subcommands().front();
    opt.has_seed = sub->count("--seed") > 0;
    return psic::run_command(sub->get_name(), opt);
}
