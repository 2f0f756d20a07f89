// SPDX-License-Identifier: Apache-2.0
//
// Config parsing: defaults, overrides, strict rejection, canonical echo
// round trip, and digest semantics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "psic/config.hpp"
#include "psic/errors.hpp"

using namespace psic;

namespace {

std::string write_cfg(const std::string& name, const std::string& body) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("defaults load and mirror coupled fields") {
    const RunConfig cfg = load_run_config("");
    CHECK(cfg.seed == 1);
    CHECK(cfg.system.rows == 16);
    CHECK(cfg.samples_per_task == 5000);
    CHECK(cfg.grid.size() == 12);
    CHECK(cfg.dims.rows == cfg.system.rows);
    CHECK(cfg.dims.grid_crs == cfg.grid.crs);
    CHECK(cfg.train.seed == cfg.seed);
    CHECK(cfg.eval_draws == 200);
    CHECK(cfg.baseline_home == TaskDescriptor{0.25, 15.0, ChannelType::kNlos});
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("file values override defaults; comments and blanks are ignored") {
    const std::string path = write_cfg("psic_cfg_basic.cfg", R"(
# comment line
[run]
seed = 9   # trailing comment

[system]
rows = 8
cols = 8

[grid]
crs = 0.25,0.5
snrs_db = 15
channels = nlos

[model]
patch = 2
baseline_cr = 0.5

[train]
epochs_base = 3

[data]
samples_per_task = 100
)");
    const RunConfig cfg = load_run_config(path);
    CHECK(cfg.seed == 9);
    CHECK(cfg.train.seed == 9);
    CHECK(cfg.system.rows == 8);
    CHECK(cfg.dims.rows == 8);
    CHECK(cfg.dims.patch == 2);
    CHECK(cfg.grid.size() == 2);
    CHECK(cfg.dims.grid_crs == std::vector<double>{0.25, 0.5});
    CHECK(cfg.baseline_home.cr == 0.5);
    CHECK(cfg.train.epochs_base == 3);
    CHECK(cfg.samples_per_task == 100);
    std::remove(path.c_str());
}

TEST_CASE("strict parsing rejects unknown and malformed input") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/psic.cfg"), MissingInputError);

    const auto reject = [](const std::string& body) {
        const std::string p = write_cfg("psic_cfg_bad.cfg", body);
        CHECK_THROWS_AS(load_run_config(p), std::invalid_argument);
        std::remove(p.c_str());
    };
    reject("[run]\nseeed = 1\n");                  // unknown key
    reject("[runn]\nseed = 1\n");                  // unknown section
    reject("seed = 1\n");                          // key outside section
    reject("[run]\nseed\n");                       // missing '='
    reject("[run]\nseed = banana\n");              // not a number
    reject("[run]\nseed = 1 2\n");                 // trailing characters
    reject("[train]\nepochs_base = 1.5\n");        // int field
    reject("[model]\nuse_film = maybe\n");         // bool field
    reject("[grid]\nchannels = los,underwater\n"); // channel name
    reject("[grid]\ncrs = 0.25,0.25\n");           // duplicates
    reject("[grid]\ncrs = 1.5\n");                 // out of range
    reject("[data]\nsamples_per_task = 5\n");      // split too small
    reject("[model]\nbaseline_cr = 0.3\n");        // baseline off grid
    reject("[system]\nrows = 7\n");                // not divisible by patch
}

TEST_CASE("canonical echo round trips to an identical digest") {
    const RunConfig cfg = load_run_config("");
    const std::string path = write_cfg("psic_cfg_echo.cfg", cfg.echo());
    const RunConfig back = load_run_config(path);
    CHECK(back.digest() == cfg.digest());
    CHECK(back.echo() == cfg.echo());
    std::remove(path.c_str());
}

TEST_CASE("digest tracks semantic fields only") {
    RunConfig a = load_run_config("");
    RunConfig b = a;
    b.home = "/somewhere/else";  // artifact root is not semantic
    CHECK(a.digest() == b.digest());
    b.seed = 2;
    CHECK(a.digest() != b.digest());
    b = a;
    b.train.lr_base = 2e-3;
    CHECK(a.digest() != b.digest());
    b = a;
    b.eval_draws = 100;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("task strings parse and reject malformed input") {
    const TaskDescriptor t = parse_task("0.25,12,nlos");
    CHECK(t.cr == 0.25);
    CHECK(t.snr_db == 12.0);
    CHECK(t.channel == ChannelType::kNlos);
    CHECK(parse_task("0.5, 10, LOS").channel == ChannelType::kLos);
    CHECK_THROWS_AS(parse_task("0.25,12"), std::invalid_argument);
    CHECK_THROWS_AS(parse_task("0.25,12,nlos,extra"), std::invalid_argument);
    CHECK_THROWS_AS(parse_task("x,12,nlos"), std::invalid_argument);
    CHECK_THROWS_AS(parse_task("0.25,12,water"), std::invalid_argument);
}
