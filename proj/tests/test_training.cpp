// SPDX-License-Identifier: Apache-2.0
//
// Training phases: determinism, checkpoint-resume equivalence, frozen
// parameters in the episodic phase, few-shot adaptation locality, and the
// baseline's matched step budget.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "psic/errors.hpp"
#include "psic/training.hpp"

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

SystemConfig toy_sys() {
    SystemConfig cfg;
    cfg.rows = 4;
    cfg.cols = 4;
    cfg.paths_nlos = 2;
    return cfg;
}

std::vector<TaskDescriptor> toy_tasks() {
    return {{0.25, 15.0, ChannelType::kNlos}, {0.5, 10.0, ChannelType::kLos}};
}

TrainConfig tiny_cfg() {
    TrainConfig cfg;
    cfg.epochs_base = 4;
    cfg.steps_per_task = 4;
    cfg.epochs_episodic = 2;
    cfg.episodes_per_task = 3;
    cfg.batch_size = 8;
    cfg.support_size = 8;
    cfg.query_size = 6;
    cfg.adapt_steps = 10;
    cfg.val_samples = 6;
    cfg.val_draws = 2;
    cfg.checkpoint_every = 0;
    cfg.seed = 21;
    return cfg;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

bool same_params(const ParamMap& a, const ParamMap& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, t] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second.shape != t.shape || it->second.data != t.data) return false;
    }
    return true;
}

struct Fixture {
    std::vector<Dataset> data;
    std::vector<TaskData> tasks;

    Fixture() {
        const auto all = toy_tasks();
        data.reserve(all.size());
        for (std::size_t i = 0; i < all.size(); ++i)
            data.push_back(generate_dataset(toy_sys(), all[i].channel, 60, 300 + i));
        for (std::size_t i = 0; i < all.size(); ++i)
            tasks.push_back({all[i], &data[i], split_dataset(60, 41)});
    }
};

}  // namespace

TEST_CASE("train config validation rejects nonsense") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs_base = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.lr_adapt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.contrastive_margin = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.support_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("base training is deterministic and improves validation NMSE") {
    Fixture f;
    const TrainConfig cfg = tiny_cfg();
    const CodecModel init = CodecModel::init(toy_dims(), toy_tasks(), 7);

    // pre-training validation level for comparison
    const double before =
        prompt_task_nmse_db(init, 0, f.tasks[0].task, f.data[0], f.tasks[0].split.val, 2, 999);

    CodecModel a = init;
    CodecModel b = init;
    Provenance prov;
    const TrainResult ra = train_base(a, f.tasks, cfg, nullptr, prov, "", nullptr);
    const TrainResult rb = train_base(b, f.tasks, cfg, nullptr, prov, "", nullptr);
    CHECK(same_params(a.params, b.params));
    CHECK(ra.best_val_db == rb.best_val_db);
    CHECK(ra.epochs_run == cfg.epochs_base);

    const double after =
        prompt_task_nmse_db(a, 0, f.tasks[0].task, f.data[0], f.tasks[0].split.val, 2, 999);
    CHECK(after < before);

    // a different seed trains a different model
    TrainConfig cfg2 = cfg;
    cfg2.seed = 22;
    CodecModel c = init;
    train_base(c, f.tasks, cfg2, nullptr, prov, "", nullptr);
    CHECK_FALSE(same_params(a.params, c.params));
}

TEST_CASE("training log rows follow the schema") {
    Fixture f;
    TrainConfig cfg = tiny_cfg();
    cfg.epochs_base = 2;
    CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 7);
    const std::string path = tmp_path("psic_train_log.csv");
    {
        TrainLog log(path, false);
        Provenance prov;
        train_base(m, f.tasks, cfg, &log, prov, "", nullptr);
    }
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,phase,task,split,nmse_db");
    int rows = 0, vals = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.find(",base,") == std::string::npos) continue;
        if (line.find(",val,") != std::string::npos) ++vals;
    }
    // per epoch: one train and one val row per task
    CHECK(rows == cfg.epochs_base * 2 * 2);
    CHECK(vals == cfg.epochs_base * 2);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run") {
    Fixture f;
    const CodecModel init = CodecModel::init(toy_dims(), toy_tasks(), 13);
    Provenance prov;
    prov.master_seed = 13;

    TrainConfig full = tiny_cfg();
    full.checkpoint_every = 2;
    CodecModel straight = init;
    const std::string ck_full = tmp_path("psic_ck_full.psck");
    const TrainResult rs = train_base(straight, f.tasks, full, nullptr, prov, ck_full, nullptr);

    TrainConfig firstHalf = full;
    firstHalf.epochs_base = 2;
    CodecModel half = init;
    const std::string ck_half = tmp_path("psic_ck_half.psck");
    train_base(half, f.tasks, firstHalf, nullptr, prov, ck_half, nullptr);

    const Checkpoint ck = load_checkpoint(ck_half);
    CHECK(ck.next_epoch == 2);
    CodecModel resumed = init;  // overwritten by the checkpoint's live params
    const TrainResult rr = train_base(resumed, f.tasks, full, nullptr, prov, "", &ck);
    CHECK(rr.epochs_run == full.epochs_base - 2);
    CHECK(same_params(resumed.params, straight.params));
    CHECK(rr.best_val_db == rs.best_val_db);
    std::remove(ck_full.c_str());
    std::remove(ck_half.c_str());
}

TEST_CASE("base training rejects mismatched task lists") {
    Fixture f;
    const TrainConfig cfg = tiny_cfg();
    CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 7);
    Provenance prov;

    std::vector<TaskData> swapped = {f.tasks[1], f.tasks[0]};
    CHECK_THROWS_AS(train_base(m, swapped, cfg, nullptr, prov, "", nullptr), std::invalid_argument);

    std::vector<TaskData> missing = {f.tasks[0]};
    CHECK_THROWS_AS(train_base(m, missing, cfg, nullptr, prov, "", nullptr), std::invalid_argument);

    std::vector<TaskData> nodata = f.tasks;
    nodata[1].data = nullptr;
    CHECK_THROWS_AS(train_base(m, nodata, cfg, nullptr, prov, "", nullptr), MissingInputError);
}

TEST_CASE("episodic phase freezes encoder and decoder and never degrades") {
    Fixture f;
    const TrainConfig cfg = tiny_cfg();
    CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 19);
    const std::uint64_t enc_before = params_digest(m.params, "enc.");
    const std::uint64_t dec_before = params_digest(m.params, "dec.");
    const std::uint64_t match_before = params_digest(m.params, "match.");

    CodecModel m2 = m;
    const EpisodicResult r = train_prompts_episodic(m, f.tasks, cfg, nullptr);
    const EpisodicResult r2 = train_prompts_episodic(m2, f.tasks, cfg, nullptr);
    CHECK(params_digest(m.params, "enc.") == enc_before);
    CHECK(params_digest(m.params, "dec.") == dec_before);
    CHECK(params_digest(m.params, "match.") == match_before);
    CHECK(r.query_after_db <= r.query_before_db);
    CHECK(r.episodes == cfg.epochs_episodic * cfg.episodes_per_task * 2);
    // deterministic
    CHECK(same_params(m.params, m2.params));
    CHECK(r2.query_after_db == r.query_after_db);
}

TEST_CASE("zero episodic epochs is a no-op") {
    Fixture f;
    TrainConfig cfg = tiny_cfg();
    cfg.epochs_episodic = 0;
    CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 19);
    const ParamMap before = m.params;
    const EpisodicResult r = train_prompts_episodic(m, f.tasks, cfg, nullptr);
    CHECK(same_params(m.params, before));
    CHECK(r.query_after_db == r.query_before_db);
    CHECK(r.episodes == 0);
}

TEST_CASE("few-shot adaptation extends the bank without touching the rest") {
    Fixture f;
    TrainConfig cfg = tiny_cfg();
    cfg.adapt_steps = 15;
    const CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 23);
    const TaskDescriptor task = {0.25, 12.0, ChannelType::kNlos};  // off-grid SNR
    std::vector<std::vector<double>> support;
    for (int i = 0; i < 8; ++i) support.push_back(f.data[0].sample_copy(i));

    const AdaptResult r = adapt_prompt(m, support, task, cfg, 77);
    CHECK(r.model.bank.size() == 3);
    CHECK(r.model.bank.tasks[2] == task);
    CHECK(r.new_index == 2);
    CHECK(r.nearest_index >= 0);
    CHECK(r.nearest_index < 2);
    // every original parameter untouched, two new ones added
    CHECK(r.model.params.size() == m.params.size() + 2);
    for (const auto& [name, t] : m.params) CHECK(r.model.params.at(name).data == t.data);

    // adaptation respects the step budget deterministically
    const AdaptResult r2 = adapt_prompt(m, support, task, cfg, 77);
    CHECK(same_params(r2.model.params, r.model.params));

    // the adapted prompt reconstructs the support better than its seed prompt
    Dataset sds;
    sds.rows = 4;
    sds.cols = 4;
    sds.channel = task.channel;
    sds.count = static_cast<std::int64_t>(support.size());
    for (const auto& s : support) sds.values.insert(sds.values.end(), s.begin(), s.end());
    std::vector<int> all;
    for (int i = 0; i < 8; ++i) all.push_back(i);
    const double adapted = prompt_task_nmse_db(r.model, r.new_index, task, sds, all, 2, 555);
    const double seeded = prompt_task_nmse_db(r.model, r.nearest_index, task, sds, all, 2, 555);
    CHECK(adapted < seeded);
}

TEST_CASE("zero adaptation steps copies the nearest prompt exactly") {
    Fixture f;
    TrainConfig cfg = tiny_cfg();
    cfg.adapt_steps = 0;
    const CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 23);
    std::vector<std::vector<double>> support = {f.data[0].sample_copy(0)};
    const AdaptResult r = adapt_prompt(m, support, {0.5, 12.0, ChannelType::kNlos}, cfg, 1);
    CHECK(r.model.params.at(bank_value_name(r.new_index)).data ==
          m.params.at(bank_value_name(r.nearest_index)).data);
    CHECK(r.model.params.at(bank_key_name(r.new_index)).data ==
          m.params.at(bank_key_name(r.nearest_index)).data);
}

TEST_CASE("adaptation rejects bad requests") {
    Fixture f;
    const TrainConfig cfg = tiny_cfg();
    const CodecModel m = CodecModel::init(toy_dims(), toy_tasks(), 23);
    std::vector<std::vector<double>> support = {f.data[0].sample_copy(0)};

    // on-grid task: the bank already covers it
    CHECK_THROWS_AS(adapt_prompt(m, support, toy_tasks()[0], cfg, 1), std::invalid_argument);
    // no support samples
    CHECK_THROWS_AS(adapt_prompt(m, {}, {0.25, 12.0, ChannelType::kNlos}, cfg, 1),
                    std::invalid_argument);
    // wrong geometry
    std::vector<std::vector<double>> bad = {std::vector<double>(9, 0.1)};
    CHECK_THROWS_AS(adapt_prompt(m, bad, {0.25, 12.0, ChannelType::kNlos}, cfg, 1),
                    std::invalid_argument);
    // compression ratio outside the model grid
    CHECK_THROWS_AS(adapt_prompt(m, support, {0.3, 12.0, ChannelType::kNlos}, cfg, 1),
                    std::invalid_argument);
}

TEST_CASE("baseline training matches the joint phase step budget") {
    Fixture f;
    TrainConfig cfg = tiny_cfg();
    cfg.epochs_base = 2;
    cfg.checkpoint_every = 2;
    BaselineModel m = BaselineModel::init(toy_dims(), toy_tasks()[0], 29);
    BaselineModel m2 = m;
    Provenance prov;
    const std::string ck_path = tmp_path("psic_baseline_ck.psck");
    const TrainResult r = train_baseline(m, f.tasks[0], cfg, nullptr, prov, ck_path, nullptr, 5);
    const TrainResult r2 = train_baseline(m2, f.tasks[0], cfg, nullptr, prov, "", nullptr, 5);
    CHECK(same_params(m.params, m2.params));
    CHECK(r.best_val_db == r2.best_val_db);

    const Checkpoint ck = load_checkpoint(ck_path);
    CHECK(ck.model.kind == ModelKind::kBaseline);
    // grid_tasks multiplies the per-epoch budget for a fair comparison
    CHECK(ck.adam_t == 2 * cfg.steps_per_task * 5);
    std::remove(ck_path.c_str());
}

TEST_CASE("baseline training rejects a non-home dataset") {
    Fixture f;
    const TrainConfig cfg = tiny_cfg();
    BaselineModel m = BaselineModel::init(toy_dims(), toy_tasks()[0], 29);
    Provenance prov;
    CHECK_THROWS_AS(train_baseline(m, f.tasks[1], cfg, nullptr, prov, "", nullptr, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(train_baseline(m, f.tasks[0], cfg, nullptr, prov, "", nullptr, 0),
                    std::invalid_argument);
}
