// SPDX-License-Identifier: Apache-2.0
//
// Command implementations: artifact layout, provenance wiring, and the
// exit-code contract.

#include "psic/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <vector>

#include <json.hpp>

#include "psic/errors.hpp"
#include "psic/eval.hpp"
#include "psic/model_io.hpp"
#include "psic/training.hpp"

namespace psic {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// seed-tree leaves under kTagAdapt reserved for the adapt command's data;
// adapt_prompt's internal step noise uses small step indices
constexpr std::uint64_t kAdaptSupportTag = 9001;
constexpr std::uint64_t kAdaptQueryTag = 9002;
constexpr std::uint64_t kAdaptEvalTag = 9003;

fs::path data_dir(const RunConfig& cfg) { return fs::path(cfg.home) / "data"; }
fs::path models_dir(const RunConfig& cfg) { return fs::path(cfg.home) / "models"; }
fs::path logs_dir(const RunConfig& cfg) { return fs::path(cfg.home) / "logs"; }
fs::path reports_dir(const RunConfig& cfg) { return fs::path(cfg.home) / "reports"; }

fs::path dataset_path(const RunConfig& cfg, const TaskDescriptor& t) {
    return data_dir(cfg) / (task_key(t) + ".psid");
}

void refuse_existing(const fs::path& p, bool force) {
    if (!force && fs::exists(p))
        throw UsageError(p.string() + " already exists (pass --force to overwrite)");
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::uint64_t split_seed_of(const RunConfig& cfg) { return derive_seed(cfg.seed, {kTagSplit}); }

// Load one task's dataset, cross-checking geometry and config identity.
Dataset load_task_dataset(const RunConfig& cfg, const TaskDescriptor& t) {
    const fs::path p = dataset_path(cfg, t);
    if (!fs::exists(p)) throw MissingInputError("missing dataset " + p.string() + " (run gen-data)");
    Dataset ds = load_dataset(p.string());
    if (ds.rows != cfg.system.rows || ds.cols != cfg.system.cols)
        throw MissingInputError(p.string() + ": geometry does not match the config");
    if (ds.channel != t.channel)
        throw MissingInputError(p.string() + ": channel type does not match its task");
    if (ds.config_digest != cfg.digest())
        throw MissingInputError(p.string() + ": generated under a different config (rerun gen-data)");
    return ds;
}

TaskProvenance make_task_provenance(const RunConfig& cfg, const TaskDescriptor& t,
                                    const SplitIndices& split) {
    TaskProvenance tp;
    tp.dataset_digest = file_digest(dataset_path(cfg, t).string());
    tp.train_digest = indices_digest(split.train);
    tp.val_digest = indices_digest(split.val);
    tp.test_digest = indices_digest(split.test);
    return tp;
}

std::optional<Checkpoint> maybe_resume(const fs::path& ck_path, const Provenance& prov, bool force) {
    if (force || !fs::exists(ck_path)) return std::nullopt;
    Checkpoint ck = load_checkpoint(ck_path.string());
    if (!(ck.model.prov == prov))
        throw UsageError(ck_path.string() +
                         ": checkpoint belongs to a different run (config/seed/data changed); "
                         "pass --force to start over");
    return ck;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

RunConfig effective_config(const CliOptions& opt) {
    RunConfig cfg = load_run_config(opt.config_path);
    if (opt.has_seed) {
        cfg.seed = opt.seed;
        cfg.train.seed = opt.seed;
        cfg.validate();
    }
    if (const char* env = std::getenv("PSI_HOME"); env && *env)
        cfg.home = env;
    else
        cfg.home = "psic_home";
    if (opt.workers < 1) throw UsageError("--workers must be at least 1");
    return cfg;
}

int cmd_gen_data(const RunConfig& cfg, const CliOptions& opt) {
    const auto tasks = cfg.grid.tasks();
    fs::create_directories(data_dir(cfg));
    const fs::path manifest_path = data_dir(cfg) / "manifest.json";
    refuse_existing(manifest_path, opt.force);
    for (const auto& t : tasks) refuse_existing(dataset_path(cfg, t), opt.force);

    json manifest;
    manifest["format"] = "psic-data-manifest/1";
    manifest["config_digest"] = cfg.digest();
    manifest["seed"] = cfg.seed;
    manifest["split_seed"] = split_seed_of(cfg);
    manifest["samples_per_task"] = cfg.samples_per_task;
    manifest["config"] = cfg.echo();
    json list = json::array();
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const TaskDescriptor& t = tasks[ti];
        Dataset ds = generate_dataset(cfg.system, t.channel, cfg.samples_per_task,
                                      derive_seed(cfg.seed, {kTagData, ti}), opt.workers,
                                      /*quant_bits=*/0);
        ds.config_digest = cfg.digest();
        const fs::path p = dataset_path(cfg, t);
        save_dataset(ds, p.string());
        json entry;
        entry["task"] = task_key(t);
        entry["file"] = p.filename().string();
        entry["digest"] = file_digest(p.string());
        entry["count"] = ds.count;
        list.push_back(entry);
        std::cout << "wrote " << p.string() << " (" << ds.count << " samples)\n";
    }
    manifest["tasks"] = list;
    write_text(manifest_path, manifest.dump(2) + "\n");
    std::cout << "wrote " << manifest_path.string() << "\n";
    return 0;
}

namespace {

// Shared between the two trainers: datasets + splits + provenance for a task
// list, failing with the full missing list.
struct TrainInputs {
    std::vector<Dataset> data;
    std::vector<TaskData> tasks;
    Provenance prov;
};

TrainInputs load_train_inputs(const RunConfig& cfg, const std::vector<TaskDescriptor>& tasks) {
    TrainInputs in;
    std::string missing;
    for (const auto& t : tasks)
        if (!fs::exists(dataset_path(cfg, t))) missing += (missing.empty() ? "" : ", ") + task_key(t);
    if (!missing.empty()) throw MissingInputError("missing datasets for: " + missing + " (run gen-data)");

    in.prov.config_digest = cfg.digest();
    in.prov.master_seed = cfg.seed;
    in.prov.split_seed = split_seed_of(cfg);
    in.data.reserve(tasks.size());
    for (const auto& t : tasks) {
        in.data.push_back(load_task_dataset(cfg, t));
        const Dataset& ds = in.data.back();
        SplitIndices split = split_dataset(ds.count, in.prov.split_seed);
        in.prov.tasks[task_key(t)] = make_task_provenance(cfg, t, split);
        in.tasks.push_back({t, nullptr, std::move(split)});
    }
    // pointers fixed up after the vector stops reallocating
    for (std::size_t i = 0; i < tasks.size(); ++i) in.tasks[i].data = &in.data[i];
    return in;
}

void write_train_meta(const fs::path& path, const RunConfig& cfg, const TrainResult& base,
                      const EpisodicResult* episodic) {
    json meta;
    meta["format"] = "psic-train-meta/1";
    meta["config_digest"] = cfg.digest();
    meta["seed"] = cfg.seed;
    meta["best_val_db"] = base.best_val_db;
    meta["epochs_run"] = base.epochs_run;
    meta["base_wall_seconds"] = base.wall_seconds;
    if (episodic) {
        meta["episodic_wall_seconds"] = episodic->wall_seconds;
        meta["episodes"] = episodic->episodes;
        meta["query_before_db"] = episodic->query_before_db;
        meta["query_after_db"] = episodic->query_after_db;
    }
    write_text(path, meta.dump(2) + "\n");
}

}  // namespace

int cmd_train(const RunConfig& cfg, const CliOptions& opt) {
    const auto tasks = cfg.grid.tasks();
    TrainInputs in = load_train_inputs(cfg, tasks);
    fs::create_directories(models_dir(cfg));
    fs::create_directories(logs_dir(cfg));
    const fs::path model_path = models_dir(cfg) / "prompt.psic";
    const fs::path meta_path = models_dir(cfg) / "prompt.meta.json";
    const fs::path ck_path = models_dir(cfg) / "prompt.psck";
    const fs::path log_path = logs_dir(cfg) / "training_log.csv";
    refuse_existing(model_path, opt.force);

    const std::optional<Checkpoint> resume = maybe_resume(ck_path, in.prov, opt.force);
    CodecModel model = CodecModel::init(cfg.dims, tasks, derive_seed(cfg.seed, {kTagBase}));
    if (resume)
        std::cerr << "resuming from " << ck_path.string() << " at epoch " << resume->next_epoch << "\n";

    TrainLog log(log_path.string(), /*append=*/resume.has_value());
    const TrainResult base =
        train_base(model, in.tasks, cfg.train, &log, in.prov, ck_path.string(),
                   resume ? &*resume : nullptr);
    std::cout << "base phase: " << base.epochs_run << " epochs, best val " << format_number(base.best_val_db)
              << " dB, " << format_number(base.wall_seconds) << " s\n";

    const EpisodicResult episodic = train_prompts_episodic(model, in.tasks, cfg.train, &log);
    std::cout << "episodic phase: " << episodic.episodes << " episodes, query "
              << format_number(episodic.query_before_db) << " -> " << format_number(episodic.query_after_db)
              << " dB, " << format_number(episodic.wall_seconds) << " s\n";

    ModelFile mf;
    mf.kind = ModelKind::kPrompt;
    mf.prompt = std::move(model);
    mf.prov = in.prov;
    save_model(mf, model_path.string());
    write_train_meta(meta_path, cfg, base, &episodic);
    std::cout << "wrote " << model_path.string() << "\n";
    return 0;
}

int cmd_train_baseline(const RunConfig& cfg, const CliOptions& opt) {
    if (cfg.grid.size() > 1)
        std::cerr << "note: baseline trains only its fixed configuration " << task_key(cfg.baseline_home)
                  << "; the other " << (cfg.grid.size() - 1) << " grid cells are ignored\n";
    TrainInputs in = load_train_inputs(cfg, {cfg.baseline_home});
    fs::create_directories(models_dir(cfg));
    fs::create_directories(logs_dir(cfg));
    const fs::path model_path = models_dir(cfg) / "baseline.psic";
    const fs::path meta_path = models_dir(cfg) / "baseline.meta.json";
    const fs::path ck_path = models_dir(cfg) / "baseline.psck";
    const fs::path log_path = logs_dir(cfg) / "baseline_log.csv";
    refuse_existing(model_path, opt.force);

    const std::optional<Checkpoint> resume = maybe_resume(ck_path, in.prov, opt.force);
    BaselineModel model =
        BaselineModel::init(cfg.dims, cfg.baseline_home, derive_seed(cfg.seed, {kTagBaseline}));
    if (resume)
        std::cerr << "resuming from " << ck_path.string() << " at epoch " << resume->next_epoch << "\n";

    TrainLog log(log_path.string(), /*append=*/resume.has_value());
    const TrainResult base = train_baseline(model, in.tasks[0], cfg.train, &log, in.prov,
                                            ck_path.string(), resume ? &*resume : nullptr,
                                            cfg.grid.size());
    std::cout << "baseline: " << base.epochs_run << " epochs, best val " << format_number(base.best_val_db)
              << " dB, " << format_number(base.wall_seconds) << " s\n";

    ModelFile mf;
    mf.kind = ModelKind::kBaseline;
    mf.baseline = std::move(model);
    mf.prov = in.prov;
    save_model(mf, model_path.string());
    write_train_meta(meta_path, cfg, base, nullptr);
    std::cout << "wrote " << model_path.string() << "\n";
    return 0;
}

int cmd_adapt(const RunConfig& cfg, const CliOptions& opt) {
    if (opt.task.empty()) throw UsageError("adapt requires --task cr,snr,channel");
    if (opt.support_size < 1) throw UsageError("--support-size must be at least 1");
    const TaskDescriptor task = parse_task(opt.task);

    const fs::path model_path = models_dir(cfg) / "prompt.psic";
    if (!fs::exists(model_path))
        throw MissingInputError("missing model " + model_path.string() + " (run train)");
    ModelFile mf = load_model(model_path.string());
    if (mf.kind != ModelKind::kPrompt)
        throw UsageError(model_path.string() + " is not a prompt model");
    if (mf.prov.config_digest != cfg.digest())
        throw UsageError(model_path.string() + ": trained under a different config");
    if (lookup(mf.prompt.bank, task))
        throw UsageError("task " + task_key(task) +
                         " is already covered by the bank; metadata lookup needs no adaptation");

    // support and query sets drawn fresh for the unseen task
    const Dataset support_ds =
        generate_dataset(cfg.system, task.channel, opt.support_size,
                         derive_seed(cfg.seed, {kTagAdapt, kAdaptSupportTag}), opt.workers, 0);
    const Dataset query_ds =
        generate_dataset(cfg.system, task.channel, cfg.train.query_size,
                         derive_seed(cfg.seed, {kTagAdapt, kAdaptQueryTag}), opt.workers, 0);
    std::vector<std::vector<double>> support;
    support.reserve(static_cast<std::size_t>(support_ds.count));
    for (std::int64_t i = 0; i < support_ds.count; ++i) support.push_back(support_ds.sample_copy(i));

    TrainConfig acfg = cfg.train;
    acfg.support_size = opt.support_size;
    const AdaptResult res = adapt_prompt(mf.prompt, support, task, acfg, cfg.seed);

    std::vector<int> qidx(static_cast<std::size_t>(query_ds.count));
    for (std::size_t i = 0; i < qidx.size(); ++i) qidx[i] = static_cast<int>(i);
    const std::uint64_t eval_seed = derive_seed(cfg.seed, {kTagAdapt, kAdaptEvalTag});
    const double pre =
        prompt_task_nmse_db(res.model, res.nearest_index, task, query_ds, qidx, cfg.eval_draws, eval_seed);
    const double post =
        prompt_task_nmse_db(res.model, res.new_index, task, query_ds, qidx, cfg.eval_draws, eval_seed);

    fs::create_directories(reports_dir(cfg));
    const fs::path out_model = models_dir(cfg) / "prompt_adapted.psic";
    const fs::path out_report = reports_dir(cfg) / "adapt_report.json";
    refuse_existing(out_model, opt.force);
    refuse_existing(out_report, opt.force);

    ModelFile extended;
    extended.kind = ModelKind::kPrompt;
    extended.prompt = res.model;
    extended.prov = mf.prov;
    save_model(extended, out_model.string());

    json rep;
    rep["format"] = "psic-adapt-report/1";
    rep["config_digest"] = cfg.digest();
    rep["seed"] = cfg.seed;
    rep["task"] = task_key(task);
    rep["support_size"] = opt.support_size;
    rep["adapt_steps"] = acfg.adapt_steps;
    rep["nearest_task"] = task_key(mf.prompt.bank.tasks[static_cast<std::size_t>(res.nearest_index)]);
    rep["pre_nmse_db"] = pre;
    rep["post_nmse_db"] = post;
    rep["wall_seconds"] = res.wall_seconds;
    rep["encoder_digest_unchanged"] =
        params_digest(res.model.params, "enc.") == params_digest(mf.prompt.params, "enc.");
    rep["decoder_digest_unchanged"] =
        params_digest(res.model.params, "dec.") == params_digest(mf.prompt.params, "dec.");
    const fs::path meta_path = models_dir(cfg) / "prompt.meta.json";
    if (fs::exists(meta_path)) {
        std::ifstream in(meta_path);
        const json meta = json::parse(in);
        const double base_wall = meta.at("base_wall_seconds").get<double>() +
                                 meta.value("episodic_wall_seconds", 0.0);
        rep["train_wall_seconds"] = base_wall;
        rep["wall_fraction"] = base_wall > 0.0 ? res.wall_seconds / base_wall : 0.0;
    }
    write_text(out_report, rep.dump(2) + "\n");

    std::cout << "adapted " << task_key(task) << " from "
              << rep["nearest_task"].get<std::string>() << ": query " << format_number(pre) << " -> "
              << format_number(post) << " dB in " << format_number(res.wall_seconds) << " s\n";
    std::cout << "wrote " << out_model.string() << " and " << out_report.string() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const CliOptions& opt) {
    if (opt.grid_slice != "full" && opt.grid_slice != "fig4a" && opt.grid_slice != "fig4b")
        throw UsageError("--grid must be one of full, fig4a, fig4b");
    if (opt.format != "csv" && opt.format != "json")
        throw UsageError("--format must be csv or json");

    // resolve model files: defaults, or --models a,b in any order
    std::vector<std::string> paths;
    if (opt.models.empty()) {
        paths = {(models_dir(cfg) / "prompt.psic").string(), (models_dir(cfg) / "baseline.psic").string()};
    } else {
        paths = split_commas(opt.models);
    }
    std::optional<ModelFile> prompt_mf, baseline_mf;
    for (const auto& p : paths) {
        if (p.empty()) throw UsageError("--models: empty path in list");
        if (!fs::exists(p)) throw MissingInputError("missing model " + p + " (run train/train-baseline)");
        ModelFile mf = load_model(p);
        if (mf.kind == ModelKind::kPrompt) {
            if (prompt_mf) throw UsageError("--models lists more than one prompt model");
            prompt_mf = std::move(mf);
        } else {
            if (baseline_mf) throw UsageError("--models lists more than one baseline model");
            baseline_mf = std::move(mf);
        }
    }
    if (!prompt_mf || !baseline_mf)
        throw UsageError("evaluation needs exactly one prompt model and one baseline model");
    if (prompt_mf->prov.config_digest != cfg.digest())
        throw UsageError("prompt model was trained under a different config");
    if (baseline_mf->prov.config_digest != cfg.digest())
        throw UsageError("baseline model was trained under a different config");

    // grid slice: full, the cross-CR strip, or the cross-condition strip
    const auto all = cfg.grid.tasks();
    std::vector<TaskDescriptor> slice;
    if (opt.grid_slice == "full") {
        slice = all;
    } else if (opt.grid_slice == "fig4a") {
        for (const auto& t : all)
            if (t.snr_db == cfg.baseline_home.snr_db && t.channel == cfg.baseline_home.channel)
                slice.push_back(t);
    } else {
        for (const auto& t : all)
            if (t.cr == cfg.baseline_home.cr) slice.push_back(t);
    }
    if (slice.empty()) throw UsageError("--grid " + opt.grid_slice + ": no matching grid cells");

    // assemble cells; missing dataset files surface through evaluate_grid
    const std::uint64_t split_seed = split_seed_of(cfg);
    std::vector<Dataset> data;
    data.reserve(slice.size());
    std::vector<EvalTask> cells;
    for (const auto& t : slice) {
        const fs::path p = dataset_path(cfg, t);
        if (!fs::exists(p)) continue;
        data.push_back(load_task_dataset(cfg, t));
        EvalTask c;
        c.task = t;
        c.split = split_dataset(data.back().count, split_seed);
        c.dataset_digest = file_digest(p.string());
        cells.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i].data = &data[i];

    EvalReport rep = evaluate_grid(prompt_mf->prompt, prompt_mf->prov, baseline_mf->baseline,
                                   baseline_mf->prov, slice, cells, cfg.seed, cfg.eval_draws,
                                   opt.allow_partial, opt.workers);
    rep.config_digest = cfg.digest();

    fs::create_directories(reports_dir(cfg));
    const fs::path out = opt.out.empty() ? reports_dir(cfg) / ("report." + opt.format)
                                         : fs::path(opt.out);
    refuse_existing(out, opt.force);
    if (opt.format == "csv")
        export_report_csv(rep, out.string());
    else
        export_report_json(rep, out.string(), cfg.echo());

    for (const auto& c : rep.cells) {
        std::cout << task_key(c.task) << " " << c.model << " ";
        if (c.present)
            std::cout << format_number(c.nmse_db) << " dB (n=" << c.n << ")\n";
        else
            std::cout << "absent\n";
    }
    std::cout << "matching: channel " << format_number(rep.matching.channel_accuracy) << ", tuple "
              << format_number(rep.matching.tuple_accuracy) << " (n=" << rep.matching.n << ")\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int run_command(const std::string& name, const CliOptions& opt) {
    try {
        const RunConfig cfg = effective_config(opt);
        if (name == "gen-data") return cmd_gen_data(cfg, opt);
        if (name == "train") return cmd_train(cfg, opt);
        if (name == "train-baseline") return cmd_train_baseline(cfg, opt);
        if (name == "adapt") return cmd_adapt(cfg, opt);
        if (name == "eval") return cmd_eval(cfg, opt);
        throw UsageError("unknown command '" + name + "'");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MissingInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace psic
