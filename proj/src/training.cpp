// SPDX-License-Identifier: Apache-2.0
//
// Three-phase training loops, few-shot adaptation, and the baseline trainer.

#include "psic/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "psic/adam.hpp"
#include "psic/errors.hpp"

namespace psic {

namespace {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kValTag = 1001;
constexpr std::uint64_t kShuffleTag = 1002;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void shuffle_ints(std::vector<int>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(i))]);
}

std::vector<int> draw_indices(const std::vector<int>& pool, int n, Rng& rng) {
    if (pool.empty()) throw std::invalid_argument("training: empty index pool");
    std::vector<int> out(static_cast<std::size_t>(n));
    for (auto& i : out) i = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
    return out;
}

std::vector<int> head(const std::vector<int>& pool, int n) {
    const std::size_t k = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(n));
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};
}

Tensor batch_targets(const Dataset& ds, const std::vector<int>& batch) {
    const int hw = ds.sample_size();
    Tensor t({static_cast<int>(batch.size()), hw});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double* s = ds.sample(batch[b]);
        std::copy(s, s + hw, t.data.begin() + static_cast<std::ptrdiff_t>(b * static_cast<std::size_t>(hw)));
    }
    return t;
}

Tensor batch_noise(int b, int m, double snr_db, Rng& rng) {
    Tensor t({b, m});
    const double sigma = std::pow(10.0, -snr_db / 20.0);
    for (auto& v : t.data) v = sigma * rng.gaussian();
    return t;
}

// Stacked per-sample patch matrices: [batch·tokens × patch²].
Tensor batch_patches(const Dataset& ds, const std::vector<int>& batch, const CodecDims& dims) {
    std::vector<const double*> rows;
    rows.reserve(batch.size());
    for (int idx : batch) rows.push_back(ds.sample(idx));
    return patchify_batch(rows, dims);
}

// Encode the whole batch, pass the noisy latents through the decoder, and
// return the MSE loss node against the inputs themselves.
NodeId prompt_batch_loss(Graph& g, const Bindings& b, const CodecModel& model, const Dataset& ds,
                         const std::vector<int>& batch, int bank_index, const TaskDescriptor& task,
                         Rng& noise_rng, NodeId* recon_out) {
    const CodecDims& dims = model.dims;
    const int m = dims.latent_len(task.cr);
    const int n = static_cast<int>(batch.size());
    NodeId patches = g.constant(batch_patches(ds, batch, dims));
    NodeId lat_all = build_encoder_batch(g, b, dims, patches, b.at(bank_value_name(bank_index)), n, m);
    NodeId noisy = g.add(lat_all, g.constant(batch_noise(n, m, task.snr_db, noise_rng)));
    NodeId rec = build_decoder(g, b, dims, noisy, dims.cr_index(task.cr));
    if (recon_out) *recon_out = rec;
    return g.mse_loss(rec, g.constant(batch_targets(ds, batch)));
}

NodeId baseline_batch_loss(Graph& g, const Bindings& b, const BaselineModel& model, const Dataset& ds,
                           const std::vector<int>& batch, Rng& noise_rng, NodeId* recon_out) {
    const CodecDims& dims = model.dims;
    const int m = model.fixed_latent();
    const int n = static_cast<int>(batch.size());
    NodeId patches = g.constant(batch_patches(ds, batch, dims));
    NodeId lat_all = build_baseline_encoder_batch(g, b, dims, patches, n, m);
    NodeId noisy = g.add(lat_all, g.constant(batch_noise(n, m, model.home.snr_db, noise_rng)));
    // the baseline's cr table has a single row for its fixed configuration
    NodeId rec = build_decoder(g, b, dims, noisy, 0);
    if (recon_out) *recon_out = rec;
    return g.mse_loss(rec, g.constant(batch_targets(ds, batch)));
}

// Hinge loss pushing each sample's embedding toward its task key and away
// from every other key by the margin; cosine computed on power-normalized
// rows (unit average power ⇒ cosine = dot/d_p).
NodeId contrastive_node(Graph& g, const Bindings& b, const CodecModel& model, const Dataset& ds,
                        const std::vector<int>& batch, int true_task, double margin) {
    const int n = static_cast<int>(batch.size());
    const int nk = model.bank.size();
    const int dp = model.dims.d_p;
    Tensor feats({n, model.dims.feature_dim()});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto f = embed_features(ds.sample_copy(batch[i]), model.dims);
        std::copy(f.begin(), f.end(), feats.data.begin() + static_cast<std::ptrdiff_t>(i * f.size()));
    }
    NodeId emb = g.add(g.matmul(g.constant(feats), b.at("match.w")), g.repeat_rows(b.at("match.b"), n));
    NodeId pe = g.power_normalize(emb);
    NodeId keys = -1;
    for (int i = 0; i < nk; ++i)
        keys = keys < 0 ? b.at(bank_key_name(i)) : g.concat(keys, b.at(bank_key_name(i)), 0);
    NodeId pk = g.power_normalize(keys);
    NodeId cos = g.scale(g.matmul(pe, g.transpose(pk)), 1.0 / dp);
    NodeId pos = g.gather_cols(cos, {true_task});
    NodeId spread = g.matmul(pos, g.constant(Tensor({1, nk}, 1.0)));
    NodeId diff = g.add(cos, g.scale(spread, -1.0));
    NodeId hinge = g.relu(g.add(diff, g.constant(Tensor({n, nk}, margin))));
    Tensor mask({n, nk}, 1.0);
    for (int r = 0; r < n; ++r) mask.at(r, true_task) = 0.0;
    NodeId masked = g.mul(hinge, g.constant(mask));
    return g.scale(g.sum_all(masked), 1.0 / (static_cast<double>(n) * (nk - 1)));
}

// Accumulate per-sample reconstruction ratios from a decoded batch.
void accumulate_batch_ratios(const Tensor& rec, const Dataset& ds, const std::vector<int>& batch,
                             NmseAccumulator& acc) {
    const int hw = ds.sample_size();
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double* x = ds.sample(batch[b]);
        const double* r = rec.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(hw);
        double err = 0.0, ref = 0.0;
        for (int j = 0; j < hw; ++j) {
            const double d = x[j] - r[j];
            err += d * d;
            ref += x[j] * x[j];
        }
        if (ref <= 0.0)
            acc.exclude();
        else
            acc.add_ratio(err / ref);
    }
}

ParamMap collect_grads(Graph& g, const Bindings& bind, std::vector<Tensor>&& gvec) {
    ParamMap grads;
    for (const auto& [name, id] : bind.ids)
        if (g.requires_grad(id)) grads[name] = std::move(gvec[static_cast<std::size_t>(id)]);
    return grads;
}

void ensure_finite(double loss, const std::string& where) {
    if (!std::isfinite(loss)) throw NumericError("non-finite loss at " + where);
}

void check_task_data(const std::vector<TaskData>& tasks, const std::vector<TaskDescriptor>& expected) {
    if (tasks.size() != expected.size())
        throw std::invalid_argument("training: task list does not match the bank (" +
                                    std::to_string(tasks.size()) + " vs " +
                                    std::to_string(expected.size()) + ")");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!(tasks[i].task == expected[i]))
            throw std::invalid_argument("training: task order mismatch at " + task_key(expected[i]));
        if (!tasks[i].data || tasks[i].data->count == 0)
            throw MissingInputError("training: missing dataset for " + task_key(tasks[i].task));
        if (tasks[i].data->channel != tasks[i].task.channel)
            throw std::invalid_argument("training: dataset channel type mismatch for " +
                                        task_key(tasks[i].task));
        if (tasks[i].split.train.empty() || tasks[i].split.val.empty())
            throw MissingInputError("training: empty split for " + task_key(tasks[i].task));
    }
}

ModelFile prompt_model_file(const CodecModel& model, const Provenance& prov) {
    ModelFile mf;
    mf.kind = ModelKind::kPrompt;
    mf.prompt = model;
    mf.prov = prov;
    return mf;
}

ModelFile baseline_model_file(const BaselineModel& model, const Provenance& prov) {
    ModelFile mf;
    mf.kind = ModelKind::kBaseline;
    mf.baseline = model;
    mf.prov = prov;
    return mf;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs_base < 0 || epochs_episodic < 0 || adapt_steps < 0 || checkpoint_every < 0)
        throw std::invalid_argument("train config: negative phase budget");
    if (steps_per_task < 1 || episodes_per_task < 1 || batch_size < 1)
        throw std::invalid_argument("train config: step and batch sizes must be positive");
    if (support_size < 1 || query_size < 1)
        throw std::invalid_argument("train config: support and query sizes must be positive");
    if (lr_base <= 0.0 || lr_prompt <= 0.0 || lr_adapt <= 0.0)
        throw std::invalid_argument("train config: learning rates must be positive");
    if (contrastive_weight < 0.0 || contrastive_margin < 0.0)
        throw std::invalid_argument("train config: contrastive terms must be non-negative");
    if (patience < 1 || val_samples < 1 || val_draws < 1)
        throw std::invalid_argument("train config: validation settings must be positive");
    if (min_improve_db < 0.0) throw std::invalid_argument("train config: negative improvement threshold");
}

TrainLog::TrainLog(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open training log " + path);
    if (!append) out_ << "epoch,phase,task,split,nmse_db\n";
}

void TrainLog::row(int epoch, const std::string& phase, const std::string& task, const std::string& split,
                   double nmse_db) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", nmse_db);
    out_ << epoch << ',' << phase << ',' << task << ',' << split << ',' << buf << '\n';
    out_.flush();
}

TrainResult train_base(CodecModel& model, const std::vector<TaskData>& tasks, const TrainConfig& cfg,
                       TrainLog* log, const Provenance& prov, const std::string& checkpoint_path,
                       const Checkpoint* resume) {
    cfg.validate();
    check_task_data(tasks, model.bank.tasks);
    const auto t0 = Clock::now();
    const int nt = static_cast<int>(tasks.size());
    const bool contrastive = nt > 1 && cfg.contrastive_weight > 0.0;

    Adam adam({cfg.lr_base});
    int start_epoch = 0;
    double best_val = 1e300;
    int since_improve = 0;
    ParamMap best_params = model.params;
    if (resume) {
        if (resume->model.kind != ModelKind::kPrompt)
            throw std::invalid_argument("resume: checkpoint holds a different model kind");
        if (resume->model.prompt.params.size() != model.params.size())
            throw std::invalid_argument("resume: checkpoint parameter set does not match the model");
        model.params = resume->model.prompt.params;
        adam.restore(resume->adam_t, resume->adam_m, resume->adam_v);
        start_epoch = resume->next_epoch;
        best_val = resume->best_val_db;
        since_improve = resume->since_improve;
        best_params = resume->best_params;
    }

    TrainResult res;
    auto save_ckpt = [&](int next_epoch) {
        if (checkpoint_path.empty()) return;
        Checkpoint ck;
        ck.model = prompt_model_file(model, prov);
        ck.adam_t = adam.steps();
        ck.adam_m = adam.moment1();
        ck.adam_v = adam.moment2();
        ck.next_epoch = next_epoch;
        ck.best_val_db = best_val;
        ck.since_improve = since_improve;
        ck.best_params = best_params;
        save_checkpoint(ck, checkpoint_path);
    };

    for (int epoch = start_epoch; epoch < cfg.epochs_base; ++epoch) {
        // schedule: steps_per_task batches per task, order shuffled
        std::vector<int> order;
        order.reserve(static_cast<std::size_t>(nt) * static_cast<std::size_t>(cfg.steps_per_task));
        for (int ti = 0; ti < nt; ++ti)
            for (int s = 0; s < cfg.steps_per_task; ++s) order.push_back(ti);
        Rng shuffle_rng(derive_seed(cfg.seed, {kTagBase, static_cast<std::uint64_t>(epoch), kShuffleTag}));
        shuffle_ints(order, shuffle_rng);

        std::vector<NmseAccumulator> train_acc(static_cast<std::size_t>(nt));
        for (std::size_t step = 0; step < order.size(); ++step) {
            const int ti = order[step];
            const TaskData& td = tasks[static_cast<std::size_t>(ti)];
            Rng pick(derive_seed(cfg.seed, {kTagBase, static_cast<std::uint64_t>(epoch), step, 0}));
            Rng noise(derive_seed(cfg.seed, {kTagBase, static_cast<std::uint64_t>(epoch), step, 1}));
            const std::vector<int> batch = draw_indices(td.split.train, cfg.batch_size, pick);

            Graph g;
            Bindings bind = bind_all(g, model.params, true);
            NodeId rec = -1;
            NodeId loss = prompt_batch_loss(g, bind, model, *td.data, batch, ti, td.task, noise, &rec);
            if (contrastive) {
                NodeId c = contrastive_node(g, bind, model, *td.data, batch, ti, cfg.contrastive_margin);
                loss = g.add(loss, g.scale(c, cfg.contrastive_weight));
            }
            ensure_finite(g.value(loss).item(), "base epoch " + std::to_string(epoch) + " step " +
                                                    std::to_string(step));
            accumulate_batch_ratios(g.value(rec), *td.data, batch, train_acc[static_cast<std::size_t>(ti)]);
            adam.step(model.params, collect_grads(g, bind, g.backward(loss)));
        }

        double val_sum = 0.0;
        for (int ti = 0; ti < nt; ++ti) {
            const TaskData& td = tasks[static_cast<std::size_t>(ti)];
            if (log && train_acc[static_cast<std::size_t>(ti)].count() > 0)
                log->row(epoch, "base", task_key(td.task), "train",
                         train_acc[static_cast<std::size_t>(ti)].value_db());
            const double v = prompt_task_nmse_db(
                model, ti, td.task, *td.data, head(td.split.val, cfg.val_samples), cfg.val_draws,
                derive_seed(cfg.seed, {kTagBase, static_cast<std::uint64_t>(epoch), kValTag,
                                       static_cast<std::uint64_t>(ti)}));
            if (log) log->row(epoch, "base", task_key(td.task), "val", v);
            val_sum += v;
        }
        const double val_mean = val_sum / nt;
        ++res.epochs_run;

        if (val_mean < best_val - cfg.min_improve_db) {
            best_val = val_mean;
            best_params = model.params;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) save_ckpt(epoch + 1);
        if (since_improve >= cfg.patience) {
            save_ckpt(epoch + 1);
            break;
        }
    }

    model.params = best_params;
    res.best_val_db = best_val;
    res.wall_seconds = seconds_since(t0);
    return res;
}

EpisodicResult train_prompts_episodic(CodecModel& model, const std::vector<TaskData>& tasks,
                                      const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    check_task_data(tasks, model.bank.tasks);
    const auto t0 = Clock::now();
    const int nt = static_cast<int>(tasks.size());
    const std::uint64_t enc_hash = params_digest(model.params, "enc.");
    const std::uint64_t dec_hash = params_digest(model.params, "dec.");

    // Fixed query protocol for the before/after comparison.
    auto measure_query = [&]() {
        NmseAccumulator acc;
        for (int ti = 0; ti < nt; ++ti) {
            const TaskData& td = tasks[static_cast<std::size_t>(ti)];
            prompt_task_nmse_db(model, ti, td.task, *td.data, head(td.split.val, cfg.query_size),
                                cfg.val_draws,
                                derive_seed(cfg.seed, {kTagEpisodic, kValTag, static_cast<std::uint64_t>(ti)}),
                                &acc);
        }
        return acc.value_db();
    };

    EpisodicResult res;
    res.query_before_db = measure_query();

    ParamMap pre_bank;
    for (const auto& [name, t] : model.params)
        if (name.rfind("bank.", 0) == 0) pre_bank.emplace(name, t);

    Adam adam({cfg.lr_prompt});
    const auto trainable = [](const std::string& n) { return n.rfind("bank.", 0) == 0; };
    for (int epoch = 0; epoch < cfg.epochs_episodic; ++epoch) {
        for (int ti = 0; ti < nt; ++ti) {
            const TaskData& td = tasks[static_cast<std::size_t>(ti)];
            NmseAccumulator query_acc;
            for (int ep = 0; ep < cfg.episodes_per_task; ++ep) {
                const std::uint64_t e64 = static_cast<std::uint64_t>(epoch);
                const std::uint64_t t64 = static_cast<std::uint64_t>(ti);
                const std::uint64_t k64 = static_cast<std::uint64_t>(ep);
                Rng pick(derive_seed(cfg.seed, {kTagEpisodic, e64, t64, k64, 0}));
                Rng noise(derive_seed(cfg.seed, {kTagEpisodic, e64, t64, k64, 1}));
                const std::vector<int> support = draw_indices(td.split.train, cfg.support_size, pick);

                Graph g;
                Bindings bind = bind_params(g, model.params, trainable);
                NodeId loss = prompt_batch_loss(g, bind, model, *td.data, support, ti, td.task, noise,
                                                nullptr);
                ensure_finite(g.value(loss).item(),
                              "episodic epoch " + std::to_string(epoch) + " task " + task_key(td.task));
                // only the episode prompt moves; its key has no reconstruction
                // gradient and stays fixed
                ParamMap grads;
                auto gvec = g.backward(loss);
                const NodeId vid = bind.at(bank_value_name(ti));
                const NodeId kid = bind.at(bank_key_name(ti));
                grads[bank_value_name(ti)] = std::move(gvec[static_cast<std::size_t>(vid)]);
                grads[bank_key_name(ti)] = std::move(gvec[static_cast<std::size_t>(kid)]);
                adam.step(model.params, grads);
                ++res.episodes;

                Rng qpick(derive_seed(cfg.seed, {kTagEpisodic, e64, t64, k64, 2}));
                const std::vector<int> query = draw_indices(td.split.val, cfg.query_size, qpick);
                prompt_task_nmse_db(model, ti, td.task, *td.data, query, 1,
                                    derive_seed(cfg.seed, {kTagEpisodic, e64, t64, k64, 3}), &query_acc);
            }
            if (log && query_acc.count() > 0)
                log->row(epoch, "episodic", task_key(td.task), "query", query_acc.value_db());
        }
    }

    res.query_after_db = measure_query();
    // keep the refinement only if it did not degrade the fixed query protocol
    if (res.query_after_db > res.query_before_db) {
        for (auto& [name, t] : pre_bank) model.params.at(name) = t;
        res.query_after_db = res.query_before_db;
    }

    if (params_digest(model.params, "enc.") != enc_hash || params_digest(model.params, "dec.") != dec_hash)
        throw std::logic_error("episodic phase modified frozen encoder/decoder parameters");
    res.wall_seconds = seconds_since(t0);
    return res;
}

AdaptResult adapt_prompt(const CodecModel& model, const std::vector<std::vector<double>>& support,
                         const TaskDescriptor& task, const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (support.empty()) throw std::invalid_argument("adaptation requires at least one support sample");
    for (const auto& s : support)
        if (static_cast<int>(s.size()) != model.dims.elements())
            throw std::invalid_argument("adaptation: support sample does not match the surface");
    if (lookup(model.bank, task))
        throw std::invalid_argument("adaptation: task " + task_key(task) +
                                    " already has a prompt; use lookup instead");
    if (model.dims.cr_index(task.cr) < 0)
        throw std::invalid_argument("adaptation: compression ratio " + format_number(task.cr) +
                                    " outside the model grid");

    const auto t0 = Clock::now();
    AdaptResult res;

    // nearest grid prompt by cosine over keys of the embedded support mean
    std::vector<double> mean_emb(static_cast<std::size_t>(model.dims.d_p), 0.0);
    for (const auto& s : support) {
        const auto e = embed_psi(model, s);
        for (std::size_t i = 0; i < mean_emb.size(); ++i) mean_emb[i] += e[i] / support.size();
    }
    res.nearest_index = match(model.bank, model.params, mean_emb);

    res.model = model;
    res.new_index = res.model.bank.size();
    res.model.bank.tasks.push_back(task);
    res.model.params[bank_key_name(res.new_index)] = model.params.at(bank_key_name(res.nearest_index));
    res.model.params[bank_value_name(res.new_index)] = model.params.at(bank_value_name(res.nearest_index));

    // synthetic dataset view over the support list for the batch builder
    Dataset sds;
    sds.rows = model.dims.rows;
    sds.cols = model.dims.cols;
    sds.channel = task.channel;
    sds.count = static_cast<std::int64_t>(support.size());
    sds.values.reserve(support.size() * static_cast<std::size_t>(model.dims.elements()));
    for (const auto& s : support) sds.values.insert(sds.values.end(), s.begin(), s.end());
    std::vector<int> all(support.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

    Adam adam({cfg.lr_adapt});
    const std::string vname = bank_value_name(res.new_index);
    const std::string kname = bank_key_name(res.new_index);
    const auto trainable = [&](const std::string& n) { return n == vname || n == kname; };
    for (int s = 0; s < cfg.adapt_steps; ++s) {
        Rng noise(derive_seed(seed, {kTagAdapt, static_cast<std::uint64_t>(s)}));
        Graph g;
        Bindings bind = bind_params(g, res.model.params, trainable);
        NodeId loss = prompt_batch_loss(g, bind, res.model, sds, all, res.new_index, task, noise, nullptr);
        ensure_finite(g.value(loss).item(), "adaptation step " + std::to_string(s));
        ParamMap grads;
        auto gvec = g.backward(loss);
        grads[vname] = std::move(gvec[static_cast<std::size_t>(bind.at(vname))]);
        grads[kname] = std::move(gvec[static_cast<std::size_t>(bind.at(kname))]);
        adam.step(res.model.params, grads);
    }

    // everything that existed before adaptation must be untouched
    for (const auto& [name, t] : model.params)
        if (res.model.params.at(name).data != t.data)
            throw std::logic_error("adaptation modified pre-existing parameter " + name);

    res.wall_seconds = seconds_since(t0);
    return res;
}

TrainResult train_baseline(BaselineModel& model, const TaskData& home, const TrainConfig& cfg,
                           TrainLog* log, const Provenance& prov, const std::string& checkpoint_path,
                           const Checkpoint* resume, int grid_tasks) {
    cfg.validate();
    if (grid_tasks < 1) throw std::invalid_argument("baseline training: grid task count must be positive");
    if (!(home.task == model.home))
        throw std::invalid_argument("baseline training: dataset task is not the home configuration");
    if (!home.data || home.data->count == 0)
        throw MissingInputError("baseline training: missing dataset for " + task_key(model.home));
    if (home.data->channel != model.home.channel)
        throw std::invalid_argument("baseline training: dataset channel type mismatch");
    if (home.split.train.empty() || home.split.val.empty())
        throw MissingInputError("baseline training: empty split");

    const auto t0 = Clock::now();
    // fairness: identical total step budget to the joint phase
    const int steps_per_epoch = cfg.steps_per_task * grid_tasks;

    Adam adam({cfg.lr_base});
    int start_epoch = 0;
    double best_val = 1e300;
    int since_improve = 0;
    ParamMap best_params = model.params;
    if (resume) {
        if (resume->model.kind != ModelKind::kBaseline)
            throw std::invalid_argument("resume: checkpoint holds a different model kind");
        if (resume->model.baseline.params.size() != model.params.size())
            throw std::invalid_argument("resume: checkpoint parameter set does not match the model");
        model.params = resume->model.baseline.params;
        adam.restore(resume->adam_t, resume->adam_m, resume->adam_v);
        start_epoch = resume->next_epoch;
        best_val = resume->best_val_db;
        since_improve = resume->since_improve;
        best_params = resume->best_params;
    }

    TrainResult res;
    auto save_ckpt = [&](int next_epoch) {
        if (checkpoint_path.empty()) return;
        Checkpoint ck;
        ck.model = baseline_model_file(model, prov);
        ck.adam_t = adam.steps();
        ck.adam_m = adam.moment1();
        ck.adam_v = adam.moment2();
        ck.next_epoch = next_epoch;
        ck.best_val_db = best_val;
        ck.since_improve = since_improve;
        ck.best_params = best_params;
        save_checkpoint(ck, checkpoint_path);
    };

    const std::string key = task_key(model.home);
    for (int epoch = start_epoch; epoch < cfg.epochs_base; ++epoch) {
        NmseAccumulator train_acc;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const std::uint64_t e64 = static_cast<std::uint64_t>(epoch);
            const std::uint64_t s64 = static_cast<std::uint64_t>(step);
            Rng pick(derive_seed(cfg.seed, {kTagBaseline, e64, s64, 0}));
            Rng noise(derive_seed(cfg.seed, {kTagBaseline, e64, s64, 1}));
            const std::vector<int> batch = draw_indices(home.split.train, cfg.batch_size, pick);

            Graph g;
            Bindings bind = bind_all(g, model.params, true);
            NodeId rec = -1;
            NodeId loss = baseline_batch_loss(g, bind, model, *home.data, batch, noise, &rec);
            ensure_finite(g.value(loss).item(), "baseline epoch " + std::to_string(epoch) + " step " +
                                                    std::to_string(step));
            accumulate_batch_ratios(g.value(rec), *home.data, batch, train_acc);
            adam.step(model.params, collect_grads(g, bind, g.backward(loss)));
        }

        if (log && train_acc.count() > 0) log->row(epoch, "baseline", key, "train", train_acc.value_db());
        const double v = baseline_task_nmse_db(
            model, model.home, *home.data, head(home.split.val, cfg.val_samples), cfg.val_draws,
            derive_seed(cfg.seed, {kTagBaseline, static_cast<std::uint64_t>(epoch), kValTag}));
        if (log) log->row(epoch, "baseline", key, "val", v);
        ++res.epochs_run;

        if (v < best_val - cfg.min_improve_db) {
            best_val = v;
            best_params = model.params;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) save_ckpt(epoch + 1);
        if (since_improve >= cfg.patience) {
            save_ckpt(epoch + 1);
            break;
        }
    }

    model.params = best_params;
    res.best_val_db = best_val;
    res.wall_seconds = seconds_since(t0);
    return res;
}

}  // namespace psic
