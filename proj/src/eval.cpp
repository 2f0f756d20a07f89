// SPDX-License-Identifier: Apache-2.0
//
// Grid evaluation, matching accuracy and report export/parse.

#include "psic/eval.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "psic/errors.hpp"

namespace psic {

namespace {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

// Decoder with parameters bound once; per call only the sample-dependent
// tail of the graph is rebuilt.
class DecodeSession {
  public:
    DecodeSession(const ParamMap& params, const CodecDims& dims) : dims_(dims) {
        bind_ = bind_params(g_, params, [](const std::string&) { return false; });
        mark_ = g_.size();
    }

    // [n×m] noisy latents -> [n×HW] reconstructions (flat).
    const std::vector<double>& decode(const std::vector<double>& flat, int n, int m, int cr_idx) {
        g_.truncate(mark_);
        Tensor in({n, m});
        in.data = flat;
        const NodeId out = build_decoder(g_, bind_, dims_, g_.constant(in), cr_idx);
        return g_.value(out).data;
    }

  private:
    CodecDims dims_;
    Graph g_;
    Bindings bind_;
    std::size_t mark_ = 0;
};

// Samples per batched encoder graph; keeps the stacked-block assembly cost
// small next to the fused projection matmuls.
constexpr int kEncodeChunk = 32;

// Batched inference encoder with parameters bound once; per chunk only the
// sample-dependent tail of the graph is rebuilt.
class EncodeBatcher {
  public:
    EncodeBatcher(const ParamMap& params, const CodecDims& dims, int bank_index)
        : dims_(dims), bank_index_(bank_index) {
        bind_ = bind_params(g_, params, [](const std::string&) { return false; });
        mark_ = g_.size();
    }

    // Encode `idx` rows of `ds`; one transmit vector per sample. bank_index
    // < 0 selects the baseline encoder at its fixed length.
    std::vector<std::vector<double>> encode_all(const Dataset& ds, const std::vector<int>& indices,
                                                int m) {
        std::vector<std::vector<double>> out;
        out.reserve(indices.size());
        std::vector<const double*> rows;
        for (std::size_t at = 0; at < indices.size(); at += kEncodeChunk) {
            const std::size_t hi = std::min(indices.size(), at + kEncodeChunk);
            rows.clear();
            for (std::size_t i = at; i < hi; ++i) rows.push_back(ds.sample(indices[i]));
            const int n = static_cast<int>(rows.size());
            g_.truncate(mark_);
            const NodeId patches = g_.constant(patchify_batch(rows, dims_));
            const NodeId lat =
                bank_index_ < 0
                    ? build_baseline_encoder_batch(g_, bind_, dims_, patches, n, m)
                    : build_encoder_batch(g_, bind_, dims_, patches,
                                          bind_.at(bank_value_name(bank_index_)), n, m);
            const std::vector<double>& flat = g_.value(lat).data;
            for (int i = 0; i < n; ++i)
                out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i) * m,
                                 flat.begin() + static_cast<std::ptrdiff_t>(i + 1) * m);
        }
        return out;
    }

  private:
    CodecDims dims_;
    int bank_index_;
    Graph g_;
    Bindings bind_;
    std::size_t mark_ = 0;
};

// Shared accumulation loop over precomputed transmit vectors: `draws` noisy
// copies through the decoder; per-sample ratio = mean error over draws.
double task_nmse_impl(const std::vector<std::vector<double>>& txs, DecodeSession& dec, int cr_idx,
                      double snr_db, const Dataset& ds, const std::vector<int>& indices, int draws,
                      std::uint64_t noise_seed, NmseAccumulator* out) {
    if (draws < 1) throw std::invalid_argument("evaluation requires at least one noise draw");
    NmseAccumulator local;
    NmseAccumulator& acc = out ? *out : local;
    Rng noise(noise_seed);
    const int hw = ds.sample_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* psi = ds.sample(indices[i]);
        const std::vector<double>& tx = txs[i];
        const int m = static_cast<int>(tx.size());
        std::vector<double> stack(static_cast<std::size_t>(draws) * m);
        for (int d = 0; d < draws; ++d) {
            double* row = stack.data() + static_cast<std::size_t>(d) * m;
            std::copy(tx.begin(), tx.end(), row);
            add_awgn_span(row, m, snr_db, noise);
        }
        const std::vector<double>& rec = dec.decode(stack, draws, m, cr_idx);
        double ref = 0.0;
        for (int j = 0; j < hw; ++j) ref += psi[j] * psi[j];
        if (ref <= 0.0) {
            acc.exclude();
            continue;
        }
        double err = 0.0;
        for (int d = 0; d < draws; ++d) {
            const double* row = rec.data() + static_cast<std::size_t>(d) * hw;
            for (int j = 0; j < hw; ++j) {
                const double diff = psi[j] - row[j];
                err += diff * diff;
            }
        }
        acc.add_ratio(err / (static_cast<double>(draws) * ref));
    }
    return acc.value_db();
}

}  // namespace

double prompt_task_nmse_db(const CodecModel& model, int bank_index, const TaskDescriptor& task,
                           const Dataset& ds, const std::vector<int>& indices, int draws,
                           std::uint64_t noise_seed, NmseAccumulator* out) {
    if (ds.sample_size() != model.dims.elements())
        throw std::invalid_argument("evaluation: dataset geometry does not match the model");
    const int cr_idx = model.dims.cr_index(task.cr);
    if (cr_idx < 0)
        throw std::invalid_argument("evaluation: compression ratio " + format_number(task.cr) +
                                    " not in the model grid");
    EncodeBatcher enc(model.params, model.dims, bank_index);
    DecodeSession dec(model.params, model.dims);
    const std::vector<std::vector<double>> txs =
        enc.encode_all(ds, indices, model.dims.latent_len(task.cr));
    return task_nmse_impl(txs, dec, cr_idx, task.snr_db, ds, indices, draws, noise_seed, out);
}

double baseline_task_nmse_db(const BaselineModel& model, const TaskDescriptor& task, const Dataset& ds,
                             const std::vector<int>& indices, int draws, std::uint64_t noise_seed,
                             NmseAccumulator* out) {
    if (ds.sample_size() != model.dims.elements())
        throw std::invalid_argument("evaluation: dataset geometry does not match the model");
    if (model.dims.cr_index(task.cr) < 0)
        throw std::invalid_argument("evaluation: compression ratio " + format_number(task.cr) +
                                    " not in the model grid");
    EncodeBatcher enc(model.params, model.dims, /*bank_index=*/-1);
    DecodeSession dec(model.params, model.dims);
    std::vector<std::vector<double>> txs = enc.encode_all(ds, indices, model.fixed_latent());
    for (std::vector<double>& tx : txs) {
        LatentCode native{std::move(tx), model.home.cr};
        tx = baseline_probe_tx(model, native, task.cr);
    }
    // the baseline's cr table has a single row for its fixed configuration
    return task_nmse_impl(txs, dec, /*cr_idx=*/0, task.snr_db, ds, indices, draws, noise_seed, out);
}

void check_eval_indices(const Provenance& prov, const std::string& key, std::uint64_t dataset_digest,
                        const std::vector<int>& indices) {
    const auto it = prov.tasks.find(key);
    if (it == prov.tasks.end()) return;  // model never trained on this task
    const TaskProvenance& tp = it->second;
    if (tp.dataset_digest != dataset_digest)
        throw MissingInputError(key + ": dataset differs from the one recorded at training time");
    const std::uint64_t d = indices_digest(indices);
    if (d == tp.train_digest) throw UsageError(key + ": refusing to evaluate on the training split");
    if (d == tp.val_digest) throw UsageError(key + ": refusing to evaluate on the validation split");
    if (d != tp.test_digest)
        throw UsageError(key + ": evaluation indices do not match the recorded held-out split");
}

EvalReport evaluate_grid(const CodecModel& prompt, const Provenance& prompt_prov,
                         const BaselineModel& baseline, const Provenance& baseline_prov,
                         const std::vector<TaskDescriptor>& grid, const std::vector<EvalTask>& cells,
                         std::uint64_t seed, int draws, bool allow_partial, int workers) {
    if (grid.empty()) throw std::invalid_argument("evaluation grid is empty");
    if (workers < 1) throw std::invalid_argument("workers must be positive");

    EvalReport rep;
    rep.seed = seed;
    rep.config_digest = prompt_prov.config_digest;
    rep.cells.assign(grid.size() * 2, CellResult{});

    // Resolve inputs serially so precondition failures surface determinately.
    std::vector<const EvalTask*> resolved(grid.size(), nullptr);
    std::vector<int> bank_idx(grid.size(), -1);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const TaskDescriptor& task = grid[gi];
        const EvalTask* cell = nullptr;
        for (const EvalTask& c : cells)
            if (c.task == task) cell = &c;
        const auto prompt_idx = lookup(prompt.bank, task);
        if (!cell || !cell->data || !prompt_idx) {
            if (!allow_partial)
                throw MissingInputError("evaluation: no data or prompt for task " + task_key(task));
            for (int mrow = 0; mrow < 2; ++mrow) {
                CellResult& r = rep.cells[gi * 2 + static_cast<std::size_t>(mrow)];
                r.task = task;
                r.model = mrow == 0 ? "prompt" : "baseline";
                r.present = false;
            }
            continue;
        }
        const std::string key = task_key(task);
        check_eval_indices(prompt_prov, key, cell->dataset_digest, cell->split.test);
        check_eval_indices(baseline_prov, key, cell->dataset_digest, cell->split.test);
        resolved[gi] = cell;
        bank_idx[gi] = *prompt_idx;
    }

    auto run_cell = [&](std::size_t gi) {
        const EvalTask* cell = resolved[gi];
        if (!cell) return;
        const TaskDescriptor& task = grid[gi];
        {
            NmseAccumulator acc;
            CellResult& r = rep.cells[gi * 2];
            r.task = task;
            r.model = "prompt";
            r.nmse_db = prompt_task_nmse_db(prompt, bank_idx[gi], task, *cell->data, cell->split.test,
                                            draws, derive_seed(seed, {kTagEval, gi, 0}), &acc);
            r.n = acc.count();
            r.excluded = acc.excluded();
        }
        {
            NmseAccumulator acc;
            CellResult& r = rep.cells[gi * 2 + 1];
            r.task = task;
            r.model = "baseline";
            r.nmse_db = baseline_task_nmse_db(baseline, task, *cell->data, cell->split.test, draws,
                                              derive_seed(seed, {kTagEval, gi, 1}), &acc);
            r.n = acc.count();
            r.excluded = acc.excluded();
        }
    };

    if (workers == 1) {
        for (std::size_t gi = 0; gi < grid.size(); ++gi) run_cell(gi);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t gi = static_cast<std::size_t>(w); gi < grid.size();
                     gi += static_cast<std::size_t>(workers))
                    run_cell(gi);
            });
        for (auto& t : pool) t.join();
    }

    rep.matching = matching_accuracy(prompt, cells);
    return rep;
}

MatchReport matching_accuracy(const CodecModel& model, const std::vector<EvalTask>& cells) {
    MatchReport rep;
    std::int64_t channel_hits = 0, tuple_hits = 0;
    for (const EvalTask& cell : cells) {
        if (!cell.data) continue;
        for (int idx : cell.split.test) {
            const auto e = embed_psi(model, cell.data->sample_copy(idx));
            const int got = match(model.bank, model.params, e);
            const TaskDescriptor& hit = model.bank.tasks[static_cast<std::size_t>(got)];
            if (hit.channel == cell.task.channel) ++channel_hits;
            if (hit == cell.task) ++tuple_hits;
            ++rep.n;
        }
    }
    if (rep.n > 0) {
        rep.channel_accuracy = static_cast<double>(channel_hits) / static_cast<double>(rep.n);
        rep.tuple_accuracy = static_cast<double>(tuple_hits) / static_cast<double>(rep.n);
    }
    return rep;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void export_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "task_cr,task_snr_db,task_channel,model,nmse_db,n,excluded\n";
    for (const CellResult& c : report.cells) {
        out << format_number(c.task.cr) << ',' << format_number(c.task.snr_db) << ','
            << channel_name(c.task.channel) << ',' << c.model << ','
            << (c.present ? fmt_double(c.nmse_db) : "") << ',' << c.n << ',' << c.excluded << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

EvalReport parse_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "task_cr,task_snr_db,task_channel,model,nmse_db,n,excluded")
        throw std::runtime_error(path + ": bad report header");
    EvalReport rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (line.back() == ',') f.push_back("");
        if (f.size() != 7) throw std::runtime_error(path + ": malformed row: " + line);
        CellResult c;
        c.task.cr = std::stod(f[0]);
        c.task.snr_db = std::stod(f[1]);
        c.task.channel = parse_channel(f[2]);
        c.model = f[3];
        c.present = !f[4].empty();
        c.nmse_db = c.present ? std::stod(f[4]) : 0.0;
        c.n = std::stoll(f[5]);
        c.excluded = std::stoll(f[6]);
        rep.cells.push_back(c);
    }
    return rep;
}

void export_report_json(const EvalReport& report, const std::string& path,
                        const std::string& config_echo) {
    nlohmann::json j;
    j["format"] = "psic-eval-report/1";
    j["config_digest"] = report.config_digest;
    j["seed"] = report.seed;
    if (!config_echo.empty()) j["config"] = config_echo;
    j["matching"] = {{"channel_accuracy", report.matching.channel_accuracy},
                     {"tuple_accuracy", report.matching.tuple_accuracy},
                     {"n", report.matching.n}};
    j["cells"] = nlohmann::json::array();
    for (const CellResult& c : report.cells) {
        j["cells"].push_back({{"task_cr", c.task.cr},
                              {"task_snr_db", c.task.snr_db},
                              {"task_channel", channel_name(c.task.channel)},
                              {"model", c.model},
                              {"nmse_db", c.nmse_db},
                              {"n", c.n},
                              {"excluded", c.excluded},
                              {"present", c.present}});
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace psic
