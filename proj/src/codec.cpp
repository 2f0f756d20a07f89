// SPDX-License-Identifier: Apache-2.0
//
// Codec graphs, eager inference wrappers, channel noise and the NMSE metric.

#include "psic/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace psic {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

void CodecDims::validate() const {
    if (rows < 2 || cols < 2) throw std::invalid_argument("codec: surface must be at least 2x2");
    if (patch < 1 || rows % patch != 0 || cols % patch != 0)
        throw std::invalid_argument("codec: patch size " + std::to_string(patch) + " must tile " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    if (d_model < 1 || d_p < 1 || dec_hidden < 1 || cr_embed_dim < 1)
        throw std::invalid_argument("codec: layer sizes must be positive");
    if (use_prompt_token && d_p != d_model)
        throw std::invalid_argument("codec: prompt token requires d_p == d_model");
    if (grid_crs.empty()) throw std::invalid_argument("codec: compression-ratio grid is empty");
    for (double cr : grid_crs) {
        if (cr <= 0.0 || cr > 1.0)
            throw std::invalid_argument("codec: compression ratio " + format_number(cr) + " outside (0,1]");
        if (latent_len(cr) < 1) throw std::invalid_argument("codec: latent length 0 at cr " + format_number(cr));
    }
}

int CodecDims::latent_max() const {
    int m = 0;
    for (double cr : grid_crs) m = std::max(m, latent_len(cr));
    return m;
}

int CodecDims::cr_index(double cr) const {
    for (std::size_t i = 0; i < grid_crs.size(); ++i)
        if (grid_crs[i] == cr) return static_cast<int>(i);
    return -1;
}

namespace {

void init_linear(ParamMap& p, Rng& rng, const std::string& stem, int in, int out) {
    p[stem + ".w"] = Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    p[stem + ".b"] = Tensor({1, out});
}

void init_norm(ParamMap& p, const std::string& stem, int d) {
    p[stem + ".g"] = Tensor({1, d}, 1.0);
    p[stem + ".b"] = Tensor({1, d});
}

// Shared trunk: patch embedding, attention block, feed-forward.
void init_backbone(ParamMap& p, Rng& rng, const CodecDims& dims) {
    init_linear(p, rng, "enc.patch", dims.patch_dim(), dims.d_model);
    init_norm(p, "enc.ln1", dims.d_model);
    init_linear(p, rng, "enc.attn.q", dims.d_model, dims.d_model);
    init_linear(p, rng, "enc.attn.k", dims.d_model, dims.d_model);
    init_linear(p, rng, "enc.attn.v", dims.d_model, dims.d_model);
    init_linear(p, rng, "enc.attn.o", dims.d_model, dims.d_model);
    init_norm(p, "enc.ln2", dims.d_model);
    init_linear(p, rng, "enc.ffn.1", dims.d_model, 4 * dims.d_model);
    init_linear(p, rng, "enc.ffn.2", 4 * dims.d_model, dims.d_model);
}

void init_decoder(ParamMap& p, Rng& rng, const CodecDims& dims, int cr_rows) {
    init_linear(p, rng, "dec.1", dims.latent_max() + dims.cr_embed_dim, dims.dec_hidden);
    init_linear(p, rng, "dec.2", dims.dec_hidden, dims.elements());
    p["dec.cr_embed"] = Tensor::randn({cr_rows, dims.cr_embed_dim}, rng, 0.02);
}

std::vector<int> top_m_indices(const std::vector<double>& u, int m) {
    std::vector<int> idx(u.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::abs(u[static_cast<std::size_t>(a)]) > std::abs(u[static_cast<std::size_t>(b)]);
    });
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());
    return idx;
}

Tensor pool_matrix(int len, int m) {
    Tensor mat({len, m});
    for (int k = 0; k < m; ++k) {
        const int a = k * len / m;
        const int b = (k + 1) * len / m;
        for (int j = a; j < b; ++j) mat.at(j, k) = 1.0 / (b - a);
    }
    return mat;
}

double wrap_unit(double d) { return d - std::round(d); }

}  // namespace

CodecModel CodecModel::init(const CodecDims& dims, const std::vector<TaskDescriptor>& tasks,
                            std::uint64_t seed) {
    dims.validate();
    CodecModel m;
    m.dims = dims;
    Rng rng(seed);
    init_backbone(m.params, rng, dims);
    init_linear(m.params, rng, "enc.film", dims.d_p, 2 * dims.d_model);
    init_linear(m.params, rng, "enc.gate", dims.d_model + dims.d_p, dims.latent_max());
    init_decoder(m.params, rng, dims, static_cast<int>(dims.grid_crs.size()));
    init_linear(m.params, rng, "match", dims.feature_dim(), dims.d_p);
    m.bank = init_bank(tasks, dims.d_p, rng, m.params);
    return m;
}

BaselineModel BaselineModel::init(const CodecDims& dims, const TaskDescriptor& home, std::uint64_t seed) {
    dims.validate();
    if (dims.cr_index(home.cr) < 0)
        throw std::invalid_argument("baseline: home compression ratio " + format_number(home.cr) +
                                    " not in the grid");
    BaselineModel m;
    m.dims = dims;
    m.home = home;
    Rng rng(seed);
    init_backbone(m.params, rng, dims);
    init_linear(m.params, rng, "enc.gate", dims.d_model, m.fixed_latent());
    init_decoder(m.params, rng, dims, 1);
    return m;
}

NodeId Bindings::at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw std::invalid_argument("graph bindings: unknown parameter " + name);
    return it->second;
}

Bindings bind_params(Graph& g, const ParamMap& params,
                     const std::function<bool(const std::string&)>& trainable) {
    Bindings b;
    for (const auto& [name, t] : params) {
        Tensor leaf = t;
        leaf.requires_grad = trainable(name);
        b.ids[name] = g.input(leaf);
    }
    return b;
}

Bindings bind_all(Graph& g, const ParamMap& params, bool trainable) {
    return bind_params(g, params, [trainable](const std::string&) { return trainable; });
}

Tensor patchify(const std::vector<double>& psi_unit, const CodecDims& dims) {
    if (psi_unit.size() != static_cast<std::size_t>(dims.elements()))
        throw std::invalid_argument("patchify: sample size " + std::to_string(psi_unit.size()) +
                                    " does not fill " + std::to_string(dims.rows) + "x" +
                                    std::to_string(dims.cols));
    const int P = dims.patch;
    const int pc = dims.cols / P;
    Tensor out({dims.tokens(), dims.patch_dim()});
    for (int t = 0; t < dims.tokens(); ++t) {
        const int r0 = (t / pc) * P;
        const int c0 = (t % pc) * P;
        for (int r = 0; r < P; ++r)
            for (int c = 0; c < P; ++c)
                out.at(t, r * P + c) = psi_unit[static_cast<std::size_t>(r0 + r) * dims.cols + (c0 + c)];
    }
    return out;
}

Tensor patchify_batch(const std::vector<const double*>& samples, const CodecDims& dims) {
    if (samples.empty()) throw std::invalid_argument("patchify: empty batch");
    const int hw = dims.elements();
    Tensor out({static_cast<int>(samples.size()) * dims.tokens(), dims.patch_dim()});
    std::vector<double> one(static_cast<std::size_t>(hw));
    for (std::size_t s = 0; s < samples.size(); ++s) {
        std::copy(samples[s], samples[s] + hw, one.begin());
        const Tensor p = patchify(one, dims);
        std::copy(p.data.begin(), p.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(s * p.data.size()));
    }
    return out;
}

namespace {

NodeId linear(Graph& g, const Bindings& p, NodeId in, const std::string& stem, int nrows) {
    return g.add(g.matmul(in, p.at(stem + ".w")), g.repeat_rows(p.at(stem + ".b"), nrows));
}

// Attention block over `batch` stacked samples of `span` rows each; row-wise
// stages run fused across the whole block, attention and pooling per sample.
// Returns pooled features, one row per sample. Every row is bitwise equal to
// what a batch of one produces, because all fused ops work row-locally.
NodeId build_trunk(Graph& g, const Bindings& p, const CodecDims& dims, NodeId x, int batch, int span,
                   NodeId film_source) {
    const int d = dims.d_model;
    const int nrows = batch * span;
    NodeId h = g.layer_norm_rows(x, p.at("enc.ln1.g"), p.at("enc.ln1.b"));
    if (film_source >= 0) {
        NodeId f = linear(g, p, film_source, "enc.film", 1);
        NodeId sc = g.add(g.slice(f, 1, 0, d), g.constant(Tensor({1, d}, 1.0)));
        NodeId sh = g.slice(f, 1, d, 2 * d);
        h = g.add(g.mul(h, g.repeat_rows(sc, nrows)), g.repeat_rows(sh, nrows));
    }
    NodeId q = linear(g, p, h, "enc.attn.q", nrows);
    NodeId k = linear(g, p, h, "enc.attn.k", nrows);
    NodeId v = linear(g, p, h, "enc.attn.v", nrows);
    NodeId att = -1;
    for (int s = 0; s < batch; ++s) {
        const int a = s * span;
        const int b = a + span;
        NodeId qs = batch == 1 ? q : g.slice(q, 0, a, b);
        NodeId ks = batch == 1 ? k : g.slice(k, 0, a, b);
        NodeId vs = batch == 1 ? v : g.slice(v, 0, a, b);
        NodeId scores = g.scale(g.matmul(qs, g.transpose(ks)), 1.0 / std::sqrt(static_cast<double>(d)));
        NodeId as = g.matmul(g.softmax_rows(scores), vs);
        att = s == 0 ? as : g.concat(att, as, 0);
    }
    NodeId ao = linear(g, p, att, "enc.attn.o", nrows);
    x = g.add(x, ao);
    NodeId f2 = g.layer_norm_rows(x, p.at("enc.ln2.g"), p.at("enc.ln2.b"));
    NodeId ff = linear(g, p, g.gelu(linear(g, p, f2, "enc.ffn.1", nrows)), "enc.ffn.2", nrows);
    NodeId y = g.add(x, ff);
    NodeId pooled = -1;
    for (int s = 0; s < batch; ++s) {
        NodeId ps = g.mean_rows(batch == 1 ? y : g.slice(y, 0, s * span, (s + 1) * span));
        pooled = s == 0 ? ps : g.concat(pooled, ps, 0);
    }
    return pooled;
}

}  // namespace

NodeId build_encoder(Graph& g, const Bindings& p, const CodecDims& dims, NodeId patches,
                     NodeId prompt_value, int m, std::vector<int>* sel) {
    std::vector<std::vector<int>> sels;
    NodeId out = build_encoder_batch(g, p, dims, patches, prompt_value, 1, m, sel ? &sels : nullptr);
    if (sel) *sel = sels[0];
    return out;
}

NodeId build_baseline_encoder(Graph& g, const Bindings& p, const CodecDims& dims, NodeId patches,
                              int m_fixed) {
    return build_baseline_encoder_batch(g, p, dims, patches, 1, m_fixed);
}

NodeId build_encoder_batch(Graph& g, const Bindings& p, const CodecDims& dims, NodeId patches,
                           NodeId prompt_value, int batch, int m, std::vector<std::vector<int>>* sels) {
    const int T = dims.tokens();
    const int L = dims.latent_max();
    if (batch < 1) throw std::invalid_argument("encoder: batch must be positive");
    if (m < 1 || m > L)
        throw std::invalid_argument("encoder: latent length " + std::to_string(m) + " outside [1," +
                                    std::to_string(L) + "]");
    const Tensor& pt = g.value(patches);
    if (pt.rows() != batch * T || pt.cols() != dims.patch_dim())
        throw std::invalid_argument("encoder: patch block is " + std::to_string(pt.rows()) + "x" +
                                    std::to_string(pt.cols()) + ", expected " +
                                    std::to_string(batch * T) + "x" + std::to_string(dims.patch_dim()));
    NodeId tok = linear(g, p, patches, "enc.patch", batch * T);
    NodeId x = tok;
    int span = T;
    if (dims.use_prompt_token) {
        span = T + 1;
        for (int s = 0; s < batch; ++s) {
            NodeId blk =
                g.concat(prompt_value, batch == 1 ? tok : g.slice(tok, 0, s * T, (s + 1) * T), 0);
            x = s == 0 ? blk : g.concat(x, blk, 0);
        }
    }
    NodeId pooled = build_trunk(g, p, dims, x, batch, span, dims.use_film ? prompt_value : -1);
    NodeId pv = batch == 1 ? prompt_value : g.repeat_rows(prompt_value, batch);
    NodeId u = linear(g, p, g.concat(pooled, pv, 1), "enc.gate", batch);
    if (dims.adaptive_pool) {
        if (sels) sels->assign(static_cast<std::size_t>(batch), {});
        NodeId kept = (m == L) ? u : g.matmul(u, g.constant(pool_matrix(L, m)));
        return g.power_normalize(kept);
    }
    const Tensor& uv = g.value(u);
    if (sels) sels->clear();
    NodeId kept = -1;
    for (int s = 0; s < batch; ++s) {
        const std::vector<double> row(uv.data.begin() + static_cast<std::ptrdiff_t>(s) * L,
                                      uv.data.begin() + static_cast<std::ptrdiff_t>(s + 1) * L);
        std::vector<int> idx = top_m_indices(row, m);
        if (sels) sels->push_back(idx);
        NodeId rs = batch == 1 ? u : g.slice(u, 0, s, s + 1);
        NodeId ks = g.gather_cols(rs, idx);
        kept = s == 0 ? ks : g.concat(kept, ks, 0);
    }
    return g.power_normalize(kept);
}

NodeId build_baseline_encoder_batch(Graph& g, const Bindings& p, const CodecDims& dims, NodeId patches,
                                    int batch, int m_fixed) {
    const int T = dims.tokens();
    if (batch < 1) throw std::invalid_argument("encoder: batch must be positive");
    const Tensor& pt = g.value(patches);
    if (pt.rows() != batch * T || pt.cols() != dims.patch_dim())
        throw std::invalid_argument("encoder: patch block is " + std::to_string(pt.rows()) + "x" +
                                    std::to_string(pt.cols()) + ", expected " +
                                    std::to_string(batch * T) + "x" + std::to_string(dims.patch_dim()));
    NodeId tok = linear(g, p, patches, "enc.patch", batch * T);
    NodeId pooled = build_trunk(g, p, dims, tok, batch, T, -1);
    (void)m_fixed;
    return g.power_normalize(linear(g, p, pooled, "enc.gate", batch));
}

NodeId build_decoder(Graph& g, const Bindings& p, const CodecDims& dims, NodeId noisy, int cr_idx) {
    const int L = dims.latent_max();
    const Tensor& t = g.value(noisy);
    if (t.cols() > L)
        throw std::invalid_argument("decoder: latent length " + std::to_string(t.cols()) +
                                    " exceeds maximum " + std::to_string(L));
    const int n = t.rows();
    const Tensor& table = g.value(p.at("dec.cr_embed"));
    if (cr_idx < 0 || cr_idx >= table.rows())
        throw std::invalid_argument("decoder: cr row " + std::to_string(cr_idx) + " outside embedding table");
    NodeId padded = t.cols() < L ? g.pad_cols(noisy, L) : noisy;
    NodeId emb = g.slice(p.at("dec.cr_embed"), 0, cr_idx, cr_idx + 1);
    if (n > 1) emb = g.repeat_rows(emb, n);
    NodeId h = g.gelu(linear(g, p, g.concat(padded, emb, 1), "dec.1", n));
    return g.sigmoid(linear(g, p, h, "dec.2", n));
}

NodeId build_embed(Graph& g, const Bindings& p, NodeId features) {
    return linear(g, p, features, "match", 1);
}

// ---- eager wrappers ---------------------------------------------------------

EncoderSession::EncoderSession(const CodecModel& model, int bank_index) : model_(model) {
    if (bank_index < 0 || bank_index >= model.bank.size())
        throw std::invalid_argument("encoder: prompt index " + std::to_string(bank_index) +
                                    " outside bank of " + std::to_string(model.bank.size()));
    const std::string value_name = bank_value_name(bank_index);
    bind_ = bind_params(g_, model.params, [](const std::string&) { return false; });
    prompt_value_ = bind_.at(value_name);
    mark_ = g_.size();
}

LatentCode EncoderSession::encode(const std::vector<double>& psi_unit, double cr, std::vector<int>* sel) {
    if (model_.dims.cr_index(cr) < 0)
        throw std::invalid_argument("encode: compression ratio " + format_number(cr) +
                                    " not in the grid; adapt instead");
    g_.truncate(mark_);
    NodeId patches = g_.constant(patchify(psi_unit, model_.dims));
    NodeId lat = build_encoder(g_, bind_, model_.dims, patches, prompt_value_,
                               model_.dims.latent_len(cr), sel);
    return {g_.value(lat).data, cr};
}

BaselineEncoderSession::BaselineEncoderSession(const BaselineModel& model) : model_(model) {
    bind_ = bind_all(g_, model.params, false);
    mark_ = g_.size();
}

LatentCode BaselineEncoderSession::encode(const std::vector<double>& psi_unit) {
    g_.truncate(mark_);
    NodeId patches = g_.constant(patchify(psi_unit, model_.dims));
    NodeId lat = build_baseline_encoder(g_, bind_, model_.dims, patches, model_.fixed_latent());
    return {g_.value(lat).data, model_.home.cr};
}

LatentCode encode(const CodecModel& model, const std::vector<double>& psi_unit, int bank_index,
                  double cr, std::vector<int>* sel) {
    EncoderSession s(model, bank_index);
    return s.encode(psi_unit, cr, sel);
}

LatentCode baseline_encode(const BaselineModel& model, const std::vector<double>& psi_unit) {
    BaselineEncoderSession s(model);
    return s.encode(psi_unit);
}

void add_awgn_span(double* values, int n, double snr_db, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0.0) return;
    const double sigma = std::pow(10.0, -snr_db / 20.0);
    for (int i = 0; i < n; ++i) values[i] += sigma * rng.gaussian();
}

void add_awgn(std::vector<double>& values, double snr_db, Rng& rng) {
    add_awgn_span(values.data(), static_cast<int>(values.size()), snr_db, rng);
}

NoisyLatent control_channel(const LatentCode& latent, double snr_db, Rng& rng) {
    NoisyLatent out{latent.values, snr_db};
    add_awgn(out.values, snr_db, rng);
    return out;
}

std::vector<double> decode_batch(const CodecModel& model, const std::vector<double>& noisy_flat, int n,
                                 double cr) {
    const int ci = model.dims.cr_index(cr);
    if (ci < 0)
        throw std::invalid_argument("decode: compression ratio " + format_number(cr) + " not in the grid");
    const int m = model.dims.latent_len(cr);
    if (noisy_flat.size() != static_cast<std::size_t>(n) * m)
        throw std::invalid_argument("decode: latent length " +
                                    std::to_string(n ? noisy_flat.size() / n : 0) +
                                    " inconsistent with cr " + format_number(cr));
    Graph g;
    Bindings b = bind_params(g, model.params,
                             [](const std::string&) { return false; });
    Tensor in({n, m});
    in.data = noisy_flat;
    const NodeId out = build_decoder(g, b, model.dims, g.constant(in), ci);
    return g.value(out).data;
}

std::vector<double> decode(const CodecModel& model, const NoisyLatent& noisy, double cr) {
    return decode_batch(model, noisy.values, 1, cr);
}

std::vector<double> baseline_probe_tx(const BaselineModel& model, const LatentCode& native, double cr) {
    const int m_tx = model.dims.latent_len(cr);
    if (model.dims.cr_index(cr) < 0)
        throw std::invalid_argument("baseline: probe ratio " + format_number(cr) + " not in the grid");
    const int mf = model.fixed_latent();
    if (native.values.size() != static_cast<std::size_t>(mf))
        throw std::invalid_argument("baseline: native latent length mismatch");
    std::vector<double> tx(static_cast<std::size_t>(m_tx), 0.0);
    const int keep = std::min(m_tx, mf);
    std::copy(native.values.begin(), native.values.begin() + keep, tx.begin());
    return tx;
}

std::vector<double> baseline_decode_batch(const BaselineModel& model,
                                          const std::vector<double>& noisy_flat, int n, double cr) {
    const int m = model.dims.latent_len(cr);
    if (model.dims.cr_index(cr) < 0)
        throw std::invalid_argument("baseline: decode ratio " + format_number(cr) + " not in the grid");
    if (noisy_flat.size() != static_cast<std::size_t>(n) * m)
        throw std::invalid_argument("baseline: latent length inconsistent with probe ratio");
    Graph g;
    Bindings b = bind_all(g, model.params, false);
    Tensor in({n, m});
    in.data = noisy_flat;
    const NodeId out = build_decoder(g, b, model.dims, g.constant(in), 0);
    return g.value(out).data;
}

std::vector<double> baseline_decode(const BaselineModel& model, const std::vector<double>& noisy_tx,
                                    double cr) {
    return baseline_decode_batch(model, noisy_tx, 1, cr);
}

std::vector<double> embed_features(const std::vector<double>& psi_unit, const CodecDims& dims) {
    if (psi_unit.size() != static_cast<std::size_t>(dims.elements()))
        throw std::invalid_argument("features: sample does not fill the surface");
    const int P = dims.patch;
    const int pc = dims.cols / P;
    std::vector<double> f(static_cast<std::size_t>(dims.feature_dim()), 0.0);
    for (int t = 0; t < dims.tokens(); ++t) {
        const int r0 = (t / pc) * P;
        const int c0 = (t % pc) * P;
        double mean = 0.0, dx = 0.0, dy = 0.0;
        for (int r = 0; r < P; ++r)
            for (int c = 0; c < P; ++c) {
                const double v = psi_unit[static_cast<std::size_t>(r0 + r) * dims.cols + (c0 + c)];
                mean += v;
                if (c + 1 < P)
                    dx += wrap_unit(psi_unit[static_cast<std::size_t>(r0 + r) * dims.cols + (c0 + c + 1)] -
                                    v);
                if (r + 1 < P)
                    dy += wrap_unit(psi_unit[static_cast<std::size_t>(r0 + r + 1) * dims.cols + (c0 + c)] -
                                    v);
            }
        f[static_cast<std::size_t>(3 * t)] = mean / (P * P);
        // |mean signed wrap|: coherent ramps keep their magnitude, incoherent
        // steps cancel, which separates structured from diffuse surfaces
        f[static_cast<std::size_t>(3 * t + 1)] = std::abs(dx) / (P * (P - 1));
        f[static_cast<std::size_t>(3 * t + 2)] = std::abs(dy) / (P * (P - 1));
    }
    return f;
}

std::vector<double> embed_psi(const CodecModel& model, const std::vector<double>& psi_unit) {
    const std::vector<double> f = embed_features(psi_unit, model.dims);
    const Tensor& w = model.params.at("match.w");
    const Tensor& b = model.params.at("match.b");
    std::vector<double> out(b.data);
    for (int i = 0; i < w.rows(); ++i) {
        const double fi = f[static_cast<std::size_t>(i)];
        if (fi == 0.0) continue;
        for (int j = 0; j < w.cols(); ++j) out[static_cast<std::size_t>(j)] += fi * w.at(i, j);
    }
    return out;
}

double nmse_db(const std::vector<double>& x, const std::vector<double>& x_hat) {
    if (x.size() != x_hat.size()) throw std::invalid_argument("nmse: length mismatch");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        err += d * d;
        ref += x[i] * x[i];
    }
    if (ref <= 0.0) throw std::invalid_argument("nmse: zero-norm reference");
    const double ratio = err / ref;
    return ratio > 0.0 ? std::max(10.0 * std::log10(ratio), kNmseFloorDb) : kNmseFloorDb;
}

void NmseAccumulator::add(const double* x, const double* x_hat, int n) {
    double err = 0.0, ref = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = x[i] - x_hat[i];
        err += d * d;
        ref += x[i] * x[i];
    }
    if (ref <= 0.0) {
        ++excluded_;
        return;
    }
    add_ratio(err / ref);
}

void NmseAccumulator::add_ratio(double ratio) {
    ratio_sum_ += ratio;
    ++count_;
}

double NmseAccumulator::value_db() const {
    if (count_ == 0) throw std::logic_error("nmse: no samples accumulated");
    const double r = ratio_sum_ / static_cast<double>(count_);
    return r > 0.0 ? std::max(10.0 * std::log10(r), kNmseFloorDb) : kNmseFloorDb;
}

}  // namespace psic
