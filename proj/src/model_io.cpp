// SPDX-License-Identifier: Apache-2.0
//
// PSIC1 model container and PSCK1 checkpoint serialization.

#include "psic/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include "psic/binio.hpp"

namespace psic {

namespace {

using io::read_f64;
using io::read_le;
using io::read_string;
using io::write_f64;
using io::write_le;
using io::write_string;

void write_dims(std::ostream& out, const CodecDims& d) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.rows));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.cols));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.patch));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.d_model));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.d_p));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.dec_hidden));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.cr_embed_dim));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.grid_crs.size()));
    for (double cr : d.grid_crs) write_f64(out, cr);
    write_le<std::uint8_t>(out, d.use_prompt_token ? 1 : 0);
    write_le<std::uint8_t>(out, d.use_film ? 1 : 0);
    write_le<std::uint8_t>(out, d.adaptive_pool ? 1 : 0);
}

CodecDims read_dims(std::istream& in) {
    CodecDims d;
    d.rows = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    d.cols = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    d.patch = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    d.d_model = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    d.d_p = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    d.dec_hidden = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    d.cr_embed_dim = static_cast<int>(read_le<std::uint32_t>(in, "dims"));
    const auto n = read_le<std::uint32_t>(in, "dims");
    d.grid_crs.assign(n, 0.0);
    for (auto& cr : d.grid_crs) cr = read_f64(in, "dims");
    d.use_prompt_token = read_le<std::uint8_t>(in, "dims") != 0;
    d.use_film = read_le<std::uint8_t>(in, "dims") != 0;
    d.adaptive_pool = read_le<std::uint8_t>(in, "dims") != 0;
    d.validate();
    return d;
}

void write_task(std::ostream& out, const TaskDescriptor& t) {
    write_f64(out, t.cr);
    write_f64(out, t.snr_db);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.channel));
}

TaskDescriptor read_task(std::istream& in) {
    TaskDescriptor t;
    t.cr = read_f64(in, "task");
    t.snr_db = read_f64(in, "task");
    const auto ch = read_le<std::uint8_t>(in, "task");
    if (ch > 1) throw std::runtime_error("model file: bad channel tag");
    t.channel = static_cast<ChannelType>(ch);
    return t;
}

void write_params(std::ostream& out, const ParamMap& params) {
    write_le<std::uint64_t>(out, params.size());
    for (const auto& [name, t] : params) {
        write_string(out, name);
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int e : t.shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
        io::write_f64_array(out, t.data);
    }
}

ParamMap read_params(std::istream& in) {
    ParamMap params;
    const auto n = read_le<std::uint64_t>(in, "parameter count");
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::string name = read_string(in, "parameter name");
        const auto rank = read_le<std::uint32_t>(in, "parameter rank");
        ad::Shape shape(rank);
        for (auto& e : shape) e = static_cast<int>(read_le<std::uint32_t>(in, "parameter shape"));
        ad::Tensor t(shape);
        io::read_f64_array(in, t.data, name.c_str());
        if (!params.emplace(name, std::move(t)).second)
            throw std::runtime_error("model file: duplicate parameter " + name);
    }
    return params;
}

void write_provenance(std::ostream& out, const Provenance& p) {
    write_le<std::uint64_t>(out, p.config_digest);
    write_le<std::uint64_t>(out, p.master_seed);
    write_le<std::uint64_t>(out, p.split_seed);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.tasks.size()));
    for (const auto& [key, tp] : p.tasks) {
        write_string(out, key);
        write_le<std::uint64_t>(out, tp.dataset_digest);
        write_le<std::uint64_t>(out, tp.train_digest);
        write_le<std::uint64_t>(out, tp.val_digest);
        write_le<std::uint64_t>(out, tp.test_digest);
    }
}

Provenance read_provenance(std::istream& in) {
    Provenance p;
    p.config_digest = read_le<std::uint64_t>(in, "provenance");
    p.master_seed = read_le<std::uint64_t>(in, "provenance");
    p.split_seed = read_le<std::uint64_t>(in, "provenance");
    const auto n = read_le<std::uint32_t>(in, "provenance");
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::string key = read_string(in, "provenance task");
        TaskProvenance tp;
        tp.dataset_digest = read_le<std::uint64_t>(in, "provenance");
        tp.train_digest = read_le<std::uint64_t>(in, "provenance");
        tp.val_digest = read_le<std::uint64_t>(in, "provenance");
        tp.test_digest = read_le<std::uint64_t>(in, "provenance");
        p.tasks.emplace(key, tp);
    }
    return p;
}

void write_model_body(std::ostream& out, const ModelFile& mf) {
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(mf.kind));
    write_dims(out, mf.dims());
    if (mf.kind == ModelKind::kPrompt) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(mf.prompt.bank.size()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(mf.prompt.bank.d_p));
        for (const auto& t : mf.prompt.bank.tasks) write_task(out, t);
    } else {
        write_task(out, mf.baseline.home);
    }
    write_provenance(out, mf.prov);
    write_params(out, mf.params());
}

ModelFile read_model_body(std::istream& in) {
    ModelFile mf;
    const auto kind = read_le<std::uint8_t>(in, "model kind");
    if (kind > 1) throw std::runtime_error("model file: bad kind tag");
    mf.kind = static_cast<ModelKind>(kind);
    CodecDims dims = read_dims(in);
    if (mf.kind == ModelKind::kPrompt) {
        mf.prompt.dims = dims;
        const auto n = read_le<std::uint32_t>(in, "bank size");
        mf.prompt.bank.d_p = static_cast<int>(read_le<std::uint32_t>(in, "bank d_p"));
        mf.prompt.bank.tasks.clear();
        for (std::uint32_t i = 0; i < n; ++i) mf.prompt.bank.tasks.push_back(read_task(in));
    } else {
        mf.baseline.dims = dims;
        mf.baseline.home = read_task(in);
    }
    mf.prov = read_provenance(in);
    mf.params() = read_params(in);
    return mf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return in;
}

}  // namespace

void save_model(const ModelFile& mf, const std::string& path) {
    std::ofstream out = open_out(path);
    out.write("PSIC1", 5);
    write_model_body(out, mf);
    if (!out) throw std::runtime_error("write failed: " + path);
}

ModelFile load_model(const std::string& path) {
    std::ifstream in = open_in(path);
    io::expect_magic(in, "PSIC1", path);
    return read_model_body(in);
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out = open_out(path);
    out.write("PSCK1", 5);
    write_model_body(out, ck.model);
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(ck.adam_t));
    write_params(out, ck.adam_m);
    write_params(out, ck.adam_v);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.next_epoch));
    write_f64(out, ck.best_val_db);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.since_improve));
    write_params(out, ck.best_params);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in = open_in(path);
    io::expect_magic(in, "PSCK1", path);
    Checkpoint ck;
    ck.model = read_model_body(in);
    ck.adam_t = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "optimizer step"));
    ck.adam_m = read_params(in);
    ck.adam_v = read_params(in);
    ck.next_epoch = static_cast<int>(read_le<std::uint32_t>(in, "epoch"));
    ck.best_val_db = read_f64(in, "best validation");
    ck.since_improve = static_cast<int>(read_le<std::uint32_t>(in, "patience"));
    ck.best_params = read_params(in);
    return ck;
}

}  // namespace psic
