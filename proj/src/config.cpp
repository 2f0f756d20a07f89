// SPDX-License-Identifier: Apache-2.0
//
// Config file parsing, validation, canonical echo and digest.

#include "psic/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "psic/digest.hpp"
#include "psic/errors.hpp"

namespace psic {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw std::invalid_argument("config " + where + ": " + what);
}

long long parse_ll(const std::string& where, const std::string& v) {
    long long x = 0;
    std::size_t pos = 0;
    try {
        x = std::stoll(v, &pos);
    } catch (const std::invalid_argument&) {
        bad(where, "expected an integer, got '" + v + "'");
    } catch (const std::out_of_range&) {
        bad(where, "integer out of range: '" + v + "'");
    }
    if (pos != v.size()) bad(where, "trailing characters in '" + v + "'");
    return x;
}

int parse_int(const std::string& where, const std::string& v) {
    const long long x = parse_ll(where, v);
    if (x < -2147483648LL || x > 2147483647LL) bad(where, "integer out of range: '" + v + "'");
    return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& where, const std::string& v) {
    unsigned long long x = 0;
    std::size_t pos = 0;
    try {
        x = std::stoull(v, &pos);
    } catch (const std::invalid_argument&) {
        bad(where, "expected an unsigned integer, got '" + v + "'");
    } catch (const std::out_of_range&) {
        bad(where, "integer out of range: '" + v + "'");
    }
    if (pos != v.size()) bad(where, "trailing characters in '" + v + "'");
    return x;
}

double parse_f64(const std::string& where, const std::string& v) {
    double x = 0.0;
    std::size_t pos = 0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::invalid_argument&) {
        bad(where, "expected a number, got '" + v + "'");
    } catch (const std::out_of_range&) {
        bad(where, "number out of range: '" + v + "'");
    }
    if (pos != v.size()) bad(where, "trailing characters in '" + v + "'");
    return x;
}

bool parse_bool(const std::string& where, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(where, "expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::vector<double> parse_f64_list(const std::string& where, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_f64(where, item));
    if (out.empty()) bad(where, "empty list");
    return out;
}

std::vector<ChannelType> parse_channel_list(const std::string& where, const std::string& v) {
    std::vector<ChannelType> out;
    for (const auto& item : split_list(v)) {
        try {
            out.push_back(parse_channel(item));
        } catch (const std::invalid_argument& e) {
            bad(where, e.what());
        }
    }
    if (out.empty()) bad(where, "empty list");
    return out;
}

void apply(RunConfig& cfg, const std::string& sec, const std::string& key, const std::string& val,
           const std::string& where) {
    if (sec == "run") {
        if (key == "seed") cfg.seed = parse_u64(where, val);
        else bad(where, "unknown key '" + key + "' in [run]");
    } else if (sec == "system") {
        if (key == "rows") cfg.system.rows = parse_int(where, val);
        else if (key == "cols") cfg.system.cols = parse_int(where, val);
        else if (key == "paths_nlos") cfg.system.paths_nlos = parse_int(where, val);
        else if (key == "rician_k_db") cfg.system.rician_k_db = parse_f64(where, val);
        else if (key == "quant_bits") cfg.system.quant_bits = parse_int(where, val);
        else if (key == "spacing") cfg.system.spacing = parse_f64(where, val);
        else bad(where, "unknown key '" + key + "' in [system]");
    } else if (sec == "grid") {
        if (key == "crs") cfg.grid.crs = parse_f64_list(where, val);
        else if (key == "snrs_db") cfg.grid.snrs_db = parse_f64_list(where, val);
        else if (key == "channels") cfg.grid.channels = parse_channel_list(where, val);
        else bad(where, "unknown key '" + key + "' in [grid]");
    } else if (sec == "data") {
        if (key == "samples_per_task") cfg.samples_per_task = parse_ll(where, val);
        else bad(where, "unknown key '" + key + "' in [data]");
    } else if (sec == "model") {
        if (key == "patch") cfg.dims.patch = parse_int(where, val);
        else if (key == "d_model") cfg.dims.d_model = parse_int(where, val);
        else if (key == "d_p") cfg.dims.d_p = parse_int(where, val);
        else if (key == "dec_hidden") cfg.dims.dec_hidden = parse_int(where, val);
        else if (key == "cr_embed_dim") cfg.dims.cr_embed_dim = parse_int(where, val);
        else if (key == "use_prompt_token") cfg.dims.use_prompt_token = parse_bool(where, val);
        else if (key == "use_film") cfg.dims.use_film = parse_bool(where, val);
        else if (key == "adaptive_pool") cfg.dims.adaptive_pool = parse_bool(where, val);
        else if (key == "baseline_cr") cfg.baseline_home.cr = parse_f64(where, val);
        else if (key == "baseline_snr_db") cfg.baseline_home.snr_db = parse_f64(where, val);
        else if (key == "baseline_channel") {
            try {
                cfg.baseline_home.channel = parse_channel(val);
            } catch (const std::invalid_argument& e) {
                bad(where, e.what());
            }
        } else bad(where, "unknown key '" + key + "' in [model]");
    } else if (sec == "train") {
        if (key == "epochs_base") cfg.train.epochs_base = parse_int(where, val);
        else if (key == "steps_per_task") cfg.train.steps_per_task = parse_int(where, val);
        else if (key == "epochs_episodic") cfg.train.epochs_episodic = parse_int(where, val);
        else if (key == "episodes_per_task") cfg.train.episodes_per_task = parse_int(where, val);
        else if (key == "batch_size") cfg.train.batch_size = parse_int(where, val);
        else if (key == "support_size") cfg.train.support_size = parse_int(where, val);
        else if (key == "query_size") cfg.train.query_size = parse_int(where, val);
        else if (key == "adapt_steps") cfg.train.adapt_steps = parse_int(where, val);
        else if (key == "lr_base") cfg.train.lr_base = parse_f64(where, val);
        else if (key == "lr_prompt") cfg.train.lr_prompt = parse_f64(where, val);
        else if (key == "lr_adapt") cfg.train.lr_adapt = parse_f64(where, val);
        else if (key == "contrastive_weight") cfg.train.contrastive_weight = parse_f64(where, val);
        else if (key == "contrastive_margin") cfg.train.contrastive_margin = parse_f64(where, val);
        else if (key == "patience") cfg.train.patience = parse_int(where, val);
        else if (key == "min_improve_db") cfg.train.min_improve_db = parse_f64(where, val);
        else if (key == "val_samples") cfg.train.val_samples = parse_int(where, val);
        else if (key == "val_draws") cfg.train.val_draws = parse_int(where, val);
        else if (key == "checkpoint_every") cfg.train.checkpoint_every = parse_int(where, val);
        else bad(where, "unknown key '" + key + "' in [train]");
    } else if (sec == "eval") {
        if (key == "draws") cfg.eval_draws = parse_int(where, val);
        else bad(where, "unknown key '" + key + "' in [eval]");
    } else {
        bad(where, "unknown section [" + sec + "]");
    }
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += f(v[i]);
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    system.validate();
    if (grid.crs.empty() || grid.snrs_db.empty() || grid.channels.empty())
        throw std::invalid_argument("config: grid axes must be non-empty");
    for (double cr : grid.crs)
        if (!(cr > 0.0) || cr > 1.0)
            throw std::invalid_argument("config: compression ratio " + format_number(cr) +
                                        " outside (0, 1]");
    std::set<double> crs(grid.crs.begin(), grid.crs.end());
    if (crs.size() != grid.crs.size()) throw std::invalid_argument("config: duplicate grid crs");
    std::set<double> snrs(grid.snrs_db.begin(), grid.snrs_db.end());
    if (snrs.size() != grid.snrs_db.size()) throw std::invalid_argument("config: duplicate grid snrs");
    std::set<ChannelType> chans(grid.channels.begin(), grid.channels.end());
    if (chans.size() != grid.channels.size())
        throw std::invalid_argument("config: duplicate grid channels");
    if (samples_per_task < 10)
        throw std::invalid_argument("config: samples_per_task must be at least 10 for the 80/10/10 split");
    dims.validate();
    if (dims.rows != system.rows || dims.cols != system.cols)
        throw std::invalid_argument("config: model geometry must mirror the system surface");
    if (dims.grid_crs != grid.crs)
        throw std::invalid_argument("config: model cr table must mirror the grid");
    if (grid.task_index(baseline_home) < 0)
        throw std::invalid_argument("config: baseline configuration " + task_key(baseline_home) +
                                    " is not a grid task");
    train.validate();
    if (train.seed != seed) throw std::invalid_argument("config: training seed must mirror the run seed");
    if (eval_draws < 1) throw std::invalid_argument("config: eval draws must be positive");
}

std::string RunConfig::echo() const {
    std::ostringstream o;
    o << "[run]\n";
    o << "seed = " << seed << "\n";
    o << "\n[system]\n";
    o << "rows = " << system.rows << "\n";
    o << "cols = " << system.cols << "\n";
    o << "paths_nlos = " << system.paths_nlos << "\n";
    o << "rician_k_db = " << format_number(system.rician_k_db) << "\n";
    o << "quant_bits = " << system.quant_bits << "\n";
    o << "spacing = " << format_number(system.spacing) << "\n";
    o << "\n[grid]\n";
    o << "crs = " << join(grid.crs, format_number) << "\n";
    o << "snrs_db = " << join(grid.snrs_db, format_number) << "\n";
    o << "channels = " << join(grid.channels, [](ChannelType c) { return std::string(channel_name(c)); })
      << "\n";
    o << "\n[data]\n";
    o << "samples_per_task = " << samples_per_task << "\n";
    o << "\n[model]\n";
    o << "patch = " << dims.patch << "\n";
    o << "d_model = " << dims.d_model << "\n";
    o << "d_p = " << dims.d_p << "\n";
    o << "dec_hidden = " << dims.dec_hidden << "\n";
    o << "cr_embed_dim = " << dims.cr_embed_dim << "\n";
    o << "use_prompt_token = " << (dims.use_prompt_token ? "true" : "false") << "\n";
    o << "use_film = " << (dims.use_film ? "true" : "false") << "\n";
    o << "adaptive_pool = " << (dims.adaptive_pool ? "true" : "false") << "\n";
    o << "baseline_cr = " << format_number(baseline_home.cr) << "\n";
    o << "baseline_snr_db = " << format_number(baseline_home.snr_db) << "\n";
    o << "baseline_channel = " << channel_name(baseline_home.channel) << "\n";
    o << "\n[train]\n";
    o << "epochs_base = " << train.epochs_base << "\n";
    o << "steps_per_task = " << train.steps_per_task << "\n";
    o << "epochs_episodic = " << train.epochs_episodic << "\n";
    o << "episodes_per_task = " << train.episodes_per_task << "\n";
    o << "batch_size = " << train.batch_size << "\n";
    o << "support_size = " << train.support_size << "\n";
    o << "query_size = " << train.query_size << "\n";
    o << "adapt_steps = " << train.adapt_steps << "\n";
    o << "lr_base = " << format_number(train.lr_base) << "\n";
    o << "lr_prompt = " << format_number(train.lr_prompt) << "\n";
    o << "lr_adapt = " << format_number(train.lr_adapt) << "\n";
    o << "contrastive_weight = " << format_number(train.contrastive_weight) << "\n";
    o << "contrastive_margin = " << format_number(train.contrastive_margin) << "\n";
    o << "patience = " << train.patience << "\n";
    o << "min_improve_db = " << format_number(train.min_improve_db) << "\n";
    o << "val_samples = " << train.val_samples << "\n";
    o << "val_draws = " << train.val_draws << "\n";
    o << "checkpoint_every = " << train.checkpoint_every << "\n";
    o << "\n[eval]\n";
    o << "draws = " << eval_draws << "\n";
    return o.str();
}

std::uint64_t RunConfig::digest() const { return digest_string(echo()); }

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw MissingInputError("config file not found: " + path);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::string where = path + ":" + std::to_string(lineno);
            if (line.front() == '[') {
                if (line.back() != ']') bad(where, "unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) bad(where, "empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) bad(where, "expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key.empty()) bad(where, "empty key");
            if (section.empty()) bad(where, "key outside any [section]");
            apply(cfg, section, key, val, where);
        }
    }
    // coupled fields mirror their sources before validation
    cfg.dims.rows = cfg.system.rows;
    cfg.dims.cols = cfg.system.cols;
    cfg.dims.grid_crs = cfg.grid.crs;
    cfg.train.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

TaskDescriptor parse_task(const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != 3)
        throw std::invalid_argument("task '" + text + "' must be cr,snr,channel (e.g. 0.25,12,nlos)");
    TaskDescriptor t;
    t.cr = parse_f64("--task", parts[0]);
    t.snr_db = parse_f64("--task", parts[1]);
    t.channel = parse_channel(parts[2]);
    return t;
}

}  // namespace psic
