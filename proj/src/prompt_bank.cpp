// SPDX-License-Identifier: Apache-2.0
//
// Prompt bank: init, lookup, cosine matching, JSON export.

#include "psic/prompt_bank.hpp"

#include <cmath>
#include <stdexcept>

namespace psic {

PromptBank init_bank(const std::vector<TaskDescriptor>& tasks, int d_p, Rng& rng, ParamMap& params) {
    if (tasks.empty()) throw std::invalid_argument("bank: task list is empty");
    if (d_p < 1) throw std::invalid_argument("bank: d_p must be positive");
    for (std::size_t i = 0; i < tasks.size(); ++i)
        for (std::size_t j = i + 1; j < tasks.size(); ++j)
            if (tasks[i] == tasks[j])
                throw std::invalid_argument("bank: duplicate task descriptor " + task_key(tasks[i]));

    PromptBank bank;
    bank.tasks = tasks;
    bank.d_p = d_p;
    for (int i = 0; i < bank.size(); ++i) {
        params[bank_key_name(i)] = ad::Tensor::randn({1, d_p}, rng, 0.02);
        params[bank_value_name(i)] = ad::Tensor::randn({1, d_p}, rng, 0.02);
    }
    return bank;
}

std::optional<int> lookup(const PromptBank& bank, const TaskDescriptor& meta) {
    for (int i = 0; i < bank.size(); ++i)
        if (bank.tasks[static_cast<std::size_t>(i)] == meta) return i;
    return std::nullopt;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine: length mismatch " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

int match(const PromptBank& bank, const ParamMap& params, const std::vector<double>& embedding) {
    int best = -1;
    double best_sim = 0.0;
    for (int i = 0; i < bank.size(); ++i) {
        const ad::Tensor& key = params.at(bank_key_name(i));
        const double sim = cosine(embedding, key.data);
        if (best < 0 || sim > best_sim) {
            best = i;
            best_sim = sim;
        }
    }
    return best;
}

nlohmann::json bank_to_json(const PromptBank& bank, const ParamMap& params) {
    nlohmann::json out;
    out["d_p"] = bank.d_p;
    out["prompts"] = nlohmann::json::array();
    for (int i = 0; i < bank.size(); ++i) {
        const TaskDescriptor& t = bank.tasks[static_cast<std::size_t>(i)];
        nlohmann::json p;
        p["cr"] = t.cr;
        p["snr_db"] = t.snr_db;
        p["channel"] = channel_name(t.channel);
        p["key"] = params.at(bank_key_name(i)).data;
        p["value"] = params.at(bank_value_name(i)).data;
        out["prompts"].push_back(std::move(p));
    }
    return out;
}

}  // namespace psic
