// SPDX-License-Identifier: Apache-2.0
//
// Learnable prompts stored as key–value pairs per task. Each prompt owns two
// parameter tensors living in the model's parameter map (bank.<i>.key and
// bank.<i>.value); the bank itself is the ordered task metadata.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psic/params.hpp"
#include "psic/rng.hpp"
#include "psic/task.hpp"

#include <json.hpp>

namespace psic {

struct PromptBank {
    std::vector<TaskDescriptor> tasks;  // bank index = position
    int d_p = 64;

    int size() const { return static_cast<int>(tasks.size()); }
};

inline std::string bank_key_name(int i) { return "bank." + std::to_string(i) + ".key"; }
inline std::string bank_value_name(int i) { return "bank." + std::to_string(i) + ".value"; }

// One prompt per task, key and value vectors i.i.d. Gaussian (σ=0.02),
// written into `params`. Duplicate descriptors are rejected.
PromptBank init_bank(const std::vector<TaskDescriptor>& tasks, int d_p, Rng& rng, ParamMap& params);

// Exact metadata match; nullopt when the descriptor is off-grid.
std::optional<int> lookup(const PromptBank& bank, const TaskDescriptor& meta);

// ⟨a,b⟩ / (‖a‖·‖b‖); zero vectors rejected.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Bank index with the highest cosine(embedding, key_vec); ties go to the
// lowest index. All-zero embeddings are rejected.
int match(const PromptBank& bank, const ParamMap& params, const std::vector<double>& embedding);

// Inspection export: metadata plus key/value vectors.
nlohmann::json bank_to_json(const PromptBank& bank, const ParamMap& params);

}  // namespace psic
