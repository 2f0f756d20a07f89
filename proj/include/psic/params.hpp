// SPDX-License-Identifier: Apache-2.0
//
// Named parameter collections shared by the codec, the prompt bank and the
// optimizer, plus digest/count helpers used by freeze guards and the
// asymmetry check.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "psic/digest.hpp"
#include "psic/tensor.hpp"

namespace psic {

using ParamMap = std::map<std::string, ad::Tensor>;

// Digest over (name, shape, data) of every parameter whose name starts with
// `prefix` ("" = all). std::map iteration keeps this order-stable.
inline std::uint64_t params_digest(const ParamMap& params, const std::string& prefix = "") {
    Digest d;
    for (const auto& [name, t] : params) {
        if (name.rfind(prefix, 0) != 0) continue;
        d.update(name);
        for (int e : t.shape) d.update_pod(e);
        d.update(t.data.data(), t.data.size() * sizeof(double));
    }
    return d.value();
}

// Scalar count over parameters whose name starts with `prefix`.
inline std::int64_t params_count(const ParamMap& params, const std::string& prefix = "") {
    std::int64_t n = 0;
    for (const auto& [name, t] : params)
        if (name.rfind(prefix, 0) == 0) n += t.size();
    return n;
}

}  // namespace psic
