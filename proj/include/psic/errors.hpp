// SPDX-License-Identifier: Apache-2.0
//
// Error taxonomy mapped to process exit codes: usage errors exit 2, missing
// inputs exit 3, numeric failures exit 4.

#pragma once

#include <stdexcept>
#include <string>

namespace psic {

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingInputError : std::runtime_error {
    explicit MissingInputError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace psic
