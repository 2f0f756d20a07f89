// SPDX-License-Identifier: Apache-2.0
//
// Adam optimizer over named parameter maps. The single update rule used by
// every training phase; which parameters move is decided by which gradients
// the caller computes.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "psic/params.hpp"

namespace psic {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
        if (cfg_.lr <= 0.0) throw std::invalid_argument("adam: learning rate must be positive");
    }

    // One update over every (name, gradient) pair present in grads. Shapes
    // must match the parameter; unknown names are rejected.
    void step(ParamMap& params, const ParamMap& grads);

    const AdamConfig& config() const { return cfg_; }
    std::int64_t steps() const { return t_; }

    // First/second moment state, exposed for checkpointing.
    const ParamMap& moment1() const { return m_; }
    const ParamMap& moment2() const { return v_; }
    void restore(std::int64_t t, ParamMap m, ParamMap v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

  private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    ParamMap m_, v_;
};

}  // namespace psic
