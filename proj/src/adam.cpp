// SPDX-License-Identifier: Apache-2.0
//
// Adam step implementation.

#include "psic/adam.hpp"

#include <cmath>

namespace psic {

void Adam::step(ParamMap& params, const ParamMap& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw std::invalid_argument("adam: gradient for unknown parameter " + name);
        ad::Tensor& p = it->second;
        if (!p.same_shape(g))
            throw std::invalid_argument("adam: gradient shape " + ad::shape_str(g.shape) + " != parameter shape " +
                                        ad::shape_str(p.shape) + " for " + name);
        auto [mi, fresh_m] = m_.try_emplace(name, ad::Tensor(p.shape));
        auto [vi, fresh_v] = v_.try_emplace(name, ad::Tensor(p.shape));
        (void)fresh_m;
        (void)fresh_v;
        ad::Tensor& m = mi->second;
        ad::Tensor& v = vi->second;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace psic
