// SPDX-License-Identifier: Apache-2.0
//
// IRS channel simulation and closed-form PSI optimum.

#include "psic/irs.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace psic {

void SystemConfig::validate() const {
    if (rows < 2 || cols < 2)
        throw std::invalid_argument("system: surface must be at least 2x2, got " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    if (paths_nlos < 1) throw std::invalid_argument("system: at least one scattered path required");
    if (quant_bits < 1 || quant_bits > 8)
        throw std::invalid_argument("system: quant_bits must be in [1,8], got " + std::to_string(quant_bits));
    if (spacing <= 0.0) throw std::invalid_argument("system: element spacing must be positive");
}

std::vector<double> PsiMatrix::normalized() const {
    std::vector<double> out(phases.size());
    for (std::size_t i = 0; i < phases.size(); ++i) out[i] = phases[i] / kTwoPi;
    return out;
}

PsiMatrix PsiMatrix::from_normalized(const std::vector<double>& unit, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != unit.size())
        throw std::invalid_argument("psi: " + std::to_string(unit.size()) + " values do not fill " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    PsiMatrix p;
    p.rows = rows;
    p.cols = cols;
    p.phases.resize(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) p.phases[i] = wrap_two_pi(unit[i] * kTwoPi);
    return p;
}

double wrap_two_pi(double x) {
    x = std::fmod(x, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    if (x >= kTwoPi) x = 0.0;  // guard the x = -eps rounding case
    return x;
}

double wrap_pi(double x) {
    x = std::fmod(x + kTwoPi * 0.5, kTwoPi);
    if (x <= 0.0) x += kTwoPi;
    return x - kTwoPi * 0.5;
}

namespace {

// Accumulate one planar-wavefront path: gain · e^{j 2π d (r·u + c·v)} with
// directional cosines (u, v).
void add_path(ChannelRealization& ch, std::complex<double> gain, double spacing, double u, double v) {
    for (int r = 0; r < ch.rows; ++r) {
        const std::complex<double> row_phase = std::polar(1.0, kTwoPi * spacing * r * u);
        for (int c = 0; c < ch.cols; ++c)
            ch.at(r, c) += gain * row_phase * std::polar(1.0, kTwoPi * spacing * c * v);
    }
}

}  // namespace

ChannelRealization generate_channel(const SystemConfig& cfg, ChannelType type, Rng& rng) {
    cfg.validate();
    ChannelRealization ch;
    ch.rows = cfg.rows;
    ch.cols = cfg.cols;
    ch.channel = type;
    ch.cascade.assign(static_cast<std::size_t>(cfg.elements()), {0.0, 0.0});
    ch.h_direct = {rng.gaussian() / std::sqrt(2.0), rng.gaussian() / std::sqrt(2.0)};

    double scatter_power = 1.0;
    if (type == ChannelType::kLos) {
        const double k = std::pow(10.0, cfg.rician_k_db / 10.0);
        const double dominant_power = std::isinf(k) ? 1.0 : k / (k + 1.0);
        scatter_power = std::isinf(k) ? 0.0 : 1.0 / (k + 1.0);
        const double phase0 = rng.uniform(0.0, kTwoPi);
        const double u0 = rng.uniform(-1.0, 1.0);
        const double v0 = rng.uniform(-1.0, 1.0);
        add_path(ch, std::polar(std::sqrt(dominant_power), phase0), cfg.spacing, u0, v0);
    }
    if (scatter_power > 0.0) {
        const double sigma = std::sqrt(scatter_power / (2.0 * cfg.paths_nlos));
        for (int l = 0; l < cfg.paths_nlos; ++l) {
            const std::complex<double> gain = {sigma * rng.gaussian(), sigma * rng.gaussian()};
            const double u = rng.uniform(-1.0, 1.0);
            const double v = rng.uniform(-1.0, 1.0);
            add_path(ch, gain, cfg.spacing, u, v);
        }
    }
    return ch;
}

PsiMatrix optimal_psi(const ChannelRealization& ch) {
    PsiMatrix psi;
    psi.rows = ch.rows;
    psi.cols = ch.cols;
    psi.phases.resize(ch.cascade.size());
    const double ref = std::arg(ch.h_direct);
    for (std::size_t i = 0; i < ch.cascade.size(); ++i) {
        if (ch.cascade[i] == std::complex<double>{0.0, 0.0}) {
            psi.phases[i] = 0.0;
            continue;
        }
        psi.phases[i] = wrap_two_pi(ref - std::arg(ch.cascade[i]));
    }
    return psi;
}

double received_power(const ChannelRealization& ch, const PsiMatrix& psi) {
    if (psi.rows != ch.rows || psi.cols != ch.cols)
        throw std::invalid_argument("received_power: psi " + std::to_string(psi.rows) + "x" +
                                    std::to_string(psi.cols) + " does not match surface " + std::to_string(ch.rows) +
                                    "x" + std::to_string(ch.cols));
    std::complex<double> sum = ch.h_direct;
    for (std::size_t i = 0; i < ch.cascade.size(); ++i)
        sum += ch.cascade[i] * std::polar(1.0, psi.phases[i]);
    return std::norm(sum);
}

QuantizedPsi quantize(const PsiMatrix& psi, int bits) {
    if (bits < 1 || bits > 8)
        throw std::invalid_argument("quantize: bits must be in [1,8], got " + std::to_string(bits));
    QuantizedPsi q;
    q.rows = psi.rows;
    q.cols = psi.cols;
    q.bits = bits;
    q.indices.resize(psi.phases.size());
    const std::uint32_t levels = 1u << bits;
    const double width = kTwoPi / levels;
    for (std::size_t i = 0; i < psi.phases.size(); ++i) {
        auto idx = static_cast<std::uint32_t>(psi.phases[i] / width);
        q.indices[i] = idx >= levels ? levels - 1 : idx;
    }
    return q;
}

PsiMatrix dequantize(const QuantizedPsi& q) {
    PsiMatrix psi;
    psi.rows = q.rows;
    psi.cols = q.cols;
    psi.phases.resize(q.indices.size());
    const double width = kTwoPi / (1u << q.bits);
    for (std::size_t i = 0; i < q.indices.size(); ++i) psi.phases[i] = (q.indices[i] + 0.5) * width;
    return psi;
}

double mean_spatial_tv(const PsiMatrix& psi) {
    double sum = 0.0;
    std::int64_t pairs = 0;
    for (int r = 0; r < psi.rows; ++r)
        for (int c = 0; c < psi.cols; ++c) {
            if (c + 1 < psi.cols) {
                sum += std::abs(wrap_pi(psi.at(r, c + 1) - psi.at(r, c)));
                ++pairs;
            }
            if (r + 1 < psi.rows) {
                sum += std::abs(wrap_pi(psi.at(r + 1, c) - psi.at(r, c)));
                ++pairs;
            }
        }
    return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

}  // namespace psic
