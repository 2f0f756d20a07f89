// SPDX-License-Identifier: Apache-2.0
//
// IRS link simulation: geometric multipath channels over an H×W reflecting
// surface, the closed-form coherent-combining optimal phase matrix, received
// power, and uniform phase quantization.

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "psic/rng.hpp"
#include "psic/task.hpp"

namespace psic {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct SystemConfig {
    int rows = 16;
    int cols = 16;
    int paths_nlos = 3;          // scattered planar paths
    double rician_k_db = 10.0;   // dominant/scatter power ratio for LoS
    int quant_bits = 3;
    double spacing = 0.5;        // element spacing in wavelengths

    void validate() const;
    int elements() const { return rows * cols; }
};

struct ChannelRealization {
    int rows = 0;
    int cols = 0;
    std::complex<double> h_direct;
    std::vector<std::complex<double>> cascade;  // row-major H×W, BS→element→user product gains
    ChannelType channel = ChannelType::kNlos;

    const std::complex<double>& at(int r, int c) const {
        return cascade[static_cast<std::size_t>(r) * cols + c];
    }
    std::complex<double>& at(int r, int c) { return cascade[static_cast<std::size_t>(r) * cols + c]; }
};

struct PsiMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> phases;  // row-major, each in [0, 2π)

    const double& at(int r, int c) const { return phases[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return phases[static_cast<std::size_t>(r) * cols + c]; }

    // Codec view: phases / 2π, each in [0, 1).
    std::vector<double> normalized() const;
    static PsiMatrix from_normalized(const std::vector<double>& unit, int rows, int cols);
};

struct QuantizedPsi {
    int rows = 0;
    int cols = 0;
    int bits = 0;
    std::vector<std::uint32_t> indices;  // each in [0, 2^bits)
};

// Wrap any angle into [0, 2π).
double wrap_two_pi(double x);

// Wrap an angle difference into (−π, π].
double wrap_pi(double x);

// Draw one channel realization. NLoS: L scattered planar-wavefront paths,
// complex Gaussian gains with total unit power per element. LoS: the same
// scatter plus a dominant constant-magnitude path; dominant-to-scatter power
// ratio equals the Rician K factor (rician_k_db = +inf → pure dominant path).
ChannelRealization generate_channel(const SystemConfig& cfg, ChannelType type, Rng& rng);

// Coherent-combining optimum: phase(i,j) = wrap(arg h_direct − arg cascade(i,j)).
// A cascade entry of exactly zero gets phase 0.
PsiMatrix optimal_psi(const ChannelRealization& ch);

// |h_direct + Σ cascade(i,j)·e^{jθ(i,j)}|².
double received_power(const ChannelRealization& ch, const PsiMatrix& psi);

// Uniform mid-rise quantization of [0,2π) into 2^bits cells; round-trip error
// is at most π/2^bits per element.
QuantizedPsi quantize(const PsiMatrix& psi, int bits);
PsiMatrix dequantize(const QuantizedPsi& q);

// Mean absolute wrapped phase difference over horizontal+vertical neighbor
// pairs; the spatial-roughness statistic separating the channel types.
double mean_spatial_tv(const PsiMatrix& psi);

}  // namespace psic
