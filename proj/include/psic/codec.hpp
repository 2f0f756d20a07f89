// SPDX-License-Identifier: Apache-2.0
//
// Prompt-conditioned asymmetric autoencoder: attention encoder with prompt
// token + FiLM injection and a gated variable-rate bottleneck, an AWGN
// control channel, a lightweight CR-conditioned decoder, and the
// fixed-configuration baseline autoencoder used as comparator.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psic/graph.hpp"
#include "psic/params.hpp"
#include "psic/prompt_bank.hpp"
#include "psic/rng.hpp"
#include "psic/task.hpp"

namespace psic {

struct CodecDims {
    int rows = 16;
    int cols = 16;
    int patch = 4;
    int d_model = 128;
    int d_p = 128;  // prompt width; the token path requires d_p == d_model
    int dec_hidden = 144;  // largest hidden width keeping the decoder under
                           // a quarter of the encoder's parameter count
    int cr_embed_dim = 8;
    std::vector<double> grid_crs = {0.125, 0.25, 0.5};
    bool use_prompt_token = true;  // prompt value prepended as a token
    bool use_film = true;          // prompt-derived scale/shift after the first layer norm
    bool adaptive_pool = false;    // average-pool the pre-latent instead of gated top-m selection

    void validate() const;
    int tokens() const { return (rows / patch) * (cols / patch); }
    int patch_dim() const { return patch * patch; }
    int elements() const { return rows * cols; }
    int latent_max() const;
    int latent_len(double cr) const { return latent_length(cr, rows, cols); }
    int cr_index(double cr) const;  // -1 when off-grid
    int feature_dim() const { return 3 * tokens(); }  // matching-module features
};

struct LatentCode {
    std::vector<double> values;  // power-normalized: ‖values‖²/m = 1
    double cr = 0.0;
};

struct NoisyLatent {
    std::vector<double> values;
    double snr_db = 0.0;
};

struct CodecModel {
    CodecDims dims;
    PromptBank bank;
    ParamMap params;  // enc.*, dec.*, match.*, bank.*

    static CodecModel init(const CodecDims& dims, const std::vector<TaskDescriptor>& tasks,
                           std::uint64_t seed);
};

struct BaselineModel {
    CodecDims dims;  // same backbone sizes; prompt path unused
    TaskDescriptor home{0.25, 15.0, ChannelType::kNlos};
    ParamMap params;  // enc.*, dec.*

    static BaselineModel init(const CodecDims& dims, const TaskDescriptor& home, std::uint64_t seed);
    int fixed_latent() const { return dims.latent_len(home.cr); }
};

// ---- graph construction ----------------------------------------------------

struct Bindings {
    std::map<std::string, ad::NodeId> ids;
    ad::NodeId at(const std::string& name) const;
};

// Bind every parameter as a graph input; `trainable` decides requires_grad
// per name (frozen parameters join the graph as constants).
Bindings bind_params(ad::Graph& g, const ParamMap& params,
                     const std::function<bool(const std::string&)>& trainable);
Bindings bind_all(ad::Graph& g, const ParamMap& params, bool trainable);

// Row-major [tokens × patch²] patch matrix from a normalized sample.
ad::Tensor patchify(const std::vector<double>& psi_unit, const CodecDims& dims);

// Stacked patch matrices for a batch of samples: [n·tokens × patch²].
ad::Tensor patchify_batch(const std::vector<const double*>& samples, const CodecDims& dims);

// Encoder pipeline to a power-normalized [1×m] latent. `prompt_value` is a
// [1×d_p] node. With gating, the top-m pre-latent entries by magnitude are
// kept (ties to the lower index, emitted in index order) and the chosen
// indices are reported through `sel`.
ad::NodeId build_encoder(ad::Graph& g, const Bindings& p, const CodecDims& dims, ad::NodeId patches,
                         ad::NodeId prompt_value, int m, std::vector<int>* sel = nullptr);

// Baseline encoder: no prompt token, no FiLM, fixed-length head.
ad::NodeId build_baseline_encoder(ad::Graph& g, const Bindings& p, const CodecDims& dims,
                                  ad::NodeId patches, int m_fixed);

// Batched encoder over samples sharing one prompt: `patches` stacks the
// per-sample patch matrices ([batch·tokens × patch²]) and the result is a
// [batch × m] latent block. Row-wise ops are fused across the batch while
// attention and gating stay per-sample, so every row is bitwise identical to
// the single-sample builder's output.
ad::NodeId build_encoder_batch(ad::Graph& g, const Bindings& p, const CodecDims& dims,
                               ad::NodeId patches, ad::NodeId prompt_value, int batch, int m,
                               std::vector<std::vector<int>>* sels = nullptr);
ad::NodeId build_baseline_encoder_batch(ad::Graph& g, const Bindings& p, const CodecDims& dims,
                                        ad::NodeId patches, int batch, int m_fixed);

// Decoder: zero-pad rows to latent_max, append the cr embedding row, run the
// two-layer feed-forward with sigmoid output. Accepts [n×m] batches.
ad::NodeId build_decoder(ad::Graph& g, const Bindings& p, const CodecDims& dims, ad::NodeId noisy,
                         int cr_idx);

// Matching-module embedding for one feature row node: [1×3T] → [1×d_p].
ad::NodeId build_embed(ad::Graph& g, const Bindings& p, ad::NodeId features);

// ---- eager wrappers ---------------------------------------------------------

// Encode one sample with the prompt at `bank_index`; off-grid cr is rejected.
LatentCode encode(const CodecModel& model, const std::vector<double>& psi_unit, int bank_index,
                  double cr, std::vector<int>* sel = nullptr);

LatentCode baseline_encode(const BaselineModel& model, const std::vector<double>& psi_unit);

// Inference sessions bind the (read-only) parameters once and reuse the graph
// across samples; much cheaper than the one-shot wrappers in loops.
class EncoderSession {
  public:
    EncoderSession(const CodecModel& model, int bank_index);
    LatentCode encode(const std::vector<double>& psi_unit, double cr, std::vector<int>* sel = nullptr);

  private:
    const CodecModel& model_;
    ad::Graph g_;
    Bindings bind_;
    ad::NodeId prompt_value_;
    std::size_t mark_;
};

class BaselineEncoderSession {
  public:
    explicit BaselineEncoderSession(const BaselineModel& model);
    LatentCode encode(const std::vector<double>& psi_unit);

  private:
    const BaselineModel& model_;
    ad::Graph g_;
    Bindings bind_;
    std::size_t mark_;
};

// AWGN at the configured SNR (unit signal power by construction);
// snr_db = +inf is the noise-disabled identity.
NoisyLatent control_channel(const LatentCode& latent, double snr_db, Rng& rng);

// Same noise model on a raw transmitted vector (used by the baseline probes).
void add_awgn(std::vector<double>& values, double snr_db, Rng& rng);
void add_awgn_span(double* values, int n, double snr_db, Rng& rng);

// Reconstruct one sample; the latent length must match round(cr·H·W).
std::vector<double> decode(const CodecModel& model, const NoisyLatent& noisy, double cr);

// n stacked noisy latents (n×m flat) → n×H·W flat reconstructions.
std::vector<double> decode_batch(const CodecModel& model, const std::vector<double>& noisy_flat, int n,
                                 double cr);

// Baseline cross-rate probe: the transmitted vector at `cr` under the
// truncation/zero-padding convention (length round(cr·H·W)).
std::vector<double> baseline_probe_tx(const BaselineModel& model, const LatentCode& native, double cr);

// Decode one noisy baseline transmission probed at `cr`.
std::vector<double> baseline_decode(const BaselineModel& model, const std::vector<double>& noisy_tx,
                                    double cr);
std::vector<double> baseline_decode_batch(const BaselineModel& model,
                                          const std::vector<double>& noisy_flat, int n, double cr);

// Hand-crafted per-patch features for prompt matching: mean plus the
// magnitude of the mean signed wrapped gradient (x and y) per patch; no
// learned parameters. Coherent phase ramps score high, diffuse surfaces
// cancel toward zero.
std::vector<double> embed_features(const std::vector<double>& psi_unit, const CodecDims& dims);

// features → learned d_p embedding.
std::vector<double> embed_psi(const CodecModel& model, const std::vector<double>& psi_unit);

// ---- reconstruction metric ---------------------------------------------------

// 10·log10(‖x−x̂‖²/‖x‖²), floored at −100 dB; zero-norm reference rejected.
double nmse_db(const std::vector<double>& x, const std::vector<double>& x_hat);

// Mean of per-sample ratios, then log; zero-norm samples are excluded and
// counted.
class NmseAccumulator {
  public:
    void add(const double* x, const double* x_hat, int n);
    void add_ratio(double ratio);
    void exclude() { ++excluded_; }
    double value_db() const;
    std::int64_t count() const { return count_; }
    std::int64_t excluded() const { return excluded_; }

  private:
    double ratio_sum_ = 0.0;
    std::int64_t count_ = 0;
    std::int64_t excluded_ = 0;
};

inline constexpr double kNmseFloorDb = -100.0;

}  // namespace psic
