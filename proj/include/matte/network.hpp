#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matte/tensor.hpp"

namespace matte {

enum class LayerKind {
    ConvBlock,        // conv + BN + ReLU
    MaxPool,          // indexed max-pool
    ResidualStage,    // stack of two-conv residual blocks
    Pyramid,          // multi-scale pooled context block
    DecoderBlock,     // conv stack, optionally followed by 2x upsampling
    SqueezeExcite,    // global-pool -> bottleneck -> sigmoid channel gates
    SpatialAttention, // channel-pooled features -> 7x7 conv -> sigmoid
    MaxUnpool,
    AttentionApply,   // x + gate * x
    FinalConv,
    Fusion,           // semantic/matting blend
};

/// One convolution inside a block. at_div: the conv runs at (H/at_div,
/// W/at_div) for an HxW network input; at_fixed > 0 pins a constant spatial
/// size instead (pyramid branches). Every conv here preserves its spatial
/// size (stride 1, matched padding).
struct ConvDesc {
    std::string name;  // parameter prefix, e.g. "E0.conv"
    int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1, dil = 1;
    bool bias = false, bn = true, relu = true;
    int at_div = 1;
    int at_fixed = 0;
};

struct LinearDesc {
    std::string name;
    int in_f = 0, out_f = 0;
};

/// One row of the architecture table: a named block with its expected output
/// (out_c channels at H/out_div) and the parameters it owns.
struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::ConvBlock;
    int out_c = 0;
    int out_div = 1;
    std::vector<ConvDesc> convs;
    std::vector<LinearDesc> linears;
    std::string detail;
};

/// The full block list, in execution order, one entry per table row.
const std::vector<LayerSpec>& build_network();

struct ParamInfo {
    std::string name;
    std::vector<int> shape;
    bool trainable = true;  // BN running stats are buffers, not parameters
};

/// Every named tensor the network needs, in deterministic order.
std::vector<ParamInfo> parameter_manifest(const std::vector<LayerSpec>& spec);

struct Param {
    std::vector<int> shape;
    std::vector<float> data;

    std::int64_t count() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

class WeightStore {
public:
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    const Param& at(const std::string& name) const;
    void put(std::string name, Param p) { params_[std::move(name)] = std::move(p); }

    const std::map<std::string, Param>& entries() const { return params_; }
    std::size_t size() const { return params_.size(); }

    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }

private:
    std::map<std::string, Param> params_;
    std::string provenance_;
};

/// He-style fan-in uniform init (bound sqrt(6/fan_in)) for conv and linear
/// weights from one SplitMix64 stream; biases 0; BN gamma 1, beta 0,
/// running mean 0, running var 1.
WeightStore init_weights(const std::vector<LayerSpec>& spec, std::uint64_t seed);

/// Trainable parameter count (weights, biases, BN gamma/beta).
std::uint64_t count_parameters(const WeightStore& store);

/// Analytic multiply-accumulate count for one image at the given input size;
/// counts conv and linear weight multiplies.
std::uint64_t count_macs(const std::vector<LayerSpec>& spec, int h, int w);

struct NetworkOutputs {
    Tensor semantic_logits;    // n x 3 x H x W
    Tensor semantic_probs;     // softmax over classes, sums to 1 per pixel
    Tensor unified_pred;       // n x 1 x H x W over {0, 0.5, 1}
    Tensor matting_raw;        // n x 1 x H x W in [0,1]
    Tensor spatial_attention;  // n x 1 x H x W in (0,1)
    Tensor fused_alpha;        // n x 1 x H x W in [0,1]
};

using ShapeTrace = std::vector<std::pair<std::string, Shape4>>;

/// Runs the network. Input must be n x 3 x H x W with H, W divisible by 32
/// and at least 160 (the pyramid pools need a 5x5 deepest feature map).
/// When trace is given it receives one (block name, output shape) entry per
/// table row.
NetworkOutputs forward(const WeightStore& store, const Tensor& image,
                       ShapeTrace* trace = nullptr);

/// Gates and gated output of one squeeze-excite block, for inspection; the
/// output is exactly input * gate per channel.
std::pair<Tensor, Tensor> squeeze_excite_apply(const WeightStore& store, const std::string& name,
                                               const Tensor& x);

/// Residual attention: features + gate * features, the single-channel gate
/// broadcast across channels. A zero gate returns the features unchanged.
Tensor attention_residual(const Tensor& features, const Tensor& gate);

struct HybridResult {
    Plane alpha;      // fused, at the original resolution
    Plane unified;    // coarse-run semantic map, bilinearly upsampled
    Plane matting;    // fine-run matting, bilinearly upsampled
    Plane attention;  // fine-run attention, bilinearly upsampled
};

/// Two-scale inference: semantics from the coarse run, matting detail from
/// the fine run, both resized back and fused. Scaled sizes are rounded to
/// the nearest multiple of 32.
HybridResult hybrid_inference(const WeightStore& store, const Tensor& image,
                              double scale_fine = 1.0 / 3.0, double scale_coarse = 0.25);

/// On-disk store: <dir>/manifest.json listing {name, shape, dtype, file,
/// byte_offset, checksum} plus raw little-endian float32 blobs. Round trips
/// are bit-exact.
void save_weights(const WeightStore& store, const std::filesystem::path& dir);
WeightStore load_weights(const std::filesystem::path& dir);

}  // namespace matte
