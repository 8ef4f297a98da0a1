#pragma once

#include <span>
#include <utility>

#include "matte/tensor.hpp"

// Dense NCHW kernels. All functions are pure and single-threaded; every
// reduction runs in a fixed serial order (convolutions evaluate each output
// element as one dot product inside a single GEMM call), so results are
// bit-identical across runs and safe to call from many threads at once.
namespace matte {

enum class Activation { Relu, Sigmoid, SoftmaxChannel };
enum class ResizeMode { Nearest, Bilinear };

/// Cross-correlation with zero padding. w is [outC, inC, kH, kW]; bias is
/// empty or outC long. Output spatial size follows the usual
/// floor((H + 2p - d*(k-1) - 1)/s) + 1 rule.
Tensor conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias = {},
              int stride = 1, int padding = 0, int dilation = 1);

/// Max-pool with -inf padding fill, recording per-window source indices.
/// Ties break toward the smallest flat index. Requires padding <= k/2.
std::pair<Tensor, PoolIndices> maxpool2d_indexed(const Tensor& x, int k, int stride,
                                                 int padding);

/// Scatters pooled values back to their recorded positions; everything else
/// is exactly zero. Windows are visited in row-major order, last write wins.
Tensor max_unpool2d(const Tensor& x, const PoolIndices& idx, int out_h, int out_w);

/// Adaptive average pooling over the standard partition
/// start = floor(i*H/outH), end = ceil((i+1)*H/outH).
Tensor adaptive_avgpool(const Tensor& x, int out_h, int out_w);

/// Doubles the spatial dimensions.
Tensor upsample2x(const Tensor& x, ResizeMode mode);

/// Bilinear resampling, align-corners=false. Constant inputs stay constant
/// exactly; [0,1] inputs stay in [0,1].
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);
Plane resize_bilinear(const Plane& p, int out_h, int out_w);

/// w*x + b.
Eigen::VectorXf linear(const Eigen::VectorXf& x, const Eigen::MatrixXf& w,
                       const Eigen::VectorXf& b);

/// Elementwise relu/sigmoid, or per-pixel softmax across the channel axis.
Tensor activation(const Tensor& x, Activation kind);

/// Per-channel (x - mean)/sqrt(var + eps) * gamma + beta, inference form.
Tensor batchnorm_infer(const Tensor& x, std::span<const float> mean,
                       std::span<const float> var, std::span<const float> gamma,
                       std::span<const float> beta, float eps = 1e-5f);

Tensor concat_channels(std::span<const Tensor* const> xs);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Separable Gaussian, kernel radius ceil(3*sigma), normalized to sum 1,
/// reflect padding. Means are preserved: the reflection repeats the edge
/// sample (half-sample symmetric), which conserves mass for symmetric
/// kernels.
Tensor gaussian_blur2d(const Tensor& x, double sigma);
Plane gaussian_blur2d(const Plane& p, double sigma);

/// Half-sample symmetric reflect fold (... b a | a b c ... | c b ...);
/// valid for any i, folds repeatedly when |i| exceeds n.
inline int reflect_index(int i, int n) {
    const int period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}

inline int conv_out_size(int in, int k, int stride, int padding, int dilation) {
    return (in + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
}

}  // namespace matte
