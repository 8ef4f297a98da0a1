#include "matte/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace matte {

namespace {

using RowMajorMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_spatial(const char* op, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument(std::string(op) + ": output size < 1 (" +
                                    std::to_string(out_h) + "x" + std::to_string(out_w) + ")");
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias, int stride,
              int padding, int dilation) {
    if (stride < 1 || dilation < 1)
        throw std::invalid_argument("conv2d: stride and dilation must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d: negative padding");
    const int in_c = w.c(), out_c = w.n(), kh = w.h(), kw = w.w();
    if (x.c() != in_c)
        throw std::invalid_argument("conv2d: channel mismatch, input has " +
                                    std::to_string(x.c()) + ", kernel expects " +
                                    std::to_string(in_c));
    if (!bias.empty() && static_cast<int>(bias.size()) != out_c)
        throw std::invalid_argument("conv2d: bias length mismatch");

    const int out_h = conv_out_size(x.h(), kh, stride, padding, dilation);
    const int out_w = conv_out_size(x.w(), kw, stride, padding, dilation);
    check_spatial("conv2d", out_h, out_w);

    Tensor y(x.n(), out_c, out_h, out_w);
    const int k_total = in_c * kh * kw;
    Eigen::Map<const RowMajorMatrixXf> wmat(w.data(), out_c, k_total);

    // im2col over strips of output rows keeps the patch matrix bounded.
    const long long strip_budget = 16ll << 20;  // floats
    int rows_per_strip =
        std::max(1, static_cast<int>(strip_budget / std::max(1ll, 1ll * k_total * out_w)));

    Eigen::MatrixXf patches(k_total, std::min(rows_per_strip, out_h) * out_w);
    for (int n = 0; n < x.n(); ++n) {
        for (int row0 = 0; row0 < out_h; row0 += rows_per_strip) {
            const int rows = std::min(rows_per_strip, out_h - row0);
            const int cols = rows * out_w;
            if (patches.cols() != cols) patches.resize(k_total, cols);
            for (int r = 0; r < rows; ++r) {
                const int oy = row0 + r;
                for (int ox = 0; ox < out_w; ++ox) {
                    float* col = patches.col(std::size_t(r) * out_w + ox).data();
                    int k = 0;
                    for (int c = 0; c < in_c; ++c) {
                        const float* src = x.plane(n, c);
                        for (int ky = 0; ky < kh; ++ky) {
                            const int sy = oy * stride - padding + ky * dilation;
                            if (sy < 0 || sy >= x.h()) {
                                for (int kx = 0; kx < kw; ++kx) col[k++] = 0.0f;
                                continue;
                            }
                            const float* row = src + std::size_t(sy) * x.w();
                            for (int kx = 0; kx < kw; ++kx) {
                                const int sx = ox * stride - padding + kx * dilation;
                                col[k++] = (sx < 0 || sx >= x.w()) ? 0.0f : row[sx];
                            }
                        }
                    }
                }
            }
            Eigen::Map<RowMajorMatrixXf, 0, Eigen::OuterStride<>> dst(
                y.plane(n, 0) + std::size_t(row0) * out_w, out_c, cols,
                Eigen::OuterStride<>(static_cast<Eigen::Index>(y.plane_size())));
            dst.noalias() = wmat * patches;
        }
        if (!bias.empty()) {
            for (int oc = 0; oc < out_c; ++oc) {
                float* p = y.plane(n, oc);
                const float b = bias[oc];
                for (std::size_t i = 0; i < y.plane_size(); ++i) p[i] += b;
            }
        }
    }
    return y;
}

std::pair<Tensor, PoolIndices> maxpool2d_indexed(const Tensor& x, int k, int stride,
                                                 int padding) {
    if (k < 1 || stride < 1) throw std::invalid_argument("maxpool2d: k and stride must be >= 1");
    if (padding < 0 || padding > k / 2)
        throw std::invalid_argument("maxpool2d: padding must be in [0, k/2]");
    const int out_h = conv_out_size(x.h(), k, stride, padding, 1);
    const int out_w = conv_out_size(x.w(), k, stride, padding, 1);
    check_spatial("maxpool2d", out_h, out_w);

    Tensor y(x.n(), x.c(), out_h, out_w);
    PoolIndices pi;
    pi.shape = y.shape();
    pi.src_h = x.h();
    pi.src_w = x.w();
    pi.idx.assign(y.size(), -1);

    std::size_t o = 0;
    for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
            const float* src = x.plane(n, c);
            float* dst = y.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                for (int ox = 0; ox < out_w; ++ox, ++o) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::int32_t best_idx = -1;
                    for (int ky = 0; ky < k; ++ky) {
                        const int sy = oy * stride - padding + ky;
                        if (sy < 0 || sy >= x.h()) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int sx = ox * stride - padding + kx;
                            if (sx < 0 || sx >= x.w()) continue;
                            const float v = src[std::size_t(sy) * x.w() + sx];
                            if (v > best) {  // strict: earliest (smallest) index wins ties
                                best = v;
                                best_idx = static_cast<std::int32_t>(sy * x.w() + sx);
                            }
                        }
                    }
                    dst[std::size_t(oy) * out_w + ox] = best;
                    pi.idx[o] = best_idx;
                }
            }
        }
    }
    return {std::move(y), std::move(pi)};
}

Tensor max_unpool2d(const Tensor& x, const PoolIndices& idx, int out_h, int out_w) {
    if (!(x.shape() == idx.shape))
        throw std::invalid_argument("max_unpool2d: value shape " + x.shape().str() +
                                    " does not match index shape " + idx.shape.str());
    check_spatial("max_unpool2d", out_h, out_w);
    Tensor y(x.n(), x.c(), out_h, out_w, 0.0f);
    const std::int64_t plane = std::int64_t(out_h) * out_w;
    std::size_t o = 0;
    for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
            const float* src = x.plane(n, c);
            float* dst = y.plane(n, c);
            for (std::size_t i = 0; i < x.plane_size(); ++i, ++o) {
                const std::int32_t p = idx.idx[o];
                if (p < 0 || p >= plane)
                    throw std::invalid_argument("max_unpool2d: index " + std::to_string(p) +
                                                " out of bounds for plane " +
                                                std::to_string(out_h) + "x" +
                                                std::to_string(out_w));
                dst[p] = src[i];
            }
        }
    }
    return y;
}

Tensor adaptive_avgpool(const Tensor& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("adaptive_avgpool: output size < 1");
    if (out_h > x.h() || out_w > x.w())
        throw std::invalid_argument("adaptive_avgpool: output larger than input");
    Tensor y(x.n(), x.c(), out_h, out_w);
    for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
            const float* src = x.plane(n, c);
            float* dst = y.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const int y0 = (oy * x.h()) / out_h;
                const int y1 = ((oy + 1) * x.h() + out_h - 1) / out_h;
                for (int ox = 0; ox < out_w; ++ox) {
                    const int x0 = (ox * x.w()) / out_w;
                    const int x1 = ((ox + 1) * x.w() + out_w - 1) / out_w;
                    double acc = 0.0;
                    for (int sy = y0; sy < y1; ++sy)
                        for (int sx = x0; sx < x1; ++sx) acc += src[std::size_t(sy) * x.w() + sx];
                    dst[std::size_t(oy) * out_w + ox] =
                        static_cast<float>(acc / (double(y1 - y0) * (x1 - x0)));
                }
            }
        }
    }
    return y;
}

namespace {

// Lerp form keeps constants exact and stays inside [min, max] of the corners.
inline float lerp(float a, float b, float t) { return a + (b - a) * t; }

Plane resize_bilinear_plane(const float* src, int h, int w, int out_h, int out_w) {
    Plane out(out_h, out_w);
    const float sy_scale = static_cast<float>(h) / out_h;
    const float sx_scale = static_cast<float>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        float sy = (oy + 0.5f) * sy_scale - 0.5f;
        sy = std::clamp(sy, 0.0f, static_cast<float>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const float ty = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            float sx = (ox + 0.5f) * sx_scale - 0.5f;
            sx = std::clamp(sx, 0.0f, static_cast<float>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const float tx = sx - x0;
            const float top = lerp(src[std::size_t(y0) * w + x0], src[std::size_t(y0) * w + x1], tx);
            const float bot = lerp(src[std::size_t(y1) * w + x0], src[std::size_t(y1) * w + x1], tx);
            out(oy, ox) = lerp(top, bot, ty);
        }
    }
    return out;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    check_spatial("resize_bilinear", out_h, out_w);
    Tensor y(x.n(), x.c(), out_h, out_w);
    for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
            Plane p = resize_bilinear_plane(x.plane(n, c), x.h(), x.w(), out_h, out_w);
            float* dst = y.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) dst[std::size_t(oy) * out_w + ox] = p(oy, ox);
        }
    }
    return y;
}

Plane resize_bilinear(const Plane& p, int out_h, int out_w) {
    check_spatial("resize_bilinear", out_h, out_w);
    // Plane is column-major; go through a row-major copy once.
    const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
    std::vector<float> row_major(std::size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) row_major[std::size_t(y) * w + x] = p(y, x);
    return resize_bilinear_plane(row_major.data(), h, w, out_h, out_w);
}

Tensor upsample2x(const Tensor& x, ResizeMode mode) {
    if (mode == ResizeMode::Bilinear) return resize_bilinear(x, 2 * x.h(), 2 * x.w());
    Tensor y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const float* src = x.plane(n, c);
            float* dst = y.plane(n, c);
            for (int oy = 0; oy < y.h(); ++oy)
                for (int ox = 0; ox < y.w(); ++ox)
                    dst[std::size_t(oy) * y.w() + ox] = src[std::size_t(oy / 2) * x.w() + ox / 2];
        }
    return y;
}

Eigen::VectorXf linear(const Eigen::VectorXf& x, const Eigen::MatrixXf& w,
                       const Eigen::VectorXf& b) {
    if (w.cols() != x.size() || w.rows() != b.size())
        throw std::invalid_argument("linear: dimension mismatch (w " + std::to_string(w.rows()) +
                                    "x" + std::to_string(w.cols()) + ", x " +
                                    std::to_string(x.size()) + ", b " + std::to_string(b.size()) +
                                    ")");
    return w * x + b;
}

namespace {

inline float sigmoidf(float v) {
    if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
    const float e = std::exp(v);
    return e / (1.0f + e);
}

}  // namespace

Tensor activation(const Tensor& x, Activation kind) {
    Tensor y = x;
    if (kind == Activation::Relu) {
        for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = std::max(0.0f, y.data()[i]);
        return y;
    }
    if (kind == Activation::Sigmoid) {
        for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = sigmoidf(y.data()[i]);
        return y;
    }
    if (x.c() < 2) throw std::invalid_argument("softmax_channel: needs at least 2 channels");
    const std::size_t plane = x.plane_size();
    for (int n = 0; n < x.n(); ++n) {
        for (std::size_t i = 0; i < plane; ++i) {
            float mx = -std::numeric_limits<float>::infinity();
            for (int c = 0; c < x.c(); ++c) mx = std::max(mx, x.plane(n, c)[i]);
            float denom = 0.0f;
            for (int c = 0; c < x.c(); ++c) {
                const float e = std::exp(x.plane(n, c)[i] - mx);
                y.plane(n, c)[i] = e;
                denom += e;
            }
            for (int c = 0; c < x.c(); ++c) y.plane(n, c)[i] /= denom;
        }
    }
    return y;
}

Tensor batchnorm_infer(const Tensor& x, std::span<const float> mean, std::span<const float> var,
                       std::span<const float> gamma, std::span<const float> beta, float eps) {
    const auto c = static_cast<std::size_t>(x.c());
    if (mean.size() != c || var.size() != c || gamma.size() != c || beta.size() != c)
        throw std::invalid_argument("batchnorm_infer: parameter length mismatch");
    for (std::size_t i = 0; i < c; ++i)
        if (var[i] < 0.0f) throw std::invalid_argument("batchnorm_infer: negative variance");
    Tensor y(x.shape());
    for (int n = 0; n < x.n(); ++n) {
        for (int ch = 0; ch < x.c(); ++ch) {
            const float scale = gamma[ch] / std::sqrt(var[ch] + eps);
            const float shift = beta[ch] - mean[ch] * scale;
            const float* src = x.plane(n, ch);
            float* dst = y.plane(n, ch);
            for (std::size_t i = 0; i < x.plane_size(); ++i) dst[i] = src[i] * scale + shift;
        }
    }
    return y;
}

Tensor concat_channels(std::span<const Tensor* const> xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
    const Tensor& first = *xs[0];
    int total_c = 0;
    for (const Tensor* t : xs) {
        if (t->n() != first.n() || t->h() != first.h() || t->w() != first.w())
            throw std::invalid_argument("concat_channels: spatial/batch mismatch (" +
                                        t->shape().str() + " vs " + first.shape().str() + ")");
        total_c += t->c();
    }
    Tensor y(first.n(), total_c, first.h(), first.w());
    for (int n = 0; n < first.n(); ++n) {
        int oc = 0;
        for (const Tensor* t : xs) {
            for (int c = 0; c < t->c(); ++c, ++oc)
                std::copy_n(t->plane(n, c), t->plane_size(), y.plane(n, oc));
        }
    }
    return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Tensor* xs[] = {&a, &b};
    return concat_channels(std::span<const Tensor* const>(xs, 2));
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable pass along one axis with reflect padding; double accumulation.
void blur_pass(const std::vector<double>& k, const float* src, float* dst, int h, int w,
               bool horizontal) {
    const int radius = static_cast<int>(k.size() / 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            if (horizontal) {
                for (int t = -radius; t <= radius; ++t)
                    acc += k[t + radius] * src[std::size_t(y) * w + reflect_index(x + t, w)];
            } else {
                for (int t = -radius; t <= radius; ++t)
                    acc += k[t + radius] * src[std::size_t(reflect_index(y + t, h)) * w + x];
            }
            dst[std::size_t(y) * w + x] = static_cast<float>(acc);
        }
    }
}

}  // namespace

Tensor gaussian_blur2d(const Tensor& x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur2d: sigma must be > 0");
    const auto k = gaussian_kernel(sigma);
    Tensor y(x.shape());
    std::vector<float> tmp(x.plane_size());
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            blur_pass(k, x.plane(n, c), tmp.data(), x.h(), x.w(), /*horizontal=*/true);
            blur_pass(k, tmp.data(), y.plane(n, c), x.h(), x.w(), /*horizontal=*/false);
        }
    return y;
}

Plane gaussian_blur2d(const Plane& p, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur2d: sigma must be > 0");
    const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
    std::vector<float> row_major(std::size_t(h) * w), tmp(row_major.size()),
        out(row_major.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) row_major[std::size_t(y) * w + x] = p(y, x);
    const auto k = gaussian_kernel(sigma);
    blur_pass(k, row_major.data(), tmp.data(), h, w, true);
    blur_pass(k, tmp.data(), out.data(), h, w, false);
    Plane q(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) q(y, x) = out[std::size_t(y) * w + x];
    return q;
}

}  // namespace matte
