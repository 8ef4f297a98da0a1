#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace matte {

/// Single-channel image plane, (row, col) == (y, x), values are float32.
using Plane = Eigen::ArrayXXf;

/// Three-channel image with values conventionally in [0,1].
struct Image {
    Plane r, g, b;

    Image() = default;
    Image(int h, int w) : r(Plane::Zero(h, w)), g(Plane::Zero(h, w)), b(Plane::Zero(h, w)) {}

    int height() const { return static_cast<int>(r.rows()); }
    int width() const { return static_cast<int>(r.cols()); }
};

/// Error in external data (files, manifests, stores). Maps to CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Error in run configuration. Maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    bool operator==(const Shape4&) const = default;
    std::int64_t count() const {
        return std::int64_t(n) * c * h * w;
    }
    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }
};

/// Dense rank-4 float32 tensor in batch-channel-height-width order, row-major.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, float fill = 0.0f) : shape_{n, c, h, w} {
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw std::invalid_argument("Tensor: all dimensions must be >= 1, got " +
                                        shape_.str());
        data_.assign(static_cast<std::size_t>(shape_.count()), fill);
    }
    explicit Tensor(Shape4 s, float fill = 0.0f) : Tensor(s.n, s.c, s.h, s.w, fill) {}

    const Shape4& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float* plane(int n, int c) {
        return data_.data() + (std::size_t(n) * shape_.c + c) * plane_size();
    }
    const float* plane(int n, int c) const {
        return data_.data() + (std::size_t(n) * shape_.c + c) * plane_size();
    }
    std::size_t plane_size() const { return std::size_t(shape_.h) * shape_.w; }

    float& at(int n, int c, int y, int x) {
        return data_[((std::size_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    float at(int n, int c, int y, int x) const {
        return data_[((std::size_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Shape4 shape_{};
    std::vector<float> data_;
};

/// Per-window argmax positions of an indexed max-pool; each entry is a flat
/// y*W+x index into the pre-pool spatial plane.
struct PoolIndices {
    Shape4 shape{};
    int src_h = 0, src_w = 0;
    std::vector<std::int32_t> idx;
};

/// SplitMix64. One fixed stream per seed, identical on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 24 mantissa bits, exactly representable in float.
    float next_unit() {
        return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
    }

    float next_uniform(float lo, float hi) { return lo + (hi - lo) * next_unit(); }

    /// Bounded draw for index selection; slight modulo bias is irrelevant here.
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

    /// Derives an independent child seed.
    std::uint64_t split() { return next_u64(); }

private:
    std::uint64_t state_;
};

/// Copies one tensor channel plane into a column-major Eigen plane.
inline Plane plane_of(const Tensor& t, int n, int c) {
    Plane p(t.h(), t.w());
    const float* src = t.plane(n, c);
    for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x) p(y, x) = src[std::size_t(y) * t.w() + x];
    return p;
}

/// Builds a 1xCxHxW tensor from planes.
inline Tensor tensor_from_planes(const std::vector<const Plane*>& planes) {
    if (planes.empty()) throw std::invalid_argument("tensor_from_planes: no planes");
    const int h = static_cast<int>(planes[0]->rows());
    const int w = static_cast<int>(planes[0]->cols());
    Tensor t(1, static_cast<int>(planes.size()), h, w);
    for (int c = 0; c < t.c(); ++c) {
        const Plane& p = *planes[c];
        if (p.rows() != h || p.cols() != w)
            throw std::invalid_argument("tensor_from_planes: plane size mismatch");
        float* dst = t.plane(0, c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) dst[std::size_t(y) * w + x] = p(y, x);
    }
    return t;
}

inline Tensor tensor_from_image(const Image& img) {
    return tensor_from_planes({&img.r, &img.g, &img.b});
}

}  // namespace matte
