#include "matte/losses.hpp"

#include <cmath>

#include "matte/ops.hpp"

namespace matte {

namespace {

using PlaneD = Eigen::ArrayXXd;

void check_same_shape(const char* op, const Plane& a, const Plane& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
}

constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

PlaneD blur_rows(const PlaneD& x, double gain) {
    const int h = int(x.rows()), w = int(x.cols());
    PlaneD y(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t) acc += kBinomial[t + 2] * x(r, reflect_index(c + t, w));
            y(r, c) = gain * acc;
        }
    return y;
}

PlaneD blur_cols(const PlaneD& x, double gain) {
    const int h = int(x.rows()), w = int(x.cols());
    PlaneD y(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t) acc += kBinomial[t + 2] * x(reflect_index(r + t, h), c);
            y(r, c) = gain * acc;
        }
    return y;
}

PlaneD blur2(const PlaneD& x, double axis_gain) { return blur_cols(blur_rows(x, axis_gain), axis_gain); }

// Exact adjoint of a reflect-padded row blur: scatter each output back
// through the same index map.
PlaneD blur_rows_t(const PlaneD& y, double gain) {
    const int h = int(y.rows()), w = int(y.cols());
    PlaneD x = PlaneD::Zero(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double v = gain * y(r, c);
            for (int t = -2; t <= 2; ++t) x(r, reflect_index(c + t, w)) += kBinomial[t + 2] * v;
        }
    return x;
}

PlaneD blur_cols_t(const PlaneD& y, double gain) {
    const int h = int(y.rows()), w = int(y.cols());
    PlaneD x = PlaneD::Zero(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double v = gain * y(r, c);
            for (int t = -2; t <= 2; ++t) x(reflect_index(r + t, h), c) += kBinomial[t + 2] * v;
        }
    return x;
}

PlaneD blur2_t(const PlaneD& y, double axis_gain) { return blur_rows_t(blur_cols_t(y, axis_gain), axis_gain); }

PlaneD down2(const PlaneD& x) {
    const int dh = (int(x.rows()) + 1) / 2, dw = (int(x.cols()) + 1) / 2;
    PlaneD y(dh, dw);
    for (int r = 0; r < dh; ++r)
        for (int c = 0; c < dw; ++c) y(r, c) = x(2 * r, 2 * c);
    return y;
}

PlaneD down2_t(const PlaneD& y, int th, int tw) {
    PlaneD x = PlaneD::Zero(th, tw);
    for (int r = 0; r < y.rows(); ++r)
        for (int c = 0; c < y.cols(); ++c) x(2 * r, 2 * c) = y(r, c);
    return x;
}

// Zero-stuff to the target size, then blur with the doubled kernel.
PlaneD up2(const PlaneD& x, int th, int tw) { return blur2(down2_t(x, th, tw), 2.0); }

PlaneD up2_t(const PlaneD& y) { return down2(blur2_t(y, 2.0)); }

std::vector<PlaneD> gaussian_levels(const PlaneD& x, int levels) {
    std::vector<PlaneD> g;
    g.reserve(levels + 1);
    g.push_back(x);
    for (int i = 1; i <= levels; ++i) g.push_back(down2(blur2(g.back(), 1.0)));
    return g;
}

}  // namespace

Plane fuse(const Plane& u, const Plane& m) {
    check_same_shape("fuse", u, m);
    const Plane conf = 2.0f * (u - 0.5f).abs();
    return (1.0f - conf) * m + conf * u;
}

LossResult alpha_loss(const Plane& pred, const Plane& gt, double eps) {
    check_same_shape("alpha_loss", pred, gt);
    const double n = double(pred.rows()) * pred.cols();
    LossResult r;
    r.grad.resize(pred.rows(), pred.cols());
    double acc = 0.0;
    for (int y = 0; y < pred.rows(); ++y)
        for (int x = 0; x < pred.cols(); ++x) {
            const double d = double(pred(y, x)) - double(gt(y, x));
            const double s = std::sqrt(d * d + eps * eps);
            acc += s;
            r.grad(y, x) = d / s / n;
        }
    r.value = acc / n;
    return r;
}

LossResult laplacian_loss(const Plane& pred, const Plane& gt, int levels) {
    check_same_shape("laplacian_loss", pred, gt);
    if (levels < 1) throw std::invalid_argument("laplacian_loss: levels must be >= 1");
    const int min_dim = int(std::min(pred.rows(), pred.cols()));
    if (min_dim < (1 << levels))
        throw std::invalid_argument("laplacian_loss: image too small for " +
                                    std::to_string(levels) + " levels (min dim " +
                                    std::to_string(min_dim) + ")");

    const auto gp = gaussian_levels(pred.cast<double>(), levels);
    const auto gg = gaussian_levels(gt.cast<double>(), levels);

    LossResult r;
    // Direct contributions of each Gaussian level to the loss gradient.
    std::vector<PlaneD> contrib(levels + 1);
    for (int i = 0; i <= levels; ++i) contrib[i] = PlaneD::Zero(gp[i].rows(), gp[i].cols());

    for (int i = 1; i <= levels; ++i) {
        const int th = int(gp[i - 1].rows()), tw = int(gp[i - 1].cols());
        const PlaneD lap_p = gp[i - 1] - up2(gp[i], th, tw);
        const PlaneD lap_g = gg[i - 1] - up2(gg[i], th, tw);
        const PlaneD diff = lap_p - lap_g;
        const double weight = double(1 << (i - 1));
        const double n_i = double(th) * tw;
        r.value += weight * diff.abs().sum() / n_i;
        const PlaneD s = diff.sign() * (weight / n_i);
        contrib[i - 1] += s;
        contrib[i] -= up2_t(s);
    }

    // Backward sweep through g_i = down2(blur2(g_{i-1})).
    PlaneD total = contrib[levels];
    for (int i = levels; i >= 1; --i) {
        const int th = int(gp[i - 1].rows()), tw = int(gp[i - 1].cols());
        total = blur2_t(down2_t(total, th, tw), 1.0) + contrib[i - 1];
    }
    r.grad = std::move(total);
    return r;
}

LossResult composition_loss(const Plane& alpha, const Image& fg, const Image& bg,
                            const Image& image, double eps) {
    check_same_shape("composition_loss", alpha, fg.r);
    check_same_shape("composition_loss", alpha, bg.r);
    check_same_shape("composition_loss", alpha, image.r);
    const Plane* f[3] = {&fg.r, &fg.g, &fg.b};
    const Plane* b[3] = {&bg.r, &bg.g, &bg.b};
    const Plane* im[3] = {&image.r, &image.g, &image.b};

    const double n = 3.0 * double(alpha.rows()) * alpha.cols();
    LossResult r;
    r.grad = Eigen::ArrayXXd::Zero(alpha.rows(), alpha.cols());
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < alpha.rows(); ++y)
            for (int x = 0; x < alpha.cols(); ++x) {
                const double fv = (*f[c])(y, x), bv = (*b[c])(y, x);
                const double res = double(alpha(y, x)) * fv + (1.0 - double(alpha(y, x))) * bv -
                                   double((*im[c])(y, x));
                const double s = std::sqrt(res * res + eps * eps);
                acc += s;
                r.grad(y, x) += res / s * (fv - bv) / n;
            }
    r.value = acc / n;
    return r;
}

CeResult semantic_ce(const Tensor& logits, const ClassMap& target) {
    if (logits.n() != 1)
        throw std::invalid_argument("semantic_ce: expected a single-image logits tensor");
    if (target.rows() != logits.h() || target.cols() != logits.w())
        throw std::invalid_argument("semantic_ce: target shape mismatch");
    const int classes = logits.c();
    CeResult r;
    r.grad = Tensor(logits.shape());
    const double n = double(logits.h()) * logits.w();
    double acc = 0.0;
    std::vector<double> p(classes);
    for (int y = 0; y < logits.h(); ++y)
        for (int x = 0; x < logits.w(); ++x) {
            const int t = target(y, x);
            if (t < 0 || t >= classes)
                throw std::invalid_argument("semantic_ce: invalid class " + std::to_string(t));
            double mx = -1e300;
            for (int c = 0; c < classes; ++c) mx = std::max(mx, double(logits.at(0, c, y, x)));
            double denom = 0.0;
            for (int c = 0; c < classes; ++c) {
                p[c] = std::exp(double(logits.at(0, c, y, x)) - mx);
                denom += p[c];
            }
            acc += -(double(logits.at(0, t, y, x)) - mx - std::log(denom));
            for (int c = 0; c < classes; ++c)
                r.grad.at(0, c, y, x) =
                    static_cast<float>((p[c] / denom - (c == t ? 1.0 : 0.0)) / n);
        }
    r.value = acc / n;
    return r;
}

}  // namespace matte
