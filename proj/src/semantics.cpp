#include "matte/semantics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace matte {

namespace {

constexpr float kFgThresh = 0.95f;
constexpr float kBgThresh = 0.05f;
constexpr double kFar = 1e18;

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Felzenszwalb-Huttenlocher 1D squared distance transform.
void dt_1d(const std::vector<double>& f, std::vector<double>& out) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFar;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double d = q - v[k];
        out[q] = d * d + f[v[k]];
    }
}

}  // namespace

Eigen::ArrayXXd squared_distance_transform(const BoolMask& mask) {
    const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
    Eigen::ArrayXXd d(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d(y, x) = mask(y, x) ? 0.0 : kFar;

    std::vector<double> f(std::max(h, w)), out(std::max(h, w));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[y] = d(y, x);
        f.resize(h);
        out.resize(h);
        dt_1d(f, out);
        for (int y = 0; y < h; ++y) d(y, x) = out[y];
        f.resize(std::max(h, w));
        out.resize(std::max(h, w));
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[x] = d(y, x);
        f.resize(w);
        out.resize(w);
        dt_1d(f, out);
        for (int x = 0; x < w; ++x) d(y, x) = out[x];
        f.resize(std::max(h, w));
        out.resize(std::max(h, w));
    }
    return d;
}

std::string to_string(ImageType t) {
    switch (t) {
        case ImageType::SO: return "SO";
        case ImageType::STM: return "STM";
        case ImageType::NS: return "NS";
    }
    return "SO";
}

ImageType parse_image_type(const std::string& token) {
    if (token == "SO") return ImageType::SO;
    if (token == "STM") return ImageType::STM;
    if (token == "NS") return ImageType::NS;
    throw DataError("unknown image type token '" + token + "' (expected SO|STM|NS)");
}

Plane trimap_from_alpha(const Plane& alpha, int erode_px, int dilate_px) {
    if (erode_px < 0 || dilate_px < 0)
        throw std::invalid_argument("trimap_from_alpha: radii must be >= 0");
    const int h = static_cast<int>(alpha.rows()), w = static_cast<int>(alpha.cols());
    BoolMask fg = alpha >= kFgThresh;
    BoolMask nonbg = alpha > kBgThresh;

    // Disk erosion via distance to the complement; dilation via distance to
    // the set. A disk of radius r means dx^2 + dy^2 <= r^2.
    BoolMask fg_eroded = fg;
    if (erode_px > 0) {
        const Eigen::ArrayXXd dist_to_not_fg = squared_distance_transform(!fg);
        fg_eroded = fg && (dist_to_not_fg > double(erode_px) * erode_px);
    }
    BoolMask nonbg_dilated = nonbg;
    if (dilate_px > 0) {
        const Eigen::ArrayXXd dist_to_nonbg = squared_distance_transform(nonbg);
        nonbg_dilated = dist_to_nonbg <= double(dilate_px) * dilate_px;
    }

    Plane t(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            t(y, x) = fg_eroded(y, x) ? 1.0f : (nonbg_dilated(y, x) ? 0.5f : 0.0f);
    return t;
}

Plane unify(const Plane& trimap, ImageType type) {
    switch (type) {
        case ImageType::SO: return trimap;
        case ImageType::STM: return 1.5f * trimap - trimap.square();
        case ImageType::NS: return Plane::Constant(trimap.rows(), trimap.cols(), 0.5f);
    }
    return trimap;
}

ImageType classify_type(const Plane& alpha) {
    const double n = double(alpha.rows()) * alpha.cols();
    const double f1 = double((alpha >= kFgThresh).count()) / n;
    const double f0 = double((alpha <= kBgThresh).count()) / n;
    if (f0 < 0.05) return ImageType::NS;   // foreground entangled everywhere
    if (f1 < 0.05) return ImageType::STM;  // no solid interior
    return ImageType::SO;
}

ClassMap rep_to_classes(const Plane& rep) {
    ClassMap c(rep.rows(), rep.cols());
    for (int y = 0; y < rep.rows(); ++y)
        for (int x = 0; x < rep.cols(); ++x) {
            const float v = rep(y, x);
            if (std::abs(v) < 1e-6f)
                c(y, x) = 0;
            else if (std::abs(v - 0.5f) < 1e-6f)
                c(y, x) = 1;
            else if (std::abs(v - 1.0f) < 1e-6f)
                c(y, x) = 2;
            else
                throw std::invalid_argument("rep_to_classes: value " + std::to_string(v) +
                                            " outside {0, 0.5, 1}");
        }
    return c;
}

Plane classes_to_rep(const ClassMap& classes) {
    Plane p(classes.rows(), classes.cols());
    for (int y = 0; y < classes.rows(); ++y)
        for (int x = 0; x < classes.cols(); ++x) {
            switch (classes(y, x)) {
                case 0: p(y, x) = 0.0f; break;
                case 1: p(y, x) = 0.5f; break;
                case 2: p(y, x) = 1.0f; break;
                default:
                    throw std::invalid_argument("classes_to_rep: class " +
                                                std::to_string(classes(y, x)) +
                                                " outside {0,1,2}");
            }
        }
    return p;
}

IouAccuracy semantic_iou_accuracy(const ClassMap& pred, const ClassMap& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw std::invalid_argument("semantic_iou_accuracy: shape mismatch");
    std::int64_t inter[3] = {0, 0, 0}, uni[3] = {0, 0, 0}, gt_count[3] = {0, 0, 0};
    std::int64_t correct = 0;
    for (int y = 0; y < gt.rows(); ++y)
        for (int x = 0; x < gt.cols(); ++x) {
            const int p = pred(y, x), g = gt(y, x);
            if (p == g) {
                ++correct;
                ++inter[g];
            }
            ++gt_count[g];
            ++uni[g];
            if (p != g) ++uni[p];
        }
    IouAccuracy r;
    r.accuracy = double(correct) / (double(gt.rows()) * gt.cols());
    double iou_sum = 0.0;
    int present = 0;
    for (int c = 0; c < 3; ++c) {
        if (gt_count[c] == 0) continue;
        ++present;
        iou_sum += uni[c] > 0 ? double(inter[c]) / double(uni[c]) : 0.0;
    }
    r.iou = present > 0 ? iou_sum / present : 0.0;
    return r;
}

}  // namespace matte
