#include "matte/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "matte/ops.hpp"

namespace matte {

namespace {

void check_same_shape(const char* op, const Plane& a, const Plane& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

double sad(const Plane& pred, const Plane& gt) {
    check_same_shape("sad", pred, gt);
    return (pred.cast<double>() - gt.cast<double>()).abs().sum() / 1000.0;
}

double mse(const Plane& pred, const Plane& gt) {
    check_same_shape("mse", pred, gt);
    return (pred.cast<double>() - gt.cast<double>()).square().mean();
}

double mad(const Plane& pred, const Plane& gt) {
    check_same_shape("mad", pred, gt);
    return (pred.cast<double>() - gt.cast<double>()).abs().mean();
}

namespace {

struct GaussDeriv {
    std::vector<double> g, dg;
    int radius;

    explicit GaussDeriv(double sigma) {
        radius = static_cast<int>(std::ceil(3.0 * sigma));
        g.resize(2 * radius + 1);
        dg.resize(2 * radius + 1);
        double sum = 0.0;
        for (int i = -radius; i <= radius; ++i) {
            g[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
            sum += g[i + radius];
        }
        for (double& v : g) v /= sum;
        for (int i = -radius; i <= radius; ++i) dg[i + radius] = -double(i) / (sigma * sigma) * g[i + radius];
    }
};

// Separable filtering with reflect borders: kernel kr along rows (y), kc
// along columns (x).
Eigen::ArrayXXd sep_filter(const Plane& p, const std::vector<double>& kc,
                           const std::vector<double>& kr) {
    const int h = int(p.rows()), w = int(p.cols());
    const int rc = int(kc.size() / 2), rr = int(kr.size() / 2);
    Eigen::ArrayXXd tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -rc; t <= rc; ++t) acc += kc[t + rc] * double(p(y, reflect_index(x + t, w)));
            tmp(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -rr; t <= rr; ++t) acc += kr[t + rr] * tmp(reflect_index(y + t, h), x);
            out(y, x) = acc;
        }
    return out;
}

Eigen::ArrayXXd gradient_magnitude(const Plane& p, const GaussDeriv& k) {
    const Eigen::ArrayXXd gx = sep_filter(p, k.dg, k.g);
    const Eigen::ArrayXXd gy = sep_filter(p, k.g, k.dg);
    return (gx.square() + gy.square()).sqrt();
}

}  // namespace

double gradient_error(const Plane& pred, const Plane& gt, double sigma) {
    check_same_shape("gradient_error", pred, gt);
    const GaussDeriv k(sigma);
    const Eigen::ArrayXXd mp = gradient_magnitude(pred, k);
    const Eigen::ArrayXXd mg = gradient_magnitude(gt, k);
    return (mp - mg).square().sum() / 1000.0;
}

namespace {

// Largest 4-connected component of mask via BFS; returns membership flags.
std::vector<bool> largest_component(const std::vector<bool>& mask, int h, int w) {
    std::vector<int> comp(mask.size(), -1);
    std::vector<std::int64_t> sizes;
    std::deque<int> queue;
    for (int start = 0; start < h * w; ++start) {
        if (!mask[start] || comp[start] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        comp[start] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            ++sizes[id];
            const int y = i / w, x = i % w;
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int d = 0; d < 4; ++d) {
                if (ny[d] < 0 || ny[d] >= h || nx[d] < 0 || nx[d] >= w) continue;
                const int j = ny[d] * w + nx[d];
                if (mask[j] && comp[j] < 0) {
                    comp[j] = id;
                    queue.push_back(j);
                }
            }
        }
    }
    std::vector<bool> in_largest(mask.size(), false);
    if (sizes.empty()) return in_largest;
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t i = 0; i < mask.size(); ++i) in_largest[i] = comp[i] == best;
    return in_largest;
}

}  // namespace

double connectivity_error(const Plane& pred, const Plane& gt, double theta, double step) {
    check_same_shape("connectivity_error", pred, gt);
    const int h = int(pred.rows()), w = int(pred.cols());
    const int n = h * w;
    std::vector<double> lmap(n, -1.0);
    const int steps = static_cast<int>(std::round(1.0 / step));

    std::vector<bool> inter(n);
    for (int si = 1; si <= steps; ++si) {
        const double t = si * step;
        bool any = false;
        for (int i = 0; i < n; ++i) {
            inter[i] = double(pred(i / w, i % w)) >= t && double(gt(i / w, i % w)) >= t;
            any = any || inter[i];
        }
        if (!any) continue;
        const std::vector<bool> omega = largest_component(inter, h, w);
        const double prev = (si - 1) * step;
        for (int i = 0; i < n; ++i)
            if (lmap[i] < 0.0 && !omega[i]) lmap[i] = prev;
    }
    for (double& v : lmap)
        if (v < 0.0) v = 1.0;

    double err = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dp = double(pred(i / w, i % w)) - lmap[i];
        const double dg = double(gt(i / w, i % w)) - lmap[i];
        const double phi_p = 1.0 - (dp >= theta ? dp : 0.0);
        const double phi_g = 1.0 - (dg >= theta ? dg : 0.0);
        err += std::abs(phi_p - phi_g);
    }
    return err / 1000.0;
}

double transition_sad(const Plane& pred, const Plane& gt, const Plane& gt_trimap) {
    check_same_shape("transition_sad", pred, gt);
    check_same_shape("transition_sad", pred, gt_trimap);
    double s = 0.0;
    for (int y = 0; y < pred.rows(); ++y)
        for (int x = 0; x < pred.cols(); ++x)
            if (gt_trimap(y, x) == 0.5f) s += std::abs(double(pred(y, x)) - double(gt(y, x)));
    return s / 1000.0;
}

std::string canonical_category(const std::string& token, bool strict) {
    std::string t;
    t.reserve(token.size());
    for (char c : token) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "portrait") t = "human";
    if (t == "transp" || t == "transp.") t = "transparent";
    for (const char* c : kCategories)
        if (t == c) return t;
    if (t == "other") return t;
    if (strict) throw DataError("unknown category '" + token + "'");
    return "other";
}

MetricRecord evaluate_image(const std::string& id, const Plane& pred, const Plane& gt,
                            const Plane& gt_trimap, ImageType type, const std::string& category) {
    MetricRecord r;
    r.id = id;
    r.sad = sad(pred, gt);
    r.mse = mse(pred, gt);
    r.mad = mad(pred, gt);
    r.conn = connectivity_error(pred, gt);
    r.grad = gradient_error(pred, gt);
    r.sad_transition = transition_sad(pred, gt, gt_trimap);
    r.type = type;
    r.category = canonical_category(category, /*strict=*/false);
    r.height = int(pred.rows());
    r.width = int(pred.cols());
    return r;
}

MetricReport aggregate(std::vector<MetricRecord> records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    std::sort(records.begin(), records.end(),
              [](const MetricRecord& a, const MetricRecord& b) { return a.id < b.id; });

    MetricReport rep;
    const double n = double(records.size());
    double type_sum[3] = {0, 0, 0};
    std::int64_t type_count[3] = {0, 0, 0};
    std::array<double, 7> cat_sum{};
    std::array<std::int64_t, 7> cat_count{};

    for (const MetricRecord& r : records) {
        rep.sad += r.sad / n;
        rep.mse += r.mse / n;
        rep.mad += r.mad / n;
        rep.conn += r.conn / n;
        rep.grad += r.grad / n;
        rep.sad_transition += r.sad_transition / n;
        const int t = static_cast<int>(r.type);
        type_sum[t] += r.sad;
        ++type_count[t];
        for (std::size_t c = 0; c < kCategories.size(); ++c)
            if (r.category == kCategories[c]) {
                cat_sum[c] += r.sad;
                ++cat_count[c];
            }
    }

    auto mean_of = [](double sum, std::int64_t count) -> std::optional<double> {
        if (count == 0) return std::nullopt;
        return sum / double(count);
    };
    rep.sad_so = mean_of(type_sum[0], type_count[0]);
    rep.sad_stm = mean_of(type_sum[1], type_count[1]);
    rep.sad_ns = mean_of(type_sum[2], type_count[2]);
    double tsum = 0.0;
    int tn = 0;
    for (const auto& v : {rep.sad_so, rep.sad_stm, rep.sad_ns})
        if (v) {
            tsum += *v;
            ++tn;
        }
    rep.sad_type_avg = tn > 0 ? tsum / tn : 0.0;

    double csum = 0.0;
    int cn = 0;
    for (std::size_t c = 0; c < kCategories.size(); ++c) {
        rep.sad_category[c] = mean_of(cat_sum[c], cat_count[c]);
        if (rep.sad_category[c]) {
            csum += *rep.sad_category[c];
            ++cn;
        }
    }
    rep.sad_category_avg = cn > 0 ? csum / cn : 0.0;

    rep.records = std::move(records);
    return rep;
}

}  // namespace matte
