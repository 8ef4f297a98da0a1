#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "matte/losses.hpp"
#include "oracles.hpp"

using namespace matte;

namespace {

// Central difference with the exactly-representable step actually taken in
// float32, so rounding of x +- h does not pollute the quotient.
double fd_plane(const std::function<double()>& f, Plane& x, int y, int c, float h = 1e-4f) {
    const float orig = x(y, c);
    const float xp = orig + h, xm = orig - h;
    x(y, c) = xp;
    const double fp = f();
    x(y, c) = xm;
    const double fm = f();
    x(y, c) = orig;
    return (fp - fm) / (double(xp) - double(xm));
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-10});
}

// Independent pyramid: full 2D 5x5 kernels built as outer products, direct
// convolution, no separable passes or adjoints shared with the library.
struct PyramidOracle {
    static Eigen::ArrayXXd blur5(const Eigen::ArrayXXd& x, double gain) {
        const double k1[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
        const int h = int(x.rows()), w = int(x.cols());
        Eigen::ArrayXXd y(h, w);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                double acc = 0.0;
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx)
                        acc += k1[dy + 2] * k1[dx + 2] *
                               x(oracle::mirror(r + dy, h), oracle::mirror(c + dx, w));
                y(r, c) = gain * acc;
            }
        return y;
    }

    static double loss(const Plane& pred, const Plane& gt, int levels) {
        Eigen::ArrayXXd p = pred.cast<double>(), g = gt.cast<double>();
        double total = 0.0;
        for (int i = 1; i <= levels; ++i) {
            auto shrink = [](const Eigen::ArrayXXd& x) {
                Eigen::ArrayXXd d((x.rows() + 1) / 2, (x.cols() + 1) / 2);
                for (int r = 0; r < d.rows(); ++r)
                    for (int c = 0; c < d.cols(); ++c) d(r, c) = x(2 * r, 2 * c);
                return d;
            };
            auto grow = [](const Eigen::ArrayXXd& x, int th, int tw) {
                Eigen::ArrayXXd stuffed = Eigen::ArrayXXd::Zero(th, tw);
                for (int r = 0; r < x.rows(); ++r)
                    for (int c = 0; c < x.cols(); ++c) stuffed(2 * r, 2 * c) = x(r, c);
                return blur5(stuffed, 4.0);  // doubled kernel per axis
            };
            const Eigen::ArrayXXd pn = shrink(blur5(p, 1.0));
            const Eigen::ArrayXXd gn = shrink(blur5(g, 1.0));
            const Eigen::ArrayXXd lap_p = p - grow(pn, int(p.rows()), int(p.cols()));
            const Eigen::ArrayXXd lap_g = g - grow(gn, int(g.rows()), int(g.cols()));
            total += double(1 << (i - 1)) * (lap_p - lap_g).abs().mean();
            p = pn;
            g = gn;
        }
        return total;
    }
};

}  // namespace

TEST_CASE("fuse: semantic regions win, transition passes matting through") {
    Plane u(1, 3), m(1, 3);
    u << 1.0f, 0.5f, 0.75f;
    m << 0.3f, 0.3f, 0.4f;
    Plane a = fuse(u, m);
    CHECK(a(0, 0) == 1.0f);    // u = 1 forces alpha = u
    CHECK(a(0, 1) == 0.3f);    // u = 0.5 passes m
    CHECK(a(0, 2) == doctest::Approx(0.575f));  // 0.5*0.4 + 0.5*0.75

    Plane u0 = Plane::Zero(2, 2), m0 = Plane::Constant(2, 2, 0.9f);
    CHECK((fuse(u0, m0) == 0.0f).all());

    Plane bad(2, 3);
    CHECK_THROWS_AS(fuse(u, bad), std::invalid_argument);
}

TEST_CASE("fuse: range preservation, exactness, monotonicity in m") {
    SplitMix64 rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const float uv = rng.next_unit(), mv = rng.next_unit();
        Plane u = Plane::Constant(1, 1, uv), m = Plane::Constant(1, 1, mv);
        const float a = fuse(u, m)(0, 0);
        CHECK(a >= 0.0f);
        CHECK(a <= 1.0f);
        const double direct = (1.0 - 2.0 * std::abs(double(uv) - 0.5)) * double(mv) +
                              2.0 * std::abs(double(uv) - 0.5) * double(uv);
        CHECK(std::abs(double(a) - direct) < 1e-7);

        const float m2v = std::min(1.0f, mv + 0.25f);
        Plane m2 = Plane::Constant(1, 1, m2v);
        CHECK(fuse(u, m2)(0, 0) >= a);  // coefficient of m is >= 0
    }
}

TEST_CASE("alpha_loss values") {
    Plane g = Plane::Constant(4, 4, 0.7f);
    auto same = alpha_loss(g, g);
    CHECK(same.value == doctest::Approx(1e-6).epsilon(1e-3));

    Plane one = Plane::Constant(1, 1, 1.0f), zero = Plane::Zero(1, 1);
    CHECK(alpha_loss(one, zero).value == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(alpha_loss(one, zero).grad(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("alpha_loss gradient vs finite differences") {
    SplitMix64 rng(103);
    for (int trial = 0; trial < 5; ++trial) {
        Plane pred = oracle::random_plane(rng, 16, 16);
        Plane gt = oracle::random_plane(rng, 16, 16);
        auto res = alpha_loss(pred, gt);
        for (int probe = 0; probe < 10; ++probe) {
            const int y = int(rng.next_below(16)), x = int(rng.next_below(16));
            const double fd =
                fd_plane([&] { return alpha_loss(pred, gt).value; }, pred, y, x);
            CHECK(rel_err(res.grad(y, x), fd) < 1e-4);
        }
    }
}

TEST_CASE("laplacian_loss: zero at equality, too-small error, const-offset oracle") {
    SplitMix64 rng(107);
    Plane p = oracle::random_plane(rng, 32, 32);
    CHECK(laplacian_loss(p, p).value == 0.0);
    CHECK_THROWS_AS(laplacian_loss(Plane::Zero(16, 16), Plane::Zero(16, 16), 5),
                    std::invalid_argument);

    Plane a = Plane::Constant(32, 32, 0.25f);
    Plane b = Plane::Constant(32, 32, 0.75f);
    const double want = PyramidOracle::loss(a, b, 5);
    CHECK(laplacian_loss(a, b).value == doctest::Approx(want).epsilon(1e-9));

    // random planes against the direct 2D implementation
    Plane q = oracle::random_plane(rng, 32, 32);
    CHECK(laplacian_loss(p, q).value == doctest::Approx(PyramidOracle::loss(p, q, 5)).epsilon(1e-9));
}

TEST_CASE("laplacian_loss gradient vs finite differences") {
    SplitMix64 rng(109);
    int checked = 0;
    for (int trial = 0; trial < 5; ++trial) {
        Plane pred = oracle::random_plane(rng, 32, 32);
        Plane gt = oracle::random_plane(rng, 32, 32);
        auto res = laplacian_loss(pred, gt);
        for (int probe = 0; probe < 8; ++probe) {
            const int y = int(rng.next_below(32)), x = int(rng.next_below(32));
            const double fd =
                fd_plane([&] { return laplacian_loss(pred, gt).value; }, pred, y, x);
            CHECK(rel_err(res.grad(y, x), fd) < 1e-4);
            ++checked;
        }
    }
    CHECK(checked == 40);
}

TEST_CASE("composition_loss values and degenerate background") {
    SplitMix64 rng(113);
    const int n = 8;
    Image fg(n, n), bg(n, n), img(n, n);
    Plane alpha = oracle::random_plane(rng, n, n);
    fg.r = oracle::random_plane(rng, n, n);
    fg.g = oracle::random_plane(rng, n, n);
    fg.b = oracle::random_plane(rng, n, n);
    bg.r = oracle::random_plane(rng, n, n);
    bg.g = oracle::random_plane(rng, n, n);
    bg.b = oracle::random_plane(rng, n, n);
    img.r = alpha * fg.r + (1.0f - alpha) * bg.r;
    img.g = alpha * fg.g + (1.0f - alpha) * bg.g;
    img.b = alpha * fg.b + (1.0f - alpha) * bg.b;
    auto exact = composition_loss(alpha, fg, bg, img);
    CHECK(exact.value < 1e-5);  // ~eps once float rounding is included

    // F == B: loss independent of alpha, gradient identically zero
    auto degenerate = composition_loss(alpha, fg, fg, img);
    Plane other = oracle::random_plane(rng, n, n);
    auto degenerate2 = composition_loss(other, fg, fg, img);
    CHECK(degenerate.value == doctest::Approx(degenerate2.value).epsilon(1e-12));
    CHECK(degenerate.grad.abs().maxCoeff() == 0.0);
}

TEST_CASE("composition_loss gradient vs finite differences") {
    SplitMix64 rng(127);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 16;
        Image fg(n, n), bg(n, n), img(n, n);
        Plane alpha = oracle::random_plane(rng, n, n);
        fg.r = oracle::random_plane(rng, n, n);
        fg.g = oracle::random_plane(rng, n, n);
        fg.b = oracle::random_plane(rng, n, n);
        bg.r = oracle::random_plane(rng, n, n);
        bg.g = oracle::random_plane(rng, n, n);
        bg.b = oracle::random_plane(rng, n, n);
        img.r = oracle::random_plane(rng, n, n);
        img.g = oracle::random_plane(rng, n, n);
        img.b = oracle::random_plane(rng, n, n);
        auto res = composition_loss(alpha, fg, bg, img);
        for (int probe = 0; probe < 10; ++probe) {
            const int y = int(rng.next_below(n)), x = int(rng.next_below(n));
            const double fd = fd_plane(
                [&] { return composition_loss(alpha, fg, bg, img).value; }, alpha, y, x);
            CHECK(rel_err(res.grad(y, x), fd) < 1e-4);
        }
    }
}

TEST_CASE("semantic_ce values") {
    // logits strongly favoring the target
    Tensor logits(1, 3, 2, 2);
    ClassMap target(2, 2);
    target << 0, 1, 2, 0;
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c)
                logits.at(0, c, y, x) = (c == target(y, x)) ? 30.0f : -30.0f;
    CHECK(semantic_ce(logits, target).value < 1e-9);

    Tensor uniform(1, 3, 4, 4, 0.0f);
    ClassMap t2 = ClassMap::Zero(4, 4);
    CHECK(semantic_ce(uniform, t2).value == doctest::Approx(std::log(3.0)).epsilon(1e-7));

    ClassMap bad = ClassMap::Constant(4, 4, 7);
    CHECK_THROWS_AS(semantic_ce(uniform, bad), std::invalid_argument);
}

TEST_CASE("semantic_ce gradient vs finite differences") {
    SplitMix64 rng(131);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor logits = oracle::random_tensor(rng, 1, 3, 4, 4, -2.0f, 2.0f);
        ClassMap target(4, 4);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) target(y, x) = int(rng.next_below(3));
        auto res = semantic_ce(logits, target);
        for (int probe = 0; probe < 12; ++probe) {
            const int c = int(rng.next_below(3));
            const int y = int(rng.next_below(4)), x = int(rng.next_below(4));
            const float orig = logits.at(0, c, y, x);
            const float hp = orig + 1e-4f, hm = orig - 1e-4f;
            logits.at(0, c, y, x) = hp;
            const double fp = semantic_ce(logits, target).value;
            logits.at(0, c, y, x) = hm;
            const double fm = semantic_ce(logits, target).value;
            logits.at(0, c, y, x) = orig;
            const double fd = (fp - fm) / (double(hp) - double(hm));
            CHECK(rel_err(res.grad.at(0, c, y, x), fd) < 1e-4);
        }
    }
}

TEST_CASE("all losses are nonnegative and minimal at equality") {
    SplitMix64 rng(137);
    Plane g = oracle::random_plane(rng, 32, 32);
    CHECK(alpha_loss(g, g).value >= 0.0);
    CHECK(alpha_loss(g, g).value <= 1.1e-6);
    CHECK(laplacian_loss(g, g).value == 0.0);

    LossBundle bundle{0.5, 1.5, 0.25, 0.75};
    CHECK(bundle.total() == doctest::Approx(3.0));
    CHECK(bundle.total({2.0, 1.0, 1.0, 0.0}) == doctest::Approx(0.5 * 2 + 1.5 + 0.25));
}
