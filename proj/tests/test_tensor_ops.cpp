#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "matte/ops.hpp"
#include "oracles.hpp"

using namespace matte;

TEST_CASE("conv2d identity and sum kernels") {
    Tensor x(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) x.data()[i] = float(i + 1);
    Tensor k1(1, 1, 1, 1);
    k1.data()[0] = 1.0f;
    Tensor y = conv2d(x, k1);
    CHECK(y.shape() == x.shape());
    for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == x.data()[i]);

    Tensor x2(1, 1, 2, 2);
    x2.data()[0] = 1;
    x2.data()[1] = 2;
    x2.data()[2] = 3;
    x2.data()[3] = 4;
    Tensor ksum(1, 1, 2, 2, 1.0f);
    Tensor y2 = conv2d(x2, ksum);
    CHECK(y2.shape() == Shape4{1, 1, 1, 1});
    CHECK(y2.data()[0] == doctest::Approx(10.0f));
}

TEST_CASE("conv2d matches brute force, incl. dilation and bias") {
    SplitMix64 rng(7);
    Tensor x = oracle::random_tensor(rng, 1, 3, 8, 8);
    Tensor w = oracle::random_tensor(rng, 4, 3, 3, 3);
    std::vector<float> bias = {0.1f, -0.2f, 0.3f, 0.0f};
    Tensor got = conv2d(x, w, bias, 1, 2, 2);
    Tensor want = oracle::naive_conv2d(x, w, bias, 1, 2, 2);
    CHECK(oracle::max_abs_diff(got, want) < 1e-5);

    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + int(rng.next_below(2));
        const int c = 1 + int(rng.next_below(4));
        const int h = 3 + int(rng.next_below(7));
        const int wd = 3 + int(rng.next_below(7));
        const int oc = 1 + int(rng.next_below(5));
        const int k = 1 + int(rng.next_below(3));
        const int stride = 1 + int(rng.next_below(2));
        const int pad = int(rng.next_below(2));
        const int dil = 1 + int(rng.next_below(2));
        if (conv_out_size(h, k, stride, pad, dil) < 1 || conv_out_size(wd, k, stride, pad, dil) < 1)
            continue;
        Tensor xi = oracle::random_tensor(rng, n, c, h, wd);
        Tensor wi = oracle::random_tensor(rng, oc, c, k, k);
        Tensor a = conv2d(xi, wi, {}, stride, pad, dil);
        Tensor b = oracle::naive_conv2d(xi, wi, {}, stride, pad, dil);
        CHECK(oracle::max_abs_diff(a, b) < 1e-5);
    }
}

TEST_CASE("conv2d errors") {
    Tensor x(1, 2, 4, 4);
    Tensor w(1, 3, 3, 3);
    CHECK_THROWS_AS(conv2d(x, w), std::invalid_argument);
    Tensor w2(1, 2, 3, 3);
    CHECK_THROWS_AS(conv2d(Tensor(1, 2, 2, 2), w2), std::invalid_argument);  // output < 1
}

TEST_CASE("maxpool basics and tie-break") {
    Tensor x(1, 1, 2, 2);
    x.data()[0] = 1;
    x.data()[1] = 2;
    x.data()[2] = 3;
    x.data()[3] = 4;
    auto [y, idx] = maxpool2d_indexed(x, 2, 2, 0);
    CHECK(y.data()[0] == 4.0f);
    CHECK(idx.idx[0] == 3);

    Tensor c(1, 1, 4, 4, 2.5f);
    auto [yc, ic] = maxpool2d_indexed(c, 2, 2, 0);
    for (std::size_t i = 0; i < yc.size(); ++i) CHECK(yc.data()[i] == 2.5f);
    // first element of each window
    CHECK(ic.idx[0] == 0);
    CHECK(ic.idx[1] == 2);
    CHECK(ic.idx[2] == 8);
    CHECK(ic.idx[3] == 10);
}

TEST_CASE("maxpool matches sliding-window oracle") {
    SplitMix64 rng(11);
    Tensor x = oracle::random_tensor(rng, 1, 2, 7, 7);
    auto [y, idx] = maxpool2d_indexed(x, 3, 2, 1);
    auto [oy, oidx] = oracle::naive_maxpool(x, 3, 2, 1);
    CHECK(oracle::max_abs_diff(y, oy) == 0.0);
    for (std::size_t i = 0; i < oidx.size(); ++i) CHECK(idx.idx[i] == oidx[i]);
}

TEST_CASE("unpool round trip") {
    Tensor x(1, 1, 2, 2);
    x.data()[0] = 1;
    x.data()[1] = 2;
    x.data()[2] = 3;
    x.data()[3] = 4;
    auto [y, idx] = maxpool2d_indexed(x, 2, 2, 0);
    Tensor back = max_unpool2d(y, idx, 2, 2);
    CHECK(back.data()[0] == 0.0f);
    CHECK(back.data()[1] == 0.0f);
    CHECK(back.data()[2] == 0.0f);
    CHECK(back.data()[3] == 4.0f);

    Tensor z(y.shape(), 0.0f);
    Tensor zb = max_unpool2d(z, idx, 2, 2);
    for (std::size_t i = 0; i < zb.size(); ++i) CHECK(zb.data()[i] == 0.0f);
}

TEST_CASE("pool/unpool round trip scatters every window max") {
    SplitMix64 rng(13);
    Tensor x = oracle::random_tensor(rng, 1, 1, 8, 8);
    auto [y, idx] = maxpool2d_indexed(x, 2, 2, 0);
    Tensor back = max_unpool2d(y, idx, 8, 8);
    int nonzero = 0;
    for (std::size_t i = 0; i < back.size(); ++i)
        if (back.data()[i] != 0.0f) ++nonzero;
    CHECK(nonzero == 16);  // one per non-overlapping window
    for (std::size_t o = 0; o < y.size(); ++o)
        CHECK(back.data()[idx.idx[o]] == y.data()[o]);
}

TEST_CASE("unpool index bounds checked") {
    Tensor v(1, 1, 1, 1, 1.0f);
    PoolIndices pi;
    pi.shape = v.shape();
    pi.idx = {9};
    CHECK_THROWS_AS(max_unpool2d(v, pi, 2, 2), std::invalid_argument);
    PoolIndices wrong;
    wrong.shape = {1, 2, 1, 1};
    wrong.idx = {0, 0};
    CHECK_THROWS_AS(max_unpool2d(v, wrong, 2, 2), std::invalid_argument);
}

TEST_CASE("adaptive_avgpool") {
    Tensor x(1, 1, 4, 4);
    for (int i = 0; i < 16; ++i) x.data()[i] = float(i + 1);
    Tensor g = adaptive_avgpool(x, 1, 1);
    CHECK(g.data()[0] == doctest::Approx(8.5f));

    Tensor same = adaptive_avgpool(x, 4, 4);
    CHECK(oracle::max_abs_diff(same, x) == 0.0);

    SplitMix64 rng(17);
    Tensor big = oracle::random_tensor(rng, 1, 2, 10, 10);
    CHECK(oracle::max_abs_diff(adaptive_avgpool(big, 3, 3),
                               oracle::naive_adaptive_avgpool(big, 3, 3)) < 1e-5);
    CHECK_THROWS_AS(adaptive_avgpool(x, 5, 5), std::invalid_argument);
}

TEST_CASE("upsample2x") {
    Tensor x(1, 1, 1, 1, 5.0f);
    Tensor n = upsample2x(x, ResizeMode::Nearest);
    CHECK(n.shape() == Shape4{1, 1, 2, 2});
    for (std::size_t i = 0; i < n.size(); ++i) CHECK(n.data()[i] == 5.0f);

    Tensor c(1, 2, 3, 3, 0.75f);
    Tensor cb = upsample2x(c, ResizeMode::Bilinear);
    for (std::size_t i = 0; i < cb.size(); ++i) CHECK(cb.data()[i] == 0.75f);

    // 2x2 ramp: interior weights are 3/4-1/4 mixes with align-corners=false
    Tensor ramp(1, 1, 2, 2);
    ramp.data()[0] = 0;
    ramp.data()[1] = 1;
    ramp.data()[2] = 2;
    ramp.data()[3] = 3;
    Tensor up = upsample2x(ramp, ResizeMode::Bilinear);
    CHECK(oracle::max_abs_diff(up, oracle::naive_resize_bilinear(ramp, 4, 4)) < 1e-6);
    CHECK(up.at(0, 0, 0, 0) == doctest::Approx(0.0f));
    CHECK(up.at(0, 0, 0, 1) == doctest::Approx(0.25f));
    CHECK(up.at(0, 0, 1, 1) == doctest::Approx(0.75f));
}

TEST_CASE("resize_bilinear vs oracle, range preservation") {
    SplitMix64 rng(19);
    Tensor x = oracle::random_tensor(rng, 1, 1, 4, 4, 0.0f, 1.0f);
    CHECK(oracle::max_abs_diff(resize_bilinear(x, 3, 3), oracle::naive_resize_bilinear(x, 3, 3)) <
          1e-6);
    Tensor idn = resize_bilinear(x, 4, 4);
    CHECK(oracle::max_abs_diff(idn, x) == 0.0);

    Tensor big = oracle::random_tensor(rng, 1, 1, 9, 7, 0.0f, 1.0f);
    Tensor out = resize_bilinear(big, 23, 5);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out.data()[i] >= -1e-6f);
        CHECK(out.data()[i] <= 1.0f + 1e-6f);
    }
}

TEST_CASE("linear") {
    Eigen::MatrixXf id = Eigen::MatrixXf::Identity(3, 3);
    Eigen::VectorXf x(3);
    x << 1, 2, 3;
    Eigen::VectorXf b = Eigen::VectorXf::Zero(3);
    CHECK((linear(x, id, b) - x).norm() == 0.0f);

    Eigen::MatrixXf zero = Eigen::MatrixXf::Zero(3, 3);
    Eigen::VectorXf bias(3);
    bias << 4, 5, 6;
    CHECK((linear(x, zero, bias) - bias).norm() == 0.0f);

    SplitMix64 rng(23);
    Eigen::MatrixXf w(4, 8);
    Eigen::VectorXf v(8), bb(4);
    for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.next_uniform(-1, 1);
    for (int i = 0; i < 8; ++i) v[i] = rng.next_uniform(-1, 1);
    for (int i = 0; i < 4; ++i) bb[i] = rng.next_uniform(-1, 1);
    Eigen::VectorXf got = linear(v, w, bb);
    for (int r = 0; r < 4; ++r) {
        double acc = bb[r];
        for (int c = 0; c < 8; ++c) acc += double(w(r, c)) * v[c];
        CHECK(got[r] == doctest::Approx(acc).epsilon(1e-5));
    }
    CHECK_THROWS_AS(linear(v, w, v), std::invalid_argument);
}

TEST_CASE("activations") {
    Tensor x(1, 3, 1, 1);
    x.data()[0] = -1.0f;
    x.data()[1] = 0.0f;
    x.data()[2] = 2.0f;
    Tensor r = activation(x, Activation::Relu);
    CHECK(r.data()[0] == 0.0f);
    CHECK(r.data()[2] == 2.0f);
    Tensor s = activation(x, Activation::Sigmoid);
    CHECK(s.data()[1] == doctest::Approx(0.5f));

    Tensor eq(1, 3, 2, 2, 1.7f);
    Tensor sm = activation(eq, Activation::SoftmaxChannel);
    for (std::size_t i = 0; i < sm.size(); ++i) CHECK(sm.data()[i] == doctest::Approx(1.0f / 3));

    SplitMix64 rng(29);
    Tensor rt = oracle::random_tensor(rng, 2, 4, 3, 3, -5.0f, 5.0f);
    Tensor p = activation(rt, Activation::SoftmaxChannel);
    for (int n = 0; n < 2; ++n)
        for (std::size_t i = 0; i < p.plane_size(); ++i) {
            double sum = 0.0;
            for (int c = 0; c < 4; ++c) {
                const float v = p.plane(n, c)[i];
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    CHECK_THROWS_AS(activation(Tensor(1, 1, 2, 2), Activation::SoftmaxChannel),
                    std::invalid_argument);
}

TEST_CASE("batchnorm_infer") {
    SplitMix64 rng(31);
    Tensor x = oracle::random_tensor(rng, 1, 2, 3, 3);
    std::vector<float> zeros = {0, 0}, ones = {1, 1};
    Tensor idn = batchnorm_infer(x, zeros, ones, ones, zeros, 0.0f);
    CHECK(oracle::max_abs_diff(idn, x) < 1e-7);

    std::vector<float> beta = {0.3f, -0.4f};
    Tensor cst = batchnorm_infer(x, zeros, ones, zeros, beta, 0.0f);
    for (std::size_t i = 0; i < x.plane_size(); ++i) {
        CHECK(cst.plane(0, 0)[i] == 0.3f);
        CHECK(cst.plane(0, 1)[i] == -0.4f);
    }

    std::vector<float> mean = {0.5f, -1.0f}, var = {2.0f, 0.25f}, gamma = {1.5f, -2.0f};
    Tensor y = batchnorm_infer(x, mean, var, gamma, beta, 1e-5f);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 9; ++i) {
            const double want =
                (double(x.plane(0, c)[i]) - mean[c]) / std::sqrt(double(var[c]) + 1e-5) * gamma[c] +
                beta[c];
            CHECK(double(y.plane(0, c)[i]) == doctest::Approx(want).epsilon(1e-5));
        }
    CHECK_THROWS_AS(batchnorm_infer(x, zeros, ones, ones, std::vector<float>{1.0f}),
                    std::invalid_argument);
}

TEST_CASE("concat_channels") {
    SplitMix64 rng(37);
    Tensor a = oracle::random_tensor(rng, 1, 2, 3, 3);
    Tensor one = concat_channels(std::array<const Tensor*, 1>{&a});
    CHECK(oracle::max_abs_diff(one, a) == 0.0);

    Tensor b = oracle::random_tensor(rng, 1, 5, 3, 3);
    Tensor ab = concat_channels(a, b);
    CHECK(ab.c() == 7);
    // slice-back round trip
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < a.plane_size(); ++i)
            CHECK(ab.plane(0, c)[i] == a.plane(0, c)[i]);
    for (int c = 0; c < 5; ++c)
        for (std::size_t i = 0; i < b.plane_size(); ++i)
            CHECK(ab.plane(0, c + 2)[i] == b.plane(0, c)[i]);

    Tensor bad(1, 1, 2, 3);
    CHECK_THROWS_AS(concat_channels(a, bad), std::invalid_argument);
}

TEST_CASE("gaussian blur: constancy, impulse, mean preservation, range") {
    Tensor c(1, 1, 9, 9, 0.42f);
    Tensor bc = gaussian_blur2d(c, 1.0);
    for (std::size_t i = 0; i < bc.size(); ++i) CHECK(bc.data()[i] == doctest::Approx(0.42f));

    Plane impulse = Plane::Zero(21, 21);
    impulse(10, 10) = 1.0f;
    Plane blurred = gaussian_blur2d(impulse, 1.0);
    Plane direct = oracle::direct_gaussian_blur(impulse, 1.0);
    CHECK(((blurred - direct).abs().maxCoeff()) < 1e-6f);

    SplitMix64 rng(41);
    Plane p = oracle::random_plane(rng, 15, 17);
    Plane bp = gaussian_blur2d(p, 2.5);
    CHECK(std::abs(double(bp.mean()) - double(p.mean())) < 1e-5);
    CHECK(bp.minCoeff() >= -1e-6f);
    CHECK(bp.maxCoeff() <= 1.0f + 1e-6f);
    CHECK(((bp - oracle::direct_gaussian_blur(p, 2.5)).abs().maxCoeff()) < 1e-5f);
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
    SplitMix64 rng(43);
    Tensor x = oracle::random_tensor(rng, 2, 3, 9, 9);
    Tensor w = oracle::random_tensor(rng, 4, 3, 3, 3);
    Tensor y1 = conv2d(x, w, {}, 1, 1, 1);
    Tensor y2 = conv2d(x, w, {}, 1, 1, 1);
    CHECK(std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(float)) == 0);

    Tensor b1 = gaussian_blur2d(x, 1.3);
    Tensor b2 = gaussian_blur2d(x, 1.3);
    CHECK(std::memcmp(b1.data(), b2.data(), b1.size() * sizeof(float)) == 0);

    SplitMix64 r1(99), r2(99);
    for (int i = 0; i < 1000; ++i) CHECK(r1.next_u64() == r2.next_u64());
}

TEST_CASE("finite outputs for finite inputs") {
    SplitMix64 rng(47);
    Tensor x = oracle::random_tensor(rng, 1, 4, 9, 9, -100.0f, 100.0f);
    CHECK(activation(x, Activation::SoftmaxChannel).all_finite());
    CHECK(activation(x, Activation::Sigmoid).all_finite());
    CHECK(gaussian_blur2d(x, 3.0).all_finite());
    Tensor w = oracle::random_tensor(rng, 2, 4, 3, 3);
    CHECK(conv2d(x, w, {}, 1, 1, 1).all_finite());
}
