#include "matte/network.hpp"

#include <cmath>

#include "matte/losses.hpp"
#include "matte/ops.hpp"

namespace matte {

namespace {

ConvDesc conv(std::string name, int in_c, int out_c, int k, int pad, int at_div,
              bool relu = true, int dil = 1, bool bias = false, bool bn = true) {
    ConvDesc d;
    d.name = std::move(name);
    d.in_c = in_c;
    d.out_c = out_c;
    d.k = k;
    d.pad = pad;
    d.dil = dil;
    d.bias = bias;
    d.bn = bn;
    d.relu = relu;
    d.at_div = at_div;
    return d;
}

// Stack of two-conv residual blocks; the first block projects with a 1x1
// shortcut when the channel count changes. All convolutions stride 1.
LayerSpec residual_stage(const std::string& name, int blocks, int in_c, int out_c, int div) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::ResidualStage;
    s.out_c = out_c;
    s.out_div = div;
    for (int b = 0; b < blocks; ++b) {
        const int bin = b == 0 ? in_c : out_c;
        const std::string p = name + ".b" + std::to_string(b);
        s.convs.push_back(conv(p + ".conv1", bin, out_c, 3, 1, div));
        s.convs.push_back(conv(p + ".conv2", out_c, out_c, 3, 1, div, /*relu=*/false));
        if (bin != out_c)
            s.convs.push_back(conv(p + ".down", bin, out_c, 1, 0, div, /*relu=*/false));
    }
    s.detail = std::to_string(blocks) + " residual blocks (3x3, " + std::to_string(out_c) +
               ", stride 1)";
    return s;
}

LayerSpec pool_block(const std::string& name, int c, int div) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::MaxPool;
    s.out_c = c;
    s.out_div = div;
    s.detail = "maxpool (3x3, stride 2, padding 1, return indices)";
    return s;
}

LayerSpec unpool_block(const std::string& name, int c, int div) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::MaxUnpool;
    s.out_c = c;
    s.out_div = div;
    s.detail = "max-unpool (2x2, stride 2)";
    return s;
}

LayerSpec se_block(const std::string& name, int c, int div) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::SqueezeExcite;
    s.out_c = c;
    s.out_div = div;
    const int hidden = std::max(1, c / 16);
    s.linears.push_back({name + ".fc0", c, hidden});
    s.linears.push_back({name + ".fc1", hidden, c});
    s.detail = "avgpool + linear(" + std::to_string(c) + ", " + std::to_string(hidden) +
               ") + ReLU + linear(" + std::to_string(hidden) + ", " + std::to_string(c) +
               ") + Sigmoid";
    return s;
}

// Semantic decoder block: conv stack at the input resolution, then 2x
// bilinear upsampling. Blocks below the top also own a reduction conv that
// adapts the shared pyramid features for their skip input.
LayerSpec sd_block(const std::string& name, std::vector<int> widths, int in_c, int div,
                   int skip_out) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::DecoderBlock;
    s.out_c = widths.back();
    s.out_div = div / 2;
    if (skip_out > 0)
        s.convs.push_back(conv(name + ".skip", 512, skip_out, 3, 1, 32));
    int c_in = in_c;
    std::string detail;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        s.convs.push_back(conv(name + ".conv" + std::to_string(i), c_in, widths[i], 3, 1, div));
        detail += "conv (3x3, " + std::to_string(widths[i]) + ", stride 1) + BN + ReLU / ";
        c_in = widths[i];
    }
    s.detail = detail + "upsample(2)";
    return s;
}

// Matting decoder block: plain conv stack, no upsampling (unpool stages
// recover resolution), optional dilation.
LayerSpec md_block(const std::string& name, std::vector<int> widths, int in_c, int div,
                   int dil = 1) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::DecoderBlock;
    s.out_c = widths.back();
    s.out_div = div;
    int c_in = in_c;
    std::string detail;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const int pad = dil;  // 3x3 with matching dilation keeps the size
        s.convs.push_back(conv(name + ".conv" + std::to_string(i), c_in, widths[i], 3, pad, div,
                               true, dil));
        detail += "conv (3x3, " + std::to_string(widths[i]) +
                  (dil > 1 ? ", dilation " + std::to_string(dil) : ", stride 1") +
                  ") + BN + ReLU / ";
        c_in = widths[i];
    }
    s.detail = detail.substr(0, detail.size() - 3);
    return s;
}

std::vector<LayerSpec> make_spec() {
    std::vector<LayerSpec> spec;

    // --- encoder ---
    {
        LayerSpec e0;
        e0.name = "E0";
        e0.kind = LayerKind::ConvBlock;
        e0.out_c = 64;
        e0.out_div = 1;
        e0.convs.push_back(conv("E0.conv", 3, 64, 7, 3, 1));
        e0.detail = "conv (7x7, 64, stride 1, padding 3) + BN + ReLU";
        spec.push_back(e0);
    }
    spec.push_back(pool_block("M0", 64, 2));
    spec.push_back(pool_block("M1", 64, 4));
    spec.push_back(residual_stage("E1", 3, 64, 64, 4));
    spec.push_back(pool_block("M2", 64, 8));
    spec.push_back(residual_stage("E2", 4, 64, 128, 8));
    spec.push_back(pool_block("M3", 128, 16));
    spec.push_back(residual_stage("E3", 6, 128, 256, 16));
    spec.push_back(pool_block("M4", 256, 32));
    spec.push_back(residual_stage("E4", 3, 256, 512, 32));

    // --- semantic decoder ---
    {
        LayerSpec ppm;
        ppm.name = "PPM";
        ppm.kind = LayerKind::Pyramid;
        ppm.out_c = 512;
        ppm.out_div = 32;
        for (int scale : {1, 3, 5}) {
            ConvDesc d = conv("PPM.scale" + std::to_string(scale), 512, 128, 1, 0, 32);
            d.at_fixed = scale;
            ppm.convs.push_back(d);
        }
        ppm.convs.push_back(conv("PPM.fuse", 512 + 3 * 128, 512, 3, 1, 32));
        ppm.detail = "pyramid pooling (512, multiscale=1,3,5)";
        spec.push_back(ppm);
    }
    spec.push_back(sd_block("SD_4", {512, 512, 256}, 1024, 32, /*skip_out=*/0));
    spec.push_back(se_block("SE_4", 256, 16));
    spec.push_back(sd_block("SD_3", {256, 256, 128}, 512, 16, 256));
    spec.push_back(se_block("SE_3", 128, 8));
    spec.push_back(sd_block("SD_2", {128, 128, 64}, 256, 8, 128));
    spec.push_back(se_block("SE_2", 64, 4));
    spec.push_back(sd_block("SD_1", {64, 64, 64}, 128, 4, 64));
    spec.push_back(se_block("SE_1", 64, 2));
    spec.push_back(sd_block("SD_0", {64, 64}, 128, 2, 64));
    {
        LayerSpec spa;
        spa.name = "SPA";
        spa.kind = LayerKind::SpatialAttention;
        spa.out_c = 1;
        spa.out_div = 1;
        spa.convs.push_back(
            conv("SPA.conv", 2, 1, 7, 3, 1, /*relu=*/false, 1, /*bias=*/true, /*bn=*/false));
        spa.detail = "maxpool + avgpool + conv (7x7, 1, padding 3) + Sigmoid";
        spec.push_back(spa);
    }
    spec.push_back(se_block("SE_0", 64, 1));
    {
        LayerSpec f;
        f.name = "SD-final";
        f.kind = LayerKind::FinalConv;
        f.out_c = 3;
        f.out_div = 1;
        f.convs.push_back(
            conv("SD-final.conv", 64, 3, 3, 1, 1, /*relu=*/false, 1, /*bias=*/true, /*bn=*/false));
        f.detail = "conv (3x3, 3, stride 1, padding 1)";
        spec.push_back(f);
    }

    // --- matting decoder ---
    spec.push_back(md_block("MD_5", {512, 512, 512}, 512, 32, /*dil=*/2));
    spec.push_back(md_block("MD_4", {512, 512, 256}, 1024, 32));
    spec.push_back(unpool_block("MU_4", 256, 16));
    spec.push_back(md_block("MD_3", {256, 256, 128}, 512, 16));
    spec.push_back(unpool_block("MU_3", 128, 8));
    spec.push_back(md_block("MD_2", {128, 128, 64}, 256, 8));
    spec.push_back(unpool_block("MU_2", 64, 4));
    spec.push_back(md_block("MD_1", {64, 64, 64}, 128, 4));
    spec.push_back(unpool_block("MU_1", 64, 2));
    spec.push_back(unpool_block("MU_0", 64, 1));
    spec.push_back(md_block("MD_0", {64, 64}, 128, 1));
    {
        LayerSpec spar;
        spar.name = "SPAR";
        spar.kind = LayerKind::AttentionApply;
        spar.out_c = 64;
        spar.out_div = 1;
        spar.detail = "MD_0 + SPA x MD_0";
        spec.push_back(spar);
    }
    {
        LayerSpec f;
        f.name = "MD-final";
        f.kind = LayerKind::FinalConv;
        f.out_c = 1;
        f.out_div = 1;
        f.convs.push_back(
            conv("MD-final.conv", 64, 1, 3, 1, 1, /*relu=*/false, 1, /*bias=*/true, /*bn=*/false));
        f.detail = "conv (3x3, 1, stride 1, padding 1) + Sigmoid";
        spec.push_back(f);
    }
    {
        LayerSpec mf;
        mf.name = "MF";
        mf.kind = LayerKind::Fusion;
        mf.out_c = 1;
        mf.out_div = 1;
        mf.detail = "pixel-wise sum and multiplication";
        spec.push_back(mf);
    }
    return spec;
}

}  // namespace

const std::vector<LayerSpec>& build_network() {
    static const std::vector<LayerSpec> spec = make_spec();
    return spec;
}

std::vector<ParamInfo> parameter_manifest(const std::vector<LayerSpec>& spec) {
    std::vector<ParamInfo> out;
    for (const LayerSpec& layer : spec) {
        for (const ConvDesc& d : layer.convs) {
            out.push_back({d.name + ".weight", {d.out_c, d.in_c, d.k, d.k}, true});
            if (d.bias) out.push_back({d.name + ".bias", {d.out_c}, true});
            if (d.bn) {
                out.push_back({d.name + ".bn.gamma", {d.out_c}, true});
                out.push_back({d.name + ".bn.beta", {d.out_c}, true});
                out.push_back({d.name + ".bn.mean", {d.out_c}, false});
                out.push_back({d.name + ".bn.var", {d.out_c}, false});
            }
        }
        for (const LinearDesc& d : layer.linears) {
            out.push_back({d.name + ".weight", {d.out_f, d.in_f}, true});
            out.push_back({d.name + ".bias", {d.out_f}, true});
        }
    }
    return out;
}

const Param& WeightStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw DataError("weight store is missing tensor '" + name + "'");
    return it->second;
}

WeightStore init_weights(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    SplitMix64 rng(seed);
    WeightStore store;
    store.set_provenance("seeded(" + std::to_string(seed) + ")");
    for (const ParamInfo& info : parameter_manifest(spec)) {
        Param p;
        p.shape = info.shape;
        p.data.resize(static_cast<std::size_t>(p.count()));
        if (info.name.ends_with(".weight")) {
            std::int64_t fan_in = 1;
            for (std::size_t i = 1; i < info.shape.size(); ++i) fan_in *= info.shape[i];
            const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
            for (float& v : p.data) v = rng.next_uniform(-bound, bound);
        } else if (info.name.ends_with(".bn.gamma") || info.name.ends_with(".bn.var")) {
            std::fill(p.data.begin(), p.data.end(), 1.0f);
        } else {
            std::fill(p.data.begin(), p.data.end(), 0.0f);  // biases, beta, running mean
        }
        store.put(info.name, std::move(p));
    }
    return store;
}

std::uint64_t count_parameters(const WeightStore& store) {
    std::uint64_t total = 0;
    for (const auto& [name, p] : store.entries()) {
        if (name.ends_with(".bn.mean") || name.ends_with(".bn.var")) continue;
        total += static_cast<std::uint64_t>(p.count());
    }
    return total;
}

std::uint64_t count_macs(const std::vector<LayerSpec>& spec, int h, int w) {
    std::uint64_t total = 0;
    for (const LayerSpec& layer : spec) {
        for (const ConvDesc& d : layer.convs) {
            const std::uint64_t per_pixel =
                std::uint64_t(d.out_c) * d.in_c * d.k * d.k;
            const std::uint64_t pixels =
                d.at_fixed > 0 ? std::uint64_t(d.at_fixed) * d.at_fixed
                               : std::uint64_t(h / d.at_div) * std::uint64_t(w / d.at_div);
            total += per_pixel * pixels;
        }
        for (const LinearDesc& d : layer.linears)
            total += std::uint64_t(d.in_f) * d.out_f;
    }
    return total;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace {

Tensor param_tensor(const Param& p) {
    if (p.shape.size() != 4) throw DataError("expected a rank-4 weight tensor");
    Tensor t(p.shape[0], p.shape[1], p.shape[2], p.shape[3]);
    std::copy(p.data.begin(), p.data.end(), t.data());
    return t;
}

struct Runner {
    const WeightStore& store;
    const std::vector<LayerSpec>& spec;
    ShapeTrace* trace;
    std::map<std::string, const ConvDesc*> conv_by_name;
    std::map<std::string, const LayerSpec*> layer_by_name;

    Runner(const WeightStore& s, ShapeTrace* t) : store(s), spec(build_network()), trace(t) {
        for (const LayerSpec& layer : spec) {
            layer_by_name[layer.name] = &layer;
            for (const ConvDesc& d : layer.convs) conv_by_name[d.name] = &d;
        }
    }

    void record(const std::string& name, const Tensor& t) {
        if (trace) trace->emplace_back(name, t.shape());
    }

    Tensor apply_conv(const Tensor& x, const std::string& name) const {
        const ConvDesc& d = *conv_by_name.at(name);
        const Param& w = store.at(name + ".weight");
        if (w.shape != std::vector<int>{d.out_c, d.in_c, d.k, d.k})
            throw DataError("weight '" + name + "' has wrong shape");
        std::span<const float> bias;
        if (d.bias) bias = store.at(name + ".bias").data;
        Tensor y = conv2d(x, param_tensor(w), bias, d.stride, d.pad, d.dil);
        if (d.bn) {
            const Param& gamma = store.at(name + ".bn.gamma");
            const Param& beta = store.at(name + ".bn.beta");
            const Param& mean = store.at(name + ".bn.mean");
            const Param& var = store.at(name + ".bn.var");
            y = batchnorm_infer(y, mean.data, var.data, gamma.data, beta.data);
        }
        if (d.relu) y = activation(y, Activation::Relu);
        return y;
    }

    Tensor residual_stage(const Tensor& x, const std::string& name) const {
        const LayerSpec& layer = *layer_by_name.at(name);
        // convs come in (conv1, conv2[, down]) groups
        Tensor cur = x;
        for (std::size_t i = 0; i < layer.convs.size();) {
            const std::string base = layer.convs[i].name.substr(0, layer.convs[i].name.rfind('.'));
            Tensor y = apply_conv(cur, base + ".conv1");
            y = apply_conv(y, base + ".conv2");
            i += 2;
            Tensor shortcut = cur;
            if (i < layer.convs.size() && layer.convs[i].name == base + ".down") {
                shortcut = apply_conv(cur, base + ".down");
                ++i;
            }
            if (!(y.shape() == shortcut.shape()))
                throw DataError("residual shapes disagree in " + base);
            for (std::size_t j = 0; j < y.size(); ++j)
                y.data()[j] = std::max(0.0f, y.data()[j] + shortcut.data()[j]);
            cur = std::move(y);
        }
        return cur;
    }

    Tensor pyramid(const Tensor& e4) const {
        std::vector<Tensor> parts;
        parts.push_back(e4);
        for (int scale : {1, 3, 5}) {
            Tensor pooled = adaptive_avgpool(e4, scale, scale);
            Tensor reduced = apply_conv(pooled, "PPM.scale" + std::to_string(scale));
            parts.push_back(resize_bilinear(reduced, e4.h(), e4.w()));
        }
        const Tensor* ptrs[4] = {&parts[0], &parts[1], &parts[2], &parts[3]};
        return apply_conv(concat_channels(std::span<const Tensor* const>(ptrs, 4)), "PPM.fuse");
    }

    // Channel gates from global average pooling through the two-layer
    // bottleneck; returns the gated tensor.
    Tensor squeeze_excite(const Tensor& x, const std::string& name, Tensor* gates_out) const {
        const Param& w0 = store.at(name + ".fc0.weight");
        const Param& b0 = store.at(name + ".fc0.bias");
        const Param& w1 = store.at(name + ".fc1.weight");
        const Param& b1 = store.at(name + ".fc1.bias");
        const int hidden = w0.shape[0], c = w0.shape[1];
        if (c != x.c()) throw DataError(name + ": channel mismatch");

        Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            m0(w0.data.data(), hidden, c), m1(w1.data.data(), c, hidden);
        Eigen::Map<const Eigen::VectorXf> v0(b0.data.data(), hidden), v1(b1.data.data(), c);

        Tensor pooled = adaptive_avgpool(x, 1, 1);
        Tensor y(x.shape());
        if (gates_out) *gates_out = Tensor(x.n(), x.c(), 1, 1);
        for (int n = 0; n < x.n(); ++n) {
            Eigen::VectorXf squeeze(c);
            for (int ch = 0; ch < c; ++ch) squeeze[ch] = pooled.at(n, ch, 0, 0);
            Eigen::VectorXf hid = (m0 * squeeze + v0).cwiseMax(0.0f);
            Eigen::VectorXf gate = m1 * hid + v1;
            for (int ch = 0; ch < c; ++ch) {
                const float g = 1.0f / (1.0f + std::exp(-gate[ch]));
                if (gates_out) gates_out->at(n, ch, 0, 0) = g;
                const float* src = x.plane(n, ch);
                float* dst = y.plane(n, ch);
                for (std::size_t i = 0; i < x.plane_size(); ++i) dst[i] = src[i] * g;
            }
        }
        return y;
    }

    Tensor spatial_attention(const Tensor& d0) const {
        Tensor pooled(d0.n(), 2, d0.h(), d0.w());
        for (int n = 0; n < d0.n(); ++n) {
            float* mx = pooled.plane(n, 0);
            float* av = pooled.plane(n, 1);
            for (std::size_t i = 0; i < d0.plane_size(); ++i) {
                float best = d0.plane(n, 0)[i];
                double sum = 0.0;
                for (int c = 0; c < d0.c(); ++c) {
                    const float v = d0.plane(n, c)[i];
                    best = std::max(best, v);
                    sum += v;
                }
                mx[i] = best;
                av[i] = static_cast<float>(sum / d0.c());
            }
        }
        return activation(apply_conv(pooled, "SPA.conv"), Activation::Sigmoid);
    }

    // Semantic decoder block: optional pyramid-skip concat, conv stack, 2x up.
    Tensor sd_stage(const std::string& name, const Tensor& from_below, const Tensor* ppm) const {
        Tensor input = from_below;
        if (ppm) {
            Tensor skip = apply_conv(*ppm, name + ".skip");
            skip = resize_bilinear(skip, from_below.h(), from_below.w());
            input = concat_channels(skip, from_below);
        }
        const LayerSpec& layer = *layer_by_name.at(name);
        Tensor cur = std::move(input);
        for (const ConvDesc& d : layer.convs) {
            if (d.name.ends_with(".skip")) continue;
            cur = apply_conv(cur, d.name);
        }
        return upsample2x(cur, ResizeMode::Bilinear);
    }

    Tensor md_stage(const std::string& name, const Tensor& input) const {
        const LayerSpec& layer = *layer_by_name.at(name);
        Tensor cur = input;
        for (const ConvDesc& d : layer.convs) cur = apply_conv(cur, d.name);
        return cur;
    }
};

Tensor decode_unified(const Tensor& probs) {
    Tensor u(probs.n(), 1, probs.h(), probs.w());
    for (int n = 0; n < probs.n(); ++n) {
        float* dst = u.plane(n, 0);
        for (std::size_t i = 0; i < probs.plane_size(); ++i) {
            int best = 0;  // ties resolve to the smallest class
            float best_v = probs.plane(n, 0)[i];
            for (int c = 1; c < probs.c(); ++c)
                if (probs.plane(n, c)[i] > best_v) {
                    best_v = probs.plane(n, c)[i];
                    best = c;
                }
            dst[i] = best == 0 ? 0.0f : best == 1 ? 0.5f : 1.0f;
        }
    }
    return u;
}

int round_to_32(double v) { return static_cast<int>(std::lround(v / 32.0)) * 32; }

constexpr int kMinSide = 160;  // deepest feature map must fit the 5x5 pool

}  // namespace

std::pair<Tensor, Tensor> squeeze_excite_apply(const WeightStore& store, const std::string& name,
                                               const Tensor& x) {
    Runner run(store, nullptr);
    Tensor gates;
    Tensor gated = run.squeeze_excite(x, name, &gates);
    return {std::move(gates), std::move(gated)};
}

Tensor attention_residual(const Tensor& features, const Tensor& gate) {
    if (gate.c() != 1 || gate.n() != features.n() || gate.h() != features.h() ||
        gate.w() != features.w())
        throw std::invalid_argument("attention_residual: gate must be n x 1 x h x w matching the features");
    Tensor out(features.shape());
    for (int n = 0; n < features.n(); ++n) {
        const float* a = gate.plane(n, 0);
        for (int c = 0; c < features.c(); ++c) {
            const float* src = features.plane(n, c);
            float* dst = out.plane(n, c);
            for (std::size_t i = 0; i < features.plane_size(); ++i)
                dst[i] = src[i] + a[i] * src[i];
        }
    }
    return out;
}

NetworkOutputs forward(const WeightStore& store, const Tensor& image, ShapeTrace* trace) {
    if (image.c() != 3)
        throw std::invalid_argument("forward: expected a 3-channel image tensor");
    if (image.h() % 32 != 0 || image.w() % 32 != 0)
        throw std::invalid_argument("forward: input size " + std::to_string(image.h()) + "x" +
                                    std::to_string(image.w()) + " not divisible by 32");
    if (image.h() < kMinSide || image.w() < kMinSide)
        throw std::invalid_argument("forward: input must be at least " +
                                    std::to_string(kMinSide) + " pixels per side");

    Runner run(store, trace);

    // encoder
    Tensor e0 = run.apply_conv(image, "E0.conv");
    run.record("E0", e0);
    auto [m0, idx0] = maxpool2d_indexed(e0, 3, 2, 1);
    run.record("M0", m0);
    auto [m1, idx1] = maxpool2d_indexed(m0, 3, 2, 1);
    run.record("M1", m1);
    Tensor e1 = run.residual_stage(m1, "E1");
    run.record("E1", e1);
    auto [m2, idx2] = maxpool2d_indexed(e1, 3, 2, 1);
    run.record("M2", m2);
    Tensor e2 = run.residual_stage(m2, "E2");
    run.record("E2", e2);
    auto [m3, idx3] = maxpool2d_indexed(e2, 3, 2, 1);
    run.record("M3", m3);
    Tensor e3 = run.residual_stage(m3, "E3");
    run.record("E3", e3);
    auto [m4, idx4] = maxpool2d_indexed(e3, 3, 2, 1);
    run.record("M4", m4);
    Tensor e4 = run.residual_stage(m4, "E4");
    run.record("E4", e4);

    // semantic decoder
    Tensor ppm = run.pyramid(e4);
    run.record("PPM", ppm);
    Tensor d4 = run.sd_stage("SD_4", concat_channels(ppm, e4), nullptr);
    run.record("SD_4", d4);
    Tensor s4 = run.squeeze_excite(d4, "SE_4", nullptr);
    run.record("SE_4", s4);
    Tensor d3 = run.sd_stage("SD_3", s4, &ppm);
    run.record("SD_3", d3);
    Tensor s3 = run.squeeze_excite(d3, "SE_3", nullptr);
    run.record("SE_3", s3);
    Tensor d2 = run.sd_stage("SD_2", s3, &ppm);
    run.record("SD_2", d2);
    Tensor s2 = run.squeeze_excite(d2, "SE_2", nullptr);
    run.record("SE_2", s2);
    Tensor d1 = run.sd_stage("SD_1", s2, &ppm);
    run.record("SD_1", d1);
    Tensor s1 = run.squeeze_excite(d1, "SE_1", nullptr);
    run.record("SE_1", s1);
    Tensor d0 = run.sd_stage("SD_0", s1, &ppm);
    run.record("SD_0", d0);
    Tensor spa = run.spatial_attention(d0);
    run.record("SPA", spa);
    Tensor s0 = run.squeeze_excite(d0, "SE_0", nullptr);
    run.record("SE_0", s0);
    Tensor logits = run.apply_conv(s0, "SD-final.conv");
    run.record("SD-final", logits);
    Tensor probs = activation(logits, Activation::SoftmaxChannel);
    Tensor unified = decode_unified(probs);

    // matting decoder
    Tensor b5 = run.md_stage("MD_5", e4);
    run.record("MD_5", b5);
    Tensor md4 = run.md_stage("MD_4", concat_channels(b5, e4));
    run.record("MD_4", md4);
    Tensor u4 = max_unpool2d(md4, idx4, e3.h(), e3.w());
    run.record("MU_4", u4);
    Tensor md3 = run.md_stage("MD_3", concat_channels(u4, e3));
    run.record("MD_3", md3);
    Tensor u3 = max_unpool2d(md3, idx3, e2.h(), e2.w());
    run.record("MU_3", u3);
    Tensor md2 = run.md_stage("MD_2", concat_channels(u3, e2));
    run.record("MD_2", md2);
    Tensor u2 = max_unpool2d(md2, idx2, e1.h(), e1.w());
    run.record("MU_2", u2);
    Tensor md1 = run.md_stage("MD_1", concat_channels(u2, e1));
    run.record("MD_1", md1);
    Tensor u1 = max_unpool2d(md1, idx1, m0.h(), m0.w());
    run.record("MU_1", u1);
    Tensor u0 = max_unpool2d(u1, idx0, e0.h(), e0.w());
    run.record("MU_0", u0);
    Tensor md0 = run.md_stage("MD_0", concat_channels(u0, e0));
    run.record("MD_0", md0);

    Tensor guided = attention_residual(md0, spa);
    run.record("SPAR", guided);
    Tensor matting = activation(run.apply_conv(guided, "MD-final.conv"), Activation::Sigmoid);
    run.record("MD-final", matting);

    // fusion
    Tensor fused(matting.shape());
    for (int n = 0; n < matting.n(); ++n) {
        const Plane f = fuse(plane_of(unified, n, 0), plane_of(matting, n, 0));
        float* dst = fused.plane(n, 0);
        for (int y = 0; y < fused.h(); ++y)
            for (int x = 0; x < fused.w(); ++x) dst[std::size_t(y) * fused.w() + x] = f(y, x);
    }
    run.record("MF", fused);

    NetworkOutputs out;
    out.semantic_logits = std::move(logits);
    out.semantic_probs = std::move(probs);
    out.unified_pred = std::move(unified);
    out.matting_raw = std::move(matting);
    out.spatial_attention = std::move(spa);
    out.fused_alpha = std::move(fused);
    return out;
}

HybridResult hybrid_inference(const WeightStore& store, const Tensor& image, double scale_fine,
                              double scale_coarse) {
    if (image.n() != 1) throw std::invalid_argument("hybrid_inference: expected batch size 1");
    if (!(scale_fine > 0.0 && scale_fine <= 1.0 && scale_coarse > 0.0 && scale_coarse <= 1.0))
        throw std::invalid_argument("hybrid_inference: scales must be in (0, 1]");

    const int h = image.h(), w = image.w();
    auto scaled = [&](double s, const char* which) {
        const int sh = round_to_32(h * s), sw = round_to_32(w * s);
        if (sh < kMinSide || sw < kMinSide)
            throw DataError(std::string("image too small for ") + which + " scale (" +
                            std::to_string(sh) + "x" + std::to_string(sw) + " after rounding)");
        return std::pair<int, int>(sh, sw);
    };
    const auto [fh, fw] = scaled(scale_fine, "fine");
    const auto [ch, cw] = scaled(scale_coarse, "coarse");

    const NetworkOutputs fine = forward(store, resize_bilinear(image, fh, fw));
    // Degenerate case: both scales land on the same size, one run suffices.
    const bool same = fh == ch && fw == cw;
    const NetworkOutputs coarse = same ? NetworkOutputs{} : forward(store, resize_bilinear(image, ch, cw));
    const NetworkOutputs& sem = same ? fine : coarse;

    HybridResult r;
    r.unified = resize_bilinear(plane_of(sem.unified_pred, 0, 0), h, w);
    r.matting = resize_bilinear(plane_of(fine.matting_raw, 0, 0), h, w);
    r.attention = resize_bilinear(plane_of(fine.spatial_attention, 0, 0), h, w);
    r.alpha = fuse(r.unified, r.matting);
    return r;
}

}  // namespace matte
