#include "gcanet/nets.hpp"

#include <cmath>

namespace gcanet {

int64_t ParamDict::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
}

int64_t ParamDict::parameter_count(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& [name, t] : params)
        if (name.rfind(prefix, 0) == 0) n += t.numel();
    return n;
}

void ParamDict::zero_grads() {
    for (auto& [name, t] : params) {
        Tensor p = t;
        p.zero_grad();
    }
}

int64_t count_parameters(const ParamDict& pd) { return pd.parameter_count(); }

FreezeGuard::FreezeGuard(ParamDict& pd) {
    saved_.reserve(pd.params.size());
    for (auto& [name, t] : pd.params) {
        Tensor p = t;
        saved_.emplace_back(p, p.requires_grad());
        p.set_requires_grad(false);
    }
}

FreezeGuard::~FreezeGuard() {
    for (auto& [t, rg] : saved_) {
        Tensor p = t;
        p.set_requires_grad(rg);
    }
}

void ConvUnit::init(Rng& rng, DType dt) {
    spec.validate();
    const int64_t fan_in =
        spec.in_channels * spec.kernel.x * spec.kernel.y * spec.kernel.z;
    const double bound = std::sqrt(6.0 / double(fan_in));
    w = Tensor::uniform({spec.out_channels, spec.in_channels, spec.kernel.z,
                         spec.kernel.y, spec.kernel.x},
                        rng, -bound, bound, dt)
            .set_requires_grad(true);
    if (spec.has_bias)
        b = Tensor::zeros({spec.out_channels}, dt).set_requires_grad(true);
}

void ConvUnit::init_zero(DType dt) {
    spec.validate();
    w = Tensor::zeros({spec.out_channels, spec.in_channels, spec.kernel.z,
                       spec.kernel.y, spec.kernel.x},
                      dt)
            .set_requires_grad(true);
    if (spec.has_bias)
        b = Tensor::zeros({spec.out_channels}, dt).set_requires_grad(true);
}

Tensor ConvUnit::forward(const Tensor& x) const { return conv3d(x, spec, w, b); }

void ConvUnit::register_into(ParamDict& pd, const std::string& name) {
    pd.params[name + ".weight"] = w;
    if (spec.has_bias) pd.params[name + ".bias"] = b;
}

void BnUnit::init(int64_t ch, DType dt) {
    channels = ch;
    gamma = Tensor::full({ch}, 1.0, dt).set_requires_grad(true);
    beta = Tensor::zeros({ch}, dt).set_requires_grad(true);
    run_mean = Tensor::zeros({ch}, dt);
    run_var = Tensor::full({ch}, 1.0, dt);
}

Tensor BnUnit::forward(const Tensor& x, Mode mode) {
    return batchnorm3d(x, gamma, beta, run_mean, run_var, mode, momentum, eps);
}

void BnUnit::register_into(ParamDict& pd, const std::string& name) {
    pd.params[name + ".gamma"] = gamma;
    pd.params[name + ".beta"] = beta;
    pd.state[name + ".running_mean"] = run_mean;
    pd.state[name + ".running_var"] = run_var;
}

void GcBlock::build(const GCBlockSpec& s, Rng& rng, DType dt) {
    if (s.kernel.x % 2 == 0 || s.kernel.y % 2 == 0 || s.kernel.z % 2 == 0)
        throw ValueError("gc block: kernel extents must be odd");
    spec = s;
    const int64_t in = s.in_channels, m = s.mid_channels;
    const Tri3 k = s.kernel;
    auto conv = [&](int64_t ci, int64_t co, Tri3 kernel) {
        ConvSpec cs;
        cs.in_channels = ci;
        cs.out_channels = co;
        cs.kernel = kernel;
        cs.padding = Tri3{(kernel.x - 1) / 2, (kernel.y - 1) / 2, (kernel.z - 1) / 2};
        cs.has_bias = true;
        return cs;
    };
    a1.spec = conv(in, m, {k.x, 1, 1});
    a2.spec = conv(m, m, {1, k.y, 1});
    a3.spec = conv(m, m, {1, 1, k.z});
    b1.spec = conv(in, m, {1, 1, k.z});
    b2.spec = conv(m, m, {1, k.y, 1});
    b3.spec = conv(m, m, {k.x, 1, 1});
    proj.spec = conv(in, m, {1, 1, 1});
    for (ConvUnit* u : {&a1, &a2, &a3, &b1, &b2, &b3, &proj}) u->init(rng, dt);
}

Tensor GcBlock::forward(const Tensor& x) const {
    Tensor pa = a3.forward(a2.forward(a1.forward(x)));
    Tensor pb = b3.forward(b2.forward(b1.forward(x)));
    return add(add(pa, pb), proj.forward(x));
}

void GcBlock::register_into(ParamDict& pd, const std::string& name) {
    a1.register_into(pd, name + ".a1");
    a2.register_into(pd, name + ".a2");
    a3.register_into(pd, name + ".a3");
    b1.register_into(pd, name + ".b1");
    b2.register_into(pd, name + ".b2");
    b3.register_into(pd, name + ".b3");
    proj.register_into(pd, name + ".proj");
}

void BrBlock::build(int64_t ch, Rng& rng, DType dt) {
    channels = ch;
    c1.spec = ConvSpec{ch, ch, Tri3{3, 3, 1}, Tri3{1, 1, 1}, Tri3{1, 1, 0}, true};
    c2.spec = ConvSpec{ch, ch, Tri3{1, 1, 3}, Tri3{1, 1, 1}, Tri3{0, 0, 1}, true};
    c1.init(rng, dt);
    c2.init(rng, dt);
}

Tensor BrBlock::forward(const Tensor& x) const {
    return add(x, c2.forward(relu(c1.forward(x))));
}

void BrBlock::register_into(ParamDict& pd, const std::string& name) {
    c1.register_into(pd, name + ".conv1");
    c2.register_into(pd, name + ".conv2");
}

void Bottleneck::build(int64_t in_ch, int64_t width, int64_t out_ch, Tri3 stride,
                       Rng& rng, DType dt) {
    conv1.spec = ConvSpec{in_ch, width, Tri3{1, 1, 1}, Tri3{1, 1, 1}, Tri3{0, 0, 0},
                          false};
    conv2.spec = ConvSpec{width, width, Tri3{3, 3, 1}, stride, Tri3{1, 1, 0}, false};
    conv3.spec = ConvSpec{width, out_ch, Tri3{1, 1, 1}, Tri3{1, 1, 1}, Tri3{0, 0, 0},
                          false};
    has_down = in_ch != out_ch || stride.x != 1 || stride.y != 1 || stride.z != 1;
    conv1.init(rng, dt);
    bn1.init(width, dt);
    conv2.init(rng, dt);
    bn2.init(width, dt);
    conv3.init(rng, dt);
    bn3.init(out_ch, dt);
    if (has_down) {
        down.spec = ConvSpec{in_ch, out_ch, Tri3{1, 1, 1}, stride, Tri3{0, 0, 0}, false};
        down.init(rng, dt);
        down_bn.init(out_ch, dt);
    }
}

Tensor Bottleneck::forward(const Tensor& x, Mode mode) {
    Tensor h = relu(bn1.forward(conv1.forward(x), mode));
    h = relu(bn2.forward(conv2.forward(h), mode));
    h = bn3.forward(conv3.forward(h), mode);
    Tensor sc = has_down ? down_bn.forward(down.forward(x), mode) : x;
    return relu(add(h, sc));
}

void Bottleneck::register_into(ParamDict& pd, const std::string& name) {
    conv1.register_into(pd, name + ".conv1");
    bn1.register_into(pd, name + ".bn1");
    conv2.register_into(pd, name + ".conv2");
    bn2.register_into(pd, name + ".bn2");
    conv3.register_into(pd, name + ".conv3");
    bn3.register_into(pd, name + ".bn3");
    if (has_down) {
        down.register_into(pd, name + ".down");
        down_bn.register_into(pd, name + ".down_bn");
    }
}

const char* preset_name(Preset p) { return p == Preset::paper ? "paper" : "tiny"; }

Preset preset_from_name(const std::string& s) {
    if (s == "paper") return Preset::paper;
    if (s == "tiny") return Preset::tiny;
    throw ValueError("unknown preset '" + s + "' (expected paper or tiny)");
}

std::array<Tensor, 4> Generator::encoder_forward(const Tensor& x, Mode mode) {
    if (x.rank() != 5 || x.shape()[1] != 1)
        throw ShapeError("generator: input must be [N,1,Z,Y,X]");
    const int64_t Z = x.shape()[2], Y = x.shape()[3], X = x.shape()[4];
    if (Z % 8 != 0 || Y % 32 != 0 || X % 32 != 0)
        throw ShapeError("generator: extents must be divisible by (8,32,32) in (z,y,x), got " +
                         shape_str(x.shape()));
    Tensor h = relu(bn1.forward(conv1.forward(x), mode));
    h = maxpool3d(h, Tri3{3, 3, 1}, Tri3{2, 2, 1}, Tri3{1, 1, 0});
    std::array<Tensor, 4> feats;
    for (size_t s = 0; s < stages.size(); ++s) {
        for (auto& block : stages[s]) h = block.forward(h, mode);
        feats[s] = h;
    }
    return feats;
}

Tensor Generator::forward(const Tensor& x, Mode mode) {
    auto feats = encoder_forward(x, mode);
    std::array<Tensor, 4> d;
    for (size_t s = 0; s < 4; ++s) d[s] = br_stage[s].forward(gc[s].forward(feats[s]));
    Tensor p = d[3];
    p = br_fuse[2].forward(add(upsample_trilinear(p, Tri3{2, 2, 2}), d[2]));
    p = br_fuse[1].forward(add(upsample_trilinear(p, Tri3{2, 2, 2}), d[1]));
    p = br_fuse[0].forward(add(upsample_trilinear(p, Tri3{2, 2, 2}), d[0]));
    p = br_up[0].forward(upsample_trilinear(p, Tri3{2, 2, 1}));
    p = br_up[1].forward(upsample_trilinear(p, Tri3{2, 2, 1}));
    return sigmoid(final_conv.forward(p));
}

int64_t Generator::parameter_count() const { return dict.parameter_count(); }

int64_t Generator::encoder_parameter_count() const {
    return dict.parameter_count("encoder.");
}

int64_t Generator::encoder_conv_layer_count() const {
    int64_t n = 1;  // conv1
    for (const auto& stage : stages) {
        n += int64_t(stage.size()) * 3;
        for (const auto& block : stage) n += block.has_down ? 1 : 0;
    }
    return n;
}

int64_t Generator::conv_layer_count() const {
    int64_t n = encoder_conv_layer_count();
    n += 4 * GcBlock::conv_layers;
    n += (4 + 3 + 2) * BrBlock::conv_layers;
    n += 1;  // final 1x1x1
    return n;
}

Generator build_generator(Preset preset, Tri3 gc_kernel, uint64_t seed, DType dt) {
    if (gc_kernel.x % 2 == 0 || gc_kernel.y % 2 == 0 || gc_kernel.z % 2 == 0)
        throw ValueError("build_generator: gc kernel extents must be odd");
    Generator g;
    g.preset = preset;
    g.gc_kernel = gc_kernel;
    g.dtype = dt;
    const int64_t div = preset == Preset::paper ? 1 : 8;
    const int64_t c1 = 64 / div;
    const std::array<int64_t, 4> widths{64 / div, 128 / div, 256 / div, 512 / div};
    const std::array<int64_t, 4> outs{256 / div, 512 / div, 1024 / div, 2048 / div};
    const std::array<int64_t, 4> blocks{3, 4, 6, 3};
    g.decoder_width = 32 / (preset == Preset::paper ? 1 : 4);

    Rng rng(seed);
    g.conv1.spec = ConvSpec{1, c1, Tri3{7, 7, 3}, Tri3{2, 2, 1}, Tri3{3, 3, 1}, false};
    g.conv1.init(rng, dt);
    g.bn1.init(c1, dt);

    int64_t in_ch = c1;
    g.stages.resize(4);
    for (size_t s = 0; s < 4; ++s) {
        // z resolution kept through res2; halved from res3 on
        const Tri3 first_stride = s == 0 ? Tri3{1, 1, 1} : Tri3{2, 2, 2};
        g.stages[s].resize(size_t(blocks[s]));
        for (int64_t i = 0; i < blocks[s]; ++i) {
            const Tri3 stride = i == 0 ? first_stride : Tri3{1, 1, 1};
            g.stages[s][size_t(i)].build(in_ch, widths[s], outs[s], stride, rng, dt);
            in_ch = outs[s];
        }
    }

    for (size_t s = 0; s < 4; ++s) {
        GCBlockSpec gs{outs[s], g.decoder_width, gc_kernel};
        g.gc[s].build(gs, rng, dt);
        g.br_stage[s].build(g.decoder_width, rng, dt);
    }
    for (auto& br : g.br_fuse) br.build(g.decoder_width, rng, dt);
    for (auto& br : g.br_up) br.build(g.decoder_width, rng, dt);
    g.final_conv.spec = ConvSpec{g.decoder_width, 1, Tri3{1, 1, 1}, Tri3{1, 1, 1},
                                 Tri3{0, 0, 0}, true};
    g.final_conv.init(rng, dt);

    g.conv1.register_into(g.dict, "encoder.conv1");
    g.bn1.register_into(g.dict, "encoder.bn1");
    for (size_t s = 0; s < 4; ++s)
        for (size_t i = 0; i < g.stages[s].size(); ++i)
            g.stages[s][i].register_into(g.dict, "encoder.res" + std::to_string(s + 2) +
                                                     ".block" + std::to_string(i));
    for (size_t s = 0; s < 4; ++s) {
        g.gc[s].register_into(g.dict, "decoder.gc" + std::to_string(s + 2));
        g.br_stage[s].register_into(g.dict, "decoder.br" + std::to_string(s + 2));
    }
    for (size_t i = 0; i < 3; ++i)
        g.br_fuse[i].register_into(g.dict, "decoder.fuse" + std::to_string(i + 2));
    for (size_t i = 0; i < 2; ++i)
        g.br_up[i].register_into(g.dict, "decoder.up" + std::to_string(i));
    g.final_conv.register_into(g.dict, "decoder.final");
    return g;
}

Tensor Discriminator::forward(const Tensor& seg_or_gt, const Tensor& image) {
    if (seg_or_gt.shape() != image.shape())
        throw ShapeError("discriminator: input pair shapes differ");
    Tensor h = concat_channels(seg_or_gt, image);
    for (size_t i = 0; i < 5; ++i) h = leaky_relu(convs[i].forward(h), 0.2);
    h = convs[5].forward(h);
    return mean_per_batch(h);
}

int64_t Discriminator::parameter_count() const { return dict.parameter_count(); }

Discriminator build_discriminator(Preset preset, uint64_t seed, DType dt) {
    Discriminator d;
    d.preset = preset;
    d.dtype = dt;
    const int64_t div = preset == Preset::paper ? 1 : 8;
    const std::array<int64_t, 5> ch{64 / div, 128 / div, 256 / div, 512 / div,
                                    512 / div};
    Rng rng(seed);
    int64_t in_ch = 2;
    for (size_t i = 0; i < 5; ++i) {
        d.convs[i].spec = ConvSpec{in_ch, ch[i], Tri3{3, 3, 3}, Tri3{2, 2, 2},
                                   Tri3{1, 1, 1}, true};
        d.convs[i].init(rng, dt);
        in_ch = ch[i];
    }
    d.convs[5].spec = ConvSpec{in_ch, 1, Tri3{1, 1, 1}, Tri3{1, 1, 1}, Tri3{0, 0, 0},
                               true};
    // zero-initialized head keeps fresh-model logits at exactly zero
    d.convs[5].init_zero(dt);
    for (size_t i = 0; i < 6; ++i)
        d.convs[i].register_into(d.dict, "conv" + std::to_string(i + 1));
    return d;
}

}  // namespace gcanet
