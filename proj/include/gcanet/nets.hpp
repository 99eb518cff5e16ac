#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "gcanet/ops.hpp"
#include "gcanet/rng.hpp"

namespace gcanet {

// Named views over a model's tensors. params are trainable; state carries
// batch-norm running statistics. The views alias the layer tensors.
struct ParamDict {
    std::map<std::string, Tensor> params;
    std::map<std::string, Tensor> state;

    int64_t parameter_count() const;
    int64_t parameter_count(const std::string& prefix) const;
    void zero_grads();
};

int64_t count_parameters(const ParamDict& pd);

// Temporarily clears requires_grad on every parameter; restores on scope exit.
class FreezeGuard {
public:
    explicit FreezeGuard(ParamDict& pd);
    ~FreezeGuard();
    FreezeGuard(const FreezeGuard&) = delete;

private:
    std::vector<std::pair<Tensor, bool>> saved_;
};

struct ConvUnit {
    ConvSpec spec;
    Tensor w, b;

    void init(Rng& rng, DType dt);  // He-uniform weights, zero bias
    void init_zero(DType dt);
    Tensor forward(const Tensor& x) const;
    void register_into(ParamDict& pd, const std::string& name);
};

struct BnUnit {
    int64_t channels = 0;
    double momentum = 0.1;
    double eps = 1e-5;
    Tensor gamma, beta, run_mean, run_var;

    void init(int64_t ch, DType dt);
    Tensor forward(const Tensor& x, Mode mode);
    void register_into(ParamDict& pd, const std::string& name);
};

struct GCBlockSpec {
    int64_t in_channels = 0;
    int64_t mid_channels = 0;
    Tri3 kernel{7, 7, 3};
};

// Large effective kernel as two separable branches, (x,1,1)->(1,y,1)->(1,1,z)
// and (1,1,z)->(1,y,1)->(x,1,1), plus a 1x1x1 projection of the input;
// the three paths are summed.
struct GcBlock {
    GCBlockSpec spec;
    ConvUnit a1, a2, a3, b1, b2, b3, proj;

    void build(const GCBlockSpec& s, Rng& rng, DType dt);
    Tensor forward(const Tensor& x) const;
    void register_into(ParamDict& pd, const std::string& name);
    static constexpr int64_t conv_layers = 7;
};

// Boundary refinement: x + conv1x1x3(relu(conv3x3x1(x))); shape preserving.
struct BrBlock {
    int64_t channels = 0;
    ConvUnit c1, c2;

    void build(int64_t ch, Rng& rng, DType dt);
    Tensor forward(const Tensor& x) const;
    void register_into(ParamDict& pd, const std::string& name);
    static constexpr int64_t conv_layers = 2;
};

// ResNet v1.5 bottleneck with 3x3x1 spatial conv (stride on conv2).
struct Bottleneck {
    ConvUnit conv1, conv2, conv3;
    BnUnit bn1, bn2, bn3;
    bool has_down = false;
    ConvUnit down;
    BnUnit down_bn;

    void build(int64_t in_ch, int64_t width, int64_t out_ch, Tri3 stride, Rng& rng,
               DType dt);
    Tensor forward(const Tensor& x, Mode mode);
    void register_into(ParamDict& pd, const std::string& name);
};

enum class Preset { paper, tiny };

const char* preset_name(Preset p);
Preset preset_from_name(const std::string& s);

// Encoder-decoder segmentation network: 3D ResNet-50 encoder (all kernels
// kz=1 except the 7x7x3 first conv) and a GC/BR decoder with trilinear
// upsampling fusion and a final 1x1x1 conv + sigmoid.
class Generator {
public:
    Preset preset = Preset::tiny;
    Tri3 gc_kernel{7, 7, 3};
    DType dtype = DType::f32;
    int64_t decoder_width = 8;

    ConvUnit conv1;
    BnUnit bn1;
    std::vector<std::vector<Bottleneck>> stages;  // res2..res5
    std::array<GcBlock, 4> gc;
    std::array<BrBlock, 4> br_stage;
    std::array<BrBlock, 3> br_fuse;  // at res4, res3, res2 scales
    std::array<BrBlock, 2> br_up;    // the two (2,2,1) steps to full scale
    ConvUnit final_conv;

    ParamDict dict;

    // input [N,1,Z,Y,X]; Z % 8 == 0, Y % 32 == 0, X % 32 == 0
    Tensor forward(const Tensor& x, Mode mode);
    std::array<Tensor, 4> encoder_forward(const Tensor& x, Mode mode);

    int64_t parameter_count() const;
    int64_t encoder_parameter_count() const;
    int64_t conv_layer_count() const;
    int64_t encoder_conv_layer_count() const;
};

// Six-conv classifier: five 3x3x3 stride-2 convs with leaky-relu(0.2), a
// final 1x1x1 to one channel, then global mean pooling to one logit per item.
class Discriminator {
public:
    Preset preset = Preset::tiny;
    DType dtype = DType::f32;
    std::array<ConvUnit, 6> convs;
    ParamDict dict;

    // seg_or_gt and image are [N,1,Z,Y,X]; returns [N] logits
    Tensor forward(const Tensor& seg_or_gt, const Tensor& image);

    int64_t parameter_count() const;
    static constexpr int64_t conv_layer_count() { return 6; }
};

Generator build_generator(Preset preset, Tri3 gc_kernel, uint64_t seed,
                          DType dt = DType::f32);
Discriminator build_discriminator(Preset preset, uint64_t seed, DType dt = DType::f32);

}  // namespace gcanet
