#pragma once

#include <functional>

#include "gcanet/autodiff.hpp"
#include "gcanet/tensor.hpp"

namespace gcanet {

// Geometry of one 3D convolution. Kernel/stride/padding triples use the
// (x, y, z) notation; activations are (batch, channel, z, y, x).
struct ConvSpec {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    Tri3 kernel{1, 1, 1};
    Tri3 stride{1, 1, 1};
    Tri3 padding{0, 0, 0};
    bool has_bias = true;

    void validate() const;
    // trailing extents (z, y, x) -> output extents; throws if any < 1
    std::array<int64_t, 3> output_extents(std::array<int64_t, 3> in_zyx) const;
    int64_t parameter_count() const;
};

// Cross-correlation (no kernel flip) with zero padding.
// x: [N, Cin, Z, Y, X]; weight: [Cout, Cin, kz, ky, kx]; bias: [Cout] or undefined.
Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias = {});

// Windowed maximum; padded positions do not participate. Backward routes the
// gradient to the argmax position (first occurrence in z,y,x scan order).
Tensor maxpool3d(const Tensor& x, Tri3 kernel, Tri3 stride, Tri3 padding = {0, 0, 0});

enum class Mode { train, eval };

// Train mode normalizes by batch statistics and updates the running stats
// in place; eval mode normalizes by the running stats.
Tensor batchnorm3d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var, Mode mode,
                   double momentum = 0.1, double eps = 1e-5);

enum class Activation { relu, leaky_relu, sigmoid };

Tensor activation(const Tensor& x, Activation kind, double slope = 0.2);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor sigmoid(const Tensor& x);

// Integer upsampling with the half-voxel-center convention:
// source = (out + 0.5) / factor - 0.5, clamped to the borders.
Tensor upsample_trilinear(const Tensor& x, Tri3 factor);

enum class CombineKind { add, concat_channels };

Tensor add(const Tensor& a, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor combine(const Tensor& a, const Tensor& b, CombineKind kind);

enum class ReduceKind { mean, sum };

// Full reduction to a rank-0 tensor, pairwise (tree) summation.
Tensor reduce(const Tensor& x, ReduceKind kind);
Tensor reduce_sum(const Tensor& x);
Tensor reduce_mean(const Tensor& x);

Tensor scale(const Tensor& x, double c);

// [N, ...] -> [N]: mean over all non-batch axes.
Tensor mean_per_batch(const Tensor& x);

Tensor multiply(const Tensor& a, const Tensor& b);  // elementwise

// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
// for scalar-valued f, central differences with step h. x must be f64.
// Throws ValueError if any value involved is non-finite.
double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                 double h = 1e-5);

void set_num_threads(int n);  // 0 = hardware default
int num_threads();

}  // namespace gcanet
