// Reference implementations used only by the tests. Each one is written as
// plainly as possible, independent of the library's optimized paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcanet/ops.hpp"
#include "gcanet/tensor.hpp"

namespace oracle {

using gcanet::ConvSpec;
using gcanet::Tensor;
using gcanet::Tri3;

// Naive loop-nest cross-correlation, accumulating in double.
inline Tensor conv3d(const Tensor& x, const ConvSpec& s, const Tensor& w,
                     const Tensor& b = {}) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], Ci = xs[1], Z = xs[2], Y = xs[3], X = xs[4];
    const int64_t Co = s.out_channels;
    const int64_t Zo = (Z + 2 * s.padding.z - s.kernel.z) / s.stride.z + 1;
    const int64_t Yo = (Y + 2 * s.padding.y - s.kernel.y) / s.stride.y + 1;
    const int64_t Xo = (X + 2 * s.padding.x - s.kernel.x) / s.stride.x + 1;
    Tensor out = Tensor::zeros({N, Co, Zo, Yo, Xo}, x.dtype());
    int64_t oi = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t zo = 0; zo < Zo; ++zo)
                for (int64_t yo = 0; yo < Yo; ++yo)
                    for (int64_t xo = 0; xo < Xo; ++xo, ++oi) {
                        double acc = b.defined() ? b.value_at(co) : 0.0;
                        for (int64_t ci = 0; ci < Ci; ++ci)
                            for (int64_t dz = 0; dz < s.kernel.z; ++dz)
                                for (int64_t dy = 0; dy < s.kernel.y; ++dy)
                                    for (int64_t dx = 0; dx < s.kernel.x; ++dx) {
                                        const int64_t zi = zo * s.stride.z - s.padding.z + dz;
                                        const int64_t yi = yo * s.stride.y - s.padding.y + dy;
                                        const int64_t xi = xo * s.stride.x - s.padding.x + dx;
                                        if (zi < 0 || zi >= Z || yi < 0 || yi >= Y ||
                                            xi < 0 || xi >= X)
                                            continue;
                                        const int64_t wi =
                                            (((co * Ci + ci) * s.kernel.z + dz) * s.kernel.y +
                                             dy) * s.kernel.x + dx;
                                        const int64_t ii =
                                            (((n * Ci + ci) * Z + zi) * Y + yi) * X + xi;
                                        acc += w.value_at(wi) * x.value_at(ii);
                                    }
                        out.set_value_at(oi, acc);
                    }
    return out;
}

// Naive windowed maximum with zero-padding positions excluded.
inline Tensor maxpool3d(const Tensor& x, Tri3 k, Tri3 st, Tri3 p) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], Z = xs[2], Y = xs[3], X = xs[4];
    const int64_t Zo = (Z + 2 * p.z - k.z) / st.z + 1;
    const int64_t Yo = (Y + 2 * p.y - k.y) / st.y + 1;
    const int64_t Xo = (X + 2 * p.x - k.x) / st.x + 1;
    Tensor out = Tensor::zeros({N, C, Zo, Yo, Xo}, x.dtype());
    int64_t oi = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t zo = 0; zo < Zo; ++zo)
                for (int64_t yo = 0; yo < Yo; ++yo)
                    for (int64_t xo = 0; xo < Xo; ++xo, ++oi) {
                        double best = 0.0;
                        bool any = false;
                        for (int64_t dz = 0; dz < k.z; ++dz)
                            for (int64_t dy = 0; dy < k.y; ++dy)
                                for (int64_t dx = 0; dx < k.x; ++dx) {
                                    const int64_t zi = zo * st.z - p.z + dz;
                                    const int64_t yi = yo * st.y - p.y + dy;
                                    const int64_t xi = xo * st.x - p.x + dx;
                                    if (zi < 0 || zi >= Z || yi < 0 || yi >= Y ||
                                        xi < 0 || xi >= X)
                                        continue;
                                    const double v = x.value_at(
                                        (((n * C + c) * Z + zi) * Y + yi) * X + xi);
                                    if (!any || v > best) {
                                        best = v;
                                        any = true;
                                    }
                                }
                        out.set_value_at(oi, best);
                    }
    return out;
}

// Plain serial f64 summation.
inline double naive_sum(const Tensor& x) {
    double s = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) s += x.value_at(i);
    return s;
}

// Per-voxel scalar loop of the weighted cross-entropy.
inline double weighted_bce(const Tensor& p, const Tensor& y, double w_fg, double w_bg) {
    double s = 0.0;
    for (int64_t i = 0; i < p.numel(); ++i) {
        const double pc = std::min(1.0 - 1e-7, std::max(1e-7, p.value_at(i)));
        const double yv = y.value_at(i);
        s += -(w_fg * yv * std::log(pc) + w_bg * (1.0 - yv) * std::log(1.0 - pc));
    }
    return s / double(p.numel());
}

// Scalar Adam (classic, coupled weight decay, bias correction).
struct ScalarAdam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, wd = 1e-6;
    double m = 0.0, v = 0.0;
    int64_t t = 0;

    double step(double theta, double grad) {
        ++t;
        const double g = grad + wd * theta;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        const double mhat = m / (1.0 - std::pow(beta1, double(t)));
        const double vhat = v / (1.0 - std::pow(beta2, double(t)));
        return theta - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

}  // namespace oracle
