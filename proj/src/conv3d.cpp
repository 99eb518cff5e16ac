#include <omp.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "gcanet/ops.hpp"
#include "gemm.hpp"

namespace gcanet {

void ConvSpec::validate() const {
    if (in_channels < 1 || out_channels < 1)
        throw ShapeError("conv spec: channel counts must be positive");
    if (kernel.x < 1 || kernel.y < 1 || kernel.z < 1)
        throw ShapeError("conv spec: kernel extents must be positive");
    if (stride.x < 1 || stride.y < 1 || stride.z < 1)
        throw ShapeError("conv spec: strides must be positive");
    if (padding.x < 0 || padding.y < 0 || padding.z < 0)
        throw ShapeError("conv spec: padding must be non-negative");
}

static int64_t out_extent(int64_t in, int64_t p, int64_t k, int64_t s) {
    return (in + 2 * p - k) / s + 1;
}

std::array<int64_t, 3> ConvSpec::output_extents(std::array<int64_t, 3> in_zyx) const {
    std::array<int64_t, 3> o{out_extent(in_zyx[0], padding.z, kernel.z, stride.z),
                             out_extent(in_zyx[1], padding.y, kernel.y, stride.y),
                             out_extent(in_zyx[2], padding.x, kernel.x, stride.x)};
    if (in_zyx[0] + 2 * padding.z < kernel.z || in_zyx[1] + 2 * padding.y < kernel.y ||
        in_zyx[2] + 2 * padding.x < kernel.x || o[0] < 1 || o[1] < 1 || o[2] < 1)
        throw ShapeError("conv spec: output extent < 1 for input " +
                         shape_str({in_zyx[0], in_zyx[1], in_zyx[2]}));
    return o;
}

int64_t ConvSpec::parameter_count() const {
    return kernel.x * kernel.y * kernel.z * in_channels * out_channels +
           (has_bias ? out_channels : 0);
}

namespace {

struct ConvGeom {
    int64_t N, Cin, Z, Y, X;
    int64_t Cout, kz, ky, kx;
    int64_t sz, sy, sx, pz, py, px;
    int64_t Zo, Yo, Xo;

    int64_t patch() const { return Cin * kz * ky * kx; }
    int64_t in_spatial() const { return Z * Y * X; }
    int64_t out_spatial() const { return Zo * Yo * Xo; }
    int64_t slab() const { return Yo * Xo; }
    bool pointwise() const {
        return kz == 1 && ky == 1 && kx == 1 && sz == 1 && sy == 1 && sx == 1 &&
               pz == 0 && py == 0 && px == 0;
    }
};

ConvGeom resolve_geometry(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                          const Tensor& bias) {
    spec.validate();
    if (x.rank() != 5)
        throw ShapeError("conv3d: input must be [N,C,Z,Y,X], got " + shape_str(x.shape()));
    ConvGeom g{};
    g.N = x.shape()[0];
    g.Cin = x.shape()[1];
    g.Z = x.shape()[2];
    g.Y = x.shape()[3];
    g.X = x.shape()[4];
    if (g.Cin != spec.in_channels)
        throw ShapeError("conv3d: input has " + std::to_string(g.Cin) +
                         " channels, spec expects " + std::to_string(spec.in_channels));
    Shape expect_w{spec.out_channels, spec.in_channels, spec.kernel.z, spec.kernel.y,
                   spec.kernel.x};
    if (weight.shape() != expect_w)
        throw ShapeError("conv3d: weight shape " + shape_str(weight.shape()) +
                         ", expected " + shape_str(expect_w));
    if (weight.dtype() != x.dtype()) throw ShapeError("conv3d: weight dtype mismatch");
    if (spec.has_bias) {
        if (!bias.defined() || bias.shape() != Shape{spec.out_channels})
            throw ShapeError("conv3d: bias must be [Cout]");
        if (bias.dtype() != x.dtype()) throw ShapeError("conv3d: bias dtype mismatch");
    } else if (bias.defined()) {
        throw ShapeError("conv3d: bias given but spec.has_bias is false");
    }
    g.Cout = spec.out_channels;
    g.kz = spec.kernel.z;
    g.ky = spec.kernel.y;
    g.kx = spec.kernel.x;
    g.sz = spec.stride.z;
    g.sy = spec.stride.y;
    g.sx = spec.stride.x;
    g.pz = spec.padding.z;
    g.py = spec.padding.y;
    g.px = spec.padding.x;
    auto o = spec.output_extents({g.Z, g.Y, g.X});
    g.Zo = o[0];
    g.Yo = o[1];
    g.Xo = o[2];
    return g;
}

// One z-slab of the im2col matrix: col[patch x (Yo*Xo)] for output slice zo.
// Row order matches the weight layout (ci, dz, dy, dx).
template <typename T>
void im2col_slab(const T* xn, const ConvGeom& g, int64_t zo, T* col) {
    const int64_t S = g.slab();
    int64_t r = 0;
    for (int64_t ci = 0; ci < g.Cin; ++ci) {
        for (int64_t dz = 0; dz < g.kz; ++dz) {
            const int64_t zi = zo * g.sz - g.pz + dz;
            const bool zok = zi >= 0 && zi < g.Z;
            for (int64_t dy = 0; dy < g.ky; ++dy) {
                for (int64_t dx = 0; dx < g.kx; ++dx, ++r) {
                    T* row = col + r * S;
                    if (!zok) {
                        std::memset(row, 0, sizeof(T) * size_t(S));
                        continue;
                    }
                    const T* xplane = xn + (ci * g.Z + zi) * g.Y * g.X;
                    for (int64_t yo = 0; yo < g.Yo; ++yo) {
                        T* dst = row + yo * g.Xo;
                        const int64_t yi = yo * g.sy - g.py + dy;
                        if (yi < 0 || yi >= g.Y) {
                            std::memset(dst, 0, sizeof(T) * size_t(g.Xo));
                            continue;
                        }
                        const T* src = xplane + yi * g.X;
                        if (g.sx == 1) {
                            // xi = xo - px + dx; clip the contiguous run
                            int64_t lo = std::max<int64_t>(0, g.px - dx);
                            int64_t hi = std::min<int64_t>(g.Xo, g.X + g.px - dx);
                            if (hi < lo) hi = lo;
                            if (lo > 0) std::memset(dst, 0, sizeof(T) * size_t(lo));
                            if (hi > lo)
                                std::memcpy(dst + lo, src + lo - g.px + dx,
                                            sizeof(T) * size_t(hi - lo));
                            if (hi < g.Xo)
                                std::memset(dst + hi, 0, sizeof(T) * size_t(g.Xo - hi));
                        } else {
                            for (int64_t xo = 0; xo < g.Xo; ++xo) {
                                const int64_t xi = xo * g.sx - g.px + dx;
                                dst[xo] = (xi >= 0 && xi < g.X) ? src[xi] : T(0);
                            }
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of one z-slab back into the input gradient.
template <typename T>
void col2im_slab(const T* col, const ConvGeom& g, int64_t zo, T* dxn) {
    const int64_t S = g.slab();
    int64_t r = 0;
    for (int64_t ci = 0; ci < g.Cin; ++ci) {
        for (int64_t dz = 0; dz < g.kz; ++dz) {
            const int64_t zi = zo * g.sz - g.pz + dz;
            const bool zok = zi >= 0 && zi < g.Z;
            for (int64_t dy = 0; dy < g.ky; ++dy) {
                for (int64_t dx = 0; dx < g.kx; ++dx, ++r) {
                    if (!zok) continue;
                    const T* row = col + r * S;
                    T* xplane = dxn + (ci * g.Z + zi) * g.Y * g.X;
                    for (int64_t yo = 0; yo < g.Yo; ++yo) {
                        const int64_t yi = yo * g.sy - g.py + dy;
                        if (yi < 0 || yi >= g.Y) continue;
                        const T* src = row + yo * g.Xo;
                        T* dst = xplane + yi * g.X;
                        if (g.sx == 1) {
                            int64_t lo = std::max<int64_t>(0, g.px - dx);
                            int64_t hi = std::min<int64_t>(g.Xo, g.X + g.px - dx);
                            T* d = dst - g.px + dx;
                            for (int64_t xo = lo; xo < hi; ++xo) d[xo] += src[xo];
                        } else {
                            for (int64_t xo = 0; xo < g.Xo; ++xo) {
                                const int64_t xi = xo * g.sx - g.px + dx;
                                if (xi >= 0 && xi < g.X) dst[xi] += src[xo];
                            }
                        }
                    }
                }
            }
        }
    }
}

// C[M,N] += A[M,S] * B[N,S]^T as row-dot-products. Eight explicit
// accumulators keep the reduction order fixed and vectorizable.
template <typename T>
void gemm_nt_acc(int64_t M, int64_t N, int64_t S, const T* A, int64_t lda, const T* B,
                 int64_t ldb, T* C, int64_t ldc) {
    for (int64_t m = 0; m < M; ++m) {
        const T* a = A + m * lda;
        T* c = C + m * ldc;
        for (int64_t n = 0; n < N; ++n) {
            const T* b = B + n * ldb;
            T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            int64_t s = 0;
            for (; s + 8 <= S; s += 8) {
                for (int j = 0; j < 8; ++j) acc[j] += a[s + j] * b[s + j];
            }
            T tail = T(0);
            for (; s < S; ++s) tail += a[s] * b[s];
            T tot = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                    ((acc[4] + acc[5]) + (acc[6] + acc[7]));
            c[n] += tot + tail;
        }
    }
}

template <typename T>
void conv3d_forward(const T* x, const T* w, const T* b, T* out, const ConvGeom& g) {
    const int64_t S = g.slab();
    const int64_t K = g.patch();
    if (g.pointwise()) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t n = 0; n < g.N; ++n) {
            for (int64_t zo = 0; zo < g.Zo; ++zo) {
                const T* xn = x + n * g.Cin * g.in_spatial() + zo * S;
                T* on = out + n * g.Cout * g.out_spatial() + zo * S;
                for (int64_t co = 0; co < g.Cout; ++co) {
                    T* row = on + co * g.out_spatial();
                    const T bv = b ? b[co] : T(0);
                    for (int64_t i = 0; i < S; ++i) row[i] = bv;
                }
                detail::gemm(g.Cout, S, g.Cin, w, g.Cin, xn, g.in_spatial(), on,
                             g.out_spatial(), true);
            }
        }
        return;
    }
#pragma omp parallel
    {
        std::vector<T> col(size_t(K * S));
#pragma omp for collapse(2) schedule(static)
        for (int64_t n = 0; n < g.N; ++n) {
            for (int64_t zo = 0; zo < g.Zo; ++zo) {
                im2col_slab(x + n * g.Cin * g.in_spatial(), g, zo, col.data());
                T* on = out + n * g.Cout * g.out_spatial() + zo * S;
                for (int64_t co = 0; co < g.Cout; ++co) {
                    T* row = on + co * g.out_spatial();
                    const T bv = b ? b[co] : T(0);
                    for (int64_t i = 0; i < S; ++i) row[i] = bv;
                }
                detail::gemm(g.Cout, S, K, w, K, col.data(), S, on, g.out_spatial(),
                             true);
            }
        }
    }
}

template <typename T>
void conv3d_backward_bias(const T* gout, const ConvGeom& g, T* db) {
#pragma omp parallel for schedule(static)
    for (int64_t co = 0; co < g.Cout; ++co) {
        double acc = 0.0;
        for (int64_t n = 0; n < g.N; ++n) {
            const T* p = gout + (n * g.Cout + co) * g.out_spatial();
            for (int64_t i = 0; i < g.out_spatial(); ++i) acc += double(p[i]);
        }
        db[co] += T(acc);
    }
}

// dW accumulated over (n, zo) tiles through a fixed number of lanes; lane
// partials are reduced in lane order, so the result is independent of the
// number of worker threads.
template <typename T>
void conv3d_backward_weight(const T* x, const T* gout, const ConvGeom& g, T* dw) {
    const int64_t S = g.slab();
    const int64_t K = g.patch();
    const int64_t tiles = g.N * g.Zo;
    const int64_t lanes = std::min<int64_t>(8, tiles);
    std::vector<std::vector<T>> partial(static_cast<size_t>(lanes));
#pragma omp parallel for schedule(static)
    for (int64_t lane = 0; lane < lanes; ++lane) {
        auto& dwp = partial[size_t(lane)];
        dwp.assign(size_t(g.Cout * K), T(0));
        std::vector<T> col(size_t(K * S));
        for (int64_t t = lane; t < tiles; t += lanes) {
            const int64_t n = t / g.Zo;
            const int64_t zo = t % g.Zo;
            im2col_slab(x + n * g.Cin * g.in_spatial(), g, zo, col.data());
            const T* gslab = gout + n * g.Cout * g.out_spatial() + zo * S;
            gemm_nt_acc(g.Cout, K, S, gslab, g.out_spatial(), col.data(), S, dwp.data(),
                        K);
        }
    }
    for (int64_t lane = 0; lane < lanes; ++lane) {
        const auto& dwp = partial[size_t(lane)];
        for (int64_t i = 0; i < g.Cout * K; ++i) dw[i] += dwp[size_t(i)];
    }
}

template <typename T>
void conv3d_backward_input(const T* wt, const T* gout, const ConvGeom& g, T* dx) {
    const int64_t S = g.slab();
    const int64_t K = g.patch();
    if (g.pointwise()) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t n = 0; n < g.N; ++n) {
            for (int64_t zo = 0; zo < g.Zo; ++zo) {
                const T* gslab = gout + n * g.Cout * g.out_spatial() + zo * S;
                T* dxn = dx + n * g.Cin * g.in_spatial() + zo * S;
                detail::gemm(g.Cin, S, g.Cout, wt, g.Cout, gslab, g.out_spatial(), dxn,
                             g.in_spatial(), true);
            }
        }
        return;
    }
    if (g.kz == 1) {
        // each zo touches a single distinct input slice: safe to parallelize
#pragma omp parallel
        {
            std::vector<T> dcol(size_t(K * S));
#pragma omp for collapse(2) schedule(static)
            for (int64_t n = 0; n < g.N; ++n) {
                for (int64_t zo = 0; zo < g.Zo; ++zo) {
                    const T* gslab = gout + n * g.Cout * g.out_spatial() + zo * S;
                    detail::gemm(K, S, g.Cout, wt, g.Cout, gslab, g.out_spatial(),
                                 dcol.data(), S, false);
                    col2im_slab(dcol.data(), g, zo, dx + n * g.Cin * g.in_spatial());
                }
            }
        }
        return;
    }
#pragma omp parallel
    {
        std::vector<T> dcol(size_t(K * S));
#pragma omp for schedule(static)
        for (int64_t n = 0; n < g.N; ++n) {
            for (int64_t zo = 0; zo < g.Zo; ++zo) {
                const T* gslab = gout + n * g.Cout * g.out_spatial() + zo * S;
                detail::gemm(K, S, g.Cout, wt, g.Cout, gslab, g.out_spatial(),
                             dcol.data(), S, false);
                col2im_slab(dcol.data(), g, zo, dx + n * g.Cin * g.in_spatial());
            }
        }
    }
}

}  // namespace

Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias) {
    ConvGeom g = resolve_geometry(x, spec, weight, bias);
    Tensor out = Tensor::zeros({g.N, g.Cout, g.Zo, g.Yo, g.Xo}, x.dtype());
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        conv3d_forward(x.data<T>(), weight.data<T>(),
                       bias.defined() ? bias.data<T>() : nullptr, out.data<T>(), g);
        return 0;
    });
    autodiff::record(
        out, {x, weight, bias},
        [x, weight, bias, g](const Tensor& gout, autodiff::GradSink& sink) {
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* go = gout.data<T>();
                if (bias.defined() && sink.wants(bias)) {
                    Tensor db = Tensor::zeros(bias.shape(), bias.dtype());
                    conv3d_backward_bias(go, g, db.data<T>());
                    sink.add(bias, db);
                }
                if (sink.wants(weight)) {
                    Tensor dw = Tensor::zeros(weight.shape(), weight.dtype());
                    conv3d_backward_weight(x.data<T>(), go, g, dw.data<T>());
                    sink.add(weight, dw);
                }
                if (sink.wants(x)) {
                    // weight transposed to [patch, Cout] once
                    const int64_t K = g.patch();
                    std::vector<T> wt(size_t(K * g.Cout));
                    const T* w = weight.data<T>();
                    for (int64_t co = 0; co < g.Cout; ++co)
                        for (int64_t k = 0; k < K; ++k)
                            wt[size_t(k * g.Cout + co)] = w[co * K + k];
                    Tensor dx = Tensor::zeros(x.shape(), x.dtype());
                    conv3d_backward_input(wt.data(), go, g, dx.data<T>());
                    sink.add(x, dx);
                }
                return 0;
            });
        },
        "conv3d");
    return out;
}

Tensor maxpool3d(const Tensor& x, Tri3 kernel, Tri3 stride, Tri3 padding) {
    if (x.rank() != 5)
        throw ShapeError("maxpool3d: input must be [N,C,Z,Y,X], got " +
                         shape_str(x.shape()));
    if (padding.x > kernel.x - 1 || padding.y > kernel.y - 1 || padding.z > kernel.z - 1)
        throw ShapeError("maxpool3d: padding must be < kernel extent");
    ConvSpec spec;
    spec.in_channels = spec.out_channels = x.shape()[1];
    spec.kernel = kernel;
    spec.stride = stride;
    spec.padding = padding;
    spec.has_bias = false;
    spec.validate();
    const int64_t N = x.shape()[0], C = x.shape()[1], Z = x.shape()[2], Y = x.shape()[3],
                  X = x.shape()[4];
    auto o = spec.output_extents({Z, Y, X});
    const int64_t Zo = o[0], Yo = o[1], Xo = o[2];
    Tensor out = Tensor::zeros({N, C, Zo, Yo, Xo}, x.dtype());
    auto argmax = std::make_shared<std::vector<int64_t>>(size_t(N * C * Zo * Yo * Xo));
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* xp = x.data<T>();
        T* op = out.data<T>();
        int64_t* am = argmax->data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t n = 0; n < N; ++n) {
            for (int64_t c = 0; c < C; ++c) {
                const T* xc = xp + (n * C + c) * Z * Y * X;
                T* oc = op + (n * C + c) * Zo * Yo * Xo;
                int64_t* ac = am + (n * C + c) * Zo * Yo * Xo;
                int64_t oi = 0;
                for (int64_t zo = 0; zo < Zo; ++zo) {
                    for (int64_t yo = 0; yo < Yo; ++yo) {
                        for (int64_t xo = 0; xo < Xo; ++xo, ++oi) {
                            T best{};
                            int64_t besti = -1;
                            for (int64_t dz = 0; dz < kernel.z; ++dz) {
                                const int64_t zi = zo * stride.z - padding.z + dz;
                                if (zi < 0 || zi >= Z) continue;
                                for (int64_t dy = 0; dy < kernel.y; ++dy) {
                                    const int64_t yi = yo * stride.y - padding.y + dy;
                                    if (yi < 0 || yi >= Y) continue;
                                    for (int64_t dx = 0; dx < kernel.x; ++dx) {
                                        const int64_t xi = xo * stride.x - padding.x + dx;
                                        if (xi < 0 || xi >= X) continue;
                                        const int64_t ii = (zi * Y + yi) * X + xi;
                                        const T v = xc[ii];
                                        if (besti < 0 || v > best) {
                                            best = v;
                                            besti = ii;
                                        }
                                    }
                                }
                            }
                            oc[oi] = best;
                            ac[oi] = besti;
                        }
                    }
                }
            }
        }
        return 0;
    });
    autodiff::record(
        out, {x},
        [x, argmax, N, C, Z, Y, X, Zo, Yo, Xo](const Tensor& gout,
                                               autodiff::GradSink& sink) {
            if (!sink.wants(x)) return;
            Tensor dx = Tensor::zeros(x.shape(), x.dtype());
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* go = gout.data<T>();
                T* dxp = dx.data<T>();
                const int64_t* am = argmax->data();
#pragma omp parallel for collapse(2) schedule(static)
                for (int64_t n = 0; n < N; ++n) {
                    for (int64_t c = 0; c < C; ++c) {
                        const int64_t base_o = (n * C + c) * Zo * Yo * Xo;
                        const int64_t base_i = (n * C + c) * Z * Y * X;
                        for (int64_t i = 0; i < Zo * Yo * Xo; ++i)
                            dxp[base_i + am[base_o + i]] += go[base_o + i];
                    }
                }
                return 0;
            });
            sink.add(x, dx);
        },
        "maxpool3d");
    return out;
}

void set_num_threads(int n) {
    if (n <= 0)
        omp_set_num_threads(omp_get_num_procs());
    else
        omp_set_num_threads(n);
}

int num_threads() { return omp_get_max_threads(); }

}  // namespace gcanet
