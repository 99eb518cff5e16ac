#include <cmath>
#include <cstring>

#include "gcanet/ops.hpp"

namespace gcanet {

namespace {

void check_5d(const Tensor& x, const char* op) {
    if (x.rank() != 5)
        throw ShapeError(std::string(op) + ": input must be [N,C,Z,Y,X], got " +
                         shape_str(x.shape()));
}

}  // namespace

Tensor batchnorm3d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var, Mode mode,
                   double momentum, double eps) {
    check_5d(x, "batchnorm3d");
    if (eps <= 0.0) throw ValueError("batchnorm3d: eps must be positive");
    const int64_t N = x.shape()[0], C = x.shape()[1];
    const int64_t S = x.shape()[2] * x.shape()[3] * x.shape()[4];
    Shape cshape{C};
    if (gamma.shape() != cshape || beta.shape() != cshape)
        throw ShapeError("batchnorm3d: gamma/beta must be [C]");
    if (running_mean.shape() != cshape || running_var.shape() != cshape)
        throw ShapeError("batchnorm3d: running stats must be [C]");
    const int64_t m = N * S;

    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    // normalization statistics saved for backward
    Tensor mean_t = Tensor::zeros({C}, x.dtype());
    Tensor rstd_t = Tensor::zeros({C}, x.dtype());

    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* xp = x.data<T>();
        T* op = out.data<T>();
        T* meanp = mean_t.data<T>();
        T* rstdp = rstd_t.data<T>();
        const T* gp = gamma.data<T>();
        const T* bp = beta.data<T>();
        T* rmp = running_mean.data<T>();
        T* rvp = running_var.data<T>();
#pragma omp parallel for schedule(static)
        for (int64_t c = 0; c < C; ++c) {
            double mu, var;
            if (mode == Mode::train) {
                double s1 = 0.0, s2 = 0.0;
                for (int64_t n = 0; n < N; ++n) {
                    const T* p = xp + (n * C + c) * S;
                    for (int64_t i = 0; i < S; ++i) {
                        const double v = double(p[i]);
                        s1 += v;
                        s2 += v * v;
                    }
                }
                mu = s1 / double(m);
                var = s2 / double(m) - mu * mu;
                if (var < 0.0) var = 0.0;
                const double unbiased = m > 1 ? var * double(m) / double(m - 1) : var;
                rmp[c] = T((1.0 - momentum) * double(rmp[c]) + momentum * mu);
                rvp[c] = T((1.0 - momentum) * double(rvp[c]) + momentum * unbiased);
            } else {
                mu = double(rmp[c]);
                var = double(rvp[c]);
            }
            const double rstd = 1.0 / std::sqrt(var + eps);
            meanp[c] = T(mu);
            rstdp[c] = T(rstd);
            const T tm = T(mu), tr = T(rstd), tg = gp[c], tb = bp[c];
            for (int64_t n = 0; n < N; ++n) {
                const T* p = xp + (n * C + c) * S;
                T* q = op + (n * C + c) * S;
                for (int64_t i = 0; i < S; ++i) q[i] = (p[i] - tm) * tr * tg + tb;
            }
        }
        return 0;
    });

    autodiff::record(
        out, {x, gamma, beta},
        [x, gamma, beta, mean_t, rstd_t, mode, N, C, S](const Tensor& gout,
                                                        autodiff::GradSink& sink) {
            const bool want_x = sink.wants(x);
            const bool want_g = sink.wants(gamma);
            const bool want_b = sink.wants(beta);
            Tensor dx = want_x ? Tensor::zeros(x.shape(), x.dtype()) : Tensor();
            Tensor dg = want_g ? Tensor::zeros(gamma.shape(), gamma.dtype()) : Tensor();
            Tensor db = want_b ? Tensor::zeros(beta.shape(), beta.dtype()) : Tensor();
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* xp = x.data<T>();
                const T* go = gout.data<T>();
                const T* meanp = mean_t.data<T>();
                const T* rstdp = rstd_t.data<T>();
                const T* gp = gamma.data<T>();
                const int64_t m = N * S;
#pragma omp parallel for schedule(static)
                for (int64_t c = 0; c < C; ++c) {
                    const double mu = double(meanp[c]);
                    const double rstd = double(rstdp[c]);
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int64_t n = 0; n < N; ++n) {
                        const T* pg = go + (n * C + c) * S;
                        const T* px = xp + (n * C + c) * S;
                        for (int64_t i = 0; i < S; ++i) {
                            const double dy = double(pg[i]);
                            sum_dy += dy;
                            sum_dy_xhat += dy * (double(px[i]) - mu) * rstd;
                        }
                    }
                    if (want_g) dg.data<T>()[c] = T(sum_dy_xhat);
                    if (want_b) db.data<T>()[c] = T(sum_dy);
                    if (want_x) {
                        T* pd_base = dx.data<T>();
                        const double gscale = double(gp[c]) * rstd;
                        if (mode == Mode::train) {
                            const double k1 = sum_dy / double(m);
                            const double k2 = sum_dy_xhat / double(m);
                            for (int64_t n = 0; n < N; ++n) {
                                const T* pg = go + (n * C + c) * S;
                                const T* px = xp + (n * C + c) * S;
                                T* pd = pd_base + (n * C + c) * S;
                                for (int64_t i = 0; i < S; ++i) {
                                    const double xhat = (double(px[i]) - mu) * rstd;
                                    pd[i] = T(gscale * (double(pg[i]) - k1 - xhat * k2));
                                }
                            }
                        } else {
                            for (int64_t n = 0; n < N; ++n) {
                                const T* pg = go + (n * C + c) * S;
                                T* pd = pd_base + (n * C + c) * S;
                                for (int64_t i = 0; i < S; ++i)
                                    pd[i] = T(double(pg[i]) * gscale);
                            }
                        }
                    }
                }
                return 0;
            });
            if (want_x) sink.add(x, dx);
            if (want_g) sink.add(gamma, dg);
            if (want_b) sink.add(beta, db);
        },
        "batchnorm3d");
    return out;
}

Tensor activation(const Tensor& x, Activation kind, double slope) {
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const int64_t n = x.numel();
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* p = x.data<T>();
        T* q = out.data<T>();
        switch (kind) {
            case Activation::relu:
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < n; ++i) q[i] = p[i] > T(0) ? p[i] : T(0);
                break;
            case Activation::leaky_relu: {
                const T s = T(slope);
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < n; ++i) q[i] = p[i] > T(0) ? p[i] : s * p[i];
                break;
            }
            case Activation::sigmoid:
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < n; ++i)
                    q[i] = T(1) / (T(1) + std::exp(-p[i]));
                break;
        }
        return 0;
    });
    autodiff::record(
        out, {x},
        [x, out, kind, slope, n](const Tensor& gout, autodiff::GradSink& sink) {
            if (!sink.wants(x)) return;
            Tensor dx = Tensor::zeros(x.shape(), x.dtype());
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* p = x.data<T>();
                const T* o = out.data<T>();
                const T* go = gout.data<T>();
                T* d = dx.data<T>();
                switch (kind) {
                    case Activation::relu:
#pragma omp parallel for schedule(static)
                        for (int64_t i = 0; i < n; ++i)
                            d[i] = p[i] > T(0) ? go[i] : T(0);
                        break;
                    case Activation::leaky_relu: {
                        const T s = T(slope);
#pragma omp parallel for schedule(static)
                        for (int64_t i = 0; i < n; ++i)
                            d[i] = p[i] > T(0) ? go[i] : s * go[i];
                        break;
                    }
                    case Activation::sigmoid:
#pragma omp parallel for schedule(static)
                        for (int64_t i = 0; i < n; ++i)
                            d[i] = go[i] * o[i] * (T(1) - o[i]);
                        break;
                }
                return 0;
            });
            sink.add(x, dx);
        },
        "activation");
    return out;
}

Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
Tensor leaky_relu(const Tensor& x, double slope) {
    return activation(x, Activation::leaky_relu, slope);
}
Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }

namespace {

// per-axis interpolation table for the half-voxel-center convention
struct AxisTap {
    int64_t i0, i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<AxisTap> axis_taps(int64_t in, int64_t factor) {
    std::vector<AxisTap> taps(size_t(in * factor));
    for (int64_t o = 0; o < in * factor; ++o) {
        const double s = (double(o) + 0.5) / double(factor) - 0.5;
        int64_t i0 = int64_t(std::floor(s));
        double w1 = s - double(i0);
        if (i0 < 0) {
            i0 = 0;
            w1 = 0.0;
        }
        int64_t i1 = i0 + 1;
        if (i1 > in - 1) {
            i1 = in - 1;
            if (i0 > in - 1) i0 = in - 1;
            w1 = 0.0;
        }
        taps[size_t(o)] = {i0, i1, w1};
    }
    return taps;
}

}  // namespace

Tensor upsample_trilinear(const Tensor& x, Tri3 factor) {
    check_5d(x, "upsample_trilinear");
    if (factor.x < 1 || factor.y < 1 || factor.z < 1)
        throw ValueError("upsample_trilinear: factors must be >= 1");
    const int64_t N = x.shape()[0], C = x.shape()[1], Z = x.shape()[2], Y = x.shape()[3],
                  X = x.shape()[4];
    const int64_t Zo = Z * factor.z, Yo = Y * factor.y, Xo = X * factor.x;
    Tensor out = Tensor::zeros({N, C, Zo, Yo, Xo}, x.dtype());
    auto tz = std::make_shared<std::vector<AxisTap>>(axis_taps(Z, factor.z));
    auto ty = std::make_shared<std::vector<AxisTap>>(axis_taps(Y, factor.y));
    auto tx = std::make_shared<std::vector<AxisTap>>(axis_taps(X, factor.x));
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* xp = x.data<T>();
        T* op = out.data<T>();
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t nc = 0; nc < N * C; ++nc) {
            for (int64_t zo = 0; zo < Zo; ++zo) {
                const T* xc = xp + nc * Z * Y * X;
                T* oc = op + (nc * Zo + zo) * Yo * Xo;
                const AxisTap az = (*tz)[size_t(zo)];
                for (int64_t yo = 0; yo < Yo; ++yo) {
                    const AxisTap ay = (*ty)[size_t(yo)];
                    const T* r00 = xc + (az.i0 * Y + ay.i0) * X;
                    const T* r01 = xc + (az.i0 * Y + ay.i1) * X;
                    const T* r10 = xc + (az.i1 * Y + ay.i0) * X;
                    const T* r11 = xc + (az.i1 * Y + ay.i1) * X;
                    const double wz = az.w1, wy = ay.w1;
                    T* orow = oc + yo * Xo;
                    for (int64_t xo = 0; xo < Xo; ++xo) {
                        const AxisTap ax = (*tx)[size_t(xo)];
                        const double wx = ax.w1;
                        const double v00 =
                            double(r00[ax.i0]) * (1 - wx) + double(r00[ax.i1]) * wx;
                        const double v01 =
                            double(r01[ax.i0]) * (1 - wx) + double(r01[ax.i1]) * wx;
                        const double v10 =
                            double(r10[ax.i0]) * (1 - wx) + double(r10[ax.i1]) * wx;
                        const double v11 =
                            double(r11[ax.i0]) * (1 - wx) + double(r11[ax.i1]) * wx;
                        const double vy0 = v00 * (1 - wy) + v01 * wy;
                        const double vy1 = v10 * (1 - wy) + v11 * wy;
                        orow[xo] = T(vy0 * (1 - wz) + vy1 * wz);
                    }
                }
            }
        }
        return 0;
    });
    autodiff::record(
        out, {x},
        [x, tz, ty, tx, N, C, Z, Y, X, Zo, Yo, Xo](const Tensor& gout,
                                                   autodiff::GradSink& sink) {
            if (!sink.wants(x)) return;
            Tensor dx = Tensor::zeros(x.shape(), x.dtype());
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* go = gout.data<T>();
                T* d = dx.data<T>();
                // scatter is confined to one (n, c) channel per iteration
#pragma omp parallel for schedule(static)
                for (int64_t nc = 0; nc < N * C; ++nc) {
                    T* dc = d + nc * Z * Y * X;
                    const T* gc = go + nc * Zo * Yo * Xo;
                    for (int64_t zo = 0; zo < Zo; ++zo) {
                        const AxisTap az = (*tz)[size_t(zo)];
                        for (int64_t yo = 0; yo < Yo; ++yo) {
                            const AxisTap ay = (*ty)[size_t(yo)];
                            const T* grow = gc + (zo * Yo + yo) * Xo;
                            for (int64_t xo = 0; xo < Xo; ++xo) {
                                const AxisTap ax = (*tx)[size_t(xo)];
                                const double gv = double(grow[xo]);
                                const double wz1 = az.w1, wy1 = ay.w1, wx1 = ax.w1;
                                const double wz0 = 1 - wz1, wy0 = 1 - wy1, wx0 = 1 - wx1;
                                dc[(az.i0 * Y + ay.i0) * X + ax.i0] +=
                                    T(gv * wz0 * wy0 * wx0);
                                dc[(az.i0 * Y + ay.i0) * X + ax.i1] +=
                                    T(gv * wz0 * wy0 * wx1);
                                dc[(az.i0 * Y + ay.i1) * X + ax.i0] +=
                                    T(gv * wz0 * wy1 * wx0);
                                dc[(az.i0 * Y + ay.i1) * X + ax.i1] +=
                                    T(gv * wz0 * wy1 * wx1);
                                dc[(az.i1 * Y + ay.i0) * X + ax.i0] +=
                                    T(gv * wz1 * wy0 * wx0);
                                dc[(az.i1 * Y + ay.i0) * X + ax.i1] +=
                                    T(gv * wz1 * wy0 * wx1);
                                dc[(az.i1 * Y + ay.i1) * X + ax.i0] +=
                                    T(gv * wz1 * wy1 * wx0);
                                dc[(az.i1 * Y + ay.i1) * X + ax.i1] +=
                                    T(gv * wz1 * wy1 * wx1);
                            }
                        }
                    }
                }
                return 0;
            });
            sink.add(x, dx);
        },
        "upsample_trilinear");
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() || a.dtype() != b.dtype())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const int64_t n = a.numel();
    dispatch_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pa = a.data<T>();
        const T* pb = b.data<T>();
        T* q = out.data<T>();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) q[i] = pa[i] + pb[i];
        return 0;
    });
    autodiff::record(
        out, {a, b},
        [a, b](const Tensor& gout, autodiff::GradSink& sink) {
            if (sink.wants(a)) sink.add(a, gout);
            if (sink.wants(b)) sink.add(b, gout);
        },
        "add");
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check_5d(a, "concat_channels");
    check_5d(b, "concat_channels");
    if (a.dtype() != b.dtype()) throw ShapeError("concat_channels: dtype mismatch");
    for (int i : {0, 2, 3, 4})
        if (a.shape()[size_t(i)] != b.shape()[size_t(i)])
            throw ShapeError("concat_channels: non-channel extents differ: " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int64_t N = a.shape()[0], Ca = a.shape()[1], Cb = b.shape()[1];
    const int64_t S = a.shape()[2] * a.shape()[3] * a.shape()[4];
    Tensor out = Tensor::zeros({N, Ca + Cb, a.shape()[2], a.shape()[3], a.shape()[4]},
                               a.dtype());
    const size_t esz = dtype_size(a.dtype());
    const char* pa = static_cast<const char*>(a.raw_data());
    const char* pb = static_cast<const char*>(b.raw_data());
    char* q = static_cast<char*>(out.raw_data());
    for (int64_t n = 0; n < N; ++n) {
        std::memcpy(q + size_t(n * (Ca + Cb) * S) * esz, pa + size_t(n * Ca * S) * esz,
                    size_t(Ca * S) * esz);
        std::memcpy(q + size_t((n * (Ca + Cb) + Ca) * S) * esz,
                    pb + size_t(n * Cb * S) * esz, size_t(Cb * S) * esz);
    }
    autodiff::record(
        out, {a, b},
        [a, b, N, Ca, Cb, S](const Tensor& gout, autodiff::GradSink& sink) {
            const size_t esz2 = dtype_size(a.dtype());
            const char* go = static_cast<const char*>(gout.raw_data());
            if (sink.wants(a)) {
                Tensor da = Tensor::zeros(a.shape(), a.dtype());
                char* d = static_cast<char*>(da.raw_data());
                for (int64_t n = 0; n < N; ++n)
                    std::memcpy(d + size_t(n * Ca * S) * esz2,
                                go + size_t(n * (Ca + Cb) * S) * esz2,
                                size_t(Ca * S) * esz2);
                sink.add(a, da);
            }
            if (sink.wants(b)) {
                Tensor db = Tensor::zeros(b.shape(), b.dtype());
                char* d = static_cast<char*>(db.raw_data());
                for (int64_t n = 0; n < N; ++n)
                    std::memcpy(d + size_t(n * Cb * S) * esz2,
                                go + size_t((n * (Ca + Cb) + Ca) * S) * esz2,
                                size_t(Cb * S) * esz2);
                sink.add(b, db);
            }
        },
        "concat_channels");
    return out;
}

Tensor combine(const Tensor& a, const Tensor& b, CombineKind kind) {
    return kind == CombineKind::add ? add(a, b) : concat_channels(a, b);
}

namespace {

// pairwise (tree) summation; deterministic and O(log n) rounding error
template <typename T>
double pairwise_sum(const T* p, int64_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += double(p[i]);
        return s;
    }
    const int64_t half = n / 2;
    return pairwise_sum(p, half) + pairwise_sum(p + half, n - half);
}

}  // namespace

Tensor reduce(const Tensor& x, ReduceKind kind) {
    if (x.numel() < 1) throw ShapeError("reduce: empty tensor");
    const int64_t n = x.numel();
    double s = dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        return pairwise_sum(x.data<T>(), n);
    });
    if (kind == ReduceKind::mean) s /= double(n);
    Tensor out = Tensor::scalar(s, x.dtype());
    autodiff::record(
        out, {x},
        [x, kind, n](const Tensor& gout, autodiff::GradSink& sink) {
            if (!sink.wants(x)) return;
            double g = gout.item();
            if (kind == ReduceKind::mean) g /= double(n);
            sink.add(x, Tensor::full(x.shape(), g, x.dtype()));
        },
        "reduce");
    return out;
}

Tensor reduce_sum(const Tensor& x) { return reduce(x, ReduceKind::sum); }
Tensor reduce_mean(const Tensor& x) { return reduce(x, ReduceKind::mean); }

Tensor scale(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const int64_t n = x.numel();
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* p = x.data<T>();
        T* q = out.data<T>();
        const T tc = T(c);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) q[i] = p[i] * tc;
        return 0;
    });
    autodiff::record(
        out, {x},
        [x, c, n](const Tensor& gout, autodiff::GradSink& sink) {
            if (!sink.wants(x)) return;
            Tensor dx = Tensor::zeros(x.shape(), x.dtype());
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* go = gout.data<T>();
                T* d = dx.data<T>();
                const T tc = T(c);
                for (int64_t i = 0; i < n; ++i) d[i] = go[i] * tc;
                return 0;
            });
            sink.add(x, dx);
        },
        "scale");
    return out;
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() || a.dtype() != b.dtype())
        throw ShapeError("multiply: shape mismatch");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const int64_t n = a.numel();
    dispatch_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pa = a.data<T>();
        const T* pb = b.data<T>();
        T* q = out.data<T>();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) q[i] = pa[i] * pb[i];
        return 0;
    });
    autodiff::record(
        out, {a, b},
        [a, b, n](const Tensor& gout, autodiff::GradSink& sink) {
            dispatch_dtype(a.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* go = gout.data<T>();
                if (sink.wants(a)) {
                    Tensor da = Tensor::zeros(a.shape(), a.dtype());
                    T* d = da.data<T>();
                    const T* pb = b.data<T>();
                    for (int64_t i = 0; i < n; ++i) d[i] = go[i] * pb[i];
                    sink.add(a, da);
                }
                if (sink.wants(b)) {
                    Tensor db = Tensor::zeros(b.shape(), b.dtype());
                    T* d = db.data<T>();
                    const T* pa = a.data<T>();
                    for (int64_t i = 0; i < n; ++i) d[i] = go[i] * pa[i];
                    sink.add(b, db);
                }
                return 0;
            });
        },
        "multiply");
    return out;
}

Tensor mean_per_batch(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("mean_per_batch: needs a batch axis");
    const int64_t N = x.shape()[0];
    const int64_t S = x.numel() / N;
    Tensor out = Tensor::zeros({N}, x.dtype());
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* p = x.data<T>();
        T* q = out.data<T>();
#pragma omp parallel for schedule(static)
        for (int64_t n = 0; n < N; ++n)
            q[n] = T(pairwise_sum(p + n * S, S) / double(S));
        return 0;
    });
    autodiff::record(
        out, {x},
        [x, N, S](const Tensor& gout, autodiff::GradSink& sink) {
            if (!sink.wants(x)) return;
            Tensor dx = Tensor::zeros(x.shape(), x.dtype());
            dispatch_dtype(x.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* go = gout.data<T>();
                T* d = dx.data<T>();
                for (int64_t n = 0; n < N; ++n) {
                    const T g = T(double(go[n]) / double(S));
                    T* row = d + n * S;
                    for (int64_t i = 0; i < S; ++i) row[i] = g;
                }
                return 0;
            });
            sink.add(x, dx);
        },
        "mean_per_batch");
    return out;
}

double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                 double h) {
    if (x0.dtype() != DType::f64)
        throw ValueError("gradcheck: input must be f64");
    Tensor x = x0.clone();
    x.set_requires_grad(true);
    Tensor loss = f(x);
    if (loss.numel() != 1) throw ShapeError("gradcheck: f must be scalar-valued");
    backward(loss);
    Tensor g = x.grad();
    const int64_t n = x.numel();
    double* xd = x.data<double>();
    double max_err = 0.0;
    autodiff::NoGradGuard ng;
    for (int64_t i = 0; i < n; ++i) {
        const double v = xd[i];
        xd[i] = v + h;
        const double fp = f(x).item();
        xd[i] = v - h;
        const double fm = f(x).item();
        xd[i] = v;
        const double numeric = (fp - fm) / (2.0 * h);
        const double analytic = g.defined() ? g.data<double>()[i] : 0.0;
        if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic))
            throw ValueError("gradcheck: non-finite value encountered");
        const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
    }
    return max_err;
}

}  // namespace gcanet
