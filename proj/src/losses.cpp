#include "gcanet/losses.hpp"

#include <cmath>
#include <vector>

#include "gcanet/nets.hpp"
#include "gcanet/ops.hpp"

namespace gcanet {

namespace {

constexpr double kLogClamp = 1e-7;
constexpr int64_t kChunk = 1 << 16;

template <typename T>
double stable_softplus(T x) {
    const double v = double(x);
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

// chunked reduction with a fixed chunk size: per-element order is fixed and
// the partial order is data-sized, so results do not depend on threads
template <typename Body>
double chunked_mean(int64_t n, const Body& body) {
    const int64_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(size_t(chunks), 0.0);
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < chunks; ++c) {
        const int64_t lo = c * kChunk;
        const int64_t hi = std::min(n, lo + kChunk);
        double acc = 0.0;
        for (int64_t i = lo; i < hi; ++i) acc += body(i);
        partial[size_t(c)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total / double(n);
}

}  // namespace

std::pair<double, double> class_weights(const Tensor& y) {
    const int64_t n = y.numel();
    int64_t n_fg = 0, bad = 0;
    dispatch_dtype(y.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* p = y.data<T>();
        int64_t acc = 0, nb = 0;
#pragma omp parallel for schedule(static) reduction(+ : acc, nb)
        for (int64_t i = 0; i < n; ++i) {
            if (p[i] != T(0) && p[i] != T(1)) ++nb;
            acc += p[i] == T(1) ? 1 : 0;
        }
        n_fg = acc;
        bad = nb;
        return 0;
    });
    if (bad > 0) throw ValueError("class_weights: labels must be binary");
    const int64_t n_bg = n - n_fg;
    auto weight = [n](int64_t count) {
        if (count == 0) return 1.0;
        const double w = double(n) / (2.0 * double(count));
        return std::min(10.0, std::max(0.1, w));
    };
    return {weight(n_fg), weight(n_bg)};
}

Tensor weighted_bce(const Tensor& p, const Tensor& y, double w_fg, double w_bg) {
    if (p.shape() != y.shape() || p.dtype() != y.dtype())
        throw ShapeError("weighted_bce: prediction/label shape mismatch");
    const int64_t n = p.numel();
    double loss = dispatch_dtype(p.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pp = p.data<T>();
        const T* yp = y.data<T>();
        return chunked_mean(n, [&](int64_t i) {
            const double pc =
                std::min(1.0 - kLogClamp, std::max(kLogClamp, double(pp[i])));
            const double yv = double(yp[i]);
            return -(w_fg * yv * std::log(pc) +
                     w_bg * (1.0 - yv) * std::log(1.0 - pc));
        });
    });
    Tensor out = Tensor::scalar(loss, p.dtype());
    autodiff::record(
        out, {p},
        [p, y, w_fg, w_bg, n](const Tensor& gout, autodiff::GradSink& sink) {
            if (!sink.wants(p)) return;
            const double g0 = gout.item() / double(n);
            Tensor dp = Tensor::zeros(p.shape(), p.dtype());
            dispatch_dtype(p.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* pp = p.data<T>();
                const T* yp = y.data<T>();
                T* d = dp.data<T>();
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < n; ++i) {
                    const double pv = double(pp[i]);
                    if (pv < kLogClamp || pv > 1.0 - kLogClamp) {
                        d[i] = T(0);  // clamped region is flat
                        continue;
                    }
                    const double yv = double(yp[i]);
                    d[i] = T(g0 * (-(w_fg * yv / pv) + w_bg * (1.0 - yv) / (1.0 - pv)));
                }
                return 0;
            });
            sink.add(p, dp);
        },
        "weighted_bce");
    return out;
}

Tensor gan_bce(const Tensor& logits, double target) {
    if (target != 0.0 && target != 1.0)
        throw ValueError("gan_bce: target must be 0 or 1");
    const int64_t n = logits.numel();
    if (n < 1) throw ShapeError("gan_bce: empty logits");
    double loss = dispatch_dtype(logits.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* lp = logits.data<T>();
        double acc = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            if (!std::isfinite(double(lp[i])))
                throw ValueError("gan_bce: non-finite logit");
            acc += target * stable_softplus(-lp[i]) +
                   (1.0 - target) * stable_softplus(lp[i]);
        }
        return acc / double(n);
    });
    Tensor out = Tensor::scalar(loss, logits.dtype());
    autodiff::record(
        out, {logits},
        [logits, target, n](const Tensor& gout, autodiff::GradSink& sink) {
            if (!sink.wants(logits)) return;
            const double g0 = gout.item() / double(n);
            Tensor dl = Tensor::zeros(logits.shape(), logits.dtype());
            dispatch_dtype(logits.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* lp = logits.data<T>();
                T* d = dl.data<T>();
                for (int64_t i = 0; i < n; ++i) {
                    const double sig = 1.0 / (1.0 + std::exp(-double(lp[i])));
                    d[i] = T(g0 * (sig - target));
                }
                return 0;
            });
            sink.add(logits, dl);
        },
        "gan_bce");
    return out;
}

Tensor generator_loss(Generator& g, Discriminator& d, const Tensor& x, const Tensor& y,
                      const LossWeights& w) {
    Tensor p = g.forward(x, Mode::train);
    Tensor seg = weighted_bce(p, y, w.w_fg, w.w_bg);
    Tensor adv;
    {
        FreezeGuard freeze_d(d.dict);
        adv = gan_bce(d.forward(p, x), 1.0);
    }
    return add(scale(seg, w.lambda), adv);
}

Tensor discriminator_loss(Generator& g, Discriminator& d, const Tensor& x,
                          const Tensor& y) {
    Tensor p;
    {
        autodiff::NoGradGuard ng;
        p = g.forward(x, Mode::train);
    }
    Tensor fake = gan_bce(d.forward(p, x), 0.0);
    Tensor real = gan_bce(d.forward(y, x), 1.0);
    return add(fake, real);
}

}  // namespace gcanet
