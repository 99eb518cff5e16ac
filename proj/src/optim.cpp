#include "gcanet/optim.hpp"

#include <cmath>

namespace gcanet {

void Adam::step(const std::map<std::string, Tensor>& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
    for (const auto& [name, param] : params) {
        Tensor p = param;
        auto it_m = m_.find(name);
        if (it_m == m_.end()) {
            m_.emplace(name, Tensor::zeros(p.shape(), p.dtype()));
            v_.emplace(name, Tensor::zeros(p.shape(), p.dtype()));
        } else if (it_m->second.shape() != p.shape()) {
            throw ShapeError("adam: moment shape mismatch for " + name);
        }
        Tensor m = m_.at(name);
        Tensor v = v_.at(name);
        Tensor grad = p.grad();
        const int64_t n = p.numel();
        dispatch_dtype(p.dtype(), [&](auto tag) {
            using T = decltype(tag);
            T* pp = p.data<T>();
            T* mp = m.data<T>();
            T* vp = v.data<T>();
            const T* gp = grad.defined() ? grad.data<T>() : nullptr;
            const double b1 = cfg_.beta1, b2 = cfg_.beta2, wd = cfg_.weight_decay;
            const double lr = cfg_.lr, eps = cfg_.eps;
            for (int64_t i = 0; i < n; ++i) {
                const double g = (gp ? double(gp[i]) : 0.0) + wd * double(pp[i]);
                const double mi = b1 * double(mp[i]) + (1.0 - b1) * g;
                const double vi = b2 * double(vp[i]) + (1.0 - b2) * g * g;
                mp[i] = T(mi);
                vp[i] = T(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                pp[i] = T(double(pp[i]) - lr * mhat / (std::sqrt(vhat) + eps));
            }
            return 0;
        });
    }
}

}  // namespace gcanet
