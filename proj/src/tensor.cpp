#include "gcanet/tensor.hpp"

#include <cmath>

#include "gcanet/autodiff.hpp"

namespace gcanet {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) {
        if (e < 1) throw ShapeError("extent must be >= 1, got " + shape_str(s));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

static std::shared_ptr<TensorImpl> make_impl(Shape shape, DType dt) {
    auto impl = std::make_shared<TensorImpl>();
    int64_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->dtype = dt;
    impl->data.resize(size_t(n) * dtype_size(dt));
    return impl;
}

Tensor Tensor::wrap(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

Tensor Tensor::zeros(Shape shape, DType dt) {
    return wrap(make_impl(std::move(shape), dt));
}

Tensor Tensor::full(Shape shape, double value, DType dt) {
    Tensor t = zeros(std::move(shape), dt);
    t.fill(value);
    return t;
}

Tensor Tensor::uniform(Shape shape, uint64_t seed, double lo, double hi, DType dt) {
    Rng rng(seed);
    return uniform(std::move(shape), rng, lo, hi, dt);
}

Tensor Tensor::gaussian(Shape shape, uint64_t seed, double mean, double stddev, DType dt) {
    Rng rng(seed);
    return gaussian(std::move(shape), rng, mean, stddev, dt);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, DType dt) {
    Tensor t = zeros(std::move(shape), dt);
    int64_t n = t.numel();
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        T* p = t.data<T>();
        for (int64_t i = 0; i < n; ++i) p[i] = T(rng.uniform(lo, hi));
    });
    return t;
}

Tensor Tensor::gaussian(Shape shape, Rng& rng, double mean, double stddev, DType dt) {
    Tensor t = zeros(std::move(shape), dt);
    int64_t n = t.numel();
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        T* p = t.data<T>();
        for (int64_t i = 0; i < n; ++i) p[i] = T(rng.gaussian(mean, stddev));
    });
    return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dt) {
    Tensor t = zeros(std::move(shape), dt);
    if (int64_t(values.size()) != t.numel())
        throw ShapeError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(t.shape()));
    for (int64_t i = 0; i < t.numel(); ++i) t.set_value_at(i, values[size_t(i)]);
    return t;
}

Tensor Tensor::scalar(double value, DType dt) { return full(Shape{}, value, dt); }

const Shape& Tensor::shape() const { return impl_->shape; }

int64_t Tensor::numel() const {
    int64_t n = 1;
    for (int64_t e : impl_->shape) n *= e;
    return n;
}

int Tensor::rank() const { return int(impl_->shape.size()); }

DType Tensor::dtype() const { return impl_->dtype; }

void* Tensor::raw_data() { return impl_->data.data(); }
const void* Tensor::raw_data() const { return impl_->data.data(); }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
}

Tensor Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() { impl_->grad = Tensor(); }

void Tensor::accumulate_grad(const Tensor& g) {
    if (g.shape() != shape() || g.dtype() != dtype())
        throw ShapeError("gradient shape/dtype mismatch for " + shape_str(shape()));
    if (!impl_->grad.defined()) impl_->grad = Tensor::zeros(shape(), dtype());
    axpy_inplace(impl_->grad, g);
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->dtype = impl_->dtype;
    impl->data = impl_->data;  // shared storage would also do; a copy keeps
                               // detach() safe under later in-place updates
    return wrap(std::move(impl));
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->dtype = impl_->dtype;
    impl->data = impl_->data;
    return wrap(std::move(impl));
}

Tensor Tensor::astype(DType dt) const {
    if (dt == dtype()) return clone();
    Tensor out = zeros(shape(), dt);
    int64_t n = numel();
    if (dt == DType::f64) {
        const float* src = data<float>();
        double* dst = out.data<double>();
        for (int64_t i = 0; i < n; ++i) dst[i] = double(src[i]);
    } else {
        const double* src = data<double>();
        float* dst = out.data<float>();
        for (int64_t i = 0; i < n; ++i) dst[i] = float(src[i]);
    }
    return out;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return value_at(0);
}

double Tensor::value_at(int64_t i) const {
    return dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        return double(data<T>()[i]);
    });
}

void Tensor::set_value_at(int64_t i, double v) {
    dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        reinterpret_cast<T*>(impl_->data.data())[i] = T(v);
        return 0;
    });
}

void Tensor::copy_from(const Tensor& src) {
    if (src.shape() != shape() || src.dtype() != dtype())
        throw ShapeError("copy_from: shape/dtype mismatch");
    std::memcpy(impl_->data.data(), src.impl_->data.data(), impl_->data.size());
}

void Tensor::fill(double v) {
    int64_t n = numel();
    dispatch_dtype(dtype(), [&](auto tag) {
        using T = decltype(tag);
        T* p = data<T>();
        T tv = T(v);
        for (int64_t i = 0; i < n; ++i) p[i] = tv;
        return 0;
    });
}

void axpy_inplace(Tensor& dst, const Tensor& src) {
    if (dst.shape() != src.shape() || dst.dtype() != src.dtype())
        throw ShapeError("axpy_inplace: shape/dtype mismatch");
    int64_t n = dst.numel();
    dispatch_dtype(dst.dtype(), [&](auto tag) {
        using T = decltype(tag);
        T* d = dst.data<T>();
        const T* s = src.data<T>();
        for (int64_t i = 0; i < n; ++i) d[i] += s[i];
        return 0;
    });
}

}  // namespace gcanet
