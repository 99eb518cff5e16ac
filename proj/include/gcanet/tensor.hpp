#pragma once

#include <cstring>
#include <memory>
#include <span>

#include "gcanet/common.hpp"
#include "gcanet/rng.hpp"

namespace gcanet {

namespace autodiff {
struct Node;
}

struct TensorImpl;

// N-dimensional numeric array. Copies share storage; clone() deep-copies.
// A tensor is either a leaf (optionally requires_grad) or the output of a
// recorded operation (impl->node set), in which case backward() can reach it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, DType dt = DType::f32);
    static Tensor full(Shape shape, double value, DType dt = DType::f32);
    static Tensor uniform(Shape shape, uint64_t seed, double lo, double hi,
                          DType dt = DType::f32);
    static Tensor gaussian(Shape shape, uint64_t seed, double mean, double stddev,
                           DType dt = DType::f32);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi,
                          DType dt = DType::f32);
    static Tensor gaussian(Shape shape, Rng& rng, double mean, double stddev,
                           DType dt = DType::f32);
    static Tensor from_values(Shape shape, std::span<const double> values,
                              DType dt = DType::f32);
    static Tensor scalar(double value, DType dt = DType::f32);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    int rank() const;
    DType dtype() const;

    template <typename T>
    T* data();
    template <typename T>
    const T* data() const;
    void* raw_data();
    const void* raw_data() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    // Accumulated gradient; undefined Tensor until backward() has reached
    // this leaf. zero_grad() drops the buffer.
    Tensor grad() const;
    void zero_grad();
    void accumulate_grad(const Tensor& g);

    Tensor detach() const;   // same storage, off the tape
    Tensor clone() const;    // deep copy, off the tape
    Tensor astype(DType dt) const;

    double item() const;              // numel() == 1
    double value_at(int64_t i) const; // flat read as double
    void set_value_at(int64_t i, double v);
    void copy_from(const Tensor& src);  // same shape and dtype
    void fill(double v);

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
    static Tensor wrap(std::shared_ptr<TensorImpl> impl);

private:
    std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
    Shape shape;
    DType dtype = DType::f32;
    std::vector<std::byte> data;
    bool requires_grad = false;
    Tensor grad;                            // lazily allocated by backward
    std::shared_ptr<autodiff::Node> node;   // producing op, null for leaves
};

template <typename T>
T* Tensor::data() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return reinterpret_cast<T*>(impl_->data.data());
}

template <typename T>
const T* Tensor::data() const {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return reinterpret_cast<const T*>(impl_->data.data());
}

// dst += src, elementwise; shapes and dtypes must match.
void axpy_inplace(Tensor& dst, const Tensor& src);

// Invoke fn with a value of the tensor's element type.
template <typename Fn>
decltype(auto) dispatch_dtype(DType dt, Fn&& fn) {
    if (dt == DType::f32) return fn(float{});
    return fn(double{});
}

}  // namespace gcanet
