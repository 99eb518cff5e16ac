#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gcanet/tensor.hpp"

namespace gcanet::autodiff {

class GradSink;

// One recorded operation of the tape. Nodes are sequence-numbered at
// creation; replaying reachable nodes in descending sequence order is a
// valid reverse topological order, and visits each node exactly once.
struct Node {
    uint64_t seq = 0;
    const char* op = "";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Tensor& grad_out, GradSink& sink)> backward;
};

bool grad_enabled();

// Disables tape recording in scope (forwards for frozen evaluation).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// True if gradients can flow to x: a requires_grad leaf or an op output.
bool needs_grad(const Tensor& x);

// Attach a node to out, recording backward. No-op when grad mode is off or
// no input needs grad. backward receives d(loss)/d(out) and must route each
// input's contribution through the sink.
void record(Tensor& out, std::initializer_list<Tensor> inputs,
            std::function<void(const Tensor&, GradSink&)> backward,
            const char* op);

// Routes gradient contributions during one reverse sweep. Intermediate
// gradients are kept per producing node and released as soon as consumed;
// leaf gradients accumulate persistently on the tensor.
class GradSink {
public:
    bool wants(const Tensor& x) const { return needs_grad(x); }

    // Accumulate g as d(loss)/d(x). g may alias grad_out; the sink clones
    // before the first in-place accumulation.
    void add(const Tensor& x, const Tensor& g);

    Tensor take(const Node* n);
    void put(const Node* n, Tensor g);

private:
    struct Slot {
        Tensor g;
        bool exclusive = false;
    };
    std::unordered_map<const Node*, Slot> pending_;
};

// Reverse sweep from a scalar loss. Accumulates d(loss)/d(leaf) into every
// reachable requires_grad leaf; repeated calls without zero_grad accumulate.
void backward(const Tensor& loss);

}  // namespace gcanet::autodiff

namespace gcanet {
using autodiff::backward;
using autodiff::NoGradGuard;
}  // namespace gcanet
