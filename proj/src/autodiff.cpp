#include "gcanet/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

namespace gcanet::autodiff {

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<uint64_t> g_next_seq{1};
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool needs_grad(const Tensor& x) {
    return x.defined() && (x.impl()->requires_grad || x.impl()->node != nullptr);
}

void record(Tensor& out, std::initializer_list<Tensor> inputs,
            std::function<void(const Tensor&, GradSink&)> backward,
            const char* op) {
    if (!g_grad_enabled) return;
    bool any = false;
    for (const Tensor& in : inputs) any = any || needs_grad(in);
    if (!any) return;
    auto node = std::make_shared<Node>();
    node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
    node->op = op;
    node->backward = std::move(backward);
    for (const Tensor& in : inputs) {
        if (in.defined() && in.impl()->node) node->parents.push_back(in.impl()->node);
    }
    out.impl()->node = std::move(node);
}

void GradSink::add(const Tensor& x, const Tensor& g) {
    if (!x.defined()) return;
    const auto& impl = x.impl();
    if (impl->node) {
        Slot& slot = pending_[impl->node.get()];
        if (!slot.g.defined()) {
            slot.g = g;  // may alias the caller's tensor; cloned before mutation
            slot.exclusive = false;
            return;
        }
        if (!slot.exclusive) {
            slot.g = slot.g.clone();
            slot.exclusive = true;
        }
        axpy_inplace(slot.g, g);
        return;
    }
    if (impl->requires_grad) {
        Tensor leaf = x;
        leaf.accumulate_grad(g);
    }
}

Tensor GradSink::take(const Node* n) {
    auto it = pending_.find(n);
    if (it == pending_.end()) return Tensor();
    Tensor g = std::move(it->second.g);
    pending_.erase(it);
    return g;
}

void GradSink::put(const Node* n, Tensor g) {
    pending_[n] = Slot{std::move(g), true};
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward: loss must be a scalar tensor");
    if (!loss.impl()->node) {
        if (loss.requires_grad()) {
            Tensor leaf = loss;
            leaf.accumulate_grad(Tensor::full(loss.shape(), 1.0, loss.dtype()));
        }
        return;
    }

    // collect the reachable subgraph
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{loss.impl()->node.get()};
    seen.insert(stack.back());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->seq > b->seq; });

    GradSink sink;
    sink.put(loss.impl()->node.get(), Tensor::full(loss.shape(), 1.0, loss.dtype()));
    for (Node* n : order) {
        Tensor gout = sink.take(n);
        if (!gout.defined()) continue;  // no gradient flowed to this node
        n->backward(gout, sink);
    }
}

}  // namespace gcanet::autodiff
