// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "reganie/core/tensor.hpp"

namespace reganie {

// Reverse-mode autodiff on a define-by-run tape. Backward functions build
// their output gradients out of recorded ops, so gradients are themselves
// differentiable (the R1 penalty needs a second backward pass through the
// discriminator's first backward pass).

template <typename T>
class Var;

// Thread-local switch; ops created while disabled record no parents.
struct GradMode {
    static bool& enabled() {
        thread_local bool on = true;
        return on;
    }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
    ~NoGradGuard() { GradMode::enabled() = prev; }
};

struct WithGradGuard {
    bool prev;
    explicit WithGradGuard(bool on) : prev(GradMode::enabled()) { GradMode::enabled() = on; }
    ~WithGradGuard() { GradMode::enabled() = prev; }
};

template <typename T>
struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    uint64_t id = 0;
    std::vector<Var<T>> parents;
    // Computes gradient contributions for parents given the gradient of this
    // node. need[i] is false when parent i does not require grad; the slot in
    // `out` may then be left undefined.
    std::function<void(const Var<T>& gout, const std::vector<char>& need,
                       std::vector<Var<T>>& out)>
        backward;
    // Leaf parameter accumulator (plain tensor, outside the graph).
    Tensor<T> grad_accum;

    static uint64_t next_id() {
        static std::atomic<uint64_t> counter{1};
        return counter.fetch_add(1);
    }
};

template <typename T>
class Var {
public:
    Var() = default;

    static Var constant(Tensor<T> v) {
        Var out;
        out.n_ = std::make_shared<Node<T>>();
        out.n_->value = std::move(v);
        out.n_->id = Node<T>::next_id();
        return out;
    }

    static Var param(Tensor<T> v) {
        Var out = constant(std::move(v));
        out.n_->requires_grad = true;
        return out;
    }

    template <typename... Parents>
    static Var op(Tensor<T> v,
                  std::function<void(const Var<T>&, const std::vector<char>&,
                                     std::vector<Var<T>>&)>
                      bwd,
                  Parents... parents) {
        Var out = constant(std::move(v));
        if (GradMode::enabled()) {
            std::vector<Var<T>> ps{parents...};
            bool any = false;
            for (const auto& p : ps) any = any || p.requires_grad();
            if (any) {
                out.n_->requires_grad = true;
                out.n_->parents = std::move(ps);
                out.n_->backward = std::move(bwd);
            }
        }
        return out;
    }

    bool defined() const { return (bool)n_; }
    const Tensor<T>& value() const { return n_->value; }
    Tensor<T>& value() { return n_->value; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    uint64_t id() const { return n_->id; }
    Node<T>* node() const { return n_.get(); }

    const Shape& shape() const { return n_->value.shape(); }

    // Breaks the graph connection; value is shared.
    Var detach() const { return constant(n_->value); }

    Tensor<T>& grad_accum() const { return n_->grad_accum; }

    void zero_grad() const {
        if (n_->grad_accum.defined())
            std::fill(n_->grad_accum.ptr(), n_->grad_accum.ptr() + n_->grad_accum.numel(), T(0));
    }

    bool operator==(const Var& o) const { return n_ == o.n_; }

private:
    std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <typename T>
void topo_collect(Node<T>* root, std::vector<Node<T>*>& order) {
    // Iterative DFS; nodes that do not require grad are pruned.
    std::unordered_map<Node<T>*, int> state;  // 0 new, 1 open, 2 done
    std::vector<Node<T>*> stack{root};
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        int& st = state[n];
        if (st == 0) {
            st = 1;
            for (auto& p : n->parents)
                if (p.requires_grad() && state[p.node()] == 0) stack.push_back(p.node());
        } else {
            if (st == 1) {
                st = 2;
                order.push_back(n);
            }
            stack.pop_back();
        }
    }
}

}  // namespace detail

template <typename T>
Var<T> add_grads(const Var<T>& a, const Var<T>& b);  // defined in ops.hpp

// Computes gradients of `root` (any shape; seeded with ones) with respect to
// `inputs`. With create_graph the returned grads are differentiable.
// Returns zeros-shaped grads for inputs the root does not depend on.
template <typename T>
std::vector<Var<T>> grad(const Var<T>& root, const std::vector<Var<T>>& inputs,
                         bool create_graph = false) {
    check(root.requires_grad(), "grad: root does not require grad");
    std::vector<Node<T>*> order;
    detail::topo_collect(root.node(), order);
    std::sort(order.begin(), order.end(),
              [](Node<T>* a, Node<T>* b) { return a->id > b->id; });

    std::unordered_map<Node<T>*, Var<T>> gm;
    {
        WithGradGuard g(create_graph);
        gm[root.node()] = Var<T>::constant(Tensor<T>::full(root.shape(), T(1)));
        std::vector<char> need;
        std::vector<Var<T>> contrib;
        for (Node<T>* n : order) {
            auto it = gm.find(n);
            if (it == gm.end() || n->parents.empty() || !n->backward) continue;
            need.assign(n->parents.size(), 0);
            contrib.assign(n->parents.size(), Var<T>());
            for (size_t i = 0; i < n->parents.size(); ++i)
                need[i] = n->parents[i].requires_grad() ? 1 : 0;
            n->backward(it->second, need, contrib);
            for (size_t i = 0; i < n->parents.size(); ++i) {
                if (!need[i] || !contrib[i].defined()) continue;
                Node<T>* p = n->parents[i].node();
                auto pit = gm.find(p);
                if (pit == gm.end())
                    gm[p] = contrib[i];
                else
                    pit->second = add_grads(pit->second, contrib[i]);
            }
        }
    }

    std::vector<Var<T>> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        auto it = gm.find(in.node());
        if (it != gm.end())
            out.push_back(create_graph ? it->second : it->second.detach());
        else
            out.push_back(Var<T>::constant(Tensor<T>::zeros(in.shape())));
    }
    return out;
}

// Accumulates gradients into the grad_accum of every reachable leaf that
// requires grad (parameters). Used by the optimizers.
template <typename T>
void backward(const Var<T>& root) {
    std::vector<Node<T>*> order;
    detail::topo_collect(root.node(), order);
    std::vector<Var<T>> leaves;
    for (Node<T>* n : order)
        if (n->parents.empty() && n->requires_grad) leaves.push_back(Var<T>());
    // Re-collect as Vars: grad() needs Var handles; wrap via parents walk.
    // Leaves are the parameter Vars themselves; reconstruct handles by
    // scanning parents of every node.
    std::unordered_map<Node<T>*, Var<T>> handles;
    for (Node<T>* n : order)
        for (auto& p : n->parents)
            if (p.node()->parents.empty() && p.requires_grad()) handles[p.node()] = p;
    if (root.node()->parents.empty() && root.requires_grad())
        handles[root.node()] = root;

    std::vector<Var<T>> ins;
    ins.reserve(handles.size());
    for (auto& kv : handles) ins.push_back(kv.second);
    auto gs = grad(root, ins, /*create_graph=*/false);
    for (size_t i = 0; i < ins.size(); ++i) {
        Node<T>* n = ins[i].node();
        if (!n->grad_accum.defined()) n->grad_accum = Tensor<T>::zeros(n->value.shape());
        const Tensor<T>& g = gs[i].value();
        check(g.shape() == n->value.shape(), "backward: grad shape mismatch");
        T* acc = n->grad_accum.ptr();
        const T* src = g.ptr();
        for (int64_t k = 0; k < g.numel(); ++k) acc[k] += src[k];
    }
}

}  // namespace reganie
