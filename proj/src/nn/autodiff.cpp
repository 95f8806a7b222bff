#include "raylink/nn/autodiff.hpp"

#include <unordered_set>

namespace raylink::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor& Node::grad_buffer()
{
    if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Tensor Var::grad() const
{
    if (!node_->grad.empty()) return node_->grad;
    return Tensor(node_->value.shape());
}

void Var::zero_grad()
{
    if (!node_->grad.empty()) node_->grad.fill(0.0);
}

Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn)
{
    Var out(std::move(value), false);
    if (!g_grad_enabled) return out;
    bool tracked = false;
    for (const auto& in : inputs) tracked = tracked || in.requires_grad();
    if (!tracked) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (auto& in : inputs) out.node_->parents.push_back(in.node());
    out.node_->backward_fn = std::move(backward_fn);
    return out;
}

void backward(const Var& loss)
{
    if (loss.value().size() != 1) throw ShapeError("backward: loss must be a scalar");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; the reverse of that order is topological.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

}  // namespace raylink::nn
