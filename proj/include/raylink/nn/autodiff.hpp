/**
 * @file   autodiff.hpp
 * @brief  Eager reverse-mode differentiation tape.
 *
 * Every operation evaluates immediately and, when any input tracks gradients,
 * records a node holding its inputs and a closure that pushes the output
 * gradient back to them. backward() walks the recorded nodes in reverse
 * topological order.
 */
#pragma once

#include "raylink/nn/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace raylink::nn {

struct Node
{
    Tensor value;
    Tensor grad;  ///< allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    /// Gradient buffer, zero-initialized to the value's shape if missing.
    Tensor& grad_buffer();
};

class Var
{
  public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);
    static Var parameter(Tensor value) { return Var(std::move(value), true); }

    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    /// Gradient, or zeros when nothing has been accumulated yet.
    Tensor grad() const;
    Tensor& grad_buffer() { return node_->grad_buffer(); }
    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

  private:
    friend Var record(Tensor, std::vector<Var>, std::function<void(Node&)>);
    std::shared_ptr<Node> node_;
};

/// Result of an operation on `inputs`; the closure runs during backward only
/// when some input tracks gradients and recording is enabled.
Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

/// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every tracked input.
void backward(const Var& loss);

/// Disables recording for its lifetime (inference).
class NoGradGuard
{
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

bool grad_enabled();

}  // namespace raylink::nn
