#include "raylink/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace raylink::nn {

std::string to_string(Activation a)
{
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "linear";
}

Activation activation_from_string(const std::string& s)
{
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::Relu;
    if (s == "leaky_relu") return Activation::LeakyRelu;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

Var apply_activation(const Var& x, Activation a)
{
    switch (a) {
        case Activation::Linear: return x;
        case Activation::Relu: return relu(x);
        case Activation::LeakyRelu: return leaky_relu(x);
        case Activation::Sigmoid: return sigmoid(x);
    }
    return x;
}

void Module::zero_grad()
{
    for (auto p : parameters()) p.zero_grad();
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight_(Var::parameter(glorot_uniform({in, out}, in, out, rng))), bias_(Var::parameter(Tensor({out})))
{
}

Var Linear::forward(const Var& input) { return linear(input, weight_, bias_); }

std::string Linear::name() const
{
    return "linear(" + std::to_string(in_features()) + "->" + std::to_string(out_features()) + ")";
}

void MlpSpec::validate() const
{
    if (widths.empty()) throw std::invalid_argument("MlpSpec: at least one layer is required");
    if (activations.size() != widths.size())
        throw std::invalid_argument("MlpSpec: one activation per layer is required");
    if (input_width == 0) throw std::invalid_argument("MlpSpec: input width must be positive");
    for (auto w : widths)
        if (w == 0) throw std::invalid_argument("MlpSpec: layer widths must be positive");
}

Mlp::Mlp(const MlpSpec& spec, Rng& rng) : spec_(spec)
{
    spec.validate();
    std::size_t in = spec.input_width;
    for (std::size_t w : spec.widths) {
        layers_.emplace_back(in, w, rng);
        in = w;
    }
}

Var Mlp::forward(const Var& input)
{
    Var x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            x = apply_activation(layers_[i].forward(x), spec_.activations[i]);
        } catch (const ShapeError& e) {
            throw ShapeError("mlp layer " + std::to_string(i) + " " + layers_[i].name() + ": " + e.what());
        }
    }
    return x;
}

std::vector<Var> Mlp::parameters() const
{
    std::vector<Var> out;
    for (const auto& l : layers_)
        for (auto& p : l.parameters()) out.push_back(p);
    return out;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, Rng& rng, bool with_bias)
    : kernels_(Var::parameter(
          glorot_uniform({out_channels, in_channels, 3, 3}, in_channels * 9, out_channels * 9, rng)))
{
    if (with_bias) bias_ = Var::parameter(Tensor({out_channels}));
}

Var Conv2d::forward(const Var& input) { return conv2d(input, kernels_, bias_); }

std::vector<Var> Conv2d::parameters() const
{
    if (bias_) return {kernels_, bias_};
    return {kernels_};
}

std::string Conv2d::name() const
{
    return "conv2d(" + std::to_string(kernels_.shape()[1]) + "->" + std::to_string(kernels_.shape()[0]) + ")";
}

BatchNorm2d::BatchNorm2d(std::size_t channels)
    : gamma_(Var::parameter(Tensor({channels}, 1.0))), beta_(Var::parameter(Tensor({channels})))
{
    state_.running_mean.assign(channels, 0.0);
    state_.running_var.assign(channels, 1.0);
}

Var BatchNorm2d::forward(const Var& input) { return batch_norm2d(input, gamma_, beta_, state_, training_); }

std::string BatchNorm2d::name() const { return "batch_norm2d(" + std::to_string(gamma_.value().size()) + ")"; }

Var Sequential::forward(const Var& input)
{
    Var x = input;
    for (std::size_t i = 0; i < modules_.size(); ++i) {
        try {
            x = modules_[i]->forward(x);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " " + modules_[i]->name() + ": " + e.what());
        }
    }
    return x;
}

std::vector<Var> Sequential::parameters() const
{
    std::vector<Var> out;
    for (const auto& m : modules_)
        for (auto& p : m->parameters()) out.push_back(p);
    return out;
}

void Sequential::set_training(bool training)
{
    Module::set_training(training);
    for (auto& m : modules_) m->set_training(training);
}

ForwardBackwardResult forward_backward(Module& model, const Tensor& input, const Tensor& target, Loss loss)
{
    model.zero_grad();
    const Var out = model.forward(Var(input));
    const Var l = loss == Loss::Bce ? bce(out, target) : mae(out, target);
    const double value = l.value()[0];
    if (!std::isfinite(value)) throw std::runtime_error("forward_backward: loss is not finite");
    backward(l);
    ForwardBackwardResult r;
    r.loss = value;
    for (const auto& p : model.parameters()) r.gradients.push_back(p.grad());
    return r;
}

}  // namespace raylink::nn
