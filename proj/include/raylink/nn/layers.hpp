/**
 * @file   layers.hpp
 * @brief  Parameterized layers (dense, MLP, 3x3 convolution, batch norm) and
 *         their composition.
 */
#pragma once

#include "raylink/nn/ops.hpp"
#include "raylink/rng.hpp"

#include <memory>
#include <string>
#include <vector>

namespace raylink::nn {

enum class Activation { Linear, Relu, LeakyRelu, Sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
Var apply_activation(const Var& x, Activation a);

class Module
{
  public:
    virtual ~Module() = default;
    virtual Var forward(const Var& input) = 0;
    virtual std::vector<Var> parameters() const = 0;
    virtual std::string name() const = 0;
    virtual void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }
    void zero_grad();

  protected:
    bool training_ = true;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

class Linear : public Module
{
  public:
    Linear(std::size_t in, std::size_t out, Rng& rng);
    Var forward(const Var& input) override;
    std::vector<Var> parameters() const override { return {weight_, bias_}; }
    std::string name() const override;

    std::size_t in_features() const { return weight_.shape()[0]; }
    std::size_t out_features() const { return weight_.shape()[1]; }
    Var& weight() { return weight_; }
    Var& bias() { return bias_; }

  private:
    Var weight_;  ///< [in, out]
    Var bias_;    ///< [out]
};

struct MlpSpec
{
    std::size_t input_width = 0;
    std::vector<std::size_t> widths;
    std::vector<Activation> activations;

    void validate() const;
    std::size_t output_width() const { return widths.back(); }
};

class Mlp : public Module
{
  public:
    Mlp(const MlpSpec& spec, Rng& rng);
    Var forward(const Var& input) override;
    std::vector<Var> parameters() const override;
    std::string name() const override { return "mlp"; }

    const MlpSpec& spec() const { return spec_; }
    Linear& layer(std::size_t i) { return layers_[i]; }

  private:
    MlpSpec spec_;
    std::vector<Linear> layers_;
};

class Conv2d : public Module
{
  public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, Rng& rng, bool with_bias = true);
    Var forward(const Var& input) override;
    std::vector<Var> parameters() const override;
    std::string name() const override;

    Var& kernels() { return kernels_; }
    Var& bias() { return bias_; }

  private:
    Var kernels_;  ///< [out, in, 3, 3]
    Var bias_;     ///< [out] or empty
};

class BatchNorm2d : public Module
{
  public:
    explicit BatchNorm2d(std::size_t channels);
    Var forward(const Var& input) override;
    std::vector<Var> parameters() const override { return {gamma_, beta_}; }
    std::string name() const override;

    BatchNormState& state() { return state_; }
    const BatchNormState& state() const { return state_; }
    Var& gamma() { return gamma_; }
    Var& beta() { return beta_; }

  private:
    Var gamma_;
    Var beta_;
    BatchNormState state_;
};

class ActivationLayer : public Module
{
  public:
    explicit ActivationLayer(Activation a) : activation_(a) {}
    Var forward(const Var& input) override { return apply_activation(input, activation_); }
    std::vector<Var> parameters() const override { return {}; }
    std::string name() const override { return to_string(activation_); }

  private:
    Activation activation_;
};

class Sequential : public Module
{
  public:
    void add(std::unique_ptr<Module> m) { modules_.push_back(std::move(m)); }
    /// Shape errors are re-raised naming the offending layer.
    Var forward(const Var& input) override;
    std::vector<Var> parameters() const override;
    std::string name() const override { return "sequential"; }
    void set_training(bool training) override;

    std::size_t size() const { return modules_.size(); }
    Module& at(std::size_t i) { return *modules_.at(i); }

  private:
    std::vector<std::unique_ptr<Module>> modules_;
};

enum class Loss { Bce, Mae };

struct ForwardBackwardResult
{
    double loss = 0.0;
    std::vector<Tensor> gradients;  ///< one per parameter, in parameters() order
};

/// Zeroes gradients, runs the module, applies the loss and backpropagates.
/// A non-finite loss is rejected.
ForwardBackwardResult forward_backward(Module& model, const Tensor& input, const Tensor& target, Loss loss);

}  // namespace raylink::nn
