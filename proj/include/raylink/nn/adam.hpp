/**
 * @file   adam.hpp
 * @brief  Adam optimizer with bias correction.
 */
#pragma once

#include "raylink/nn/autodiff.hpp"

#include <cstddef>
#include <vector>

namespace raylink::nn {

struct AdamConfig
{
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam
{
  public:
    Adam(std::vector<Var> params, AdamConfig config = {});

    /// Applies one update from the accumulated gradients. A non-finite
    /// gradient anywhere skips the whole step and counts a divergence.
    bool step();
    void zero_grad();

    std::size_t steps() const { return t_; }
    std::size_t divergences() const { return divergences_; }
    const AdamConfig& config() const { return config_; }

  private:
    std::vector<Var> params_;
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::size_t t_ = 0;
    std::size_t divergences_ = 0;
};

}  // namespace raylink::nn
