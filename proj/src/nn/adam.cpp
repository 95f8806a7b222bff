#include "raylink/nn/adam.hpp"

#include <cmath>

namespace raylink::nn {

Adam::Adam(std::vector<Var> params, AdamConfig config) : params_(std::move(params)), config_(config)
{
    for (const auto& p : params_) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
    }
}

bool Adam::step()
{
    for (const auto& p : params_)
        if (p.has_grad() && !p.node()->grad.all_finite()) {
            ++divergences_;
            return false;
        }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        if (!params_[k].has_grad()) continue;
        const Tensor& g = params_[k].node()->grad;
        Tensor& w = params_[k].value();
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            w[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        }
    }
    return true;
}

void Adam::zero_grad()
{
    for (auto& p : params_) p.zero_grad();
}

}  // namespace raylink::nn
