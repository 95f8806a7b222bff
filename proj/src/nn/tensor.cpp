#include "raylink/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace raylink::nn {

std::size_t shape_size(const Shape& shape)
{
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values))
{
    if (values_.size() != shape_size(shape_))
        throw ShapeError("tensor: " + std::to_string(values_.size()) + " values do not fit shape " +
                         shape_string(shape_));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != size())
        throw ShapeError("reshape: " + shape_string(shape_) + " cannot become " + shape_string(shape));
    return Tensor(std::move(shape), values_);
}

bool Tensor::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace raylink::nn
