/**
 * @file   tensor.hpp
 * @brief  Dense double-precision tensor with a dynamic shape.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace raylink::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct ShapeError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

class Tensor
{
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    /// Row-major access for rank-2 tensors.
    double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

    void fill(double v);
    /// Same values, new shape with the same element count.
    Tensor reshaped(Shape shape) const;
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    Shape shape_;
    std::vector<double> values_;
};

}  // namespace raylink::nn
