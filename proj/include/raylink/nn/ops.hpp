/**
 * @file   ops.hpp
 * @brief  Differentiable operations. Matrices are rank-2 row-major tensors;
 *         images are NCHW.
 */
#pragma once

#include "raylink/nn/autodiff.hpp"

#include <cstdint>
#include <vector>

namespace raylink::nn {

constexpr double kLeakySlope = 0.01;

Var matmul(const Var& a, const Var& b);                      ///< [n,k] x [k,m]
Var linear(const Var& x, const Var& w, const Var& bias);     ///< x [n,in] w [in,out] bias [out]
Var add(const Var& a, const Var& b);                         ///< same shape
Var sub(const Var& a, const Var& b);                         ///< same shape
Var scale(const Var& a, double s);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope = kLeakySlope);
Var sigmoid(const Var& x);
Var reshape(const Var& x, Shape shape);

/// out[r] = x[index[r]] for rows of a rank-2 tensor.
Var gather_rows(const Var& x, const std::vector<std::uint32_t>& index);
/// [n,a] and [n,b] -> [n,a+b].
Var concat_cols(const Var& a, const Var& b);
/// out[segment[r]] += x[r]; output has `segments` rows.
Var segment_sum(const Var& x, const std::vector<std::uint32_t>& segment, std::size_t segments);
/// Element-wise maximum over rows sharing a segment; every segment must be non-empty.
Var segment_max(const Var& x, const std::vector<std::uint32_t>& segment, std::size_t segments);

/// 3x3 cross-correlation with zero padding 1 and stride 1:
/// out[b,o,y,x] = bias[o] + sum_{c,i,j} k[o,c,i,j] * in[b,c,y+i-1,x+j-1].
/// `bias` may be empty.
Var conv2d(const Var& input, const Var& kernels, const Var& bias = {});

struct BatchNormState
{
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

/// Per-channel normalization of an NCHW tensor followed by gamma * x + beta.
/// Training mode uses batch statistics (biased variance) and updates the
/// running statistics with unbiased variance; inference uses running statistics.
Var batch_norm2d(const Var& input, const Var& gamma, const Var& beta, BatchNormState& state, bool training);

/// Mean binary cross-entropy; predictions clamped to [1e-12, 1 - 1e-12].
Var bce(const Var& prediction, const Tensor& target);
/// Mean absolute error.
Var mae(const Var& prediction, const Tensor& target);
Var sum(const Var& x);

}  // namespace raylink::nn
