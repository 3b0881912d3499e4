#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nilm/tensor.hpp"

// Differentiable forward ops. Every op records a backward closure when any
// input requires grad and GradMode is enabled. Shapes must match exactly;
// the only broadcast is tensor-with-scalar through the `double` overloads.
namespace nilm::ops {

enum class Padding { kSame, kValid };

/// Dilated 1-D convolution (cross-correlation).
///
/// input [C_in x T], kernels [C_out x C_in x k], bias [C_out]. Output position
/// t reads input[t + j*dilation - offset] for taps j in [0, k); offset is
/// (k-1)*dilation/2 for same padding (k must be odd) and 0 for valid padding.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t dilation, Padding padding);

/// Output length of conv1d for the given geometry; throws SizeError when a
/// valid convolution would be empty.
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel_size,
                                 std::size_t dilation, Padding padding);

/// Number of input positions feeding one output position.
constexpr std::size_t receptive_field(std::size_t kernel_size, std::size_t dilation) {
  return (kernel_size - 1) * dilation + 1;
}

/// weight [m x n] times input [n].
Tensor matvec(const Tensor& weight, const Tensor& input);
/// weight [m x n] times input [n] plus bias [m].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Softmax of a rank-1 tensor, evaluated with max subtraction.
Tensor softmax(const Tensor& x);
/// Natural log; inputs must be positive.
Tensor log(const Tensor& x);
/// Clamp to [lo, hi]; gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor square(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double scalar);
Tensor mul(const Tensor& a, double scalar);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Concatenates along `axis`. All other extents must agree.
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

/// Same data, new shape with the same element count.
Tensor reshape(const Tensor& x, Shape shape);
/// Columns [start, start + count) of a rank-2 tensor.
Tensor slice_columns(const Tensor& x, std::size_t start, std::size_t count);
/// Rank-1 [R] tiled into [R x count], every column equal to the input.
Tensor repeat_columns(const Tensor& x, std::size_t count);

}  // namespace nilm::ops
