#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vggsvm/tensor.hpp"

// Forward and backward kernels for the layer types a VGG network is made of.
// Activations are NCHW (conv/pool) or (N, features) (linear). Backward
// functions accumulate into parameter gradients (callers zero them) and
// overwrite input gradients.
namespace vggsvm::nn {

/// 3x3 convolution, stride 1, zero padding 1. weight is (out, in, 3, 3), bias (out).
[[nodiscard]] Tensor conv3x3_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);

void conv3x3_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output, Tensor* grad_input,
                      Tensor& grad_weight, Tensor& grad_bias);

[[nodiscard]] Tensor relu_forward(const Tensor& input);

/// `output` is the ReLU output; its positive entries pass gradient through.
[[nodiscard]] Tensor relu_backward(const Tensor& output, const Tensor& grad_output);

struct PoolOutput
{
    Tensor output;
    std::vector<std::uint32_t> argmax;  ///< flat input offset of each output's winner
};

/// 2x2 max pooling, stride 2. Ties go to the first element in row-major window order.
[[nodiscard]] PoolOutput maxpool2_forward(const Tensor& input);

[[nodiscard]] Tensor maxpool2_backward(const Tensor::Shape& input_shape, std::span<const std::uint32_t> argmax,
                                       const Tensor& grad_output);

/// Fully connected layer: input (n, in), weight (out, in), bias (out).
/// Rows are processed independently so a sample's output does not depend on
/// the rest of its batch.
[[nodiscard]] Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);

void linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output, Tensor* grad_input,
                     Tensor& grad_weight, Tensor& grad_bias);

/// Row-wise softmax with max subtraction.
[[nodiscard]] Tensor softmax(const Tensor& logits);

struct LossOutput
{
    double loss = 0.0;   ///< mean over the batch of -log softmax(logits)[label]
    Tensor grad_logits;  ///< d loss / d logits
};

[[nodiscard]] LossOutput cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace vggsvm::nn
