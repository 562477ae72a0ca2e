#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmreg/tensor.hpp"

namespace mmreg::nn {

/// Convolution weights. Kernels are stored K x k x k x Cin so that one kernel
/// row lines up with a lowered (im2col) input window ordered (kh, kw, ci).
template <typename T>
struct ConvParams {
    BasicTensor<T> kernels;
    std::vector<T> biases;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t kernel_size() const { return kernels.dim(1); }
    std::size_t in_channels() const { return kernels.dim(3); }
};

template <typename T>
struct ConvGrads {
    BasicTensor<T> kernels;
    std::vector<T> biases;

    static ConvGrads zeros_like(const ConvParams<T>& params) {
        return {BasicTensor<T>(params.kernels.shape()), std::vector<T>(params.biases.size(), T(0))};
    }
};

template <typename T>
struct ConvBackward {
    BasicTensor<T> input_grad;
    ConvGrads<T> grads;
};

/// Output spatial extent for one axis; throws when the window does not tile exactly.
std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// Zero-padded cross-correlation of an H x W x Cin input, lowered to a matrix product.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvParams<T>& params);

template <typename T>
ConvBackward<T> conv2d_backward(const BasicTensor<T>& input, const ConvParams<T>& params,
                                const BasicTensor<T>& upstream);

/// Adds parameter gradients into `acc`; writes the input gradient only when
/// `input_grad` is non-null. Used by the training loop to avoid reallocating.
template <typename T>
void conv2d_backward_accumulate(const BasicTensor<T>& input, const ConvParams<T>& params,
                                const BasicTensor<T>& upstream, ConvGrads<T>& acc,
                                BasicTensor<T>* input_grad);

/// Flat input index of the winning element for every pooled output.
struct PoolIndices {
    Shape input_shape;
    std::vector<std::uint32_t> winners;
};

template <typename T>
struct PoolResult {
    BasicTensor<T> output;
    PoolIndices indices;
};

/// 2x2 max pooling with stride 2. Ties go to the first element in row-major window order.
template <typename T>
PoolResult<T> maxpool2x2_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const PoolIndices& indices, const BasicTensor<T>& upstream);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Passes the upstream gradient where input > 0; zero elsewhere, including at 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& upstream);

/// Fully connected layer: weights N x D, one bias per output class.
template <typename T>
struct DenseParams {
    BasicTensor<T> weights;
    std::vector<T> biases;

    std::size_t out_features() const { return weights.dim(0); }
    std::size_t in_features() const { return weights.dim(1); }
};

template <typename T>
struct SoftmaxXent {
    std::vector<T> logits;
    std::vector<T> probabilities;
    T loss{};
    DenseParams<T> grads;
    BasicTensor<T> input_grad;  // same shape as the dense input
};

template <typename T>
std::vector<T> dense_forward(const BasicTensor<T>& input, const DenseParams<T>& params);

/// Max-subtracted softmax.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

/// Dense layer + softmax + cross-entropy against `label`, with all gradients.
template <typename T>
SoftmaxXent<T> dense_softmax_xent(const BasicTensor<T>& input, const DenseParams<T>& params,
                                  std::size_t label);

/// Momentum SGD on one parameter buffer: v <- m*v + g, w <- w - lr*v.
/// With momentum 0 this is plain w <- w - lr*g.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, T learning_rate,
              T momentum);

/// He-Gaussian initialization: N(0, 2 / fan_in) with fan_in = numel / shape[0].
template <typename T>
BasicTensor<T> init_he(const Shape& shape, std::uint64_t seed);

}  // namespace mmreg::nn
