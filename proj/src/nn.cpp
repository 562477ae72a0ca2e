#include "mmreg/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "mmreg/random.hpp"

namespace mmreg::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixView = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixView = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    std::size_t in_h, in_w, in_c;
    std::size_t out_h, out_w;
    std::size_t k, stride, pad, out_c;

    std::size_t positions() const { return out_h * out_w; }
    std::size_t window() const { return k * k * in_c; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const ConvParams<T>& params) {
    const auto& ks = params.kernels.shape();
    if (ks.size() != 4 || ks[1] != ks[2]) {
        throw std::invalid_argument("conv kernels must have shape K x k x k x Cin, got " +
                                    shape_to_string(ks));
    }
    if (input.rank() != 3) {
        throw std::invalid_argument("conv input must be H x W x C, got " +
                                    shape_to_string(input.shape()));
    }
    if (input.dim(2) != ks[3]) {
        throw std::invalid_argument("conv input " + shape_to_string(input.shape()) +
                                    " does not match kernel depth of " + shape_to_string(ks));
    }
    if (params.biases.size() != ks[0]) {
        throw std::invalid_argument("conv has " + std::to_string(params.biases.size()) +
                                    " biases for kernels " + shape_to_string(ks));
    }
    if (params.stride == 0) throw std::invalid_argument("conv stride must be positive");
    ConvGeometry g{};
    g.in_h = input.dim(0);
    g.in_w = input.dim(1);
    g.in_c = input.dim(2);
    g.k = ks[1];
    g.stride = params.stride;
    g.pad = params.padding;
    g.out_c = ks[0];
    g.out_h = conv_output_extent(g.in_h, g.k, g.stride, g.pad);
    g.out_w = conv_output_extent(g.in_w, g.k, g.stride, g.pad);
    return g;
}

// Lowers every receptive field into one row of a positions x (k*k*Cin) matrix.
template <typename T>
void im2col(const T* input, const ConvGeometry& g, T* cols) {
    const std::size_t row_len = g.window();
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            T* row = cols + (oh * g.out_w + ow) * row_len;
            for (std::size_t kh = 0; kh < g.k; ++kh) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - pad;
                T* dst = row + kh * g.k * g.in_c;
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) {
                    std::fill(dst, dst + g.k * g.in_c, T(0));
                    continue;
                }
                for (std::size_t kw = 0; kw < g.k; ++kw) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - pad;
                    T* cell = dst + kw * g.in_c;
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        std::fill(cell, cell + g.in_c, T(0));
                    } else {
                        const T* src = input + (static_cast<std::size_t>(ih) * g.in_w +
                                                static_cast<std::size_t>(iw)) * g.in_c;
                        std::memcpy(cell, src, g.in_c * sizeof(T));
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* input_grad) {
    std::fill(input_grad, input_grad + g.in_h * g.in_w * g.in_c, T(0));
    const std::size_t row_len = g.window();
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const T* row = cols + (oh * g.out_w + ow) * row_len;
            for (std::size_t kh = 0; kh < g.k; ++kh) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - pad;
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t kw = 0; kw < g.k; ++kw) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - pad;
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const T* src = row + (kh * g.k + kw) * g.in_c;
                    T* dst = input_grad + (static_cast<std::size_t>(ih) * g.in_w +
                                           static_cast<std::size_t>(iw)) * g.in_c;
                    for (std::size_t c = 0; c < g.in_c; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

// Per-thread lowering buffer; large enough allocations would otherwise be
// mapped and unmapped on every call.
template <typename T>
T* scratch(std::size_t n) {
    thread_local std::vector<T> buffer;
    if (buffer.size() < n) buffer.resize(n);
    return buffer.data();
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(what) + ": shape " + shape_to_string(a.shape()) +
                                    " does not match " + shape_to_string(b.shape()));
    }
}

}  // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
    const std::size_t padded = extent + 2 * padding;
    if (padded < kernel) {
        throw std::invalid_argument("conv input extent " + std::to_string(extent) + " with padding " +
                                    std::to_string(padding) + " is smaller than kernel " +
                                    std::to_string(kernel));
    }
    if ((padded - kernel) % stride != 0) {
        throw std::invalid_argument("conv output size is not integral: (" + std::to_string(extent) +
                                    " + 2*" + std::to_string(padding) + " - " +
                                    std::to_string(kernel) + ") / " + std::to_string(stride));
    }
    return (padded - kernel) / stride + 1;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvParams<T>& params) {
    const auto g = conv_geometry(input, params);
    T* cols = scratch<T>(g.positions() * g.window());
    im2col(input.data(), g, cols);

    BasicTensor<T> output({g.out_h, g.out_w, g.out_c});
    ConstMatrixView<T> lowered(cols, g.positions(), g.window());
    ConstMatrixView<T> kernels(params.kernels.data(), g.out_c, g.window());
    MatrixView<T> out(output.data(), g.positions(), g.out_c);
    out.noalias() = lowered * kernels.transpose();
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(params.biases.data(), g.out_c);
    out.rowwise() += bias;
    return output;
}

template <typename T>
void conv2d_backward_accumulate(const BasicTensor<T>& input, const ConvParams<T>& params,
                                const BasicTensor<T>& upstream, ConvGrads<T>& acc,
                                BasicTensor<T>* input_grad) {
    const auto g = conv_geometry(input, params);
    const Shape expected{g.out_h, g.out_w, g.out_c};
    if (upstream.shape() != expected) {
        throw std::invalid_argument("conv upstream gradient " + shape_to_string(upstream.shape()) +
                                    " does not match output shape " + shape_to_string(expected));
    }
    if (acc.kernels.shape() != params.kernels.shape() || acc.biases.size() != params.biases.size()) {
        throw std::invalid_argument("conv gradient accumulator " + shape_to_string(acc.kernels.shape()) +
                                    " does not match kernels " + shape_to_string(params.kernels.shape()));
    }

    T* cols = scratch<T>(g.positions() * g.window());
    im2col(input.data(), g, cols);

    ConstMatrixView<T> lowered(cols, g.positions(), g.window());
    ConstMatrixView<T> up(upstream.data(), g.positions(), g.out_c);
    MatrixView<T> dkernels(acc.kernels.data(), g.out_c, g.window());
    dkernels.noalias() += up.transpose() * lowered;
    for (std::size_t p = 0; p < g.positions(); ++p) {
        const T* row = upstream.data() + p * g.out_c;
        for (std::size_t c = 0; c < g.out_c; ++c) acc.biases[c] += row[c];
    }

    if (input_grad != nullptr) {
        ConstMatrixView<T> kernels(params.kernels.data(), g.out_c, g.window());
        MatrixView<T> dcols(cols, g.positions(), g.window());
        dcols.noalias() = up * kernels;
        if (input_grad->shape() != input.shape()) *input_grad = BasicTensor<T>(input.shape());
        col2im(cols, g, input_grad->data());
    }
}

template <typename T>
ConvBackward<T> conv2d_backward(const BasicTensor<T>& input, const ConvParams<T>& params,
                                const BasicTensor<T>& upstream) {
    ConvBackward<T> result{BasicTensor<T>(input.shape()), ConvGrads<T>::zeros_like(params)};
    conv2d_backward_accumulate(input, params, upstream, result.grads, &result.input_grad);
    return result;
}

template <typename T>
PoolResult<T> maxpool2x2_forward(const BasicTensor<T>& input) {
    if (input.rank() != 3) {
        throw std::invalid_argument("maxpool input must be H x W x C, got " +
                                    shape_to_string(input.shape()));
    }
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (h % 2 != 0 || w % 2 != 0) {
        throw std::invalid_argument("maxpool2x2 needs even spatial dims, got " +
                                    shape_to_string(input.shape()));
    }
    PoolResult<T> result{BasicTensor<T>({h / 2, w / 2, c}), {input.shape(), {}}};
    result.indices.winners.resize(result.output.size());
    for (std::size_t oh = 0; oh < h / 2; ++oh) {
        for (std::size_t ow = 0; ow < w / 2; ++ow) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                std::size_t best = ((2 * oh) * w + 2 * ow) * c + ch;
                for (std::size_t dh = 0; dh < 2; ++dh) {
                    for (std::size_t dw = 0; dw < 2; ++dw) {
                        const std::size_t idx = ((2 * oh + dh) * w + 2 * ow + dw) * c + ch;
                        if (input[idx] > input[best]) best = idx;
                    }
                }
                const std::size_t out = (oh * (w / 2) + ow) * c + ch;
                result.output[out] = input[best];
                result.indices.winners[out] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return result;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const PoolIndices& indices, const BasicTensor<T>& upstream) {
    if (upstream.size() != indices.winners.size()) {
        throw std::invalid_argument("maxpool upstream gradient " + shape_to_string(upstream.shape()) +
                                    " does not match pooled size for input " +
                                    shape_to_string(indices.input_shape));
    }
    BasicTensor<T> grad(indices.input_shape);
    for (std::size_t i = 0; i < upstream.size(); ++i) grad[indices.winners[i]] += upstream[i];
    return grad;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
    BasicTensor<T> out = input;
    for (auto& v : out.values()) v = v > T(0) ? v : T(0);
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& upstream) {
    require_same_shape(input, upstream, "relu_backward");
    BasicTensor<T> grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > T(0) ? upstream[i] : T(0);
    return grad;
}

// Plain loops for the dense layer and bias sums: Eigen's vectorized
// reductions start at the first aligned element, so results vary with buffer addresses.
template <typename T>
std::vector<T> dense_forward(const BasicTensor<T>& input, const DenseParams<T>& params) {
    if (params.weights.rank() != 2 || input.size() != params.in_features()) {
        throw std::invalid_argument("dense input " + shape_to_string(input.shape()) +
                                    " does not match weights " + shape_to_string(params.weights.shape()));
    }
    if (params.biases.size() != params.out_features()) {
        throw std::invalid_argument("dense layer has " + std::to_string(params.biases.size()) +
                                    " biases for weights " + shape_to_string(params.weights.shape()));
    }
    const std::size_t n = params.out_features(), d = params.in_features();
    std::vector<T> logits(n);
    const T* x = input.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = params.weights.data() + i * d;
        T acc = 0;
        for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
        logits[i] = acc + params.biases[i];
    }
    return logits;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    const T peak = *std::max_element(logits.begin(), logits.end());
    std::vector<T> probs(logits.size());
    T total = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - peak);
        total += probs[i];
    }
    for (auto& p : probs) p /= total;
    return probs;
}

template <typename T>
SoftmaxXent<T> dense_softmax_xent(const BasicTensor<T>& input, const DenseParams<T>& params,
                                  std::size_t label) {
    const std::size_t n = params.out_features();
    if (label >= n) {
        throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                    std::to_string(n) + " classes");
    }
    SoftmaxXent<T> r;
    r.logits = dense_forward(input, params);
    r.probabilities = softmax<T>(r.logits);

    // log p[label] computed from logits to stay finite when p underflows.
    const T peak = *std::max_element(r.logits.begin(), r.logits.end());
    T sum = 0;
    for (auto z : r.logits) sum += std::exp(z - peak);
    r.loss = -(r.logits[label] - peak - std::log(sum));

    std::vector<T> dlogits = r.probabilities;
    dlogits[label] -= T(1);

    const std::size_t d = params.in_features();
    r.grads.weights = BasicTensor<T>(params.weights.shape());
    r.grads.biases = dlogits;
    MatrixView<T> dw(r.grads.weights.data(), n, d);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> g(dlogits.data(), n);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(input.data(), d);
    dw.noalias() = g * x.transpose();

    r.input_grad = BasicTensor<T>(input.shape());
    T* dx = r.input_grad.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = params.weights.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dx[j] += row[j] * dlogits[i];
    }
    return r;
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, T learning_rate,
              T momentum) {
    if (grads.size() != params.size() || velocity.size() != params.size()) {
        throw std::invalid_argument("sgd_step: " + std::to_string(params.size()) + " params, " +
                                    std::to_string(grads.size()) + " grads, " +
                                    std::to_string(velocity.size()) + " velocity entries");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grads[i];
        params[i] -= learning_rate * velocity[i];
    }
}

template <typename T>
BasicTensor<T> init_he(const Shape& shape, std::uint64_t seed) {
    BasicTensor<T> out(shape);
    const std::size_t fan_in = out.size() / shape.front();
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng(seed);
    for (auto& v : out.values()) v = static_cast<T>(stddev * rng.normal());
    return out;
}

#define MMREG_INSTANTIATE_NN(T)                                                                    \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const ConvParams<T>&);          \
    template ConvBackward<T> conv2d_backward(const BasicTensor<T>&, const ConvParams<T>&,         \
                                             const BasicTensor<T>&);                              \
    template void conv2d_backward_accumulate(const BasicTensor<T>&, const ConvParams<T>&,         \
                                             const BasicTensor<T>&, ConvGrads<T>&,                \
                                             BasicTensor<T>*);                                    \
    template PoolResult<T> maxpool2x2_forward(const BasicTensor<T>&);                              \
    template BasicTensor<T> maxpool2x2_backward(const PoolIndices&, const BasicTensor<T>&);        \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
    template std::vector<T> dense_forward(const BasicTensor<T>&, const DenseParams<T>&);           \
    template std::vector<T> softmax(std::span<const T>);                                           \
    template SoftmaxXent<T> dense_softmax_xent(const BasicTensor<T>&, const DenseParams<T>&,       \
                                               std::size_t);                                      \
    template void sgd_step(std::span<T>, std::span<const T>, std::span<T>, T, T);                  \
    template BasicTensor<T> init_he(const Shape&, std::uint64_t);

MMREG_INSTANTIATE_NN(float)
MMREG_INSTANTIATE_NN(double)

#undef MMREG_INSTANTIATE_NN

}  // namespace mmreg::nn
