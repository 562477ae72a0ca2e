#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "mmreg/nn.hpp"
#include "mmreg/random.hpp"

namespace mmreg::oracle {

/// Direct six-loop zero-padded cross-correlation, H x W x Cin -> H' x W' x K.
template <typename T>
BasicTensor<T> naive_conv2d(const BasicTensor<T>& input, const nn::ConvParams<T>& p) {
    const long H = static_cast<long>(input.dim(0)), W = static_cast<long>(input.dim(1));
    const long C = static_cast<long>(input.dim(2));
    const long K = static_cast<long>(p.kernels.dim(0)), k = static_cast<long>(p.kernels.dim(1));
    const long s = static_cast<long>(p.stride), pad = static_cast<long>(p.padding);
    const long OH = (H + 2 * pad - k) / s + 1, OW = (W + 2 * pad - k) / s + 1;
    BasicTensor<T> out({static_cast<std::size_t>(OH), static_cast<std::size_t>(OW), static_cast<std::size_t>(K)});
    for (long o = 0; o < K; ++o)
        for (long oh = 0; oh < OH; ++oh)
            for (long ow = 0; ow < OW; ++ow) {
                T acc = p.biases[static_cast<std::size_t>(o)];
                for (long kh = 0; kh < k; ++kh)
                    for (long kw = 0; kw < k; ++kw)
                        for (long c = 0; c < C; ++c) {
                            const long ih = oh * s + kh - pad, iw = ow * s + kw - pad;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            acc += p.kernels[static_cast<std::size_t>(((o * k + kh) * k + kw) * C + c)] *
                                   input[static_cast<std::size_t>((ih * W + iw) * C + c)];
                        }
                out[static_cast<std::size_t>((oh * OW + ow) * K + o)] = acc;
            }
    return out;
}

/// Central differences of a scalar function with respect to every entry of `x`.
inline std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double plus = f();
        x[i] = saved - h;
        const double minus = f();
        x[i] = saved;
        g[i] = (plus - minus) / (2.0 * h);
    }
    return g;
}

/// max_i |a_i - b_i| / max(1e-8, |a_i| + |b_i|) -- symmetric relative error.
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max(1e-8, std::abs(a[i]) + std::abs(b[i]));
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

template <typename T>
BasicTensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    BasicTensor<T> t(shape);
    for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <typename T>
nn::ConvParams<T> random_conv(std::size_t k_out, std::size_t k, std::size_t c_in, std::size_t stride,
                              std::size_t pad, Rng& rng) {
    nn::ConvParams<T> p;
    p.kernels = random_tensor<T>({k_out, k, k, c_in}, rng);
    p.biases.resize(k_out);
    for (auto& b : p.biases) b = static_cast<T>(rng.uniform(-0.5, 0.5));
    p.stride = stride;
    p.padding = pad;
    return p;
}

/// Fixed random projection used as a scalar loss: L = sum_i w_i * y_i.
inline std::vector<double> projection_weights(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return w;
}

inline double project(std::span<const double> y, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
    return s;
}

}  // namespace mmreg::oracle
