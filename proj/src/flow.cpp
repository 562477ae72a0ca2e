#include "mmreg/flow.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmreg {

namespace {

// Weighted 8-neighbour mean used by Horn-Schunck (1/6 edge, 1/12 corner), replicated borders.
void neighbour_mean(const std::vector<double>& f, std::size_t w, std::size_t h, std::vector<double>& out) {
    auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
        r = std::clamp<std::ptrdiff_t>(r, 0, static_cast<std::ptrdiff_t>(h) - 1);
        c = std::clamp<std::ptrdiff_t>(c, 0, static_cast<std::ptrdiff_t>(w) - 1);
        return f[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
    };
    auto border = [&](std::size_t r, std::size_t c) {
        const auto ri = static_cast<std::ptrdiff_t>(r), ci = static_cast<std::ptrdiff_t>(c);
        const double edges = at(ri - 1, ci) + at(ri + 1, ci) + at(ri, ci - 1) + at(ri, ci + 1);
        const double corners =
            at(ri - 1, ci - 1) + at(ri - 1, ci + 1) + at(ri + 1, ci - 1) + at(ri + 1, ci + 1);
        out[r * w + c] = edges / 6.0 + corners / 12.0;
    };
    for (std::size_t r = 0; r < h; ++r) {
        if (r == 0 || r + 1 == h || w < 3) {
            for (std::size_t c = 0; c < w; ++c) border(r, c);
            continue;
        }
        border(r, 0);
        const double* above = f.data() + (r - 1) * w;
        const double* row = f.data() + r * w;
        const double* below = f.data() + (r + 1) * w;
        double* dst = out.data() + r * w;
        for (std::size_t c = 1; c + 1 < w; ++c) {
            const double edges = above[c] + below[c] + row[c - 1] + row[c + 1];
            const double corners = above[c - 1] + above[c + 1] + below[c - 1] + below[c + 1];
            dst[c] = edges / 6.0 + corners / 12.0;
        }
        border(r, w - 1);
    }
}

}  // namespace

FlowField estimate_flow(const Plane& prev, const Plane& next, const FlowOptions& options) {
    if (prev.width != next.width || prev.height != next.height) {
        throw std::invalid_argument("flow frames differ in size: " + std::to_string(prev.width) + "x" +
                                    std::to_string(prev.height) + " vs " + std::to_string(next.width) +
                                    "x" + std::to_string(next.height));
    }
    if (!(options.alpha > 0.0)) throw std::invalid_argument("flow alpha must be positive");
    if (options.iterations < 1) throw std::invalid_argument("flow needs at least one iteration");

    const std::size_t w = prev.width, h = prev.height, n = w * h;
    std::vector<double> mean(n), ix(n), iy(n), it(n), denom(n);
    for (std::size_t i = 0; i < n; ++i) {
        mean[i] = 0.5 * kFlowIntensityScale * (static_cast<double>(prev.values[i]) + next.values[i]);
        it[i] = kFlowIntensityScale * (static_cast<double>(next.values[i]) - prev.values[i]);
    }
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t up = r == 0 ? 0 : r - 1, down = r + 1 == h ? r : r + 1;
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t left = c == 0 ? 0 : c - 1, right = c + 1 == w ? c : c + 1;
            ix[r * w + c] = 0.5 * (mean[r * w + right] - mean[r * w + left]);
            iy[r * w + c] = 0.5 * (mean[down * w + c] - mean[up * w + c]);
        }
    }
    const double alpha2 = options.alpha * options.alpha;
    for (std::size_t i = 0; i < n; ++i) denom[i] = alpha2 + ix[i] * ix[i] + iy[i] * iy[i];

    std::vector<double> u(n, 0.0), v(n, 0.0), ubar(n), vbar(n);
    for (int k = 0; k < options.iterations; ++k) {
        neighbour_mean(u, w, h, ubar);
        neighbour_mean(v, w, h, vbar);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = (ix[i] * ubar[i] + iy[i] * vbar[i] + it[i]) / denom[i];
            u[i] = ubar[i] - ix[i] * t;
            v[i] = vbar[i] - iy[i] * t;
        }
    }

    FlowField out{w, h, std::vector<float>(n), std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        out.u[i] = static_cast<float>(u[i]);
        out.v[i] = static_cast<float>(v[i]);
    }
    return out;
}

std::pair<Plane, Plane> flow_to_channels(const FlowField& flow, double clamp) {
    if (!(clamp > 0.0)) throw std::invalid_argument("flow clamp must be positive");
    auto map = [clamp](float x) {
        const double c = std::clamp(static_cast<double>(x), -clamp, clamp);
        return static_cast<float>(c / (2.0 * clamp) + 0.5);
    };
    Plane u(flow.width, flow.height), v(flow.width, flow.height);
    std::transform(flow.u.begin(), flow.u.end(), u.values.begin(), map);
    std::transform(flow.v.begin(), flow.v.end(), v.values.begin(), map);
    return {std::move(u), std::move(v)};
}

}  // namespace mmreg
