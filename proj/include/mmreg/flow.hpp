#pragma once

#include <utility>
#include <vector>

#include "mmreg/frame.hpp"

namespace mmreg {

/// Per-pixel apparent motion in pixels/frame; +u is rightward, +v is downward.
struct FlowField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> u;
    std::vector<float> v;
};

struct FlowOptions {
    double alpha = 1.0;        // smoothness weight, in 8-bit gray-level units
    int iterations = 200;
};

/// Intensities in [0,1] are rescaled by this factor before the Horn-Schunck
/// iteration, so `alpha` keeps its customary gray-level meaning.
inline constexpr double kFlowIntensityScale = 255.0;

/// Horn-Schunck: Jacobi fixed-point iterations on the brightness-constancy
/// constraint with a quadratic smoothness penalty, starting from zero flow.
/// Spatial derivatives are central differences on the mean of both frames with
/// replicated edges; the temporal derivative is next - prev.
FlowField estimate_flow(const Plane& prev, const Plane& next, const FlowOptions& options = {});

inline constexpr double kDefaultFlowClamp = 8.0;

/// Maps each component to clamp(x, -F, F) / (2F) + 0.5, so zero flow is 0.5.
std::pair<Plane, Plane> flow_to_channels(const FlowField& flow, double clamp = kDefaultFlowClamp);

}  // namespace mmreg
