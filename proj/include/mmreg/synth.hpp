#pragma once

#include <cstdint>
#include <vector>

#include "mmreg/frame.hpp"

namespace mmreg {

enum class ObjectKinds { Rectangles, Ellipses, Mixed };

struct SceneConfig {
    std::uint64_t seed = 1;
    int frames = 8;
    std::size_t width = Frame::kDefaultWidth;
    std::size_t height = Frame::kDefaultHeight;
    int objects = 24;  // placed over the whole strip the camera sweeps
    ObjectKinds kinds = ObjectKinds::Mixed;
    double near_depth = 2.0;   // metres
    double far_depth = 16.0;
    double max_range = 40.0;   // depth that maps to L = 0
    double translate_x = 2.0;  // apparent scene motion, px/frame
    double translate_y = 0.0;
    double parallax = 1.0;        // extra speed of the nearest objects, as a multiple of translate_x
    double object_jitter = 0.75;  // max extra per-object speed, px/frame
    int max_stripes = 3;          // painted bands per object; colour only, no depth change
    double markings = 1.0;        // ground paint patches per 100 px of swept width
    double camouflage = 0.3;      // fraction of objects painted like the ground
    double noise = 0.01;          // Gaussian sigma added to R, G, B, L

    /// Throws std::invalid_argument on non-positive counts or noise outside [0, 0.2].
    void validate() const;
};

struct SceneRender {
    std::vector<Frame> frames;    // R, G, B, L planes
    std::vector<Plane> coverage;  // per-frame union of object coverage in [0,1]
};

/// Procedural street-like sequence: sky and a textured ground plane in world
/// coordinates, plus flat-shaded rectangles/ellipses standing on the ground.
/// Nearer objects are brighter in both colour and L (L = 1 - depth / max_range)
/// and are painted over farther ones with 1 px anti-aliased edges. The background
/// moves by the camera translation each frame; objects additionally move with
/// depth parallax and their own drift. Painted stripes add colour edges that
/// have no depth edge behind them.
SceneRender render_scene(const SceneConfig& config);

std::vector<Frame> generate_sequence(const SceneConfig& config);

}  // namespace mmreg
