#include "mmreg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mmreg/random.hpp"

namespace mmreg {

namespace {

struct SceneObject {
    bool ellipse = false;
    double cx = 0, cy = 0;  // world position at t = 0
    double half_w = 0, half_h = 0;
    double vx = 0, vy = 0;  // own drift, px/frame
    double depth = 0;
    std::array<double, 3> rgb{};
    struct Stripe {
        bool vertical;
        double lo, hi;  // object-relative band in [-1, 1]
        std::array<double, 3> rgb;
    };
    std::vector<Stripe> stripes;

    std::array<double, 3> color_at(double x, double y) const {
        for (const auto& s : stripes) {
            const double u = s.vertical ? (x - cx) / half_w : (y - cy) / half_h;
            if (u >= s.lo && u < s.hi) return s.rgb;
        }
        return rgb;
    }
};

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h, 1.0) * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    std::array<double, 3> rgb{};
    switch (static_cast<int>(hp)) {
        case 0: rgb = {c, x, 0}; break;
        case 1: rgb = {x, c, 0}; break;
        case 2: rgb = {0, c, x}; break;
        case 3: rgb = {0, x, c}; break;
        case 4: rgb = {x, 0, c}; break;
        default: rgb = {c, 0, x}; break;
    }
    const double m = v - c;
    for (auto& ch : rgb) ch += m;
    return rgb;
}

// Signed distance in pixels (negative inside), approximate for ellipses.
double signed_distance(const SceneObject& o, double x, double y) {
    const double dx = x - o.cx, dy = y - o.cy;
    if (!o.ellipse) return std::max(std::abs(dx) - o.half_w, std::abs(dy) - o.half_h);
    const double nx = dx / o.half_w, ny = dy / o.half_h;
    const double rho = std::sqrt(nx * nx + ny * ny);
    const double gx = dx / (o.half_w * o.half_w), gy = dy / (o.half_h * o.half_h);
    const double grad = std::sqrt(gx * gx + gy * gy);
    if (grad < 1e-12) return -std::min(o.half_w, o.half_h);
    return (rho - 1.0) * rho / grad;
}

struct Marking {
    double x0, x1, y0, y1;  // world rectangle on the ground
    std::array<double, 3> rgb;
};

struct Background {
    double horizon;  // world row of the horizon
    double height;
    std::array<double, 4> phase;
    std::vector<Marking> markings;  // paint on the ground: colour edges without depth edges

    // World-coordinate colour and depth; identical inputs give identical bits.
    void sample(double wx, double wy, std::array<double, 3>& rgb, double& depth_l) const {
        if (wy < horizon) {
            const double t = std::clamp(wy / std::max(horizon, 1.0), 0.0, 1.0);
            rgb = {0.55 + 0.15 * t, 0.70 + 0.12 * t, 0.92 - 0.05 * t};
            depth_l = 0.0;  // no return from the sky
            return;
        }
        const double g = std::clamp((wy - horizon) / std::max(height - horizon, 1.0), 0.0, 1.0);
        const double texture = 0.05 * std::sin(wx * 0.071 + phase[0]) * std::cos(wy * 0.093 + phase[1]) +
                               0.03 * std::sin((wx + wy) * 0.031 + phase[2]) +
                               0.02 * std::cos(wx * 0.013 - wy * 0.017 + phase[3]);
        const double base = 0.30 + 0.10 * g + texture;
        rgb = {base + 0.04, base + 0.02, base - 0.02};
        for (const auto& m : markings) {
            if (wx >= m.x0 && wx < m.x1 && wy >= m.y0 && wy < m.y1) {
                rgb = m.rgb;
                break;
            }
        }
        depth_l = 0.02 + 0.13 * g;  // sparse, weak ground returns
    }
};

}  // namespace

void SceneConfig::validate() const {
    if (frames < 1) throw std::invalid_argument("scene needs at least one frame");
    if (objects < 1) throw std::invalid_argument("scene needs at least one object");
    if (width < 8 || height < 8) throw std::invalid_argument("scene dims must be at least 8x8");
    if (!(noise >= 0.0 && noise <= 0.2)) throw std::invalid_argument("noise must be in [0, 0.2]");
    if (!(near_depth > 0.0 && far_depth > near_depth && max_range >= far_depth)) {
        throw std::invalid_argument("need 0 < near_depth < far_depth <= max_range");
    }
    if (object_jitter < 0.0) throw std::invalid_argument("object jitter must be non-negative");
    if (parallax < 0.0) throw std::invalid_argument("parallax must be non-negative");
    if (max_stripes < 0) throw std::invalid_argument("stripe count must be non-negative");
    if (markings < 0.0) throw std::invalid_argument("marking density must be non-negative");
    if (!(camouflage >= 0.0 && camouflage <= 1.0)) throw std::invalid_argument("camouflage must be in [0,1]");
}

SceneRender render_scene(const SceneConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const auto W = static_cast<double>(config.width);
    const auto H = static_cast<double>(config.height);
    const double span_t = static_cast<double>(config.frames - 1);

    Background bg{std::round(H * rng.uniform(0.30, 0.45)), H,
                  {rng.uniform(0, 6.28), rng.uniform(0, 6.28), rng.uniform(0, 6.28), rng.uniform(0, 6.28)},
                  {}};

    // Image position of world point p at frame t is p + t * translation.
    const double x_lo = std::min(0.0, -config.translate_x * span_t) - 40.0;
    const double x_hi = std::max(W, W - config.translate_x * span_t) + 40.0;

    const auto n_markings = static_cast<std::size_t>(std::lround(config.markings * (x_hi - x_lo) / 100.0));
    for (std::size_t k = 0; k < n_markings; ++k) {
        Marking m;
        m.x0 = rng.uniform(x_lo, x_hi);
        m.x1 = m.x0 + rng.uniform(0.02, 0.25) * H;
        m.y0 = rng.uniform(bg.horizon, H);
        m.y1 = m.y0 + rng.uniform(0.02, 0.12) * H;
        m.rgb = hsv_to_rgb(rng.uniform(), rng.uniform(0.0, 0.8), rng.uniform(0.1, 0.95));
        bg.markings.push_back(m);
    }

    std::vector<SceneObject> objects(static_cast<std::size_t>(config.objects));
    for (auto& o : objects) {
        o.ellipse = config.kinds == ObjectKinds::Ellipses ||
                    (config.kinds == ObjectKinds::Mixed && rng.uniform() < 0.5);
        o.depth = rng.uniform(config.near_depth, config.far_depth);
        const double nearness = (config.far_depth - o.depth) / (config.far_depth - config.near_depth);
        const double scale = 0.5 + 0.8 * nearness;  // nearer objects look bigger
        o.half_w = std::min(W / 4.0, rng.uniform(0.04, 0.12) * H * 2.0 * scale);
        o.half_h = std::min(H / 2.2, rng.uniform(0.10, 0.28) * H * scale);
        o.cx = rng.uniform(x_lo, x_hi);
        const double base = rng.uniform(bg.horizon + 0.05 * H, H + 0.1 * H);
        o.cy = base - o.half_h;
        o.vx = config.translate_x * config.parallax * nearness +
               rng.uniform(-config.object_jitter, config.object_jitter);
        o.vy = rng.uniform(-config.object_jitter, config.object_jitter) * 0.5;
        const double value = 0.35 + 0.6 * nearness;
        if (rng.uniform() < config.camouflage) {
            // ground-like paint; only depth and motion separate it from the road
            const double base = 0.22 + 0.2 * nearness + rng.uniform(0.0, 0.06);
            o.rgb = {base + 0.04, base + 0.02, base - 0.02};
        } else {
            o.rgb = hsv_to_rgb(rng.uniform(), rng.uniform(0.35, 0.85), value);
        }
        const auto stripes = config.max_stripes == 0 ? 0 : rng.below(static_cast<std::uint64_t>(config.max_stripes) + 1);
        for (std::uint64_t k = 0; k < stripes; ++k) {
            SceneObject::Stripe st;
            st.vertical = rng.uniform() < 0.5;
            st.lo = rng.uniform(-0.9, 0.6);
            st.hi = st.lo + rng.uniform(0.1, 0.4);
            st.rgb = hsv_to_rgb(rng.uniform(), rng.uniform(0.2, 0.9), value * rng.uniform(0.6, 1.0));
            o.stripes.push_back(st);
        }
    }
    std::stable_sort(objects.begin(), objects.end(),
                     [](const SceneObject& a, const SceneObject& b) { return a.depth > b.depth; });

    SceneRender out;
    for (int t = 0; t < config.frames; ++t) {
        Frame frame(config.width, config.height);
        Plane r(config.width, config.height), g(config.width, config.height),
            b(config.width, config.height), l(config.width, config.height),
            cover(config.width, config.height);
        const double shift_x = config.translate_x * t, shift_y = config.translate_y * t;

        for (std::size_t y = 0; y < config.height; ++y) {
            for (std::size_t x = 0; x < config.width; ++x) {
                std::array<double, 3> rgb;
                double depth_l;
                bg.sample(static_cast<double>(x) - shift_x, static_cast<double>(y) - shift_y, rgb, depth_l);
                const std::size_t i = y * config.width + x;
                r.values[i] = static_cast<float>(rgb[0]);
                g.values[i] = static_cast<float>(rgb[1]);
                b.values[i] = static_cast<float>(rgb[2]);
                l.values[i] = static_cast<float>(depth_l);
            }
        }

        for (const auto& base : objects) {
            SceneObject o = base;
            o.cx += shift_x + o.vx * t;
            o.cy += shift_y + o.vy * t;
            const double depth_l = 1.0 - o.depth / config.max_range;
            const auto x0 = static_cast<long>(std::floor(std::max(0.0, o.cx - o.half_w - 2)));
            const auto x1 = static_cast<long>(std::ceil(std::min(W - 1, o.cx + o.half_w + 2)));
            const auto y0 = static_cast<long>(std::floor(std::max(0.0, o.cy - o.half_h - 2)));
            const auto y1 = static_cast<long>(std::ceil(std::min(H - 1, o.cy + o.half_h + 2)));
            for (long y = y0; y <= y1; ++y) {
                for (long x = x0; x <= x1; ++x) {
                    const double a = std::clamp(0.5 - signed_distance(o, x, y), 0.0, 1.0);
                    if (a <= 0.0) continue;
                    const auto i = static_cast<std::size_t>(y) * config.width + static_cast<std::size_t>(x);
                    auto blend = [a](float below, double above) {
                        return static_cast<float>(above * a + below * (1.0 - a));
                    };
                    const auto rgb = o.color_at(static_cast<double>(x), static_cast<double>(y));
                    r.values[i] = blend(r.values[i], rgb[0]);
                    g.values[i] = blend(g.values[i], rgb[1]);
                    b.values[i] = blend(b.values[i], rgb[2]);
                    l.values[i] = blend(l.values[i], depth_l);
                    cover.values[i] = static_cast<float>(1.0 - (1.0 - cover.values[i]) * (1.0 - a));
                }
            }
        }

        if (config.noise > 0.0) {
            Rng noise_rng(derive_seed(config.seed, static_cast<std::uint64_t>(t) + 1));
            for (Plane* p : {&r, &g, &b, &l}) {
                for (auto& v : p->values) {
                    v = static_cast<float>(std::clamp(v + config.noise * noise_rng.normal(), 0.0, 1.0));
                }
            }
        }
        for (Plane* p : {&r, &g, &b, &l}) {
            for (auto& v : p->values) v = std::clamp(v, 0.0f, 1.0f);
        }

        frame.set(ChannelId::R, std::move(r));
        frame.set(ChannelId::G, std::move(g));
        frame.set(ChannelId::B, std::move(b));
        frame.set(ChannelId::L, std::move(l));
        out.frames.push_back(std::move(frame));
        out.coverage.push_back(std::move(cover));
    }
    return out;
}

std::vector<Frame> generate_sequence(const SceneConfig& config) {
    return render_scene(config).frames;
}

}  // namespace mmreg
