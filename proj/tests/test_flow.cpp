#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mmreg/flow.hpp"
#include "mmreg/pipeline.hpp"
#include "mmreg/random.hpp"

using namespace mmreg;

namespace {

Plane gaussian_blob(std::size_t w, std::size_t h, double cx, double cy, double sigma) {
    Plane p(w, h);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
            p.at(r, c) = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
        }
    return p;
}

struct BlobCase {
    Plane prev, next;
};

BlobCase blob_pair(double shift_x, double shift_y) {
    return {gaussian_blob(64, 64, 30.0, 32.0, 4.0), gaussian_blob(64, 64, 30.0 + shift_x, 32.0 + shift_y, 4.0)};
}

// Mean endpoint error against (ex, ey) over pixels where either frame exceeds 0.1.
double support_epe(const FlowField& f, const BlobCase& b, double ex, double ey) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        if (b.prev.values[i] <= 0.1f && b.next.values[i] <= 0.1f) continue;
        sum += std::hypot(f.u[i] - ex, f.v[i] - ey);
        ++n;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("estimate_flow: identical frames give zero flow") {
    Rng rng(5);
    Plane a(40, 30);
    for (auto& v : a.values) v = static_cast<float>(rng.uniform());
    const auto f = estimate_flow(a, a);
    REQUIRE(f.u.size() == 40u * 30u);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        CHECK(std::abs(f.u[i]) <= 1e-6f);
        CHECK(std::abs(f.v[i]) <= 1e-6f);
    }
}

TEST_CASE("estimate_flow: constant frames give zero flow") {
    const auto f = estimate_flow(Plane(20, 20, 0.2f), Plane(20, 20, 0.7f));
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        CHECK(f.u[i] == 0.0f);
        CHECK(f.v[i] == 0.0f);
    }
}

TEST_CASE("estimate_flow: translated Gaussian blob") {
    const auto b = blob_pair(2.0, 0.0);
    const auto f = estimate_flow(b.prev, b.next, {1.0, 200});
    const double epe = support_epe(f, b, 2.0, 0.0);
    MESSAGE("blob (2,0) mean EPE = " << epe);
    CHECK(epe < 0.5);

    const auto vert = blob_pair(0.0, 1.0);
    CHECK(support_epe(estimate_flow(vert.prev, vert.next), vert, 0.0, 1.0) < 0.5);
}

TEST_CASE("estimate_flow: reversed pair is approximately negated") {
    const auto b = blob_pair(2.0, 0.0);
    const auto fwd = estimate_flow(b.prev, b.next);
    const auto bwd = estimate_flow(b.next, b.prev);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < fwd.u.size(); ++i) {
        if (b.prev.values[i] <= 0.1f && b.next.values[i] <= 0.1f) continue;
        sum += std::hypot(fwd.u[i] + bwd.u[i], fwd.v[i] + bwd.v[i]);
        ++n;
    }
    CHECK(sum / static_cast<double>(n) < 0.5);
}

TEST_CASE("estimate_flow: rejects bad inputs") {
    CHECK_THROWS_AS(estimate_flow(Plane(4, 4), Plane(5, 4)), std::invalid_argument);
    CHECK_THROWS_AS(estimate_flow(Plane(4, 4), Plane(4, 4), {0.0, 10}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_flow(Plane(4, 4), Plane(4, 4), {1.0, 0}), std::invalid_argument);
}

TEST_CASE("estimate_flow: deterministic") {
    const auto b = blob_pair(1.5, -0.5);
    const auto a = estimate_flow(b.prev, b.next), c = estimate_flow(b.prev, b.next);
    CHECK(a.u == c.u);
    CHECK(a.v == c.v);
}

TEST_CASE("flow_to_channels: affine map with clamping") {
    FlowField f{5, 1, {0.0f, 8.0f, -8.0f, 16.0f, 4.0f}, {0.0f, -16.0f, 2.0f, 0.0f, -4.0f}};
    const auto [u, v] = flow_to_channels(f, 8.0);
    CHECK(u.values[0] == 0.5f);
    CHECK(u.values[1] == 1.0f);
    CHECK(u.values[2] == 0.0f);
    CHECK(u.values[3] == 1.0f);
    CHECK(u.values[4] == doctest::Approx(0.75));
    CHECK(v.values[1] == 0.0f);
    CHECK(v.values[2] == doctest::Approx(0.625));
    CHECK(v.values[4] == doctest::Approx(0.25));
    for (float x : u.values) CHECK((x >= 0.0f && x <= 1.0f));
    CHECK_THROWS_AS(flow_to_channels(f, 0.0), std::invalid_argument);
}

TEST_CASE("add_flow_channels: frame 0 gets zero flow, identical frames give 0.5") {
    Rng rng(2);
    Frame a(24, 16);
    Plane gray(24, 16);
    for (auto& v : gray.values) v = static_cast<float>(rng.uniform());
    a.set(ChannelId::Gr, gray);
    const auto out = add_flow_channels({a, a, a});
    REQUIRE(out.size() == 3u);
    for (const auto& f : out) {
        REQUIRE(f.has(ChannelId::U));
        REQUIRE(f.has(ChannelId::V));
        for (float x : f.plane(ChannelId::U).values) CHECK(x == doctest::Approx(0.5).epsilon(1e-6));
        for (float x : f.plane(ChannelId::V).values) CHECK(x == doctest::Approx(0.5).epsilon(1e-6));
    }
    const auto single = add_flow_channels({a});
    for (float x : single[0].plane(ChannelId::U).values) CHECK(x == 0.5f);
}

TEST_CASE("add_flow_channels: derives Gr from RGB when missing") {
    Frame f(8, 8);
    f.set(ChannelId::R, Plane(8, 8, 1.0f));
    f.set(ChannelId::G, Plane(8, 8, 0.0f));
    f.set(ChannelId::B, Plane(8, 8, 0.0f));
    const auto out = add_flow_channels({f, f});
    REQUIRE(out[1].has(ChannelId::Gr));
    CHECK(out[1].plane(ChannelId::Gr).values[0] == doctest::Approx(0.299));
}
