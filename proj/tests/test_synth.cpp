#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mmreg/synth.hpp"

using namespace mmreg;

namespace {

SceneConfig small_config() {
    SceneConfig c;
    c.width = 256;
    c.height = 128;
    c.frames = 3;
    c.objects = 10;
    return c;
}

}  // namespace

TEST_CASE("generate_sequence: deterministic per seed, seeds differ") {
    const auto c = small_config();
    const auto a = generate_sequence(c);
    const auto b = generate_sequence(c);
    REQUIRE(a.size() == 3u);
    CHECK(a == b);
    auto other = c;
    other.seed = 2;
    CHECK_FALSE(generate_sequence(other) == a);
}

TEST_CASE("generate_sequence: R, G, B, L planes in [0,1]") {
    for (const auto& f : generate_sequence(small_config())) {
        CHECK(f.channels() == std::vector<ChannelId>{ChannelId::R, ChannelId::G, ChannelId::B, ChannelId::L});
        CHECK_NOTHROW(f.validate());
        CHECK(f.width() == 256u);
        CHECK(f.height() == 128u);
    }
    CHECK(generate_sequence(SceneConfig{}).front().width() == 800u);
}

TEST_CASE("generate_sequence: background moves by the camera translation") {
    auto c = small_config();
    c.noise = 0.0;
    c.translate_x = 1.0;
    c.translate_y = 0.0;
    const auto render = render_scene(c);
    for (std::size_t t = 0; t + 1 < render.frames.size(); ++t) {
        std::size_t compared = 0, mismatched = 0;
        for (auto id : {ChannelId::R, ChannelId::G, ChannelId::B, ChannelId::L}) {
            const auto& a = render.frames[t].plane(id);
            const auto& b = render.frames[t + 1].plane(id);
            for (std::size_t r = 0; r < c.height; ++r)
                for (std::size_t col = 1; col < c.width; ++col) {
                    if (render.coverage[t].at(r, col - 1) > 0.0f || render.coverage[t + 1].at(r, col) > 0.0f) continue;
                    ++compared;
                    mismatched += std::abs(a.at(r, col - 1) - b.at(r, col)) > 1e-6f;
                }
        }
        CHECK(compared > c.width * c.height);
        CHECK(mismatched == 0u);
    }
}

TEST_CASE("generate_sequence: Gr and L correlate over object pixels") {
    const auto c = small_config();
    const auto render = render_scene(c);
    const auto gray = rgb_to_gray(render.frames[0]);
    const auto& g = gray.plane(ChannelId::Gr).values;
    const auto& l = gray.plane(ChannelId::L).values;
    const auto& cov = render.coverage[0].values;
    double sg = 0, sl = 0, sgg = 0, sll = 0, sgl = 0, n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (cov[i] < 0.5f) continue;
        sg += g[i];
        sl += l[i];
        sgg += g[i] * g[i];
        sll += l[i] * l[i];
        sgl += g[i] * l[i];
        n += 1;
    }
    REQUIRE(n > 100);
    const double cov_gl = sgl / n - (sg / n) * (sl / n);
    const double corr = cov_gl / std::sqrt((sgg / n - sg * sg / n / n) * (sll / n - sl * sl / n / n));
    MESSAGE("Gr/L correlation over objects: " << corr);
    CHECK(corr > 0.3);
}

TEST_CASE("generate_sequence: patches straddling object edges pass the variance filter") {
    const auto c = small_config();
    const auto render = render_scene(c);
    const auto& l = render.frames[0].plane(ChannelId::L);
    const auto& cov = render.coverage[0];
    std::size_t straddling = 0, kept = 0;
    for (std::size_t r = 0; r + 32 <= c.height; r += 16)
        for (std::size_t col = 0; col + 32 <= c.width; col += 16) {
            std::size_t inside = 0;
            std::vector<float> vals;
            for (std::size_t y = r; y < r + 32; ++y)
                for (std::size_t x = col; x < col + 32; ++x) {
                    inside += cov.at(y, x) > 0.5f;
                    vals.push_back(l.at(y, x));
                }
            // object covers between a quarter and three quarters of the window
            if (inside < 256 || inside > 768) continue;
            ++straddling;
            kept += variance_keep(vals, kDefaultVarianceTau);
        }
    MESSAGE("straddling patches kept: " << kept << "/" << straddling);
    REQUIRE(straddling > 0u);
    CHECK(static_cast<double>(kept) >= 0.9 * static_cast<double>(straddling));
}

TEST_CASE("SceneConfig: validation") {
    auto c = small_config();
    c.objects = 0;
    CHECK_THROWS_AS(generate_sequence(c), std::invalid_argument);
    c = small_config();
    c.frames = 0;
    CHECK_THROWS_AS(generate_sequence(c), std::invalid_argument);
    c = small_config();
    c.noise = 0.3;
    CHECK_THROWS_AS(generate_sequence(c), std::invalid_argument);
    c.noise = -0.1;
    CHECK_THROWS_AS(generate_sequence(c), std::invalid_argument);
}
