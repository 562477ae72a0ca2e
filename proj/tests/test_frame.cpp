#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "binary_io.hpp"
#include "mmreg/frame.hpp"
#include "mmreg/random.hpp"

using namespace mmreg;
namespace fs = std::filesystem;

namespace {

Frame random_frame(std::size_t w, std::size_t h, const std::vector<ChannelId>& channels, Rng& rng) {
    Frame f(w, h);
    for (auto id : channels) {
        Plane p(w, h);
        for (auto& v : p.values) v = static_cast<float>(rng.uniform());
        f.set(id, std::move(p));
    }
    return f;
}

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("mmreg_test_frame_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("channel names and lists") {
    CHECK(parse_channel_list("GrLUV") ==
          std::vector<ChannelId>{ChannelId::Gr, ChannelId::L, ChannelId::U, ChannelId::V});
    CHECK(parse_channel_list("R,G,B,L") ==
          std::vector<ChannelId>{ChannelId::R, ChannelId::G, ChannelId::B, ChannelId::L});
    CHECK(format_channel_list(parse_channel_list("RGBLUV")) == "RGBLUV");
    CHECK_THROWS(parse_channel_list("GrX"));
    CHECK_THROWS(parse_channel_list("GrGr"));
    CHECK(channel_from_code(7) == std::nullopt);
}

TEST_CASE("MMF: write then read is bit-identical") {
    Rng rng(1);
    const auto f = random_frame(13, 7, {ChannelId::R, ChannelId::L, ChannelId::V}, rng);
    const auto dir = temp_dir("rt");
    write_frame(f, dir / "a.mmf");
    CHECK(read_frame(dir / "a.mmf") == f);
    fs::remove_all(dir);
}

TEST_CASE("MMF: random channel subsets keep their order") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<ChannelId> ids{ChannelId::R, ChannelId::G, ChannelId::B, ChannelId::Gr,
                                   ChannelId::L, ChannelId::U, ChannelId::V};
        rng.shuffle(std::span<ChannelId>(ids));
        ids.resize(1 + rng.below(7));
        const auto f = random_frame(1 + rng.below(9), 1 + rng.below(9), ids, rng);
        const auto back = decode_frame(encode_frame(f));
        CHECK(back == f);
        CHECK(back.channels() == ids);
    }
}

TEST_CASE("MMF: corrupted input is rejected with diagnostics") {
    Rng rng(2);
    const auto bytes = encode_frame(random_frame(4, 3, {ChannelId::Gr, ChannelId::L}, rng));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH(decode_frame(bad), doctest::Contains("MMF1"));
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    CHECK_THROWS_WITH(decode_frame(truncated), doctest::Contains("offset"));
    auto bad_id = bytes;
    bad_id[16] = 9;
    CHECK_THROWS(decode_frame(bad_id));
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS(decode_frame(trailing));
    CHECK_THROWS(read_frame("/nonexistent/frame.mmf"));
}

TEST_CASE("Frame: planes must share dims and stay in [0,1]") {
    Frame f(4, 4);
    CHECK_THROWS(f.set(ChannelId::L, Plane(3, 4)));
    f.set(ChannelId::L, Plane(4, 4, 1.5f));
    CHECK_THROWS(f.validate());
}

TEST_CASE("apply_offset: zero offset is identity") {
    Rng rng(3);
    const auto f = random_frame(10, 6, {ChannelId::Gr, ChannelId::L}, rng);
    CHECK(apply_offset(f, {0, 0, 0}) == f);
}

TEST_CASE("apply_offset: hot pixel moves right by dx") {
    Frame f(4, 4);
    Plane l(4, 4, 0.0f);
    l.at(1, 1) = 1.0f;
    f.set(ChannelId::L, l);
    f.set(ChannelId::Gr, Plane(4, 4, 0.3f));
    const auto g = apply_offset(f, {1, 2, 0}, 0.0f);
    const auto& out = g.plane(ChannelId::L);
    CHECK(out.at(1, 3) == 1.0f);
    CHECK(out.at(1, 1) == 0.0f);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(out.at(r, 0) == 0.0f);
        CHECK(out.at(r, 1) == 0.0f);
    }
    CHECK(g.plane(ChannelId::Gr) == f.plane(ChannelId::Gr));
}

TEST_CASE("apply_offset: vacated pixel count matches the counting formula") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t w = 2 + rng.below(10), h = 2 + rng.below(10);
        const int dx = static_cast<int>(rng.below(2 * w - 1)) - static_cast<int>(w - 1);
        const int dy = static_cast<int>(rng.below(2 * h - 1)) - static_cast<int>(h - 1);
        Frame f(w, h);
        f.set(ChannelId::L, Plane(w, h, 0.5f));
        const auto g = apply_offset(f, {1, dx, dy}, 0.0f);
        std::size_t zeros = 0;
        for (float v : g.plane(ChannelId::L).values) zeros += (v == 0.0f);
        const std::size_t adx = static_cast<std::size_t>(std::abs(dx)), ady = static_cast<std::size_t>(std::abs(dy));
        CHECK(zeros == adx * h + ady * (w - adx));
    }
}

TEST_CASE("apply_offset: negated offset restores pixels that stayed inside") {
    Rng rng(5);
    const auto f = random_frame(12, 9, {ChannelId::L}, rng);
    const OffsetClass o{1, 3, -2};
    const auto back = apply_offset(apply_offset(f, o), {1, -3, 2});
    const auto& a = f.plane(ChannelId::L);
    const auto& b = back.plane(ChannelId::L);
    for (std::size_t r = 0; r < 9; ++r)
        for (std::size_t c = 0; c < 12; ++c) {
            // pixel (r, c) went to (r-2, c+3)
            if (r >= 2 && c + 3 < 12) CHECK(a.at(r, c) == b.at(r, c));
        }
}

TEST_CASE("apply_offset: rejects offsets at or beyond the frame dims") {
    Frame f(4, 3);
    f.set(ChannelId::L, Plane(4, 3));
    CHECK_THROWS(apply_offset(f, {1, 4, 0}));
    CHECK_THROWS(apply_offset(f, {1, 0, -3}));
    CHECK_NOTHROW(apply_offset(f, {1, -3, 2}));
}

TEST_CASE("rgb_to_gray") {
    Frame f(2, 1);
    Plane r(2, 1), g(2, 1), b(2, 1);
    r.values = {0.4f, 1.0f};
    g.values = {0.4f, 0.0f};
    b.values = {0.4f, 0.0f};
    f.set(ChannelId::R, r);
    f.set(ChannelId::G, g);
    f.set(ChannelId::B, b);
    const auto out = rgb_to_gray(f);
    CHECK(out.plane(ChannelId::Gr).values[0] == doctest::Approx(0.4));
    CHECK(out.plane(ChannelId::Gr).values[1] == doctest::Approx(0.299));
    Frame black(3, 3);
    for (auto id : {ChannelId::R, ChannelId::G, ChannelId::B}) black.set(id, Plane(3, 3));
    const auto gray = rgb_to_gray(black);
    for (float v : gray.plane(ChannelId::Gr).values) CHECK(v == 0.0f);
}

TEST_CASE("patch grid counts") {
    CHECK(patch_grid(256, 800, 32, 32).count() == 200u);
    CHECK(patch_grid(256, 800, 32, 16).count() == 735u);
    CHECK(patch_grid(256, 800, 32, 32).rows == 8u);
    CHECK(patch_grid(256, 800, 32, 32).cols == 25u);
    CHECK_THROWS(patch_grid(16, 800, 32, 32));
    CHECK_THROWS(patch_grid(64, 64, 32, 0));

    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 1 + rng.below(60), w = 1 + rng.below(60);
        const std::size_t p = 1 + rng.below(std::min(h, w)), s = 1 + rng.below(20);
        Frame f(w, h);
        f.set(ChannelId::L, Plane(w, h));
        const auto patches = extract_patches(f, p, s);
        CHECK(patches.size() == ((h - p) / s + 1) * ((w - p) / s + 1));
    }
}

TEST_CASE("extract_patches: origins, stacking order and whole-frame patch") {
    Rng rng(7);
    const auto f = random_frame(10, 7, {ChannelId::Gr, ChannelId::L}, rng);
    const std::vector<ChannelId> order{ChannelId::L, ChannelId::Gr};
    const auto patches = extract_patches(f, 4, 3, order);
    REQUIRE(patches.size() == 2u * 3u);
    CHECK(patches[4].row == 3u);
    CHECK(patches[4].col == 3u);
    CHECK(patches[4].data.shape() == Shape{4, 4, 2});
    CHECK(patches[4].data.at(1, 2, 0) == f.plane(ChannelId::L).at(4, 5));
    CHECK(patches[4].data.at(1, 2, 1) == f.plane(ChannelId::Gr).at(4, 5));

    const auto square = random_frame(8, 8, {ChannelId::L}, rng);
    const auto whole = extract_patches(square, 8, 5);
    REQUIRE(whole.size() == 1u);
    for (std::size_t i = 0; i < 64; ++i) CHECK(whole[0].data[i] == square.plane(ChannelId::L).values[i]);
    const std::vector<ChannelId> missing{ChannelId::U};
    CHECK_THROWS(extract_patches(square, 4, 4, missing));
}

TEST_CASE("variance_keep") {
    std::vector<float> flat(64, 0.6f);
    CHECK(population_variance(flat) == 0.0);
    CHECK_FALSE(variance_keep(flat, 1e-9));
    std::vector<float> checker(64);
    for (std::size_t i = 0; i < 64; ++i) checker[i] = static_cast<float>(((i / 8) + (i % 8)) % 2);
    CHECK(population_variance(checker) == doctest::Approx(0.25));
    CHECK(variance_keep(checker, kDefaultVarianceTau));
    CHECK(kDefaultVarianceTau == doctest::Approx(0.0375));
    CHECK(variance_keep(flat, 0.0));
}
