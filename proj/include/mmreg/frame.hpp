#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmreg/offsets.hpp"
#include "mmreg/tensor.hpp"

namespace mmreg {

/// Channel ids; the numeric values are the on-disk MMF channel codes.
enum class ChannelId : std::uint8_t { R = 0, G = 1, B = 2, Gr = 3, L = 4, U = 5, V = 6 };

inline constexpr std::size_t kChannelIdCount = 7;

std::string_view channel_name(ChannelId id);
std::optional<ChannelId> channel_from_name(std::string_view name);
std::optional<ChannelId> channel_from_code(std::uint8_t code);

/// Accepts either a compact run ("GrLUV", "RGBLUV") or a comma list ("Gr,L,U,V").
std::vector<ChannelId> parse_channel_list(std::string_view text);
/// Compact form, e.g. "GrLUV".
std::string format_channel_list(std::span<const ChannelId> channels);

/// Single-channel image, row-major.
struct Plane {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> values;

    Plane() = default;
    Plane(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), values(w * h, fill) {}

    float& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
    float at(std::size_t row, std::size_t col) const { return values[row * width + col]; }

    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Multi-channel snapshot. Channel planes share dims and keep insertion order.
class Frame {
public:
    static constexpr std::size_t kDefaultWidth = 800;
    static constexpr std::size_t kDefaultHeight = 256;

    Frame() = default;
    Frame(std::size_t width, std::size_t height);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t channel_count() const noexcept { return planes_.size(); }

    bool has(ChannelId id) const;
    const Plane& plane(ChannelId id) const;
    Plane& plane(ChannelId id);

    /// Inserts or replaces a plane; dims must match the frame.
    void set(ChannelId id, Plane plane);
    void erase(ChannelId id);

    std::vector<ChannelId> channels() const;
    const std::vector<std::pair<ChannelId, Plane>>& entries() const noexcept { return planes_; }

    /// Throws if any plane has the wrong dims or a value outside [0,1].
    void validate() const;

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::pair<ChannelId, Plane>> planes_;
};

/// MMF container (little-endian): "MMF1", u32 width, u32 height, u32 channel
/// count, one byte per channel id, then each plane as width*height f32 values.
void write_frame(const Frame& frame, const std::filesystem::path& path);
Frame read_frame(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_frame(const Frame& frame);
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Translates only the L plane by (dx, dy); vacated pixels get `fill`.
Frame apply_offset(const Frame& frame, const OffsetClass& offset, float fill = 0.0f);

/// Adds (or replaces) the Gr plane using Rec. 601 luma weights.
Frame rgb_to_gray(const Frame& frame);

struct PatchGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t count() const { return rows * cols; }
};

/// Window positions fully inside an H x W frame for patch size p and stride s.
PatchGrid patch_grid(std::size_t height, std::size_t width, std::size_t patch, std::size_t stride);

struct Patch {
    std::size_t row = 0;  // top-left origin
    std::size_t col = 0;
    Tensor data;          // p x p x C
};

/// Patches at origins (i*s, j*s), row-major over the grid. Channels are
/// stacked in `channels` order (the frame's own order when empty).
std::vector<Patch> extract_patches(const Frame& frame, std::size_t patch, std::size_t stride,
                                   std::span<const ChannelId> channels = {});

/// Copies one p x p x C window into `out` (size p*p*C).
void copy_patch(const Frame& frame, std::size_t row, std::size_t col, std::size_t patch,
                std::span<const ChannelId> channels, std::span<float> out);

double population_variance(std::span<const float> values);

/// True iff the population variance of the depth values is at least `tau`.
bool variance_keep(std::span<const float> depth_values, double tau);

/// 15% of the maximum variance (0.25) of a [0,1] signal.
inline constexpr double kDefaultVarianceTau = 0.15 * 0.25;

}  // namespace mmreg
