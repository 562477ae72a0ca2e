#include "mmreg/frame.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "binary_io.hpp"

namespace mmreg {

namespace {

constexpr std::array<std::string_view, kChannelIdCount> kChannelNames = {"R", "G", "B", "Gr",
                                                                        "L", "U", "V"};
constexpr std::string_view kFrameMagic = "MMF1";

}  // namespace

std::string_view channel_name(ChannelId id) { return kChannelNames[static_cast<std::size_t>(id)]; }

std::optional<ChannelId> channel_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
        if (kChannelNames[i] == name) return static_cast<ChannelId>(i);
    }
    return std::nullopt;
}

std::optional<ChannelId> channel_from_code(std::uint8_t code) {
    if (code >= kChannelIdCount) return std::nullopt;
    return static_cast<ChannelId>(code);
}

std::vector<ChannelId> parse_channel_list(std::string_view text) {
    std::vector<ChannelId> out;
    auto push = [&](std::string_view name) {
        auto id = channel_from_name(name);
        if (!id) throw std::invalid_argument("unknown channel '" + std::string(name) + "'");
        if (std::find(out.begin(), out.end(), *id) != out.end()) {
            throw std::invalid_argument("channel '" + std::string(name) + "' listed twice");
        }
        out.push_back(*id);
    };
    if (text.find(',') != std::string_view::npos) {
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto end = std::min(text.find(',', start), text.size());
            push(text.substr(start, end - start));
            start = end + 1;
        }
    } else {
        // Compact form: "Gr" is the only two-letter id.
        for (std::size_t i = 0; i < text.size();) {
            if (text.substr(i, 2) == "Gr") {
                push("Gr");
                i += 2;
            } else {
                push(text.substr(i, 1));
                i += 1;
            }
        }
    }
    if (out.empty()) throw std::invalid_argument("empty channel list");
    return out;
}

std::string format_channel_list(std::span<const ChannelId> channels) {
    std::string s;
    for (auto c : channels) s += channel_name(c);
    return s;
}

Frame::Frame(std::size_t width, std::size_t height) : width_(width), height_(height) {
    if (width == 0 || height == 0) throw std::invalid_argument("frame dims must be positive");
}

bool Frame::has(ChannelId id) const {
    return std::any_of(planes_.begin(), planes_.end(), [id](const auto& e) { return e.first == id; });
}

const Plane& Frame::plane(ChannelId id) const {
    for (const auto& [cid, p] : planes_) {
        if (cid == id) return p;
    }
    throw std::out_of_range("frame has no " + std::string(channel_name(id)) + " channel");
}

Plane& Frame::plane(ChannelId id) {
    return const_cast<Plane&>(static_cast<const Frame&>(*this).plane(id));
}

void Frame::set(ChannelId id, Plane plane) {
    if (plane.width != width_ || plane.height != height_ ||
        plane.values.size() != width_ * height_) {
        throw std::invalid_argument("plane " + std::string(channel_name(id)) + " is " +
                                    std::to_string(plane.width) + "x" + std::to_string(plane.height) +
                                    ", frame is " + std::to_string(width_) + "x" +
                                    std::to_string(height_));
    }
    for (auto& [cid, p] : planes_) {
        if (cid == id) {
            p = std::move(plane);
            return;
        }
    }
    planes_.emplace_back(id, std::move(plane));
}

void Frame::erase(ChannelId id) {
    std::erase_if(planes_, [id](const auto& e) { return e.first == id; });
}

std::vector<ChannelId> Frame::channels() const {
    std::vector<ChannelId> out;
    for (const auto& e : planes_) out.push_back(e.first);
    return out;
}

void Frame::validate() const {
    for (const auto& [id, p] : planes_) {
        if (p.width != width_ || p.height != height_ || p.values.size() != width_ * height_) {
            throw std::invalid_argument("plane " + std::string(channel_name(id)) +
                                        " does not match frame dims");
        }
        for (float v : p.values) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                throw std::invalid_argument("plane " + std::string(channel_name(id)) +
                                            " has value outside [0,1]: " + std::to_string(v));
            }
        }
    }
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    detail::ByteWriter w;
    w.magic(kFrameMagic);
    w.u32(static_cast<std::uint32_t>(frame.width()));
    w.u32(static_cast<std::uint32_t>(frame.height()));
    w.u32(static_cast<std::uint32_t>(frame.channel_count()));
    for (const auto& e : frame.entries()) w.u8(static_cast<std::uint8_t>(e.first));
    for (const auto& e : frame.entries()) w.floats(e.second.values);
    return std::move(w.buffer());
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "MMF frame");
    r.magic(kFrameMagic);
    const auto width = r.u32("width");
    const auto height = r.u32("height");
    if (width == 0 || height == 0) r.fail("zero frame dimension");
    const auto count = r.u32("channel count");
    if (count > kChannelIdCount) r.fail("channel count " + std::to_string(count) + " exceeds 7");
    std::vector<ChannelId> ids;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto code = r.u8("channel id");
        auto id = channel_from_code(code);
        if (!id) r.fail("unknown channel id " + std::to_string(code));
        if (std::find(ids.begin(), ids.end(), *id) != ids.end()) {
            r.fail("duplicate channel " + std::string(channel_name(*id)));
        }
        ids.push_back(*id);
    }
    Frame frame(width, height);
    for (auto id : ids) {
        Plane p(width, height);
        r.floats(p.values, "plane data");
        frame.set(id, std::move(p));
    }
    r.expect_end();
    return frame;
}

void write_frame(const Frame& frame, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_frame(frame));
}

Frame read_frame(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    try {
        return decode_frame(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Frame apply_offset(const Frame& frame, const OffsetClass& offset, float fill) {
    const auto w = static_cast<long>(frame.width());
    const auto h = static_cast<long>(frame.height());
    if (std::abs(offset.dx) >= w || std::abs(offset.dy) >= h) {
        throw std::invalid_argument("offset (" + std::to_string(offset.dx) + "," +
                                    std::to_string(offset.dy) + ") exceeds frame " +
                                    std::to_string(w) + "x" + std::to_string(h));
    }
    Frame out = frame;
    const Plane& src = frame.plane(ChannelId::L);
    Plane& dst = out.plane(ChannelId::L);
    for (long r = 0; r < h; ++r) {
        const long sr = r - offset.dy;
        for (long c = 0; c < w; ++c) {
            const long sc = c - offset.dx;
            const bool inside = sr >= 0 && sr < h && sc >= 0 && sc < w;
            dst.values[static_cast<std::size_t>(r * w + c)] =
                inside ? src.values[static_cast<std::size_t>(sr * w + sc)] : fill;
        }
    }
    return out;
}

Frame rgb_to_gray(const Frame& frame) {
    const Plane& r = frame.plane(ChannelId::R);
    const Plane& g = frame.plane(ChannelId::G);
    const Plane& b = frame.plane(ChannelId::B);
    Plane gray(frame.width(), frame.height());
    for (std::size_t i = 0; i < gray.values.size(); ++i) {
        const float y = 0.299f * r.values[i] + 0.587f * g.values[i] + 0.114f * b.values[i];
        gray.values[i] = std::clamp(y, 0.0f, 1.0f);
    }
    Frame out = frame;
    out.set(ChannelId::Gr, std::move(gray));
    return out;
}

PatchGrid patch_grid(std::size_t height, std::size_t width, std::size_t patch, std::size_t stride) {
    if (patch == 0 || stride == 0) throw std::invalid_argument("patch size and stride must be positive");
    if (patch > height || patch > width) {
        throw std::invalid_argument("patch size " + std::to_string(patch) + " exceeds frame " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
    return {(height - patch) / stride + 1, (width - patch) / stride + 1};
}

void copy_patch(const Frame& frame, std::size_t row, std::size_t col, std::size_t patch,
                std::span<const ChannelId> channels, std::span<float> out) {
    const std::size_t c = channels.size();
    if (out.size() != patch * patch * c) throw std::invalid_argument("patch buffer has wrong size");
    if (row + patch > frame.height() || col + patch > frame.width()) {
        throw std::invalid_argument("patch window leaves the frame");
    }
    for (std::size_t ci = 0; ci < c; ++ci) {
        const Plane& p = frame.plane(channels[ci]);
        for (std::size_t y = 0; y < patch; ++y) {
            const float* src = p.values.data() + (row + y) * p.width + col;
            float* dst = out.data() + y * patch * c + ci;
            for (std::size_t x = 0; x < patch; ++x) dst[x * c] = src[x];
        }
    }
}

std::vector<Patch> extract_patches(const Frame& frame, std::size_t patch, std::size_t stride,
                                   std::span<const ChannelId> channels) {
    const auto grid = patch_grid(frame.height(), frame.width(), patch, stride);
    const auto own = frame.channels();
    if (channels.empty()) channels = own;
    std::vector<Patch> out;
    out.reserve(grid.count());
    for (std::size_t i = 0; i < grid.rows; ++i) {
        for (std::size_t j = 0; j < grid.cols; ++j) {
            Patch p{i * stride, j * stride, Tensor({patch, patch, channels.size()})};
            copy_patch(frame, p.row, p.col, patch, channels, p.data.values());
            out.push_back(std::move(p));
        }
    }
    return out;
}

double population_variance(std::span<const float> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (float v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (float v : values) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(values.size());
}

bool variance_keep(std::span<const float> depth_values, double tau) {
    return population_variance(depth_values) >= tau;
}

}  // namespace mmreg
