#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmreg/frame.hpp"
#include "mmreg/offsets.hpp"

namespace mmreg {

struct PatchSample {
    Tensor data;  // p x p x C
    int label = 0;
    std::size_t frame_index = 0;
    std::size_t row = 0;
    std::size_t col = 0;
};

struct DatasetParams {
    std::size_t patch = 32;
    std::size_t stride = 32;
    double tau = kDefaultVarianceTau;
    float fill = 0.0f;
    std::vector<ChannelId> channels;  // stacking order

    friend bool operator==(const DatasetParams&, const DatasetParams&) = default;
};

/// Everything needed to rebuild a dataset bit-exactly from its frames.
struct DatasetManifest {
    DatasetParams params;
    std::vector<OffsetClass> offsets;
    std::string offset_layout = "center+ellipse";
    EllipseSpec ellipse;
    std::string split = "train";
    std::size_t frame_width = 0;
    std::size_t frame_height = 0;
    std::size_t frame_count = 0;
    std::size_t positions_per_frame = 0;
    std::size_t patch_count = 0;
    std::vector<std::size_t> per_class_counts;
    std::uint64_t seed = 0;
    std::string frames_dir;
    std::vector<std::string> frame_files;
    std::string sample_digest;  // FNV-1a 64 over labels, origins and patch bytes

    std::string to_text() const;
    static DatasetManifest from_text(const std::string& text);

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Flat key=value text, one key per line; '#' starts a comment line.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Labeled patches that are materialized on demand from the source frames.
/// Only sample coordinates are stored; the depth shift is applied while copying.
class PatchDataset {
public:
    struct SampleRef {
        std::uint32_t frame;
        std::uint32_t label;
        std::uint32_t row;
        std::uint32_t col;
    };

    PatchDataset() = default;
    PatchDataset(std::vector<Frame> frames, std::vector<OffsetClass> offsets, DatasetParams params,
                 std::vector<SampleRef> samples);

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::size_t patch_size() const { return params_.patch; }
    std::size_t channel_count() const { return params_.channels.size(); }
    std::size_t sample_values() const { return params_.patch * params_.patch * params_.channels.size(); }
    const DatasetParams& params() const { return params_; }
    const std::vector<OffsetClass>& offsets() const { return offsets_; }
    const std::vector<Frame>& frames() const { return frames_; }
    const SampleRef& ref(std::size_t i) const { return samples_.at(i); }
    int label(std::size_t i) const { return static_cast<int>(samples_[i].label); }

    void materialize(std::size_t i, std::span<float> out) const;
    PatchSample sample(std::size_t i) const;

private:
    std::vector<Frame> frames_;
    std::vector<OffsetClass> offsets_;
    DatasetParams params_;
    std::vector<SampleRef> samples_;
};

/// Copies a patch whose L channel is read through a (dx, dy) shift with `fill`
/// for vacated pixels. Equivalent to copy_patch(apply_offset(frame, offset, fill), ...).
void copy_shifted_patch(const Frame& frame, const OffsetClass& offset, float fill, std::size_t row,
                        std::size_t col, std::size_t patch, std::span<const ChannelId> channels,
                        std::span<float> out);

struct BuiltDataset {
    PatchDataset dataset;
    DatasetManifest manifest;
};

/// For every frame and offset class: shift L, cut the patch grid, drop patches
/// whose shifted L variance is below tau, label the rest with the class id.
/// Samples are ordered frame-major, then class, then row-major patch origin.
BuiltDataset build_dataset(std::vector<Frame> frames, const std::vector<OffsetClass>& offsets,
                           const DatasetParams& params);

/// Rebuilds from the frames listed in the manifest and verifies counts and digest.
BuiltDataset replay_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

/// Loads `frame_*.mmf` files of a directory in lexical order.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

std::string format_double(double v);

}  // namespace mmreg
