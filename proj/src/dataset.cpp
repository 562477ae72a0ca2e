#include "mmreg/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace mmreg {

namespace {

constexpr std::string_view kManifestFormat = "mmreg-manifest-1";

class Fnv1a {
public:
    void add(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ULL;
        }
    }
    template <typename T>
    void add_value(T v) {
        add(&v, sizeof v);
    }
    std::string hex() const {
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << hash_;
        return os.str();
    }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string join(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    if (text.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto end = text.find(sep, start);
        out.push_back(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return out;
}

class KeyLookup {
public:
    explicit KeyLookup(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    const std::string& str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw std::invalid_argument("manifest is missing key '" + key + "'");
        return it->second;
    }
    std::uint64_t u64(const std::string& key) const {
        const auto& s = str(key);
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw std::invalid_argument("manifest key '" + key + "' is not an integer: " + s);
        }
        return v;
    }
    double f64(const std::string& key) const {
        const auto& s = str(key);
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw std::invalid_argument("manifest key '" + key + "' is not a number: " + s);
        }
        return v;
    }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw std::invalid_argument("line " + std::to_string(lineno) + " is not key=value: " + line);
        }
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + " has an empty key");
        if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
            throw std::invalid_argument("duplicate key '" + key + "' on line " + std::to_string(lineno));
        }
    }
    return out;
}

std::string DatasetManifest::to_text() const {
    std::vector<std::string> files = frame_files;
    std::vector<std::string> counts;
    for (auto c : per_class_counts) counts.push_back(std::to_string(c));
    std::ostringstream os;
    os << "format=" << kManifestFormat << '\n'
       << "split=" << split << '\n'
       << "patch_size=" << params.patch << '\n'
       << "stride=" << params.stride << '\n'
       << "channels=" << format_channel_list(params.channels) << '\n'
       << "tau=" << format_double(params.tau) << '\n'
       << "fill=" << format_double(params.fill) << '\n'
       << "offset_layout=" << offset_layout << '\n'
       << "n_classes=" << offsets.size() << '\n'
       << "major_axis=" << format_double(ellipse.major_axis) << '\n'
       << "minor_axis=" << format_double(ellipse.minor_axis) << '\n'
       << "rotation_deg=" << format_double(ellipse.rotation_deg) << '\n'
       << "offsets=" << format_offset_table(offsets) << '\n'
       << "frame_width=" << frame_width << '\n'
       << "frame_height=" << frame_height << '\n'
       << "frame_count=" << frame_count << '\n'
       << "positions_per_frame=" << positions_per_frame << '\n'
       << "patch_count=" << patch_count << '\n'
       << "class_counts=" << join(counts, ',') << '\n'
       << "seed=" << seed << '\n'
       << "frames_dir=" << frames_dir << '\n'
       << "frames=" << join(files, ',') << '\n'
       << "sample_digest=" << sample_digest << '\n';
    return os.str();
}

DatasetManifest DatasetManifest::from_text(const std::string& text) {
    KeyLookup kv(parse_key_values(text));
    if (kv.str("format") != kManifestFormat) {
        throw std::invalid_argument("unsupported manifest format '" + kv.str("format") + "'");
    }
    DatasetManifest m;
    m.split = kv.str("split");
    m.params.patch = kv.u64("patch_size");
    m.params.stride = kv.u64("stride");
    m.params.channels = parse_channel_list(kv.str("channels"));
    m.params.tau = kv.f64("tau");
    m.params.fill = static_cast<float>(kv.f64("fill"));
    m.offset_layout = kv.str("offset_layout");
    m.ellipse.major_axis = kv.f64("major_axis");
    m.ellipse.minor_axis = kv.f64("minor_axis");
    m.ellipse.rotation_deg = kv.f64("rotation_deg");
    m.offsets = parse_offset_table(kv.str("offsets"));
    m.ellipse.n_classes = static_cast<int>(m.offsets.size());
    if (kv.u64("n_classes") != m.offsets.size()) {
        throw std::invalid_argument("manifest n_classes disagrees with its offset table");
    }
    m.frame_width = kv.u64("frame_width");
    m.frame_height = kv.u64("frame_height");
    m.frame_count = kv.u64("frame_count");
    m.positions_per_frame = kv.u64("positions_per_frame");
    m.patch_count = kv.u64("patch_count");
    for (const auto& c : split_list(kv.str("class_counts"), ',')) m.per_class_counts.push_back(std::stoull(c));
    m.seed = kv.u64("seed");
    m.frames_dir = kv.str("frames_dir");
    m.frame_files = split_list(kv.str("frames"), ',');
    m.sample_digest = kv.str("sample_digest");
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    detail::write_text_file(path, manifest.to_text());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    try {
        return DatasetManifest::from_text(detail::read_text_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void copy_shifted_patch(const Frame& frame, const OffsetClass& offset, float fill, std::size_t row,
                        std::size_t col, std::size_t patch, std::span<const ChannelId> channels,
                        std::span<float> out) {
    const std::size_t c = channels.size();
    if (out.size() != patch * patch * c) throw std::invalid_argument("patch buffer has wrong size");
    if (row + patch > frame.height() || col + patch > frame.width()) {
        throw std::invalid_argument("patch window leaves the frame");
    }
    const auto w = static_cast<long>(frame.width());
    const auto h = static_cast<long>(frame.height());
    for (std::size_t ci = 0; ci < c; ++ci) {
        const Plane& p = frame.plane(channels[ci]);
        const bool shifted = channels[ci] == ChannelId::L;
        for (std::size_t y = 0; y < patch; ++y) {
            float* dst = out.data() + y * patch * c + ci;
            const long r = static_cast<long>(row + y);
            if (!shifted) {
                const float* src = p.values.data() + static_cast<std::size_t>(r) * p.width + col;
                for (std::size_t x = 0; x < patch; ++x) dst[x * c] = src[x];
                continue;
            }
            const long sr = r - offset.dy;
            for (std::size_t x = 0; x < patch; ++x) {
                const long sc = static_cast<long>(col + x) - offset.dx;
                const bool inside = sr >= 0 && sr < h && sc >= 0 && sc < w;
                dst[x * c] = inside ? p.values[static_cast<std::size_t>(sr * w + sc)] : fill;
            }
        }
    }
}

PatchDataset::PatchDataset(std::vector<Frame> frames, std::vector<OffsetClass> offsets,
                           DatasetParams params, std::vector<SampleRef> samples)
    : frames_(std::move(frames)),
      offsets_(std::move(offsets)),
      params_(std::move(params)),
      samples_(std::move(samples)) {}

void PatchDataset::materialize(std::size_t i, std::span<float> out) const {
    const auto& s = samples_.at(i);
    copy_shifted_patch(frames_[s.frame], offsets_[s.label], params_.fill, s.row, s.col, params_.patch,
                       params_.channels, out);
}

PatchSample PatchDataset::sample(std::size_t i) const {
    const auto& s = samples_.at(i);
    PatchSample out{Tensor({params_.patch, params_.patch, params_.channels.size()}),
                    static_cast<int>(s.label), s.frame, s.row, s.col};
    materialize(i, out.data.values());
    return out;
}

BuiltDataset build_dataset(std::vector<Frame> frames, const std::vector<OffsetClass>& offsets,
                           const DatasetParams& params) {
    if (frames.empty()) throw std::invalid_argument("build_dataset needs at least one frame");
    validate_offset_table(offsets);
    if (params.channels.empty()) throw std::invalid_argument("build_dataset needs a channel list");
    if (params.tau < 0.0) throw std::invalid_argument("variance threshold must be non-negative");

    const std::size_t width = frames.front().width();
    const std::size_t height = frames.front().height();
    const auto grid = patch_grid(height, width, params.patch, params.stride);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& fr = frames[f];
        if (fr.width() != width || fr.height() != height) {
            throw std::invalid_argument("frame " + std::to_string(f) + " has different dims");
        }
        if (!fr.has(ChannelId::L)) {
            throw std::invalid_argument("frame " + std::to_string(f) + " has no L channel");
        }
        for (auto c : params.channels) {
            if (!fr.has(c)) {
                throw std::invalid_argument("frame " + std::to_string(f) + " lacks channel " +
                                            std::string(channel_name(c)));
            }
        }
    }

    const std::array<ChannelId, 1> depth_only{ChannelId::L};
    std::vector<float> depth(params.patch * params.patch);
    std::vector<float> patch(params.patch * params.patch * params.channels.size());
    std::vector<PatchDataset::SampleRef> samples;
    std::vector<std::size_t> per_class(offsets.size(), 0);
    Fnv1a digest;

    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (const auto& offset : offsets) {
            for (std::size_t i = 0; i < grid.rows; ++i) {
                for (std::size_t j = 0; j < grid.cols; ++j) {
                    const std::size_t row = i * params.stride, col = j * params.stride;
                    copy_shifted_patch(frames[f], offset, params.fill, row, col, params.patch,
                                       depth_only, depth);
                    if (!variance_keep(depth, params.tau)) continue;
                    PatchDataset::SampleRef ref{static_cast<std::uint32_t>(f),
                                                static_cast<std::uint32_t>(offset.id),
                                                static_cast<std::uint32_t>(row),
                                                static_cast<std::uint32_t>(col)};
                    copy_shifted_patch(frames[f], offset, params.fill, row, col, params.patch,
                                       params.channels, patch);
                    digest.add_value(ref.frame);
                    digest.add_value(ref.label);
                    digest.add_value(ref.row);
                    digest.add_value(ref.col);
                    digest.add(patch.data(), patch.size() * sizeof(float));
                    samples.push_back(ref);
                    ++per_class[static_cast<std::size_t>(offset.id)];
                }
            }
        }
    }
    if (samples.empty()) {
        throw std::invalid_argument("no patch survived the variance filter (tau=" +
                                    format_double(params.tau) + "); try a lower tau");
    }

    DatasetManifest m;
    m.params = params;
    m.offsets = offsets;
    m.ellipse.n_classes = static_cast<int>(offsets.size());
    m.frame_width = width;
    m.frame_height = height;
    m.frame_count = frames.size();
    m.positions_per_frame = grid.count();
    m.patch_count = samples.size();
    m.per_class_counts = per_class;
    m.sample_digest = digest.hex();

    return {PatchDataset(std::move(frames), offsets, params, std::move(samples)), std::move(m)};
}

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::invalid_argument("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with("frame_") && e.path().extension() == ".mmf") {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

BuiltDataset replay_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir) {
    std::filesystem::path dir = manifest.frames_dir;
    if (dir.is_relative()) dir = base_dir / dir;
    std::vector<Frame> frames;
    for (const auto& name : manifest.frame_files) frames.push_back(read_frame(dir / name));
    auto built = build_dataset(std::move(frames), manifest.offsets, manifest.params);
    if (built.manifest.patch_count != manifest.patch_count ||
        built.manifest.sample_digest != manifest.sample_digest) {
        throw std::runtime_error("replayed dataset does not match manifest: " +
                                 std::to_string(built.manifest.patch_count) + " samples, digest " +
                                 built.manifest.sample_digest + " vs " +
                                 std::to_string(manifest.patch_count) + " samples, digest " +
                                 manifest.sample_digest);
    }
    built.manifest = manifest;
    return built;
}

}  // namespace mmreg
