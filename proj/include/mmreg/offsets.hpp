#pragma once

#include <string>
#include <vector>

namespace mmreg {

/// A discrete depth-channel displacement. Screen coordinates: dy grows downward.
struct OffsetClass {
    int id = 0;
    int dx = 0;
    int dy = 0;

    friend bool operator==(const OffsetClass&, const OffsetClass&) = default;
};

struct EllipseSpec {
    int n_classes = 9;
    double major_axis = 32.0;
    double minor_axis = 16.0;
    double rotation_deg = 45.0;

    friend bool operator==(const EllipseSpec&, const EllipseSpec&) = default;
};

/// Class 0 is the aligned case (0,0). Classes 1..N-1 sit at equally spaced
/// parameter angles theta_i = (i-1) * 360 / (N-1) on the ellipse with semi-axes
/// major/2 and minor/2, rotated by the given angle and rounded half away from zero.
///
/// Throws std::invalid_argument when N < 2, an axis is not positive, or two
/// classes round onto the same pixel.
std::vector<OffsetClass> generate_offsets(const EllipseSpec& spec);

/// "id:dx:dy;id:dx:dy;..." as stored in manifests and checkpoints.
std::string format_offset_table(const std::vector<OffsetClass>& offsets);
std::vector<OffsetClass> parse_offset_table(const std::string& text);

/// Checks ids are 0..N-1 in order, pairs are distinct, and exactly one is (0,0).
void validate_offset_table(const std::vector<OffsetClass>& offsets);

}  // namespace mmreg
