#include "mmreg/offsets.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mmreg {

namespace {

std::string describe(const OffsetClass& o) {
    std::ostringstream os;
    os << "class " << o.id << " (" << o.dx << ',' << o.dy << ')';
    return os.str();
}

}  // namespace

std::vector<OffsetClass> generate_offsets(const EllipseSpec& spec) {
    if (spec.n_classes < 2) {
        throw std::invalid_argument("need at least 2 offset classes, got " +
                                    std::to_string(spec.n_classes));
    }
    if (!(spec.major_axis > 0.0) || !(spec.minor_axis > 0.0)) {
        throw std::invalid_argument("ellipse axes must be positive");
    }
    const double a = spec.major_axis / 2.0;
    const double b = spec.minor_axis / 2.0;
    const double phi = spec.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);

    std::vector<OffsetClass> out;
    out.push_back({0, 0, 0});
    const int ring = spec.n_classes - 1;
    for (int i = 1; i < spec.n_classes; ++i) {
        const double theta = 2.0 * std::numbers::pi * (i - 1) / ring;
        const double x = a * std::cos(theta);
        const double y = b * std::sin(theta);
        // Clockwise rotation matrix [[c, s], [-s, c]] applied to (x, y).
        const double rx = c * x + s * y;
        const double ry = -s * x + c * y;
        out.push_back({i, static_cast<int>(std::round(rx)), static_cast<int>(std::round(ry))});
    }
    validate_offset_table(out);
    return out;
}

void validate_offset_table(const std::vector<OffsetClass>& offsets) {
    if (offsets.size() < 2) throw std::invalid_argument("offset table needs at least 2 classes");
    int zeros = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (offsets[i].id != static_cast<int>(i)) {
            throw std::invalid_argument("offset table ids must be 0..N-1 in order; entry " +
                                        std::to_string(i) + " has id " +
                                        std::to_string(offsets[i].id));
        }
        if (offsets[i].dx == 0 && offsets[i].dy == 0) ++zeros;
        for (std::size_t j = 0; j < i; ++j) {
            if (offsets[i].dx == offsets[j].dx && offsets[i].dy == offsets[j].dy) {
                throw std::invalid_argument("degenerate offsets: " + describe(offsets[j]) + " and " +
                                            describe(offsets[i]) + " collide after rounding");
            }
        }
    }
    if (zeros != 1) throw std::invalid_argument("offset table must contain exactly one (0,0) class");
}

std::string format_offset_table(const std::vector<OffsetClass>& offsets) {
    std::ostringstream os;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (i) os << ';';
        os << offsets[i].id << ':' << offsets[i].dx << ':' << offsets[i].dy;
    }
    return os.str();
}

std::vector<OffsetClass> parse_offset_table(const std::string& text) {
    std::vector<OffsetClass> out;
    std::istringstream entries(text);
    std::string entry;
    while (std::getline(entries, entry, ';')) {
        OffsetClass o;
        char sep1 = 0, sep2 = 0;
        std::istringstream es(entry);
        if (!(es >> o.id >> sep1 >> o.dx >> sep2 >> o.dy) || sep1 != ':' || sep2 != ':' ||
            !(es >> std::ws).eof()) {
            throw std::invalid_argument("malformed offset table entry '" + entry + "'");
        }
        out.push_back(o);
    }
    validate_offset_table(out);
    return out;
}

}  // namespace mmreg
