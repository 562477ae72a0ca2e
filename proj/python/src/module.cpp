#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <string>

#include "mmreg/evaluation.hpp"
#include "mmreg/flow.hpp"
#include "mmreg/frame.hpp"
#include "mmreg/model.hpp"
#include "mmreg/offsets.hpp"
#include "mmreg/pipeline.hpp"
#include "mmreg/synth.hpp"

namespace py = pybind11;
using namespace mmreg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray plane_to_array(const Plane& p) {
    FloatArray out({p.height, p.width});
    std::memcpy(out.mutable_data(), p.values.data(), p.values.size() * sizeof(float));
    return out;
}

Plane array_to_plane(const FloatArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
    Plane p(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
    std::memcpy(p.values.data(), a.data(), p.values.size() * sizeof(float));
    return p;
}

// Frames cross the boundary as {channel name: H x W float32 array}, in channel order.
py::dict frame_to_dict(const Frame& f) {
    py::dict d;
    for (const auto& [id, plane] : f.entries()) d[py::str(std::string(channel_name(id)))] = plane_to_array(plane);
    return d;
}

Frame dict_to_frame(const py::dict& d) {
    Frame f;
    for (const auto& [key, value] : d) {
        const auto name = key.cast<std::string>();
        const auto id = channel_from_name(name);
        if (!id) throw std::invalid_argument("unknown channel '" + name + "'");
        auto plane = array_to_plane(value.cast<FloatArray>());
        if (f.channel_count() == 0) f = Frame(plane.width, plane.height);
        f.set(*id, std::move(plane));
    }
    return f;
}

ConfusionMatrix matrix_from_array(const py::array_t<long long, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw std::invalid_argument("expected a square matrix");
    const auto n = static_cast<std::size_t>(a.shape(0));
    ConfusionMatrix cm(n);
    const auto r = a.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (r(i, j) < 0) throw std::invalid_argument("counts must be non-negative");
            for (long long c = 0; c < r(i, j); ++c) cm.accumulate(static_cast<int>(i), static_cast<int>(j));
        }
    return cm;
}

}  // namespace

PYBIND11_MODULE(_mmreg, m) {
    m.doc() = "Depth/video misalignment classifier: core bindings";

    m.def(
        "generate_offsets",
        [](int n_classes, double major, double minor, double rotation) {
            std::vector<std::tuple<int, int, int>> out;
            for (const auto& o : generate_offsets({n_classes, major, minor, rotation})) out.emplace_back(o.id, o.dx, o.dy);
            return out;
        },
        py::arg("n_classes") = 9, py::arg("major") = 32.0, py::arg("minor") = 16.0, py::arg("rotation") = 45.0,
        "Offset classes as (id, dx, dy) tuples; class 0 is (0, 0).");

    m.def(
        "estimate_flow",
        [](const FloatArray& prev, const FloatArray& next, double alpha, int iterations) {
            const auto f = estimate_flow(array_to_plane(prev), array_to_plane(next), {alpha, iterations});
            FloatArray u({f.height, f.width}), v({f.height, f.width});
            std::memcpy(u.mutable_data(), f.u.data(), f.u.size() * sizeof(float));
            std::memcpy(v.mutable_data(), f.v.data(), f.v.size() * sizeof(float));
            return py::make_tuple(u, v);
        },
        py::arg("prev"), py::arg("next"), py::arg("alpha") = 1.0, py::arg("iterations") = 200,
        "Horn-Schunck flow between two [0,1] gray images; returns (u, v) in px/frame.");

    m.def(
        "generate_sequence",
        [](std::uint64_t seed, int frames, std::size_t width, std::size_t height, int objects, double noise) {
            SceneConfig c;
            c.seed = seed;
            c.frames = frames;
            c.width = width;
            c.height = height;
            c.objects = objects;
            c.noise = noise;
            py::list out;
            for (const auto& f : generate_sequence(c)) out.append(frame_to_dict(f));
            return out;
        },
        py::arg("seed") = 1, py::arg("frames") = 8, py::arg("width") = Frame::kDefaultWidth,
        py::arg("height") = Frame::kDefaultHeight, py::arg("objects") = 24, py::arg("noise") = 0.01,
        "Synthetic sequence as a list of {channel: array} dicts with R, G, B, L.");

    m.def(
        "add_flow_channels",
        [](const py::list& frames) {
            std::vector<Frame> in;
            for (const auto& f : frames) in.push_back(dict_to_frame(f.cast<py::dict>()));
            py::list out;
            for (const auto& f : add_flow_channels(std::move(in))) out.append(frame_to_dict(f));
            return out;
        },
        py::arg("frames"), "Adds Gr, U and V planes; frame 0 gets zero flow.");

    m.def(
        "read_frame", [](const std::filesystem::path& p) { return frame_to_dict(read_frame(p)); }, py::arg("path"));
    m.def(
        "write_frame", [](const py::dict& d, const std::filesystem::path& p) { write_frame(dict_to_frame(d), p); },
        py::arg("frame"), py::arg("path"));

    m.def(
        "mean_diagonal_accuracy", [](const py::array_t<long long, py::array::c_style | py::array::forcecast>& a) {
            return mean_diagonal_accuracy(matrix_from_array(a));
        },
        py::arg("matrix"), "Macro-averaged per-class recall in percent; rows are true classes.");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_static("load", &load_checkpoint, py::arg("path"))
        .def_property_readonly("channels",
                               [](const Checkpoint& c) { return format_channel_list(c.network.config.channels); })
        .def_property_readonly("patch", [](const Checkpoint& c) { return c.network.config.patch; })
        .def_property_readonly("n_classes", [](const Checkpoint& c) { return c.network.config.n_classes; })
        .def_property_readonly("kernel", [](const Checkpoint& c) { return c.network.config.kernel; })
        .def(
            "predict",
            [](const Checkpoint& c, const FloatArray& patch) {
                if (patch.ndim() != 3) throw std::invalid_argument("expected a p x p x C array");
                Tensor t({static_cast<std::size_t>(patch.shape(0)), static_cast<std::size_t>(patch.shape(1)),
                          static_cast<std::size_t>(patch.shape(2))});
                std::memcpy(t.data(), patch.data(), t.size() * sizeof(float));
                const auto p = predict_patch(c.network, t);
                return py::make_tuple(p.label, p.probabilities);
            },
            py::arg("patch"), "Returns (label, probabilities) for one H x W x C patch.");
}
