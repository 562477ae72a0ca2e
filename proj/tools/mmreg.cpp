// mmreg: synthetic scenes, optical flow, patch datasets, training and evaluation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmreg/dataset.hpp"
#include "mmreg/evaluation.hpp"
#include "mmreg/model.hpp"
#include "mmreg/parallel.hpp"
#include "mmreg/pipeline.hpp"
#include "mmreg/synth.hpp"

namespace fs = std::filesystem;
using namespace mmreg;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string frame_name(std::size_t i) {
    std::ostringstream os;
    os << "frame_" << std::setw(4) << std::setfill('0') << i << ".mmf";
    return os.str();
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "1,2,4" or "1..8" or a mix such as "1..4,8".
std::vector<int> parse_k_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& part : split(text, ',')) {
        const auto dots = part.find("..");
        try {
            if (dots == std::string::npos) {
                out.push_back(std::stoi(part));
            } else {
                const int lo = std::stoi(part.substr(0, dots)), hi = std::stoi(part.substr(dots + 2));
                if (hi < lo) throw UsageError("empty k range '" + part + "'");
                for (int k = lo; k <= hi; ++k) out.push_back(k);
            }
        } catch (const std::logic_error&) {
            throw UsageError("bad k list entry '" + part + "'");
        }
    }
    if (out.empty()) throw UsageError("k list is empty");
    for (int k : out) {
        if (k < 1) throw UsageError("k values must be >= 1");
    }
    return out;
}

std::array<std::size_t, 3> parse_filters(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 3) throw UsageError("filters needs three counts, e.g. 32,32,64");
    std::array<std::size_t, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            out[i] = std::stoul(parts[i]);
        } catch (const std::logic_error&) {
            throw UsageError("bad filter count '" + parts[i] + "'");
        }
    }
    return out;
}

std::vector<Frame> load_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw UsageError("frame directory not found: " + dir.string());
    const auto files = list_frame_files(dir);
    if (files.empty()) throw UsageError("no frame_*.mmf files in " + dir.string());
    std::vector<Frame> frames;
    for (const auto& f : files) frames.push_back(read_frame(f));
    return frames;
}

void write_frames(const std::vector<Frame>& frames, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < frames.size(); ++i) write_frame(frames[i], dir / frame_name(i));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// Fills options that were not given on the command line from a key=value file
/// (keys are long option names without dashes), then records the resolved values.
class ConfigBinding {
public:
    explicit ConfigBinding(CLI::App* app) : app_(app) {
        app_->add_option("--config", path_, "key=value file; command-line flags take precedence");
    }

    void apply() {
        if (path_.empty()) return;
        std::ifstream in(path_);
        if (!in) throw UsageError("cannot read config file " + path_);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto kv = parse_key_values(buf.str());
        for (const auto& [key, value] : kv) {
            CLI::Option* opt = nullptr;
            try {
                opt = app_->get_option("--" + key);
            } catch (const CLI::OptionNotFound&) {
                throw UsageError("config key '" + key + "' is not an option of '" + app_->get_name() + "'");
            }
            if (opt->count() > 0 || key == "config") continue;
            if (opt->get_type_size() == 0) {
                if (value == "true" || value == "1") opt->add_result(std::string("true"));
            } else {
                opt->add_result(value);
            }
            opt->run_callback();
        }
    }

    std::string resolved() const {
        std::ostringstream os;
        os << "# resolved " << app_->get_name() << " configuration\n";
        for (const CLI::Option* opt : app_->get_options()) {
            const auto& name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "config") continue;
            std::string value;
            if (opt->count() > 0) {
                const auto& results = opt->results();
                for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
                if (opt->get_type_size() == 0) value = "true";
            } else {
                value = opt->get_default_str();
                if (opt->get_type_size() == 0 && value.empty()) value = "false";
            }
            os << name << '=' << value << '\n';
        }
        return os.str();
    }

private:
    CLI::App* app_;
    std::string path_;
};

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string out = "frames";
    SceneConfig scene;
    std::string kinds = "mixed";
};

void add_synth(CLI::App& root, SynthArgs& a, std::vector<std::unique_ptr<ConfigBinding>>& bindings,
               std::function<void()>& action) {
    auto* cmd = root.add_subcommand("synth", "generate a synthetic RGB + depth frame sequence");
    cmd->add_option("--out", a.out, "output directory for frame_NNNN.mmf files");
    cmd->add_option("--seed", a.scene.seed, "scene seed");
    cmd->add_option("--frames", a.scene.frames, "number of consecutive frames (>= 1; flow needs >= 2)");
    cmd->add_option("--width", a.scene.width, "frame width in pixels");
    cmd->add_option("--height", a.scene.height, "frame height in pixels");
    cmd->add_option("--objects", a.scene.objects, "number of objects");
    cmd->add_option("--kinds", a.kinds, "object shapes: rectangles, ellipses or mixed")
        ->check(CLI::IsMember({"rectangles", "ellipses", "mixed"}));
    cmd->add_option("--near-depth", a.scene.near_depth, "nearest object depth (m)");
    cmd->add_option("--far-depth", a.scene.far_depth, "farthest object depth (m)");
    cmd->add_option("--max-range", a.scene.max_range, "depth mapped to L = 0 (m)");
    cmd->add_option("--translate-x", a.scene.translate_x, "camera-induced motion, px/frame");
    cmd->add_option("--translate-y", a.scene.translate_y, "camera-induced motion, px/frame");
    cmd->add_option("--parallax", a.scene.parallax, "extra speed of the nearest objects, x translate-x");
    cmd->add_option("--jitter", a.scene.object_jitter, "max per-object drift, px/frame");
    cmd->add_option("--stripes", a.scene.max_stripes, "max painted colour bands per object");
    cmd->add_option("--noise", a.scene.noise, "Gaussian noise sigma in [0, 0.2]");
    bindings.push_back(std::make_unique<ConfigBinding>(cmd));
    auto* binding = bindings.back().get();
    cmd->callback([&a, binding, &action] {
        binding->apply();
        action = [&a, binding] {
            if (a.scene.frames < 1) throw UsageError("--frames must be at least 1");
            a.scene.kinds = a.kinds == "rectangles" ? ObjectKinds::Rectangles
                            : a.kinds == "ellipses" ? ObjectKinds::Ellipses
                                                    : ObjectKinds::Mixed;
            try {
                a.scene.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const auto frames = generate_sequence(a.scene);
            const fs::path out(a.out);
            write_frames(frames, out);
            write_text(out / "synth_config.txt", binding->resolved());
            std::cout << "wrote " << frames.size() << " frames to " << out.string() << '\n';
        };
    });
}

// ---- flow -----------------------------------------------------------------

struct FlowArgs {
    std::string in;
    std::string out;
    FlowOptions options;
    double clamp = kDefaultFlowClamp;
};

void add_flow(CLI::App& root, FlowArgs& a, std::vector<std::unique_ptr<ConfigBinding>>& bindings,
              std::function<void()>& action) {
    auto* cmd = root.add_subcommand("flow", "add Gr and Horn-Schunck U, V planes to a frame sequence");
    cmd->add_option("--in", a.in, "directory of frame_NNNN.mmf files")->required();
    cmd->add_option("--out", a.out, "output directory (default: rewrite --in)");
    cmd->add_option("--alpha", a.options.alpha, "smoothness weight (gray-level units)");
    cmd->add_option("--iters", a.options.iterations, "Jacobi iterations");
    cmd->add_option("--clamp", a.clamp, "flow magnitude F mapped to 0 / 1, px");
    bindings.push_back(std::make_unique<ConfigBinding>(cmd));
    auto* binding = bindings.back().get();
    cmd->callback([&a, binding, &action] {
        binding->apply();
        action = [&a, binding] {
            if (!(a.options.alpha > 0.0)) throw UsageError("--alpha must be positive");
            if (a.options.iterations < 1) throw UsageError("--iters must be at least 1");
            if (!(a.clamp > 0.0)) throw UsageError("--clamp must be positive");
            auto frames = load_frames(a.in);
            frames = add_flow_channels(std::move(frames), a.options, a.clamp);
            const fs::path out = a.out.empty() ? fs::path(a.in) : fs::path(a.out);
            write_frames(frames, out);
            write_text(out / "flow_config.txt", binding->resolved());
            std::cout << "added Gr, U, V to " << frames.size() << " frames in " << out.string() << '\n';
        };
    });
}

// ---- dataset --------------------------------------------------------------

struct DatasetArgs {
    std::string frames;
    std::string out = "dataset";
    std::string channels = "GrLUV";
    std::string split = "train";
    DatasetParams params;
    EllipseSpec ellipse;
    std::uint64_t seed = 0;
};

void add_dataset(CLI::App& root, DatasetArgs& a, std::vector<std::unique_ptr<ConfigBinding>>& bindings,
                 std::function<void()>& action) {
    auto* cmd = root.add_subcommand("dataset", "build a labeled patch dataset manifest over N offset classes");
    cmd->add_option("--frames", a.frames, "directory of frame_NNNN.mmf files")->required();
    cmd->add_option("--out", a.out, "output directory for manifest.txt");
    cmd->add_option("--channels", a.channels, "channel stacking order, e.g. GrLUV or R,G,B,L");
    cmd->add_option("--patch", a.params.patch, "patch size p");
    cmd->add_option("--stride", a.params.stride, "patch stride s");
    cmd->add_option("--tau", a.params.tau, "minimum depth variance (15% of 0.25)");
    cmd->add_option("--fill", a.params.fill, "depth value for pixels vacated by the shift");
    cmd->add_option("--n-classes", a.ellipse.n_classes, "offset classes N (centre + N-1 on the ellipse)");
    cmd->add_option("--major", a.ellipse.major_axis, "ellipse major axis, px");
    cmd->add_option("--minor", a.ellipse.minor_axis, "ellipse minor axis, px");
    cmd->add_option("--rotation", a.ellipse.rotation_deg, "clockwise ellipse rotation, degrees");
    cmd->add_option("--split", a.split, "split name recorded in the manifest");
    cmd->add_option("--seed", a.seed, "scene seed recorded in the manifest");
    bindings.push_back(std::make_unique<ConfigBinding>(cmd));
    auto* binding = bindings.back().get();
    cmd->callback([&a, binding, &action] {
        binding->apply();
        action = [&a, binding] {
            std::vector<OffsetClass> offsets;
            try {
                a.params.channels = parse_channel_list(a.channels);
                offsets = generate_offsets(a.ellipse);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const fs::path frames_dir(a.frames);
            auto frames = load_frames(frames_dir);
            auto built = build_dataset(std::move(frames), offsets, a.params);
            const fs::path out(a.out);
            fs::create_directories(out);
            auto& m = built.manifest;
            m.ellipse = a.ellipse;
            m.split = a.split;
            m.seed = a.seed;
            m.frames_dir = fs::relative(fs::absolute(frames_dir), fs::absolute(out)).generic_string();
            for (const auto& f : list_frame_files(frames_dir)) m.frame_files.push_back(f.filename().string());
            write_manifest(m, out / "manifest.txt");
            write_text(out / "dataset_config.txt", binding->resolved());
            std::cout << "dataset: " << m.patch_count << " patches from " << m.frame_count << " frames x "
                      << offsets.size() << " classes (" << m.positions_per_frame
                      << " positions per frame); manifest " << (out / "manifest.txt").string() << '\n';
        };
    });
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string dataset;
    std::string out = "model";
    std::string channels;
    std::string filters = "32,32,64";
    std::size_t kernel = 5;
    TrainConfig train;
    bool no_shuffle = false;
};

fs::path manifest_path(const std::string& arg) {
    fs::path p(arg);
    if (fs::is_directory(p)) p /= "manifest.txt";
    if (!fs::exists(p)) throw UsageError("dataset manifest not found: " + p.string());
    return p;
}

void add_train(CLI::App& root, TrainArgs& a, std::vector<std::unique_ptr<ConfigBinding>>& bindings,
               std::function<void()>& action) {
    auto* cmd = root.add_subcommand("train", "train the three-stage conv network with momentum SGD");
    cmd->add_option("--dataset", a.dataset, "dataset directory or manifest.txt")->required();
    cmd->add_option("--out", a.out, "output directory for model.mmrc and loss.csv");
    cmd->add_option("--channels", a.channels, "input channels (default: the dataset's)");
    cmd->add_option("--filters", a.filters, "filters per conv stage");
    cmd->add_option("--kernel", a.kernel, "odd kernel size k (5, 7, 9)");
    cmd->add_option("--lr", a.train.learning_rate, "learning rate");
    cmd->add_option("--momentum", a.train.momentum, "SGD momentum");
    cmd->add_option("--epochs", a.train.epochs, "epochs (0 writes the initialized model)");
    cmd->add_option("--batch", a.train.batch, "mini-batch size");
    cmd->add_option("--seed", a.train.seed, "initialization and shuffle seed");
    cmd->add_flag("--no-shuffle", a.no_shuffle, "keep dataset order every epoch");
    bindings.push_back(std::make_unique<ConfigBinding>(cmd));
    auto* binding = bindings.back().get();
    cmd->callback([&a, binding, &action] {
        binding->apply();
        action = [&a, binding] {
            const auto mpath = manifest_path(a.dataset);
            auto manifest = read_manifest(mpath);
            auto built = replay_manifest(manifest, mpath.parent_path());
            ModelConfig mc;
            try {
                mc.channels = a.channels.empty() ? manifest.params.channels : parse_channel_list(a.channels);
                mc.filters = parse_filters(a.filters);
                mc.kernel = a.kernel;
                mc.patch = manifest.params.patch;
                mc.n_classes = manifest.offsets.size();
                mc.seed = a.train.seed;
                mc.validate();
                a.train.shuffle = !a.no_shuffle;
                a.train.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if (mc.channels != manifest.params.channels) {
                // Same frames and samples, restacked in the requested channel order.
                auto params = manifest.params;
                params.channels = mc.channels;
                const auto frames = built.dataset.frames();
                auto rebuilt = build_dataset(frames, manifest.offsets, params);
                rebuilt.manifest.ellipse = manifest.ellipse;
                rebuilt.manifest.split = manifest.split;
                rebuilt.manifest.seed = manifest.seed;
                rebuilt.manifest.frames_dir = manifest.frames_dir;
                rebuilt.manifest.frame_files = manifest.frame_files;
                built = std::move(rebuilt);
                manifest = built.manifest;
            }

            const fs::path out(a.out);
            fs::create_directories(out);
            Checkpoint ck{build_model(mc), manifest};
            std::ostringstream loss;
            if (a.train.epochs > 0) {
                loss << "epoch,mean_loss,train_accuracy_percent,seconds\n";
                const auto start = std::chrono::steady_clock::now();
                train(ck.network, built.dataset, a.train, [&](const EpochStats& e) {
                    const double secs =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    loss << e.epoch << ',' << format_double(e.mean_loss) << ','
                         << format_double(100.0 * e.accuracy) << ',' << format_double(secs) << '\n';
                    std::cout << "epoch " << e.epoch << "/" << a.train.epochs << " loss " << e.mean_loss
                              << " train acc " << 100.0 * e.accuracy << "%\n"
                              << std::flush;
                });
                write_text(out / "loss.csv", loss.str());
            }
            save_checkpoint(ck, out / "model.mmrc");
            write_text(out / "train_config.txt", binding->resolved());
            std::cout << "trained on " << built.dataset.size() << " patches; checkpoint "
                      << (out / "model.mmrc").string() << '\n';
        };
    });
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string frames;
    std::string out = "report";
    std::string k_list = "1..8";
    std::size_t stride = 0;
    std::size_t cell = 8;
};

void add_eval(CLI::App& root, EvalArgs& a, std::vector<std::unique_ptr<ConfigBinding>>& bindings,
              std::function<void()>& action) {
    auto* cmd = root.add_subcommand("eval", "evaluate a checkpoint on held-out frames and write a report");
    cmd->add_option("--checkpoint", a.checkpoint, "model.mmrc from train")->required();
    cmd->add_option("--frames", a.frames, "directory of test frame_NNNN.mmf files")->required();
    cmd->add_option("--out", a.out, "report directory");
    cmd->add_option("--k", a.k_list, "consecutive time steps for temporal fusion, e.g. 1..8 or 1,2,4");
    cmd->add_option("--stride", a.stride, "patch stride for testing (0: the training stride)");
    cmd->add_option("--cell", a.cell, "pixels per patch cell in the patch maps");
    bindings.push_back(std::make_unique<ConfigBinding>(cmd));
    auto* binding = bindings.back().get();
    cmd->callback([&a, binding, &action] {
        binding->apply();
        action = [&a, binding] {
            const auto k_values = parse_k_list(a.k_list);
            if (!fs::exists(a.checkpoint)) throw UsageError("checkpoint not found: " + a.checkpoint);
            if (a.cell < 1) throw UsageError("--cell must be at least 1");
            const auto ck = load_checkpoint(a.checkpoint);
            const auto frames = load_frames(a.frames);
            auto params = ck.manifest.params;
            if (a.stride != 0) params.stride = a.stride;
            for (int k : k_values) {
                if (static_cast<std::size_t>(k) > frames.size()) {
                    throw UsageError("k=" + std::to_string(k) + " needs at least " + std::to_string(k) +
                                     " frames; found " + std::to_string(frames.size()));
                }
            }
            const auto report = evaluate_run(ck.network, frames, ck.manifest.offsets, params, k_values);
            const fs::path out(a.out);
            ReportOptions opts;
            opts.cell_size = a.cell;
            emit_report(report, out, opts);
            AblationRow row;
            row.channels = format_channel_list(ck.network.config.channels);
            row.kernel = ck.network.config.kernel;
            row.filters = ck.network.config.filters;
            row.image_accuracy = report.image_accuracy();
            row.patch_accuracy = report.patch_accuracy();
            write_text(out / "ablation.csv", ablation_csv({row}));
            write_text(out / "eval_config.txt", binding->resolved());
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << "patch accuracy " << row.patch_accuracy << "%, image accuracy " << row.image_accuracy
                      << "%";
            for (int k : k_values) std::cout << ", k=" << k << " " << report.temporal_accuracy(k) << "%";
            std::cout << "\nreport written to " << out.string() << '\n';
        };
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detects LiDAR/video misalignment by classifying multi-channel patches into offset classes.\n"
                 "Environment: MMREG_THREADS caps worker threads (0 = all cores)."};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    std::vector<std::unique_ptr<ConfigBinding>> bindings;
    std::function<void()> action;
    SynthArgs synth;
    FlowArgs flow;
    DatasetArgs dataset;
    TrainArgs train_args;
    EvalArgs eval;
    add_synth(app, synth, bindings, action);
    add_flow(app, flow, bindings, action);
    add_dataset(app, dataset, bindings, action);
    add_train(app, train_args, bindings, action);
    add_eval(app, eval, bindings, action);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        if (action) action();
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
