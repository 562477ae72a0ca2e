#include "mmreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "mmreg/parallel.hpp"

namespace mmreg {

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < n_; ++j) s += counts_.at(truth * n_ + j);
    return s;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

void ConfusionMatrix::accumulate(int truth, int predicted) {
    if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= n_ ||
        static_cast<std::size_t>(predicted) >= n_) {
        throw std::invalid_argument("confusion entry (" + std::to_string(truth) + "," +
                                    std::to_string(predicted) + ") outside " + std::to_string(n_) +
                                    " classes");
    }
    ++counts_[static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted)];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw std::invalid_argument("cannot merge confusion matrices of different size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    no_decision_ += other.no_decision_;
}

void ConfusionMatrix::scale_counts(std::size_t factor) {
    for (auto& c : counts_) c *= factor;
    no_decision_ *= factor;
}

AccuracyBreakdown mean_diagonal_breakdown(const ConfusionMatrix& cm) {
    AccuracyBreakdown out;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < cm.classes(); ++i) {
        const auto row = cm.row_sum(i);
        if (row == 0) {
            out.skipped_rows.push_back(i);
            continue;
        }
        sum += static_cast<double>(cm.at(i, i)) / static_cast<double>(row);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("mean-diagonal accuracy of an empty confusion matrix");
    out.percent = 100.0 * sum / static_cast<double>(used);
    return out;
}

double mean_diagonal_accuracy(const ConfusionMatrix& cm) { return mean_diagonal_breakdown(cm).percent; }

double raw_accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy of an empty confusion matrix");
    std::size_t trace = 0;
    for (std::size_t i = 0; i < cm.classes(); ++i) trace += cm.at(i, i);
    return 100.0 * static_cast<double>(trace) / static_cast<double>(total);
}

double EvalReport::temporal_accuracy(int k) const {
    for (std::size_t i = 0; i < k_values.size(); ++i) {
        if (k_values[i] == k) return mean_diagonal_accuracy(temporal_cms[i]);
    }
    throw std::invalid_argument("report has no temporal entry for k=" + std::to_string(k));
}

PatchClassifier network_classifier(const Network& net) {
    return [&net](const std::vector<PatchSample>& samples) {
        std::vector<int> out(samples.size());
        parallel_for(samples.size(), [&](std::size_t i) { out[i] = predict_patch(net, samples[i].data).label; });
        return out;
    };
}

EvalReport evaluate_run(const PatchClassifier& classify, const std::vector<Frame>& frames,
                        const std::vector<OffsetClass>& offsets, const DatasetParams& params,
                        const std::vector<int>& k_values) {
    if (frames.empty()) throw std::invalid_argument("evaluation needs at least one frame");
    validate_offset_table(offsets);
    const std::size_t n = offsets.size();
    for (int k : k_values) {
        if (k < 1 || static_cast<std::size_t>(k) > frames.size()) {
            throw std::invalid_argument("temporal window k=" + std::to_string(k) + " needs 1 <= k <= " +
                                        std::to_string(frames.size()) + " frames");
        }
    }

    EvalReport report;
    report.offsets = offsets;
    report.patch = params.patch;
    report.stride = params.stride;
    report.grid = patch_grid(frames.front().height(), frames.front().width(), params.patch, params.stride);
    report.patch_cm = ConfusionMatrix(n);
    report.image_cm = ConfusionMatrix(n);
    report.k_values = k_values;

    const std::array<ChannelId, 1> depth_only{ChannelId::L};
    std::vector<float> depth(params.patch * params.patch);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const Frame& frame = frames[f];
        if (frame.width() != frames.front().width() || frame.height() != frames.front().height()) {
            throw std::invalid_argument("evaluation frame " + std::to_string(f) + " has different dims");
        }
        for (const auto& offset : offsets) {
            std::vector<PatchSample> batch;
            std::vector<std::size_t> cells;
            for (std::size_t i = 0; i < report.grid.rows; ++i) {
                for (std::size_t j = 0; j < report.grid.cols; ++j) {
                    const std::size_t row = i * params.stride, col = j * params.stride;
                    copy_shifted_patch(frame, offset, params.fill, row, col, params.patch, depth_only, depth);
                    if (!variance_keep(depth, params.tau)) continue;
                    PatchSample s{Tensor({params.patch, params.patch, params.channels.size()}), offset.id, f,
                                  row, col};
                    copy_shifted_patch(frame, offset, params.fill, row, col, params.patch, params.channels,
                                       s.data.values());
                    batch.push_back(std::move(s));
                    cells.push_back(i * report.grid.cols + j);
                }
            }
            const auto predicted = batch.empty() ? std::vector<int>{} : classify(batch);
            if (predicted.size() != batch.size()) {
                throw std::runtime_error("classifier returned " + std::to_string(predicted.size()) +
                                         " labels for " + std::to_string(batch.size()) + " patches");
            }
            FrameRecord rec;
            rec.frame_index = f;
            rec.true_class = offset.id;
            rec.patch_predictions.assign(report.grid.count(), -1);
            for (std::size_t p = 0; p < predicted.size(); ++p) {
                rec.patch_predictions[cells[p]] = predicted[p];
                report.patch_cm.accumulate(offset.id, predicted[p]);
            }
            rec.vote = vote_frame(predicted, n);
            if (rec.vote.label) {
                report.image_cm.accumulate(offset.id, *rec.vote.label);
            } else {
                report.image_cm.accumulate_no_decision();
            }
            report.records.push_back(std::move(rec));
        }
    }

    // records are frame-major: the record for (frame f, class c) sits at f * n + c.
    for (int k : k_values) {
        ConfusionMatrix cm(n);
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t t = 0; t + static_cast<std::size_t>(k) <= frames.size(); ++t) {
                std::vector<VoteHistogram> window;
                for (std::size_t d = 0; d < static_cast<std::size_t>(k); ++d) {
                    window.push_back(report.records[(t + d) * n + c].vote.histogram);
                }
                const auto fused = temporal_fuse(window);
                if (fused) {
                    cm.accumulate(static_cast<int>(c), *fused);
                } else {
                    cm.accumulate_no_decision();
                }
            }
        }
        report.temporal_cms.push_back(std::move(cm));
    }

    for (const auto* cm : {&report.patch_cm, &report.image_cm}) {
        if (cm->total() == 0) continue;
        for (auto row : mean_diagonal_breakdown(*cm).skipped_rows) {
            report.warnings.push_back("class " + std::to_string(row) + " has no " +
                                      (cm == &report.patch_cm ? "patch" : "image") +
                                      " samples; excluded from the mean-diagonal accuracy");
        }
    }
    if (report.image_cm.no_decision() > 0) {
        report.warnings.push_back(std::to_string(report.image_cm.no_decision()) +
                                  " frame/offset pairs had no surviving patches (no decision)");
    }
    return report;
}

EvalReport evaluate_run(const Network& net, const std::vector<Frame>& frames,
                        const std::vector<OffsetClass>& offsets, const DatasetParams& params,
                        const std::vector<int>& k_values) {
    check_channel_order(net, params.channels);
    if (params.patch != net.config.patch) {
        throw std::invalid_argument("evaluation patch size differs from the model's");
    }
    if (offsets.size() != net.config.n_classes) {
        throw std::invalid_argument("offset table size differs from the model's class count");
    }
    return evaluate_run(network_classifier(net), frames, offsets, params, k_values);
}

const std::array<std::array<std::uint8_t, 3>, 9>& class_palette() {
    static const std::array<std::array<std::uint8_t, 3>, 9> palette{{
        {230, 25, 75},    // red
        {60, 180, 75},    // green
        {255, 225, 25},   // yellow
        {0, 130, 200},    // blue
        {245, 130, 48},   // orange
        {145, 30, 180},   // purple
        {70, 240, 240},   // cyan
        {240, 50, 230},   // magenta
        {128, 128, 0},    // olive
    }};
    return palette;
}

std::vector<std::uint8_t> encode_ppm(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != width * height * 3) throw std::invalid_argument("PPM pixel buffer has wrong size");
    const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), rgb.begin(), rgb.end());
    return out;
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "true\\pred";
    for (std::size_t j = 0; j < cm.classes(); ++j) os << ',' << j;
    os << '\n';
    for (std::size_t i = 0; i < cm.classes(); ++i) {
        os << i;
        for (std::size_t j = 0; j < cm.classes(); ++j) os << ',' << cm.at(i, j);
        os << '\n';
    }
    return os.str();
}

ConfusionMatrix confusion_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty confusion CSV");
    const auto n = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    ConfusionMatrix cm(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw std::invalid_argument("confusion CSV has too few rows");
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        if (std::stoul(cell) != i) throw std::invalid_argument("confusion CSV rows out of order");
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::getline(row, cell, ',')) throw std::invalid_argument("confusion CSV row too short");
            const auto count = std::stoull(cell);
            for (std::size_t c = 0; c < count; ++c) cm.accumulate(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return cm;
}

std::string temporal_table_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "consecutive_time_steps";
    for (int k : report.k_values) os << ',' << k;
    os << "\naccuracy_percent";
    for (int k : report.k_values) os << ',' << std::fixed << std::setprecision(2) << report.temporal_accuracy(k);
    os << '\n';
    return os.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "channels,filter_size,filters,image_accuracy_percent,patch_accuracy_percent\n";
    os << std::fixed << std::setprecision(2);
    for (const auto& r : rows) {
        os << r.channels << ',' << r.kernel << ",(" << r.filters[0] << ' ' << r.filters[1] << ' ' << r.filters[2]
           << ")," << r.image_accuracy << ',' << r.patch_accuracy << '\n';
    }
    return os.str();
}

namespace {

std::vector<std::uint8_t> confusion_heatmap(const ConfusionMatrix& cm, std::size_t cell) {
    const std::size_t n = cm.classes();
    const std::size_t side = n * cell;
    std::vector<std::uint8_t> rgb(side * side * 3, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = cm.row_sum(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double frac = row == 0 ? 0.0 : static_cast<double>(cm.at(i, j)) / static_cast<double>(row);
            // White (0) to dark blue (1).
            const auto r = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - frac)));
            const auto g = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - 0.8 * frac)));
            const auto b = static_cast<std::uint8_t>(std::lround(255.0 - 105.0 * frac));
            for (std::size_t y = i * cell; y < (i + 1) * cell; ++y) {
                for (std::size_t x = j * cell; x < (j + 1) * cell; ++x) {
                    const bool border = y % cell == 0 || x % cell == 0;
                    auto* px = &rgb[(y * side + x) * 3];
                    px[0] = border ? 160 : r;
                    px[1] = border ? 160 : g;
                    px[2] = border ? 160 : b;
                }
            }
        }
    }
    return encode_ppm(side, side, rgb);
}

std::vector<std::uint8_t> patch_class_map(const FrameRecord& rec, const PatchGrid& grid, std::size_t cell) {
    const std::size_t w = grid.cols * cell, h = grid.rows * cell;
    std::vector<std::uint8_t> rgb(w * h * 3, 0);
    const auto& palette = class_palette();
    for (std::size_t i = 0; i < grid.rows; ++i) {
        for (std::size_t j = 0; j < grid.cols; ++j) {
            const int label = rec.patch_predictions[i * grid.cols + j];
            std::array<std::uint8_t, 3> color{40, 40, 40};  // dropped by the variance filter
            if (label >= 0) color = palette[static_cast<std::size_t>(label) % palette.size()];
            for (std::size_t y = i * cell; y < (i + 1) * cell; ++y) {
                for (std::size_t x = j * cell; x < (j + 1) * cell; ++x) {
                    std::copy(color.begin(), color.end(), &rgb[(y * w + x) * 3]);
                }
            }
        }
    }
    return encode_ppm(w, h, rgb);
}

std::string summary_text(const EvalReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "n_classes=" << report.offsets.size() << '\n';
    os << "offsets=" << format_offset_table(report.offsets) << '\n';
    os << "patch_size=" << report.patch << '\n';
    os << "stride=" << report.stride << '\n';
    os << "frames=" << (report.offsets.empty() ? 0 : report.records.size() / report.offsets.size()) << '\n';
    os << "patch_samples=" << report.patch_cm.total() << '\n';
    if (report.patch_cm.total() > 0) {
        os << "patch_mean_diagonal_percent=" << mean_diagonal_accuracy(report.patch_cm) << '\n';
        os << "patch_raw_accuracy_percent=" << raw_accuracy(report.patch_cm) << '\n';
    }
    os << "image_samples=" << report.image_cm.total() << '\n';
    os << "image_no_decision=" << report.image_cm.no_decision() << '\n';
    if (report.image_cm.total() > 0) {
        os << "image_mean_diagonal_percent=" << mean_diagonal_accuracy(report.image_cm) << '\n';
        os << "image_raw_accuracy_percent=" << raw_accuracy(report.image_cm) << '\n';
    }
    for (std::size_t i = 0; i < report.k_values.size(); ++i) {
        if (report.temporal_cms[i].total() == 0) continue;
        os << "temporal_k" << report.k_values[i] << "_percent=" << mean_diagonal_accuracy(report.temporal_cms[i])
           << '\n';
    }
    for (std::size_t i = 0; i < report.warnings.size(); ++i) os << "warning_" << i << '=' << report.warnings[i] << '\n';
    return os.str();
}

}  // namespace

void emit_report(const EvalReport& report, const std::filesystem::path& out_dir, const ReportOptions& options) {
    if (report.records.empty() || report.patch_cm.total() == 0) {
        throw std::invalid_argument("refusing to emit an empty report");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw std::runtime_error("cannot create report directory " + out_dir.string());
    }
    detail::write_text_file(out_dir / "patch_confusion.csv", confusion_to_csv(report.patch_cm));
    detail::write_text_file(out_dir / "image_confusion.csv", confusion_to_csv(report.image_cm));
    detail::write_file_bytes(out_dir / "patch_confusion.ppm", confusion_heatmap(report.patch_cm, options.heatmap_cell));
    detail::write_file_bytes(out_dir / "image_confusion.ppm", confusion_heatmap(report.image_cm, options.heatmap_cell));
    if (!report.k_values.empty()) detail::write_text_file(out_dir / "temporal.csv", temporal_table_csv(report));
    detail::write_text_file(out_dir / "summary.txt", summary_text(report));

    const std::size_t maps = std::min(options.max_patch_maps, report.records.size());
    for (std::size_t i = 0; i < maps; ++i) {
        const auto& rec = report.records[i];
        std::ostringstream name;
        name << "patchmap_f" << std::setw(4) << std::setfill('0') << rec.frame_index << "_c" << rec.true_class
             << ".ppm";
        detail::write_file_bytes(out_dir / name.str(), patch_class_map(rec, report.grid, options.cell_size));
    }
}

}  // namespace mmreg
