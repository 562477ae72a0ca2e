#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmreg/dataset.hpp"
#include "mmreg/model.hpp"

namespace mmreg {

/// N x N counts, rows = true class, columns = predicted class. Frames that
/// produced no decision are tallied separately and never enter a cell.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes = 0) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

    std::size_t classes() const { return n_; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * n_ + predicted); }
    std::size_t row_sum(std::size_t truth) const;
    std::size_t total() const;
    std::size_t no_decision() const { return no_decision_; }

    void accumulate(int truth, int predicted);
    void accumulate_no_decision() { ++no_decision_; }
    void merge(const ConfusionMatrix& other);
    void scale_counts(std::size_t factor);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> counts_;
    std::size_t no_decision_ = 0;
};

struct AccuracyBreakdown {
    double percent = 0.0;
    std::vector<std::size_t> skipped_rows;  // classes with no samples
};

/// Macro-averaged per-class recall in percent: mean over non-empty rows of
/// counts[i][i] / row_sum[i]. Throws when every row is empty.
AccuracyBreakdown mean_diagonal_breakdown(const ConfusionMatrix& cm);
double mean_diagonal_accuracy(const ConfusionMatrix& cm);

/// Plain trace / total in percent.
double raw_accuracy(const ConfusionMatrix& cm);

/// One frame evaluated under one simulated offset.
struct FrameRecord {
    std::size_t frame_index = 0;
    int true_class = 0;
    std::vector<int> patch_predictions;  // grid row-major; -1 where the variance filter dropped the patch
    FrameVote vote;
};

struct EvalReport {
    std::vector<OffsetClass> offsets;
    std::size_t patch = 0;
    std::size_t stride = 0;
    PatchGrid grid;
    ConfusionMatrix patch_cm;
    ConfusionMatrix image_cm;
    std::vector<int> k_values;
    std::vector<ConfusionMatrix> temporal_cms;  // parallel to k_values
    std::vector<FrameRecord> records;           // frame-major, then class
    std::vector<std::string> warnings;

    double patch_accuracy() const { return mean_diagonal_accuracy(patch_cm); }
    double image_accuracy() const { return mean_diagonal_accuracy(image_cm); }
    double temporal_accuracy(int k) const;
};

/// Classifies a batch of patches; labels in the samples carry the ground truth
/// (real classifiers must ignore them).
using PatchClassifier = std::function<std::vector<int>(const std::vector<PatchSample>&)>;

PatchClassifier network_classifier(const Network& net);

/// Runs the full test protocol: for every frame and offset class, shift L, cut
/// the patch grid, apply the variance filter, classify the survivors, vote per
/// frame, and fuse votes over sliding windows of k consecutive frames that
/// share an offset class.
EvalReport evaluate_run(const PatchClassifier& classify, const std::vector<Frame>& frames,
                        const std::vector<OffsetClass>& offsets, const DatasetParams& params,
                        const std::vector<int>& k_values);

EvalReport evaluate_run(const Network& net, const std::vector<Frame>& frames,
                        const std::vector<OffsetClass>& offsets, const DatasetParams& params,
                        const std::vector<int>& k_values);

/// Nine fixed, well-separated colours used for class maps; class ids beyond
/// nine cycle through the table.
const std::array<std::array<std::uint8_t, 3>, 9>& class_palette();

struct ReportOptions {
    std::size_t cell_size = 8;        // pixels per patch cell in class maps
    std::size_t heatmap_cell = 24;    // pixels per confusion-matrix cell
    std::size_t max_patch_maps = 9;   // first records, frame-major
};

/// Writes patch/image confusion CSVs and PPM heatmaps, the temporal table,
/// a summary, and per-frame patch class maps. Output is a pure function of the report.
void emit_report(const EvalReport& report, const std::filesystem::path& out_dir,
                 const ReportOptions& options = {});

std::string confusion_to_csv(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_csv(const std::string& text);
std::string temporal_table_csv(const EvalReport& report);

struct AblationRow {
    std::string channels;
    std::size_t kernel = 5;
    std::array<std::size_t, 3> filters{32, 32, 64};
    double image_accuracy = 0.0;
    double patch_accuracy = 0.0;
};

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Binary PPM (P6) encoder for RGB8 pixels.
std::vector<std::uint8_t> encode_ppm(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& rgb);

}  // namespace mmreg
