#pragma once

// Scaled synthetic train/test experiment shared by the acceptance checks.

#include <chrono>
#include <cstdint>
#include <vector>

#include "mmreg/evaluation.hpp"
#include "mmreg/model.hpp"
#include "mmreg/pipeline.hpp"
#include "mmreg/synth.hpp"

namespace mmreg::experiment {

struct Setup {
    std::size_t width = 400;
    std::size_t height = 128;
    int train_sequences = 4;
    int test_sequences = 1;
    int frames_per_sequence = 20;
    std::uint64_t train_seed = 1000;
    std::uint64_t test_seed = 9000;
    DatasetParams params;  // channels are filled per run
    std::size_t eval_stride = 16;  // 0: same as params.stride
    EllipseSpec ellipse;
};

/// Scaled-down schedule: a few epochs over the small corpus fit the time budget.
inline TrainConfig default_train_config() {
    TrainConfig tc;
    tc.epochs = 8;
    tc.learning_rate = 0.015;
    return tc;
}

struct Corpus {
    std::vector<std::vector<Frame>> train;  // one vector per sequence, with Gr, U, V added
    std::vector<std::vector<Frame>> test;
};

inline std::vector<Frame> make_sequence(const Setup& s, std::uint64_t seed) {
    SceneConfig c;
    c.seed = seed;
    c.frames = s.frames_per_sequence;
    c.width = s.width;
    c.height = s.height;
    c.objects = static_cast<int>(12 * s.width / 400);
    return add_flow_channels(generate_sequence(c));
}

inline Corpus make_corpus(const Setup& s) {
    Corpus corpus;
    for (int i = 0; i < s.train_sequences; ++i) {
        corpus.train.push_back(make_sequence(s, s.train_seed + static_cast<std::uint64_t>(i)));
    }
    for (int i = 0; i < s.test_sequences; ++i) {
        corpus.test.push_back(make_sequence(s, s.test_seed + static_cast<std::uint64_t>(i)));
    }
    return corpus;
}

struct Run {
    Network network;
    TrainResult history;
    std::size_t train_samples = 0;
    ConfusionMatrix patch_cm;
    ConfusionMatrix image_cm;
    std::vector<int> k_values;
    std::vector<ConfusionMatrix> temporal_cms;
    double train_seconds = 0.0;

    double temporal_accuracy(int k) const {
        for (std::size_t i = 0; i < k_values.size(); ++i) {
            if (k_values[i] == k) return mean_diagonal_accuracy(temporal_cms[i]);
        }
        return -1.0;
    }
};

inline Run train_and_evaluate(const Setup& s, const Corpus& corpus, std::vector<ChannelId> channels,
                              const TrainConfig& tc, const std::vector<int>& k_values) {
    DatasetParams params = s.params;
    params.channels = channels;
    const auto offsets = generate_offsets(s.ellipse);

    std::vector<Frame> train_frames;
    for (const auto& seq : corpus.train) train_frames.insert(train_frames.end(), seq.begin(), seq.end());
    auto built = build_dataset(std::move(train_frames), offsets, params);

    ModelConfig mc;
    mc.patch = params.patch;
    mc.channels = channels;
    mc.n_classes = offsets.size();
    mc.seed = tc.seed;

    Run run;
    run.network = build_model(mc);
    run.train_samples = built.dataset.size();
    const auto t0 = std::chrono::steady_clock::now();
    run.history = train(run.network, built.dataset, tc);
    run.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    run.patch_cm = ConfusionMatrix(offsets.size());
    run.image_cm = ConfusionMatrix(offsets.size());
    run.k_values = k_values;
    run.temporal_cms.assign(k_values.size(), ConfusionMatrix(offsets.size()));
    DatasetParams eval_params = params;
    if (s.eval_stride != 0) eval_params.stride = s.eval_stride;
    for (const auto& seq : corpus.test) {
        const auto report = evaluate_run(run.network, seq, offsets, eval_params, k_values);
        run.patch_cm.merge(report.patch_cm);
        run.image_cm.merge(report.image_cm);
        for (std::size_t i = 0; i < k_values.size(); ++i) run.temporal_cms[i].merge(report.temporal_cms[i]);
    }
    return run;
}

}  // namespace mmreg::experiment
