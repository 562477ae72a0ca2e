#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mmreg/dataset.hpp"
#include "mmreg/frame.hpp"
#include "mmreg/nn.hpp"

namespace mmreg {

inline constexpr std::size_t kConvStages = 3;

struct ModelConfig {
    std::size_t patch = 32;
    std::vector<ChannelId> channels{ChannelId::Gr, ChannelId::L, ChannelId::U, ChannelId::V};
    std::array<std::size_t, kConvStages> filters{32, 32, 64};
    std::size_t kernel = 5;
    std::size_t n_classes = 9;
    std::uint64_t seed = 1;

    std::size_t padding() const { return (kernel - 1) / 2; }
    std::size_t dense_inputs() const { return (patch / 8) * (patch / 8) * filters.back(); }

    /// Throws unless patch is a positive multiple of 8, kernel is odd, and counts are positive.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Three conv(k x k, pad (k-1)/2) -> ReLU -> maxpool2x2 stages, then a dense softmax layer.
template <typename T>
struct BasicNetwork {
    ModelConfig config;
    std::array<nn::ConvParams<T>, kConvStages> convs;
    nn::DenseParams<T> dense;
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

template <typename T>
struct NetworkGrads {
    std::array<nn::ConvGrads<T>, kConvStages> convs;
    nn::DenseParams<T> dense;

    static NetworkGrads zeros_like(const BasicNetwork<T>& net);
    void set_zero();
    void add(const NetworkGrads& other);
    void scale(T factor);
};

/// He-initialized network; biases start at zero. Deterministic per config.seed.
template <typename T = float>
BasicNetwork<T> build_model(const ModelConfig& config);

template <typename T>
BasicNetwork<T> convert_network(const Network& net);

/// Cached activations of one forward pass.
template <typename T>
struct ForwardPass {
    BasicTensor<T> input;
    std::array<BasicTensor<T>, kConvStages> pre_activation;
    std::array<BasicTensor<T>, kConvStages> activation;
    std::array<nn::PoolResult<T>, kConvStages> pooled;
    std::vector<T> logits;
    std::vector<T> probabilities;
};

template <typename T>
ForwardPass<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& input);

/// Shapes of input, every conv and pool output, then {N} for the logits.
std::vector<Shape> activation_shapes(const Network& net);

template <typename T>
struct SampleOutcome {
    T loss{};
    std::size_t predicted = 0;
};

/// Cross-entropy loss for one sample; gradients are added into `acc`.
/// `input_grad`, when non-null, receives d loss / d input.
template <typename T>
SampleOutcome<T> accumulate_sample_gradient(const BasicNetwork<T>& net, const BasicTensor<T>& input, std::size_t label,
                             NetworkGrads<T>& acc, BasicTensor<T>* input_grad = nullptr);

template <typename T>
T sample_loss(const BasicNetwork<T>& net, const BasicTensor<T>& input, std::size_t label);

/// Visits every parameter buffer in checkpoint order (conv kernels, conv
/// biases per stage, then dense weights and biases).
template <typename T, typename F>
void for_each_parameter(BasicNetwork<T>& net, F&& fn) {
    for (auto& c : net.convs) {
        fn(c.kernels.values());
        fn(std::span<T>(c.biases));
    }
    fn(net.dense.weights.values());
    fn(std::span<T>(net.dense.biases));
}

template <typename T, typename F>
void for_each_gradient(NetworkGrads<T>& g, F&& fn) {
    for (auto& c : g.convs) {
        fn(c.kernels.values());
        fn(std::span<T>(c.biases));
    }
    fn(g.dense.weights.values());
    fn(std::span<T>(g.dense.biases));
}

std::size_t parameter_count(const Network& net);

struct TrainConfig {
    std::size_t batch = 100;
    int epochs = 30;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 1;
    bool shuffle = true;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double accuracy = 0.0;  // raw training accuracy of the pre-update predictions
};

struct TrainResult {
    std::vector<EpochStats> history;
};

/// Samples per gradient chunk. Batches are cut into fixed chunks that workers
/// process independently; chunk sums are reduced in chunk order.
inline constexpr std::size_t kGradientChunk = 10;

/// Mini-batch momentum SGD over the dataset, mean loss per batch.
/// Throws on an empty dataset or a label/channel mismatch.
TrainResult train(Network& net, const PatchDataset& dataset, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

struct Prediction {
    int label = 0;
    std::vector<float> probabilities;
};

/// Argmax of the softmax output; ties go to the lowest class id.
Prediction predict_patch(const Network& net, const Tensor& patch);

/// Index of the largest value, lowest index on ties.
template <typename T>
std::size_t argmax_lowest(std::span<const T> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

struct VoteHistogram {
    std::vector<std::size_t> counts;
    std::size_t total = 0;

    explicit VoteHistogram(std::size_t n_classes = 0) : counts(n_classes, 0) {}
    void add(int label);
    void merge(const VoteHistogram& other);

    friend bool operator==(const VoteHistogram&, const VoteHistogram&) = default;
};

struct FrameVote {
    std::optional<int> label;  // empty when no patch voted
    VoteHistogram histogram;
};

FrameVote vote_frame(std::span<const int> predictions, std::size_t n_classes);

/// Sums the histograms of consecutive frames and takes the argmax (lowest id on
/// ties). Returns nullopt when no votes were cast at all.
std::optional<int> temporal_fuse(std::span<const VoteHistogram> histograms);

/// Throws unless `channels` equals the network's channel order exactly.
void check_channel_order(const Network& net, std::span<const ChannelId> channels);

/// A trained network together with the preprocessing it was trained on.
struct Checkpoint {
    Network network;
    DatasetManifest manifest;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "MMRC", version, model config, channel order, training manifest text, then
/// little-endian f32 weight blobs in for_each_parameter order.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmreg
