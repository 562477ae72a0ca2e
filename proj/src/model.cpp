#include "mmreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "mmreg/parallel.hpp"
#include "mmreg/random.hpp"

namespace mmreg {

namespace {

constexpr std::string_view kCheckpointMagic = "MMRC";

std::string describe_channels(std::span<const ChannelId> channels) {
    return format_channel_list(channels);
}

}  // namespace

void ModelConfig::validate() const {
    if (patch == 0 || patch % 8 != 0) {
        throw std::invalid_argument("patch size " + std::to_string(patch) +
                                    " must be a positive multiple of 8 (three 2x2 poolings)");
    }
    if (kernel == 0 || kernel % 2 == 0) {
        throw std::invalid_argument("kernel size " + std::to_string(kernel) + " must be odd");
    }
    for (auto f : filters) {
        if (f == 0) throw std::invalid_argument("filter counts must be positive");
    }
    if (n_classes < 2) throw std::invalid_argument("need at least 2 classes");
    if (channels.empty()) throw std::invalid_argument("model needs at least one input channel");
}

void TrainConfig::validate() const {
    if (batch == 0) throw std::invalid_argument("batch size must be at least 1");
    if (epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
}

template <typename T>
NetworkGrads<T> NetworkGrads<T>::zeros_like(const BasicNetwork<T>& net) {
    NetworkGrads g;
    for (std::size_t s = 0; s < kConvStages; ++s) g.convs[s] = nn::ConvGrads<T>::zeros_like(net.convs[s]);
    g.dense.weights = BasicTensor<T>(net.dense.weights.shape());
    g.dense.biases.assign(net.dense.biases.size(), T(0));
    return g;
}

template <typename T>
void NetworkGrads<T>::set_zero() {
    for_each_gradient(*this, [](std::span<T> buf) { std::fill(buf.begin(), buf.end(), T(0)); });
}

template <typename T>
void NetworkGrads<T>::add(const NetworkGrads& other) {
    std::vector<std::span<const T>> src;
    for_each_gradient(const_cast<NetworkGrads&>(other), [&](std::span<T> b) { src.emplace_back(b); });
    std::size_t k = 0;
    for_each_gradient(*this, [&](std::span<T> dst) {
        const auto s = src[k++];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s[i];
    });
}

template <typename T>
void NetworkGrads<T>::scale(T factor) {
    for_each_gradient(*this, [factor](std::span<T> buf) {
        for (auto& v : buf) v *= factor;
    });
}

template <typename T>
BasicNetwork<T> build_model(const ModelConfig& config) {
    config.validate();
    BasicNetwork<T> net;
    net.config = config;
    std::size_t in_c = config.channels.size();
    for (std::size_t s = 0; s < kConvStages; ++s) {
        auto& conv = net.convs[s];
        conv.kernels = nn::init_he<T>({config.filters[s], config.kernel, config.kernel, in_c},
                                      derive_seed(config.seed, s));
        conv.biases.assign(config.filters[s], T(0));
        conv.stride = 1;
        conv.padding = config.padding();
        in_c = config.filters[s];
    }
    net.dense.weights = nn::init_he<T>({config.n_classes, config.dense_inputs()},
                                       derive_seed(config.seed, kConvStages));
    net.dense.biases.assign(config.n_classes, T(0));
    return net;
}

template <typename T>
BasicNetwork<T> convert_network(const Network& net) {
    BasicNetwork<T> out;
    out.config = net.config;
    for (std::size_t s = 0; s < kConvStages; ++s) {
        out.convs[s].kernels = net.convs[s].kernels.template cast<T>();
        out.convs[s].biases.assign(net.convs[s].biases.begin(), net.convs[s].biases.end());
        out.convs[s].stride = net.convs[s].stride;
        out.convs[s].padding = net.convs[s].padding;
    }
    out.dense.weights = net.dense.weights.template cast<T>();
    out.dense.biases.assign(net.dense.biases.begin(), net.dense.biases.end());
    return out;
}

template <typename T>
ForwardPass<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& input) {
    const auto& cfg = net.config;
    const Shape expected{cfg.patch, cfg.patch, cfg.channels.size()};
    if (input.shape() != expected) {
        throw std::invalid_argument("network input " + shape_to_string(input.shape()) +
                                    " does not match expected " + shape_to_string(expected));
    }
    ForwardPass<T> fp;
    fp.input = input;
    const BasicTensor<T>* x = &fp.input;
    for (std::size_t s = 0; s < kConvStages; ++s) {
        fp.pre_activation[s] = nn::conv2d_forward(*x, net.convs[s]);
        fp.activation[s] = nn::relu(fp.pre_activation[s]);
        fp.pooled[s] = nn::maxpool2x2_forward(fp.activation[s]);
        x = &fp.pooled[s].output;
    }
    fp.logits = nn::dense_forward(*x, net.dense);
    fp.probabilities = nn::softmax<T>(fp.logits);
    return fp;
}

std::vector<Shape> activation_shapes(const Network& net) {
    const auto& cfg = net.config;
    Tensor probe({cfg.patch, cfg.patch, cfg.channels.size()});
    const auto fp = forward(net, probe);
    std::vector<Shape> shapes{probe.shape()};
    for (std::size_t s = 0; s < kConvStages; ++s) {
        shapes.push_back(fp.pre_activation[s].shape());
        shapes.push_back(fp.pooled[s].output.shape());
    }
    shapes.push_back({fp.logits.size()});
    return shapes;
}

template <typename T>
SampleOutcome<T> accumulate_sample_gradient(const BasicNetwork<T>& net, const BasicTensor<T>& input,
                                            std::size_t label, NetworkGrads<T>& acc,
                                            BasicTensor<T>* input_grad) {
    auto fp = forward(net, input);
    const auto& top = fp.pooled[kConvStages - 1].output;
    auto head = nn::dense_softmax_xent(top, net.dense, label);

    auto& dw = acc.dense.weights;
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += head.grads.weights[i];
    for (std::size_t i = 0; i < acc.dense.biases.size(); ++i) acc.dense.biases[i] += head.grads.biases[i];

    BasicTensor<T> upstream = std::move(head.input_grad);
    for (std::size_t s = kConvStages; s-- > 0;) {
        auto g_act = nn::maxpool2x2_backward(fp.pooled[s].indices, upstream);
        auto g_pre = nn::relu_backward(fp.pre_activation[s], g_act);
        const BasicTensor<T>& stage_input = s == 0 ? fp.input : fp.pooled[s - 1].output;
        BasicTensor<T> next;
        const bool need_input_grad = s > 0 || input_grad != nullptr;
        nn::conv2d_backward_accumulate(stage_input, net.convs[s], g_pre, acc.convs[s],
                                       need_input_grad ? &next : nullptr);
        upstream = std::move(next);
    }
    if (input_grad != nullptr) *input_grad = std::move(upstream);
    return {head.loss, argmax_lowest<T>(head.probabilities)};
}

template <typename T>
T sample_loss(const BasicNetwork<T>& net, const BasicTensor<T>& input, std::size_t label) {
    const auto fp = forward(net, input);
    if (label >= fp.logits.size()) throw std::invalid_argument("label out of range");
    const T peak = *std::max_element(fp.logits.begin(), fp.logits.end());
    T sum = 0;
    for (auto z : fp.logits) sum += std::exp(z - peak);
    return -(fp.logits[label] - peak - std::log(sum));
}

std::size_t parameter_count(const Network& net) {
    std::size_t n = 0;
    for_each_parameter(const_cast<Network&>(net), [&](std::span<float> b) { n += b.size(); });
    return n;
}

void check_channel_order(const Network& net, std::span<const ChannelId> channels) {
    if (!std::equal(net.config.channels.begin(), net.config.channels.end(), channels.begin(),
                    channels.end())) {
        throw std::invalid_argument("channel order mismatch: network expects " +
                                    describe_channels(net.config.channels) + ", got " +
                                    describe_channels(channels));
    }
}

TrainResult train(Network& net, const PatchDataset& dataset, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    check_channel_order(net, dataset.params().channels);
    if (dataset.patch_size() != net.config.patch) {
        throw std::invalid_argument("dataset patch size " + std::to_string(dataset.patch_size()) +
                                    " does not match model patch size " +
                                    std::to_string(net.config.patch));
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (static_cast<std::size_t>(dataset.label(i)) >= net.config.n_classes) {
            throw std::invalid_argument("dataset label " + std::to_string(dataset.label(i)) +
                                        " exceeds model class count " +
                                        std::to_string(net.config.n_classes));
        }
    }

    const std::size_t n = dataset.size();
    const std::size_t max_chunks = (config.batch + kGradientChunk - 1) / kGradientChunk;
    std::vector<NetworkGrads<float>> chunk_grads(max_chunks, NetworkGrads<float>::zeros_like(net));
    NetworkGrads<float> total = NetworkGrads<float>::zeros_like(net);

    std::vector<std::vector<float>> velocity;
    for_each_parameter(net, [&](std::span<float> b) { velocity.emplace_back(b.size(), 0.0f); });

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, 0x5eed));
    std::vector<double> losses(n, 0.0);
    std::vector<std::uint8_t> correct(n, 0);

    const Shape patch_shape{dataset.patch_size(), dataset.patch_size(), dataset.channel_count()};
    const auto lr = static_cast<float>(config.learning_rate);
    const auto mom = static_cast<float>(config.momentum);

    TrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += config.batch) {
            const std::size_t end = std::min(n, start + config.batch);
            const std::size_t chunks = (end - start + kGradientChunk - 1) / kGradientChunk;
            parallel_for(chunks, [&](std::size_t c) {
                auto& g = chunk_grads[c];
                g.set_zero();
                Tensor patch(patch_shape);
                const std::size_t c0 = start + c * kGradientChunk;
                const std::size_t c1 = std::min(end, c0 + kGradientChunk);
                for (std::size_t k = c0; k < c1; ++k) {
                    const std::size_t idx = order[k];
                    dataset.materialize(idx, patch.values());
                    const auto label = static_cast<std::size_t>(dataset.label(idx));
                    const auto outcome = accumulate_sample_gradient(net, patch, label, g);
                    losses[idx] = outcome.loss;
                    correct[idx] = outcome.predicted == label ? 1 : 0;
                }
            });
            total.set_zero();
            for (std::size_t c = 0; c < chunks; ++c) total.add(chunk_grads[c]);
            total.scale(1.0f / static_cast<float>(end - start));

            std::vector<std::span<float>> grads;
            for_each_gradient(total, [&](std::span<float> b) { grads.push_back(b); });
            std::size_t k = 0;
            for_each_parameter(net, [&](std::span<float> params) {
                nn::sgd_step<float>(params, grads[k], velocity[k], lr, mom);
                ++k;
            });
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
        stats.accuracy = static_cast<double>(std::accumulate(correct.begin(), correct.end(), std::size_t{0})) /
                         static_cast<double>(n);
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

Prediction predict_patch(const Network& net, const Tensor& patch) {
    const auto fp = forward(net, patch);
    Prediction p;
    p.probabilities = fp.probabilities;
    p.label = static_cast<int>(argmax_lowest<float>(p.probabilities));
    return p;
}

void VoteHistogram::add(int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= counts.size()) {
        throw std::invalid_argument("vote for class " + std::to_string(label) + " outside [0," +
                                    std::to_string(counts.size()) + ")");
    }
    ++counts[static_cast<std::size_t>(label)];
    ++total;
}

void VoteHistogram::merge(const VoteHistogram& other) {
    if (other.counts.size() != counts.size()) {
        throw std::invalid_argument("cannot merge histograms over different class counts");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    total += other.total;
}

FrameVote vote_frame(std::span<const int> predictions, std::size_t n_classes) {
    FrameVote vote{std::nullopt, VoteHistogram(n_classes)};
    for (int p : predictions) vote.histogram.add(p);
    if (vote.histogram.total > 0) {
        vote.label = static_cast<int>(argmax_lowest<std::size_t>(vote.histogram.counts));
    }
    return vote;
}

std::optional<int> temporal_fuse(std::span<const VoteHistogram> histograms) {
    if (histograms.empty()) throw std::invalid_argument("temporal_fuse needs at least one frame");
    VoteHistogram sum(histograms.front().counts.size());
    for (const auto& h : histograms) sum.merge(h);
    if (sum.total == 0) return std::nullopt;
    return static_cast<int>(argmax_lowest<std::size_t>(sum.counts));
}

namespace {

void check_checkpoint_consistency(const Checkpoint& ck) {
    const auto& cfg = ck.network.config;
    const auto& m = ck.manifest;
    if (!std::equal(cfg.channels.begin(), cfg.channels.end(), m.params.channels.begin(),
                    m.params.channels.end())) {
        throw std::invalid_argument("checkpoint channel order " + describe_channels(cfg.channels) +
                                    " disagrees with its manifest (" +
                                    describe_channels(m.params.channels) + ")");
    }
    if (m.offsets.size() != cfg.n_classes) {
        throw std::invalid_argument("checkpoint has " + std::to_string(cfg.n_classes) +
                                    " classes but its manifest lists " + std::to_string(m.offsets.size()));
    }
    if (m.params.patch != cfg.patch) {
        throw std::invalid_argument("checkpoint patch size disagrees with its manifest");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
    check_checkpoint_consistency(ck);
    const auto& cfg = ck.network.config;
    detail::ByteWriter w;
    w.magic(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(cfg.patch));
    w.u32(static_cast<std::uint32_t>(cfg.kernel));
    for (auto f : cfg.filters) w.u32(static_cast<std::uint32_t>(f));
    w.u32(static_cast<std::uint32_t>(cfg.n_classes));
    w.u64(cfg.seed);
    w.u32(static_cast<std::uint32_t>(cfg.channels.size()));
    for (auto c : cfg.channels) w.u8(static_cast<std::uint8_t>(c));
    w.string(ck.manifest.to_text());
    for_each_parameter(const_cast<Network&>(ck.network), [&](std::span<float> b) {
        w.u32(static_cast<std::uint32_t>(b.size()));
        w.floats(b);
    });
    return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "checkpoint");
    r.magic(kCheckpointMagic);
    const auto version = r.u32("version");
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }
    ModelConfig cfg;
    cfg.patch = r.u32("patch size");
    cfg.kernel = r.u32("kernel size");
    for (auto& f : cfg.filters) f = r.u32("filter count");
    cfg.n_classes = r.u32("class count");
    cfg.seed = r.u64("seed");
    const auto nch = r.u32("channel count");
    if (nch == 0 || nch > kChannelIdCount) r.fail("bad channel count " + std::to_string(nch));
    cfg.channels.clear();
    for (std::uint32_t i = 0; i < nch; ++i) {
        const auto code = r.u8("channel id");
        auto id = channel_from_code(code);
        if (!id) r.fail("unknown channel id " + std::to_string(code));
        cfg.channels.push_back(*id);
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(std::string("invalid model config: ") + e.what());
    }
    Checkpoint ck;
    const auto manifest_text = r.string("manifest");
    try {
        ck.manifest = DatasetManifest::from_text(manifest_text);
    } catch (const std::invalid_argument& e) {
        r.fail(std::string("invalid embedded manifest: ") + e.what());
    }
    ck.network = build_model<float>(cfg);
    for_each_parameter(ck.network, [&](std::span<float> b) {
        const auto count = r.u32("weight blob size");
        if (count != b.size()) {
            r.fail("weight blob has " + std::to_string(count) + " values, config implies " +
                   std::to_string(b.size()));
        }
        r.floats(b, "weight blob");
    });
    r.expect_end();
    check_checkpoint_consistency(ck);
    return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("checkpoint not found: " + path.string());
    }
    const auto bytes = detail::read_file_bytes(path);
    try {
        return decode_checkpoint(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

#define MMREG_INSTANTIATE_MODEL(T)                                                                  \
    template struct NetworkGrads<T>;                                                                \
    template BasicNetwork<T> build_model<T>(const ModelConfig&);                                    \
    template BasicNetwork<T> convert_network<T>(const Network&);                                    \
    template ForwardPass<T> forward(const BasicNetwork<T>&, const BasicTensor<T>&);                 \
    template SampleOutcome<T> accumulate_sample_gradient(const BasicNetwork<T>&,                    \
                                                         const BasicTensor<T>&, std::size_t,        \
                                                         NetworkGrads<T>&, BasicTensor<T>*);        \
    template T sample_loss(const BasicNetwork<T>&, const BasicTensor<T>&, std::size_t);

MMREG_INSTANTIATE_MODEL(float)
MMREG_INSTANTIATE_MODEL(double)

#undef MMREG_INSTANTIATE_MODEL

}  // namespace mmreg
