#include "mmreg/pipeline.hpp"

#include "mmreg/parallel.hpp"

namespace mmreg {

std::vector<Frame> add_flow_channels(std::vector<Frame> frames, const FlowOptions& options, double clamp) {
    for (auto& f : frames) {
        if (!f.has(ChannelId::Gr)) f = rgb_to_gray(f);
    }
    std::vector<std::pair<Plane, Plane>> channels(frames.size());
    parallel_for(frames.size(), [&](std::size_t t) {
        if (t == 0) {
            FlowField zero{frames[0].width(), frames[0].height(),
                           std::vector<float>(frames[0].width() * frames[0].height(), 0.0f),
                           std::vector<float>(frames[0].width() * frames[0].height(), 0.0f)};
            channels[0] = flow_to_channels(zero, clamp);
            return;
        }
        const auto flow =
            estimate_flow(frames[t - 1].plane(ChannelId::Gr), frames[t].plane(ChannelId::Gr), options);
        channels[t] = flow_to_channels(flow, clamp);
    });
    for (std::size_t t = 0; t < frames.size(); ++t) {
        frames[t].set(ChannelId::U, std::move(channels[t].first));
        frames[t].set(ChannelId::V, std::move(channels[t].second));
    }
    return frames;
}

}  // namespace mmreg
