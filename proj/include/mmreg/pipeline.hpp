#pragma once

#include <vector>

#include "mmreg/flow.hpp"
#include "mmreg/frame.hpp"

namespace mmreg {

/// Adds Gr (from RGB, when missing) and U, V planes to a consecutive sequence.
/// Frame t gets the flow from frame t-1 to t; frame 0 gets zero flow (0.5 planes).
std::vector<Frame> add_flow_channels(std::vector<Frame> frames, const FlowOptions& options = {},
                                     double clamp = kDefaultFlowClamp);

}  // namespace mmreg
