#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"

namespace mqtc {

inline constexpr double kUpdateSlack = 1e-12;

// Optimal decoding of a received innovation grid: the cellwise projection of
// z onto the interval that keeps the updated estimate inside [0, 1],
// V = min(max(-estimate, z), 1 - estimate).
inline ClippedUpdate clip_decode(const InnovationMap& z_grid, const OccupancyGrid& estimate_prev) {
    if (z_grid.depth() != estimate_prev.depth()) {
        throw DimensionError("clip_decode: innovation depth " + std::to_string(z_grid.depth()) +
                             " != estimate depth " + std::to_string(estimate_prev.depth()));
    }
    const auto z = z_grid.values();
    const auto est = estimate_prev.values();
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::min(std::max(-est[i], z[i]), 1.0 - est[i]);
    }
    return ClippedUpdate(z_grid.depth(), std::move(out));
}

// New estimate = previous estimate + clipped update. The sum must already be
// a valid occupancy value per cell; anything beyond floating slack means the
// update did not come from clip_decode against this estimate.
inline OccupancyGrid apply_update(const OccupancyGrid& estimate_prev, const ClippedUpdate& v) {
    if (estimate_prev.depth() != v.depth()) {
        throw DimensionError("apply_update: estimate depth " +
                             std::to_string(estimate_prev.depth()) + " != update depth " +
                             std::to_string(v.depth()));
    }
    const auto est = estimate_prev.values();
    const auto upd = v.values();
    std::vector<double> out(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double next = est[i] + upd[i];
        if (next < -kUpdateSlack || next > 1.0 + kUpdateSlack) {
            throw ContractError("apply_update: cell " + std::to_string(i) + " leaves [0, 1] (" +
                                std::to_string(next) + "); the update was not clipped against "
                                "this estimate");
        }
        out[i] = std::clamp(next, 0.0, 1.0);
    }
    return OccupancyGrid(estimate_prev.depth(), std::move(out));
}

}  // namespace mqtc
