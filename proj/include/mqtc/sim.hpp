#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"

namespace mqtc {

// Traversal weight per entered cell for shortest_path.
inline constexpr double kPathCostEpsilon = 0.5;

// Deterministic random occupancy field. smoothness > 0 applies that many 3x3
// box-blur passes (edge-replicated), producing spatially correlated patches.
inline OccupancyGrid random_map(std::size_t depth, std::uint32_t seed, std::size_t smoothness) {
    detail::check_depth(depth);
    const std::size_t side = detail::side_length(depth);
    std::vector<double> values(side * side);
    std::mt19937 rng(seed);
    for (double& v : values) v = static_cast<double>(rng()) * (1.0 / 4294967296.0);
    if (smoothness > 0) {
        std::vector<double> next(values.size());
        const auto clamp_coord = [&](std::ptrdiff_t x) {
            return static_cast<std::size_t>(
                std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(side) - 1));
        };
        for (std::size_t pass = 0; pass < smoothness; ++pass) {
            for (std::size_t r = 0; r < side; ++r) {
                for (std::size_t c = 0; c < side; ++c) {
                    double acc = 0.0;
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dc = -1; dc <= 1; ++dc) {
                            acc += values[clamp_coord(static_cast<std::ptrdiff_t>(r) + dr) * side +
                                          clamp_coord(static_cast<std::ptrdiff_t>(c) + dc)];
                        }
                    }
                    next[r * side + c] = acc / 9.0;
                }
            }
            values.swap(next);
        }
    }
    return OccupancyGrid(depth, std::move(values));
}

// Minimum-total-weight 8-connected path where entering a cell costs
// kPathCostEpsilon + occupancy(cell). Ties are broken by (distance, row-major
// cell index), so paths are reproducible across platforms.
inline std::vector<GridCell> shortest_path(const OccupancyGrid& grid, GridCell start,
                                           GridCell goal) {
    const std::size_t side = grid.side();
    const auto check_inside = [&](GridCell cell, const char* name) {
        if (cell.row < 1 || cell.col < 1 || cell.row > side || cell.col > side) {
            throw IndexError(std::string("shortest_path: ") + name + " cell (" +
                             std::to_string(cell.row) + ", " + std::to_string(cell.col) +
                             ") outside the " + std::to_string(side) + "x" + std::to_string(side) +
                             " grid");
        }
    };
    check_inside(start, "start");
    check_inside(goal, "goal");
    if (start == goal) throw DomainError("shortest_path: start equals goal");

    const auto to_index = [&](GridCell cell) { return (cell.row - 1) * side + (cell.col - 1); };
    const std::size_t start_index = to_index(start);
    const std::size_t goal_index = to_index(goal);
    const std::span<const double> occ = grid.values();

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(side * side, kInf);
    std::vector<std::size_t> parent(side * side, std::numeric_limits<std::size_t>::max());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[start_index] = 0.0;
    queue.emplace(0.0, start_index);

    static constexpr int kOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                           {0, 1},   {1, -1}, {1, 0},  {1, 1}};
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[u]) continue;
        if (u == goal_index) break;
        const std::ptrdiff_t ur = static_cast<std::ptrdiff_t>(u / side);
        const std::ptrdiff_t uc = static_cast<std::ptrdiff_t>(u % side);
        for (const auto& off : kOffsets) {
            const std::ptrdiff_t vr = ur + off[0];
            const std::ptrdiff_t vc = uc + off[1];
            if (vr < 0 || vc < 0 || vr >= static_cast<std::ptrdiff_t>(side) ||
                vc >= static_cast<std::ptrdiff_t>(side)) {
                continue;
            }
            const std::size_t v = static_cast<std::size_t>(vr) * side + static_cast<std::size_t>(vc);
            const double nd = d + kPathCostEpsilon + occ[v];
            if (nd < dist[v]) {
                dist[v] = nd;
                parent[v] = u;
                queue.emplace(nd, v);
            }
        }
    }

    std::vector<GridCell> path;
    for (std::size_t v = goal_index;; v = parent[v]) {
        path.push_back(GridCell{v / side + 1, v % side + 1});
        if (v == start_index) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

// Moving circular obstacle stamped onto a base map along a path.
class AmoebaScenario {
public:
    AmoebaScenario(OccupancyGrid base, std::vector<GridCell> path, std::size_t radius = 3,
                   double occupancy_value = 1.0)
        : base_(std::move(base)),
          path_(std::move(path)),
          radius_(radius),
          occupancy_value_(occupancy_value) {
        if (!(occupancy_value_ >= 0.0 && occupancy_value_ <= 1.0)) {
            throw DomainError("amoeba scenario: occupancy value " +
                              std::to_string(occupancy_value_) + " outside [0, 1]");
        }
        const std::size_t side = base_.side();
        for (std::size_t k = 0; k < path_.size(); ++k) {
            const GridCell cell = path_[k];
            if (cell.row < 1 || cell.col < 1 || cell.row > side || cell.col > side) {
                throw ConfigError("amoeba scenario: path cell " + std::to_string(k) +
                                  " outside the grid");
            }
            if (k > 0) {
                const auto diff = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
                const std::size_t dr = diff(cell.row, path_[k - 1].row);
                const std::size_t dc = diff(cell.col, path_[k - 1].col);
                if (std::max(dr, dc) != 1) {
                    throw ConfigError("amoeba scenario: path cells " + std::to_string(k - 1) +
                                      " and " + std::to_string(k) + " are not 8-neighbors");
                }
            }
        }
    }

    const OccupancyGrid& base() const { return base_; }
    const std::vector<GridCell>& path() const { return path_; }
    std::size_t radius() const { return radius_; }
    double occupancy_value() const { return occupancy_value_; }

private:
    OccupancyGrid base_;
    std::vector<GridCell> path_;
    std::size_t radius_;
    double occupancy_value_;
};

// Frame k = base map with every cell whose center lies within the Euclidean
// radius of path[k] overridden by the amoeba's occupancy value. Vacated cells
// revert to the base values.
inline std::vector<OccupancyGrid> dynamic_sequence(const AmoebaScenario& scenario,
                                                   std::size_t steps) {
    if (steps > scenario.path().size()) {
        throw ConfigError("dynamic_sequence: " + std::to_string(steps) + " steps for a path of " +
                          std::to_string(scenario.path().size()) + " cells");
    }
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(scenario.radius());
    std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> disk;
    for (std::ptrdiff_t dr = -r; dr <= r; ++dr) {
        for (std::ptrdiff_t dc = -r; dc <= r; ++dc) {
            if (dr * dr + dc * dc <= r * r) disk.emplace_back(dr, dc);
        }
    }
    const std::size_t side = scenario.base().side();
    std::vector<OccupancyGrid> frames;
    frames.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        std::vector<double> values(scenario.base().values().begin(),
                                   scenario.base().values().end());
        const GridCell center = scenario.path()[k];
        for (const auto& [dr, dc] : disk) {
            const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(center.row) + dr;
            const std::ptrdiff_t col = static_cast<std::ptrdiff_t>(center.col) + dc;
            if (row < 1 || col < 1 || row > static_cast<std::ptrdiff_t>(side) ||
                col > static_cast<std::ptrdiff_t>(side)) {
                continue;
            }
            values[static_cast<std::size_t>(row - 1) * side + static_cast<std::size_t>(col - 1)] =
                scenario.occupancy_value();
        }
        frames.emplace_back(scenario.base().depth(), std::move(values));
    }
    return frames;
}

}  // namespace mqtc
