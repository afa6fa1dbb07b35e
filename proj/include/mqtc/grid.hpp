#pragma once

#include <cmath>
#include <compare>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mqtc/errors.hpp"

namespace mqtc {

namespace detail {

// Grids are square with side 2^depth; depths beyond this would not fit in memory anyway.
inline constexpr std::size_t kMaxDepth = 15;

inline std::size_t side_length(std::size_t depth) { return std::size_t{1} << depth; }

inline std::size_t cell_count(std::size_t depth) { return std::size_t{1} << (2 * depth); }

inline void check_depth(std::size_t depth) {
    if (depth > kMaxDepth) {
        throw DomainError("depth " + std::to_string(depth) + " exceeds the supported maximum of " +
                          std::to_string(kMaxDepth));
    }
}

}  // namespace detail

// 1-based grid coordinate, row before column, matching the row-major cell layout.
struct GridCell {
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const GridCell&) const = default;
};

struct OccupancyTraits {
    static constexpr double kMinValue = 0.0;
    static constexpr double kMaxValue = 1.0;
    static constexpr const char* kName = "occupancy grid";
};

struct InnovationTraits {
    static constexpr double kMinValue = -1.0;
    static constexpr double kMaxValue = 1.0;
    static constexpr const char* kName = "innovation map";
};

struct ClippedUpdateTraits {
    static constexpr double kMinValue = -1.0;
    static constexpr double kMaxValue = 1.0;
    static constexpr const char* kName = "clipped update";
};

// Square 2^depth x 2^depth scalar field. Row-major storage: the cell with
// the 1-based coordinate (i, j) lives at index (i-1)*side + (j-1). Values are
// validated against the trait bounds on construction and never mutated after,
// so instances are safe to share across threads.
template <class Traits>
class ScalarGrid {
public:
    ScalarGrid(std::size_t depth, std::vector<double> values)
        : depth_(depth), values_(std::move(values)) {
        detail::check_depth(depth_);
        if (values_.size() != detail::cell_count(depth_)) {
            throw DimensionError(std::string(Traits::kName) + ": expected " +
                                 std::to_string(detail::cell_count(depth_)) + " cells for depth " +
                                 std::to_string(depth_) + ", got " + std::to_string(values_.size()));
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const double v = values_[i];
            if (!(v >= Traits::kMinValue && v <= Traits::kMaxValue)) {
                throw DomainError(std::string(Traits::kName) + ": value " + std::to_string(v) +
                                  " at cell " + std::to_string(i) + " outside [" +
                                  std::to_string(Traits::kMinValue) + ", " +
                                  std::to_string(Traits::kMaxValue) + "]");
            }
        }
    }

    std::size_t depth() const { return depth_; }
    std::size_t side() const { return detail::side_length(depth_); }
    std::size_t cell_count() const { return values_.size(); }

    // 0-based row/column access.
    double operator()(std::size_t row, std::size_t col) const {
        return values_[row * side() + col];
    }

    std::span<const double> values() const { return values_; }

    bool operator==(const ScalarGrid&) const = default;

private:
    std::size_t depth_;
    std::vector<double> values_;
};

using OccupancyGrid = ScalarGrid<OccupancyTraits>;
using InnovationMap = ScalarGrid<InnovationTraits>;
using ClippedUpdate = ScalarGrid<ClippedUpdateTraits>;

template <class G>
concept GridLike = requires(const G& g) {
    { g.depth() } -> std::convertible_to<std::size_t>;
    { g.values() } -> std::convertible_to<std::span<const double>>;
};

// Grid of the given depth with every cell equal to `value`.
inline OccupancyGrid uniform_grid(std::size_t depth, double value) {
    detail::check_depth(depth);
    return OccupancyGrid(depth, std::vector<double>(detail::cell_count(depth), value));
}

// Cellwise difference between the observed map and the previous estimate.
inline InnovationMap innovation(const OccupancyGrid& current, const OccupancyGrid& estimate_prev) {
    if (current.depth() != estimate_prev.depth()) {
        throw DimensionError("innovation: depth mismatch (" + std::to_string(current.depth()) +
                             " vs " + std::to_string(estimate_prev.depth()) + ")");
    }
    const auto a = current.values();
    const auto b = estimate_prev.values();
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a[i] - b[i];
    return InnovationMap(current.depth(), std::move(diff));
}

template <GridLike A, GridLike B>
double frobenius_distance(const A& a, const B& b) {
    if (a.depth() != b.depth()) {
        throw DimensionError("frobenius_distance: depth mismatch (" + std::to_string(a.depth()) +
                             " vs " + std::to_string(b.depth()) + ")");
    }
    const std::span<const double> av = a.values();
    const std::span<const double> bv = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace mqtc
