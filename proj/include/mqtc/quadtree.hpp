#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"

namespace mqtc {

// Breadth-first index into the full quadtree; the root is 0 and the children
// of node t are 4t+1 .. 4t+4. Nodes of level d occupy the contiguous index
// range [(4^d - 1)/3, (4^(d+1) - 1)/3).
using NodeId = std::size_t;

inline constexpr int kBranchingFactor = 4;  // theta

inline std::size_t pow4(std::size_t k) { return std::size_t{1} << (2 * k); }

// First breadth-first index at the given level.
inline std::size_t level_offset(std::size_t level) { return (pow4(level) - 1) / 3; }

inline std::size_t total_node_count(std::size_t depth) { return (pow4(depth + 1) - 1) / 3; }

inline std::size_t interior_node_count(std::size_t depth) { return (pow4(depth) - 1) / 3; }

inline NodeId child_node(NodeId t, int child) {
    return 4 * t + 1 + static_cast<NodeId>(child);
}

inline NodeId parent_node(NodeId t) { return (t - 1) / 4; }

inline std::size_t node_level(NodeId t) {
    std::size_t level = 0;
    while (t >= level_offset(level + 1)) ++level;
    return level;
}

// Axis-aligned square block of grid cells, 1-based upper-left corner.
struct CellBlock {
    std::size_t row_min = 1;
    std::size_t col_min = 1;
    std::size_t side = 1;

    auto operator<=>(const CellBlock&) const = default;
};

// Block of cells covered by a node of the depth-`depth` tree. The child order
// is fixed as (top-left, top-right, bottom-left, bottom-right): child c moves
// down by (c >> 1) half-blocks and right by (c & 1) half-blocks.
inline CellBlock cell_coords(NodeId leaf, std::size_t depth) {
    if (leaf >= total_node_count(depth)) {
        throw IndexError("cell_coords: node " + std::to_string(leaf) + " outside the depth-" +
                         std::to_string(depth) + " tree");
    }
    const std::size_t level = node_level(leaf);
    const std::size_t offset = leaf - level_offset(level);
    CellBlock block{1, 1, detail::side_length(depth)};
    for (std::size_t d = level; d > 0; --d) {
        block.side >>= 1;
        const std::size_t digit = (offset >> (2 * (d - 1))) & 3u;
        block.row_min += (digit >> 1) * block.side;
        block.col_min += (digit & 1) * block.side;
    }
    return block;
}

// Pruned quadtree given by one expansion bit per interior node of the full
// tree (breadth-first order). Bit 1 means the node is expanded into its four
// children, 0 means it is a leaf of the pruned tree. Immutable once built.
class TreeTopology {
public:
    TreeTopology(std::size_t depth, std::vector<std::uint8_t> expanded)
        : depth_(depth), expanded_(std::move(expanded)) {
        detail::check_depth(depth_);
        if (expanded_.size() != interior_node_count(depth_)) {
            throw DimensionError("topology: expected " +
                                 std::to_string(interior_node_count(depth_)) +
                                 " interior bits for depth " + std::to_string(depth_) + ", got " +
                                 std::to_string(expanded_.size()));
        }
        for (const std::uint8_t b : expanded_) {
            if (b > 1) throw DomainError("topology: expansion bits must be 0 or 1");
        }
    }

    std::size_t depth() const { return depth_; }
    std::size_t interior_count() const { return expanded_.size(); }

    bool expanded(NodeId t) const { return t < expanded_.size() && expanded_[t] != 0; }

    std::span<const std::uint8_t> bits() const { return expanded_; }

    std::size_t expansion_count() const {
        return static_cast<std::size_t>(
            std::accumulate(expanded_.begin(), expanded_.end(), std::size_t{0}));
    }

    bool operator==(const TreeTopology&) const = default;

private:
    std::size_t depth_;
    std::vector<std::uint8_t> expanded_;
};

// Fully aggregated tree: the root is the only leaf.
inline TreeTopology root_tree(std::size_t depth) {
    return TreeTopology(depth, std::vector<std::uint8_t>(interior_node_count(depth), 0));
}

// Finest-resolution tree: every interior node expanded, one leaf per cell.
inline TreeTopology full_tree(std::size_t depth) {
    return TreeTopology(depth, std::vector<std::uint8_t>(interior_node_count(depth), 1));
}

// True iff every expanded node's parent is expanded as well.
inline bool is_valid(const TreeTopology& topology) {
    const auto bits = topology.bits();
    for (NodeId t = 1; t < bits.size(); ++t) {
        if (bits[t] != 0 && bits[parent_node(t)] == 0) return false;
    }
    return true;
}

// For quadtrees, leaves = 3 * (expanded interior nodes) + 1.
inline std::size_t leaf_count(const TreeTopology& topology) {
    if (!is_valid(topology)) {
        throw ValidityError("leaf_count: topology violates the parent-precedence rule");
    }
    return (kBranchingFactor - 1) * topology.expansion_count() + 1;
}

// One leaf of a pruned tree together with the square block of cells it covers.
struct Region {
    NodeId leaf = 0;
    CellBlock block;

    std::size_t cell_count() const { return block.side * block.side; }

    // All covered cells, 1-based, row-major within the block.
    std::vector<GridCell> cells() const {
        std::vector<GridCell> out;
        out.reserve(cell_count());
        for (std::size_t r = 0; r < block.side; ++r) {
            for (std::size_t c = 0; c < block.side; ++c) {
                out.push_back(GridCell{block.row_min + r, block.col_min + c});
            }
        }
        return out;
    }
};

// Leaf regions in depth-first preorder with the fixed child order. The blocks
// partition the grid: pairwise disjoint with union equal to all cells.
inline std::vector<Region> leaves(const TreeTopology& topology) {
    if (!is_valid(topology)) {
        throw ValidityError("leaves: topology violates the parent-precedence rule");
    }
    std::vector<Region> out;
    out.reserve((kBranchingFactor - 1) * topology.expansion_count() + 1);
    const std::size_t depth = topology.depth();
    auto walk = [&](auto&& self, NodeId t, std::size_t level, std::size_t row, std::size_t col,
                    std::size_t side) -> void {
        if (level < depth && topology.expanded(t)) {
            const std::size_t half = side / 2;
            for (int c = 0; c < kBranchingFactor; ++c) {
                const std::size_t cs = static_cast<std::size_t>(c);
                self(self, child_node(t, c), level + 1, row + (cs >> 1) * half,
                     col + (cs & 1) * half, half);
            }
        } else {
            out.push_back(Region{t, CellBlock{row, col, side}});
        }
    };
    walk(walk, 0, 0, 1, 1, detail::side_length(depth));
    return out;
}

// Visits every valid pruned topology of the given depth exactly once, in a
// deterministic order. The space grows doubly exponentially with depth
// (2, 17, 83522 topologies for depths 1..3), hence the guard.
template <class Fn>
void for_each_valid_topology(std::size_t depth, Fn&& fn) {
    if (depth > 3) {
        throw CapacityError("topology enumeration is limited to depth 3 (" +
                            std::to_string(depth) + " requested)");
    }
    std::vector<std::uint8_t> bits(interior_node_count(depth), 0);
    auto rec = [&](auto&& self, std::vector<NodeId> pending) -> void {
        if (pending.empty()) {
            fn(TreeTopology(depth, bits));
            return;
        }
        const NodeId t = pending.back();
        pending.pop_back();
        bits[t] = 0;
        self(self, pending);
        bits[t] = 1;
        std::vector<NodeId> with_children = pending;
        for (int c = kBranchingFactor - 1; c >= 0; --c) {
            if (child_node(t, c) < bits.size()) with_children.push_back(child_node(t, c));
        }
        self(self, std::move(with_children));
        bits[t] = 0;
    };
    std::vector<NodeId> pending;
    if (!bits.empty()) pending.push_back(NodeId{0});
    rec(rec, std::move(pending));
}

}  // namespace mqtc
