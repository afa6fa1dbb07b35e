#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"
#include "mqtc/quadtree.hpp"

namespace mqtc {

// One value per leaf of a topology, in the depth-first preorder leaf order.
using ReproductionPoints = std::vector<double>;

// Change in squared encoding distortion caused by expanding each interior
// node, indexed like TreeTopology bits. Entries are never positive when the
// reproduction points are region means.
using DeltaVector = std::vector<double>;

// Gains smaller in magnitude than this are treated as exactly zero by the
// solvers, so pure ties never expand nodes.
inline constexpr double kZeroGainTolerance = 1e-12;

namespace detail {

// Z-order index of a 0-based cell within the finest level: row bits occupy
// the odd bit positions so that the digit per level is 2*row_bit + col_bit,
// matching the (top-left, top-right, bottom-left, bottom-right) child order.
inline std::size_t morton_index(std::size_t row, std::size_t col, std::size_t depth) {
    std::size_t out = 0;
    for (std::size_t b = 0; b < depth; ++b) {
        out |= ((col >> b) & 1u) << (2 * b);
        out |= ((row >> b) & 1u) << (2 * b + 1);
    }
    return out;
}

// Cell-value sums for every node of the full quadtree, children before
// parents. sums[t] / 4^(depth - level(t)) is node t's reproduction point.
inline std::vector<double> node_sums(const InnovationMap& xi) {
    const std::size_t depth = xi.depth();
    const std::size_t finest_first = level_offset(depth);
    std::vector<double> sums(total_node_count(depth), 0.0);
    const std::size_t side = xi.side();
    const std::span<const double> vals = xi.values();
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            sums[finest_first + morton_index(r, c, depth)] = vals[r * side + c];
        }
    }
    for (NodeId t = finest_first; t-- > 0;) {
        sums[t] = sums[child_node(t, 0)] + sums[child_node(t, 1)] + sums[child_node(t, 2)] +
                  sums[child_node(t, 3)];
    }
    return sums;
}

}  // namespace detail

// Optimal per-region constants for the given topology: the arithmetic mean of
// xi over each leaf's cells, in leaf order. Means minimize the Frobenius
// distortion over all per-region constants.
inline ReproductionPoints reproduction_points(const InnovationMap& xi,
                                              const TreeTopology& topology) {
    if (xi.depth() != topology.depth()) {
        throw DimensionError("reproduction_points: map depth " + std::to_string(xi.depth()) +
                             " != topology depth " + std::to_string(topology.depth()));
    }
    const std::vector<Region> regions = leaves(topology);
    const std::vector<double> sums = detail::node_sums(xi);
    ReproductionPoints points;
    points.reserve(regions.size());
    for (const Region& region : regions) {
        const double mean = sums[region.leaf] / static_cast<double>(region.cell_count());
        points.push_back(std::clamp(mean, -1.0, 1.0));
    }
    return points;
}

// A pruned topology together with its reproduction points: the transmitted
// quantized innovation, piecewise constant on the topology's regions.
class EncodedInnovation {
public:
    EncodedInnovation(TreeTopology topology, ReproductionPoints values)
        : topology_(std::move(topology)), values_(std::move(values)) {
        const std::size_t expected = leaf_count(topology_);
        if (values_.size() != expected) {
            throw DimensionError("encoded innovation: " + std::to_string(values_.size()) +
                                 " values for " + std::to_string(expected) + " leaves");
        }
        for (const double v : values_) {
            if (!(v >= -1.0 && v <= 1.0)) {
                throw DomainError("encoded innovation: value " + std::to_string(v) +
                                  " outside [-1, 1]");
            }
        }
    }

    const TreeTopology& topology() const { return topology_; }
    const ReproductionPoints& values() const { return values_; }

    // Full-resolution expansion: every cell takes its region's value.
    InnovationMap to_grid() const {
        const std::size_t side = detail::side_length(topology_.depth());
        std::vector<double> cells(side * side, 0.0);
        const std::vector<Region> regions = leaves(topology_);
        for (std::size_t r = 0; r < regions.size(); ++r) {
            const CellBlock& b = regions[r].block;
            for (std::size_t i = 0; i < b.side; ++i) {
                double* row = cells.data() + (b.row_min - 1 + i) * side + (b.col_min - 1);
                std::fill(row, row + b.side, values_[r]);
            }
        }
        return InnovationMap(topology_.depth(), std::move(cells));
    }

    bool operator==(const EncodedInnovation&) const = default;

private:
    TreeTopology topology_;
    ReproductionPoints values_;
};

inline EncodedInnovation encode(const InnovationMap& xi, const TreeTopology& topology) {
    return EncodedInnovation(topology, reproduction_points(xi, topology));
}

// Frobenius distance between xi and its piecewise-constant encoding.
inline double encoder_distortion(const InnovationMap& xi, const TreeTopology& topology) {
    const ReproductionPoints points = reproduction_points(xi, topology);
    const std::vector<Region> regions = leaves(topology);
    const std::size_t side = xi.side();
    const std::span<const double> vals = xi.values();
    double acc = 0.0;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const CellBlock& b = regions[r].block;
        const double g = points[r];
        for (std::size_t i = 0; i < b.side; ++i) {
            const double* row = vals.data() + (b.row_min - 1 + i) * side + (b.col_min - 1);
            for (std::size_t j = 0; j < b.side; ++j) {
                const double d = row[j] - g;
                acc += d * d;
            }
        }
    }
    return std::sqrt(acc);
}

// Incremental change in squared distortion per interior node, computed in one
// bottom-up pass over (cell count, value sum) aggregates. For node t with
// child means s_i and region mean m this is -(h/4) * sum_i (s_i - m)^2, which
// is nonpositive by construction.
inline DeltaVector delta_distortion(const InnovationMap& xi) {
    const std::size_t depth = xi.depth();
    const std::vector<double> sums = detail::node_sums(xi);
    DeltaVector delta(interior_node_count(depth), 0.0);
    for (std::size_t level = 0; level < depth; ++level) {
        const long double child_cells = static_cast<long double>(pow4(depth - level - 1));
        const long double region_cells = 4.0L * child_cells;
        for (NodeId t = level_offset(level); t < level_offset(level + 1); ++t) {
            std::array<long double, 4> s{};
            for (int c = 0; c < kBranchingFactor; ++c) {
                s[static_cast<std::size_t>(c)] =
                    static_cast<long double>(sums[child_node(t, c)]) / child_cells;
            }
            const long double mean = (s[0] + s[1] + s[2] + s[3]) / 4.0L;
            long double spread = 0.0L;
            for (const long double si : s) {
                const long double d = si - mean;
                spread += d * d;
            }
            delta[t] = static_cast<double>(-(region_cells / 4.0L) * spread);
        }
    }
    return delta;
}

// Cross-check path: the same quantity evaluated through the quadratic form
// s(t)^T H(t) s(t) with H diagonal (h - h_i*theta^2)/theta^2 and off-diagonal
// h/theta^2. Agrees with delta_distortion to floating accumulation error.
inline DeltaVector delta_distortion_quadratic(const InnovationMap& xi) {
    const std::size_t depth = xi.depth();
    const std::vector<double> sums = detail::node_sums(xi);
    DeltaVector delta(interior_node_count(depth), 0.0);
    constexpr long double theta = kBranchingFactor;
    for (std::size_t level = 0; level < depth; ++level) {
        const long double child_cells = static_cast<long double>(pow4(depth - level - 1));
        const long double h = 4.0L * child_cells;
        for (NodeId t = level_offset(level); t < level_offset(level + 1); ++t) {
            std::array<long double, 4> s{};
            for (int c = 0; c < kBranchingFactor; ++c) {
                s[static_cast<std::size_t>(c)] =
                    static_cast<long double>(sums[child_node(t, c)]) / child_cells;
            }
            long double acc = 0.0L;
            for (std::size_t i = 0; i < 4; ++i) {
                for (std::size_t j = 0; j < 4; ++j) {
                    const long double h_i = child_cells;
                    const long double entry = (i == j) ? (h - h_i * theta * theta) / (theta * theta)
                                                       : h / (theta * theta);
                    acc += s[i] * entry * s[j];
                }
            }
            delta[t] = static_cast<double>(acc);
        }
    }
    return delta;
}

// Objective coefficients the solvers actually optimize: raw delta entries
// with anything inside the zero tolerance snapped to exactly zero.
inline DeltaVector solver_gains(const DeltaVector& delta) {
    DeltaVector gains(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        gains[i] = (delta[i] < -kZeroGainTolerance) ? delta[i] : 0.0;
    }
    return gains;
}

// z^T delta over the expanded nodes of a topology.
inline double tree_objective(const TreeTopology& topology, const DeltaVector& delta) {
    if (delta.size() != topology.interior_count()) {
        throw DimensionError("tree_objective: delta vector length " +
                             std::to_string(delta.size()) + " != interior count " +
                             std::to_string(topology.interior_count()));
    }
    const auto bits = topology.bits();
    double acc = 0.0;
    for (NodeId t = 0; t < bits.size(); ++t) {
        if (bits[t] != 0) acc += delta[t];
    }
    return acc;
}

enum class SolverBackend {
    kTreeKnapsack,     // exact bottom-up dynamic program (default)
    kBranchAndBound,   // exact 0/1 search, exponential worst case
};

namespace detail {

inline std::size_t max_expansions_for_budget(std::size_t leaf_budget) {
    // (theta - 1) * expansions + 1 <= leaf_budget
    return (leaf_budget - 1) / (kBranchingFactor - 1);
}

// True per node iff its interior subtree contains a strictly negative gain;
// only such nodes can ever be worth expanding.
inline std::vector<std::uint8_t> useful_nodes(const DeltaVector& gains) {
    std::vector<std::uint8_t> useful(gains.size(), 0);
    for (NodeId t = gains.size(); t-- > 0;) {
        bool u = gains[t] < 0.0;
        for (int c = 0; c < kBranchingFactor; ++c) {
            const NodeId ch = child_node(t, c);
            if (ch < gains.size() && useful[ch] != 0) u = true;
        }
        useful[t] = u ? 1 : 0;
    }
    return useful;
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// min-plus convolution of two "cost by count" tables, capped at `cap` counts.
inline std::vector<double> knapsack_merge(const std::vector<double>& a,
                                          const std::vector<double>& b, std::size_t cap) {
    const std::size_t out_size = std::min(cap, (a.size() - 1) + (b.size() - 1)) + 1;
    std::vector<double> out(out_size, kInf);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == kInf) continue;
        for (std::size_t j = 0; j < b.size() && i + j < out_size; ++j) {
            if (b[j] == kInf) continue;
            const double v = a[i] + b[j];
            if (v < out[i + j]) out[i + j] = v;
        }
    }
    return out;
}

// Exact tree-knapsack dynamic program. table[t][j] is the minimum summed gain
// of a parent-closed selection of exactly j interior nodes inside t's subtree
// (j >= 1 implies t itself is selected). Because every gain is <= 0 and the
// precedence constraint makes selections rooted sub-forests, this solves the
// budgeted expansion problem exactly.
class TreeKnapsack {
public:
    TreeKnapsack(std::size_t depth, const DeltaVector& gains, std::size_t max_expansions)
        : depth_(depth),
          gains_(gains),
          max_expansions_(max_expansions),
          useful_(useful_nodes(gains)),
          table_(gains.size()) {}

    TreeTopology solve() {
        std::vector<std::uint8_t> bits(gains_.size(), 0);
        if (gains_.empty() || max_expansions_ == 0 || useful_[0] == 0) {
            return TreeTopology(depth_, std::move(bits));
        }
        fill_table(0, 0);
        const std::vector<double>& root = table_[0];
        std::size_t best_j = 0;
        double best_cost = 0.0;
        for (std::size_t j = 1; j < root.size(); ++j) {
            if (root[j] < best_cost) {
                best_cost = root[j];
                best_j = j;
            }
        }
        bits_ = std::move(bits);
        assign(0, 0, best_j);
        return TreeTopology(depth_, std::move(bits_));
    }

private:
    std::size_t node_cap(std::size_t level) const {
        return std::min(max_expansions_, interior_node_count(depth_ - level));
    }

    void fill_table(NodeId t, std::size_t level) {
        if (useful_[t] == 0) {
            table_[t] = {0.0};
            return;
        }
        const std::size_t cap = node_cap(level);
        std::vector<double> acc{0.0};
        if (level + 1 < depth_) {
            for (int c = 0; c < kBranchingFactor; ++c) {
                const NodeId ch = child_node(t, c);
                fill_table(ch, level + 1);
                acc = knapsack_merge(acc, table_[ch], cap - 1);
            }
        }
        std::vector<double> f(cap + 1, kInf);
        f[0] = 0.0;
        for (std::size_t j = 1; j <= cap; ++j) {
            if (j - 1 < acc.size() && acc[j - 1] != kInf) f[j] = gains_[t] + acc[j - 1];
        }
        table_[t] = std::move(f);
    }

    // Re-derives a deterministic optimal split by replaying the child merges;
    // later children receive the smallest share compatible with the optimum.
    void assign(NodeId t, std::size_t level, std::size_t j) {
        if (j == 0) return;
        bits_[t] = 1;
        std::size_t rem = j - 1;
        if (rem == 0 || level + 1 >= depth_) return;
        const std::size_t cap = node_cap(level);
        std::array<std::vector<double>, 5> acc;
        acc[0] = {0.0};
        for (int c = 0; c < kBranchingFactor; ++c) {
            acc[static_cast<std::size_t>(c) + 1] =
                knapsack_merge(acc[static_cast<std::size_t>(c)], table_[child_node(t, c)], cap - 1);
        }
        for (int c = kBranchingFactor - 1; c >= 0; --c) {
            const std::vector<double>& prev = acc[static_cast<std::size_t>(c)];
            const std::vector<double>& cur = acc[static_cast<std::size_t>(c) + 1];
            const std::vector<double>& child_table = table_[child_node(t, c)];
            std::size_t chosen = 0;
            for (std::size_t b = 0; b <= rem && b < child_table.size(); ++b) {
                if (rem - b >= prev.size()) continue;
                if (prev[rem - b] == kInf || child_table[b] == kInf) continue;
                if (prev[rem - b] + child_table[b] == cur[rem]) {
                    chosen = b;
                    break;
                }
            }
            assign(child_node(t, c), level + 1, chosen);
            rem -= chosen;
        }
    }

    std::size_t depth_;
    const DeltaVector& gains_;
    std::size_t max_expansions_;
    std::vector<std::uint8_t> useful_;
    std::vector<std::vector<double>> table_;
    std::vector<std::uint8_t> bits_;
};

// Exact depth-first 0/1 search over the expansion vector in breadth-first
// node order (parents are decided before their children). The bound adds the
// most negative undecided gains that still fit in the budget.
class BranchAndBound {
public:
    BranchAndBound(std::size_t depth, const DeltaVector& gains, std::size_t max_expansions)
        : depth_(depth),
          gains_(gains),
          max_expansions_(max_expansions),
          useful_(useful_nodes(gains)),
          bits_(gains.size(), 0),
          best_bits_(gains.size(), 0) {}

    TreeTopology solve() {
        if (gains_.empty() || max_expansions_ == 0 || useful_[0] == 0) {
            return TreeTopology(depth_, std::move(best_bits_));
        }
        dfs(0, 0.0, 0);
        return TreeTopology(depth_, std::move(best_bits_));
    }

private:
    // Still reachable means no already-decided ancestor was left unexpanded.
    bool reachable(NodeId t, NodeId undecided_from) const {
        for (NodeId a = t; a != 0;) {
            a = parent_node(a);
            if (a < undecided_from && bits_[a] == 0) return false;
        }
        return true;
    }

    // Admissible lower bound on what the undecided tail can still contribute:
    // the `slots` most negative gains among reachable undecided nodes.
    double remaining_bound(NodeId from, std::size_t slots) const {
        std::vector<double> neg;
        for (NodeId t = from; t < gains_.size(); ++t) {
            if (gains_[t] < 0.0 && reachable(t, from)) neg.push_back(gains_[t]);
        }
        if (neg.size() > slots) {
            std::nth_element(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(slots),
                             neg.end());
            neg.resize(slots);
        }
        double acc = 0.0;
        for (const double g : neg) acc += g;
        return acc;
    }

    void dfs(NodeId t, double cost, std::size_t used) {
        if (t == gains_.size()) {
            if (cost < best_cost_ || (cost == best_cost_ && used < best_count_)) {
                best_cost_ = cost;
                best_count_ = used;
                best_bits_ = bits_;
            }
            return;
        }
        if (cost + remaining_bound(t, max_expansions_ - used) >= best_cost_) return;
        const bool allowed = (t == 0) || bits_[parent_node(t)] != 0;
        if (allowed && useful_[t] != 0 && used < max_expansions_) {
            bits_[t] = 1;
            dfs(t + 1, cost + gains_[t], used + 1);
            bits_[t] = 0;
        }
        dfs(t + 1, cost, used);
    }

    std::size_t depth_;
    const DeltaVector& gains_;
    std::size_t max_expansions_;
    std::vector<std::uint8_t> useful_;
    std::vector<std::uint8_t> bits_;
    std::vector<std::uint8_t> best_bits_;
    double best_cost_ = 0.0;
    std::size_t best_count_ = 0;
};

}  // namespace detail

// Valid topology minimizing z^T delta subject to the leaf budget
// 3 * popcount(z) + 1 <= leaf_budget. Among minimizers the result uses as few
// expansions as possible, and zero-gain nodes are expanded only when they
// unlock strictly improving descendants.
inline TreeTopology solve_budgeted_tree(const InnovationMap& xi, std::size_t leaf_budget,
                                        SolverBackend backend = SolverBackend::kTreeKnapsack) {
    if (leaf_budget < 1) throw BudgetError("solve_budgeted_tree: leaf budget must be at least 1");
    const DeltaVector gains = solver_gains(delta_distortion(xi));
    const std::size_t max_expansions = detail::max_expansions_for_budget(leaf_budget);
    if (backend == SolverBackend::kBranchAndBound) {
        return detail::BranchAndBound(xi.depth(), gains, max_expansions).solve();
    }
    return detail::TreeKnapsack(xi.depth(), gains, max_expansions).solve();
}

// Verification oracle: exhaustive enumeration of every valid topology under
// the same objective and budget. Guarded to depth 3.
inline TreeTopology solve_bruteforce(const InnovationMap& xi, std::size_t leaf_budget) {
    if (leaf_budget < 1) throw BudgetError("solve_bruteforce: leaf budget must be at least 1");
    if (xi.depth() > 3) {
        throw CapacityError("solve_bruteforce: enumeration is limited to depth 3 (" +
                            std::to_string(xi.depth()) + " requested)");
    }
    const DeltaVector gains = solver_gains(delta_distortion(xi));
    const std::size_t max_expansions = detail::max_expansions_for_budget(leaf_budget);
    std::optional<TreeTopology> best;
    double best_cost = 0.0;
    std::size_t best_count = 0;
    auto prefers_lower_nodes = [](std::span<const std::uint8_t> a,
                                  std::span<const std::uint8_t> b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] != b[i]) return a[i] > b[i];
        }
        return false;
    };
    for_each_valid_topology(xi.depth(), [&](const TreeTopology& topology) {
        const std::size_t count = topology.expansion_count();
        if (count > max_expansions) return;
        const double cost = tree_objective(topology, gains);
        const bool better =
            !best || cost < best_cost ||
            (cost == best_cost &&
             (count < best_count ||
              (count == best_count && prefers_lower_nodes(topology.bits(), best->bits()))));
        if (better) {
            best = topology;
            best_cost = cost;
            best_count = count;
        }
    });
    return *best;
}

}  // namespace mqtc
