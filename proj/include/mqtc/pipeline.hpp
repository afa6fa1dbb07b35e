#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mqtc/decoder.hpp"
#include "mqtc/encoder.hpp"
#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"
#include "mqtc/payload.hpp"

namespace mqtc {

// Per-step leaf budgets, either given directly or as fractions of the
// finest-resolution cell count (n_k = max(1, floor(p_k * 4^depth))).
class BandwidthSchedule {
public:
    static BandwidthSchedule from_leaves(std::vector<std::size_t> budgets) {
        for (const std::size_t b : budgets) {
            if (b < 1) throw BudgetError("schedule: leaf budgets must be at least 1");
        }
        return BandwidthSchedule(std::move(budgets));
    }

    static BandwidthSchedule from_fractions(std::span<const double> fractions, std::size_t depth) {
        detail::check_depth(depth);
        const double cells = static_cast<double>(detail::cell_count(depth));
        std::vector<std::size_t> budgets;
        budgets.reserve(fractions.size());
        for (const double p : fractions) {
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw ConfigError("schedule: fractions must be finite and nonnegative");
            }
            budgets.push_back(
                std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(p * cells))));
        }
        return BandwidthSchedule(std::move(budgets));
    }

    std::size_t size() const { return budgets_.size(); }
    std::size_t operator[](std::size_t k) const { return budgets_[k]; }
    std::span<const std::size_t> budgets() const { return budgets_; }

private:
    explicit BandwidthSchedule(std::vector<std::size_t> budgets) : budgets_(std::move(budgets)) {}

    std::vector<std::size_t> budgets_;
};

// Metrics of one transmission step.
struct StepRecord {
    std::size_t step = 0;  // 1-based
    std::size_t budget_leaves = 0;
    std::size_t leaves_used = 0;
    double innovation_distortion = 0.0;  // ||xi - Z||_F
    double decode_distortion = 0.0;      // ||Z - V||_F
    double estimate_error = 0.0;         // ||X - X_hat||_F after the step
    std::size_t payload_bits = 0;        // actual serialized size
    std::optional<std::size_t> nominal_bits;  // bits_per_cell * leaves_used, when configured

    bool operator==(const StepRecord&) const = default;
};

// Receiver-side estimate replica plus the number of completed steps. The
// sender tracks the same state, since the next innovation is defined against
// the previous estimate.
struct SessionState {
    OccupancyGrid estimate;
    std::size_t step_index = 0;
};

inline SessionState initial_session(std::size_t depth, double initial_value = 0.5) {
    return SessionState{uniform_grid(depth, initial_value), 0};
}

struct StepOptions {
    SolverBackend solver = SolverBackend::kTreeKnapsack;
    // Decode from binary32-rounded values, i.e. exactly what a receiver of
    // the serialized payload reconstructs. Off by default: the in-memory
    // pipeline works in double precision.
    bool quantize_binary32 = false;
    std::optional<unsigned> bits_per_cell;
};

struct StepOutcome {
    EncodedInnovation encoded;
    StepRecord record;
    SessionState state;
};

// One transmission step: form the innovation against the current estimate,
// pick the budgeted tree, encode, decode with clipping, and update the
// estimate. The triangle bound
//   ||X - X_hat_new|| <= ||xi - Z|| + ||Z - V||
// is checked on every step.
inline StepOutcome step(const SessionState& state, const OccupancyGrid& observed,
                        std::size_t leaf_budget, const StepOptions& options = {}) {
    if (observed.depth() != state.estimate.depth()) {
        throw DimensionError("step: observed depth " + std::to_string(observed.depth()) +
                             " != estimate depth " + std::to_string(state.estimate.depth()));
    }
    const InnovationMap xi = innovation(observed, state.estimate);
    const TreeTopology topology = solve_budgeted_tree(xi, leaf_budget, options.solver);
    EncodedInnovation encoded = encode(xi, topology);
    const PayloadBytes payload = serialize_payload(encoded);
    if (options.quantize_binary32) encoded = quantize_to_binary32(encoded);
    const InnovationMap z_grid = encoded.to_grid();
    const ClippedUpdate v = clip_decode(z_grid, state.estimate);
    OccupancyGrid estimate_next = apply_update(state.estimate, v);

    StepRecord record;
    record.step = state.step_index + 1;
    record.budget_leaves = leaf_budget;
    record.leaves_used = leaf_count(topology);
    record.innovation_distortion = frobenius_distance(xi, z_grid);
    record.decode_distortion = frobenius_distance(z_grid, v);
    record.estimate_error = frobenius_distance(observed, estimate_next);
    record.payload_bits = payload_bit_count(payload);
    if (options.bits_per_cell) {
        record.nominal_bits = static_cast<std::size_t>(*options.bits_per_cell) * record.leaves_used;
    }
    if (record.estimate_error >
        record.innovation_distortion + record.decode_distortion + 1e-9) {
        throw ContractError("step: triangle bound violated at step " + std::to_string(record.step));
    }
    return StepOutcome{std::move(encoded), record,
                       SessionState{std::move(estimate_next), state.step_index + 1}};
}

// Runs one step per schedule entry, pulling maps from the source one at a
// time; nothing is read ahead of the current step.
inline std::vector<StepRecord> run(const std::function<OccupancyGrid(std::size_t)>& map_source,
                                   const BandwidthSchedule& schedule, double initial_value = 0.5,
                                   const StepOptions& options = {}) {
    std::vector<StepRecord> records;
    records.reserve(schedule.size());
    std::optional<SessionState> state;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const OccupancyGrid observed = map_source(k);
        if (!state) state = initial_session(observed.depth(), initial_value);
        StepOutcome outcome = step(*state, observed, schedule[k], options);
        records.push_back(outcome.record);
        state = std::move(outcome.state);
    }
    return records;
}

inline std::vector<StepRecord> run(std::span<const OccupancyGrid> maps,
                                   const BandwidthSchedule& schedule, double initial_value = 0.5,
                                   const StepOptions& options = {}) {
    if (maps.size() != schedule.size()) {
        throw ConfigError("run: schedule has " + std::to_string(schedule.size()) +
                          " entries for " + std::to_string(maps.size()) + " maps");
    }
    return run([&maps](std::size_t k) { return maps[k]; }, schedule, initial_value, options);
}

}  // namespace mqtc
