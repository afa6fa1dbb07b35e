#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include <mqtc/pipeline.hpp>
#include <mqtc/sim.hpp>

#include "helpers.hpp"

using namespace mqtc;
using Catch::Approx;

TEST_CASE("a step with no innovation changes nothing") {
    std::mt19937 rng(810);
    const OccupancyGrid x = test_helpers::random_occupancy(3, rng);
    const SessionState state{x, 4};
    const StepOutcome outcome = step(state, x, 10);
    CHECK(outcome.state.estimate == x);
    CHECK(outcome.state.step_index == 5);
    CHECK(outcome.record.step == 5);
    CHECK(outcome.record.estimate_error == 0.0);
    for (const double v : outcome.encoded.values()) CHECK(v == 0.0);
}

TEST_CASE("a full budget reconstructs the observed map") {
    std::mt19937 rng(811);
    const OccupancyGrid x = test_helpers::quantized_random_occupancy(3, rng);
    const SessionState state = initial_session(3, 0.5);
    const StepOutcome outcome = step(state, x, detail::cell_count(3));
    CHECK(outcome.state.estimate == x);
    CHECK(outcome.record.estimate_error == 0.0);
}

TEST_CASE("a budget of one forces the root region") {
    std::mt19937 rng(812);
    const OccupancyGrid x = test_helpers::random_occupancy(2, rng);
    const SessionState state = initial_session(2, 0.5);
    const StepOutcome outcome = step(state, x, 1);
    CHECK(outcome.record.leaves_used == 1);
    REQUIRE(outcome.encoded.values().size() == 1);
    const InnovationMap xi = innovation(x, state.estimate);
    double sum = 0.0;
    for (const double v : xi.values()) sum += v;
    CHECK(outcome.encoded.values()[0] == Approx(sum / 16.0).margin(1e-12));
}

TEST_CASE("step validates depths and budgets") {
    const SessionState state = initial_session(2, 0.5);
    CHECK_THROWS_AS(step(state, uniform_grid(3, 0.5), 4), DimensionError);
    CHECK_THROWS_AS(step(state, uniform_grid(2, 0.5), 0), BudgetError);
}

TEST_CASE("payload bits match a fresh serialization") {
    std::mt19937 rng(813);
    const OccupancyGrid x = test_helpers::random_occupancy(3, rng);
    for (const bool quantize : {false, true}) {
        StepOptions options;
        options.quantize_binary32 = quantize;
        const StepOutcome outcome = step(initial_session(3, 0.5), x, 22, options);
        CHECK(outcome.record.payload_bits ==
              payload_bit_count(serialize_payload(outcome.encoded)));
    }
}

TEST_CASE("a static run converges after a lossless first step") {
    std::mt19937 rng(814);
    const OccupancyGrid x = test_helpers::quantized_random_occupancy(3, rng);
    const auto schedule = BandwidthSchedule::from_leaves({64, 10, 5});
    const std::vector<OccupancyGrid> maps(3, x);
    const auto records = run(maps, schedule, 0.5);
    REQUIRE(records.size() == 3);
    CHECK(records[0].estimate_error == 0.0);
    CHECK(records[1].estimate_error == 0.0);
    CHECK(records[2].estimate_error == 0.0);
    CHECK(records[1].leaves_used == 1);
}

TEST_CASE("an empty run produces no records") {
    const auto schedule = BandwidthSchedule::from_leaves({});
    CHECK(run(std::vector<OccupancyGrid>{}, schedule, 0.5).empty());
}

TEST_CASE("run rejects mismatched schedule and map lengths") {
    const auto schedule = BandwidthSchedule::from_leaves({4, 4});
    const std::vector<OccupancyGrid> maps(1, uniform_grid(1, 0.5));
    CHECK_THROWS_AS(run(maps, schedule, 0.5), ConfigError);
}

TEST_CASE("static runs are monotone and satisfy the triangle bound") {
    std::mt19937 rng(815);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t smoothness = rng() % 3;
        const OccupancyGrid x = random_map(4, rng(), smoothness);
        std::vector<std::size_t> budgets;
        for (int k = 0; k < 8; ++k) budgets.push_back(1 + rng() % 40);
        const auto schedule = BandwidthSchedule::from_leaves(budgets);
        const auto records = run([&x](std::size_t) { return x; }, schedule, 0.5);
        double prev = frobenius_distance(x, uniform_grid(4, 0.5));
        for (const StepRecord& r : records) {
            CHECK(r.estimate_error <= prev + 1e-12);
            CHECK(r.estimate_error <=
                  r.innovation_distortion + r.decode_distortion + 1e-9);
            CHECK(r.leaves_used <= r.budget_leaves);
            prev = r.estimate_error;
        }
    }
}

TEST_CASE("identical inputs give identical records") {
    std::mt19937 rng(816);
    const OccupancyGrid base = random_map(4, 99, 1);
    const auto path = shortest_path(base, {1, 1}, {16, 16});
    const AmoebaScenario scenario(base, path, 2, 1.0);
    const auto frames = dynamic_sequence(scenario, 10);
    const auto schedule =
        BandwidthSchedule::from_leaves(std::vector<std::size_t>(10, 13));
    const auto first = run(frames, schedule, 0.5);
    const auto second = run(frames, schedule, 0.5);
    CHECK(first == second);
}

TEST_CASE("fractional schedules floor but never drop below one leaf") {
    const auto schedule =
        BandwidthSchedule::from_fractions(std::vector<double>{0.01, 0.0001, 0.999}, 5);
    REQUIRE(schedule.size() == 3);
    CHECK(schedule[0] == 10);    // floor(0.01 * 1024)
    CHECK(schedule[1] == 1);     // clamped up
    CHECK(schedule[2] == 1022);  // floor(0.999 * 1024)
    CHECK_THROWS_AS(BandwidthSchedule::from_leaves({4, 0}), BudgetError);
    CHECK_THROWS_AS(
        BandwidthSchedule::from_fractions(std::vector<double>{-0.5}, 3), ConfigError);
}

TEST_CASE("quantized steps keep the replica consistent with the wire") {
    std::mt19937 rng(817);
    const OccupancyGrid x = test_helpers::random_occupancy(3, rng);
    StepOptions options;
    options.quantize_binary32 = true;
    const StepOutcome outcome = step(initial_session(3, 0.5), x, 16, options);
    // the encoded values the step decoded from equal a wire round trip
    const EncodedInnovation wire = deserialize_payload(serialize_payload(outcome.encoded));
    CHECK(wire.values() == outcome.encoded.values());
}

TEST_CASE("nominal bits are reported when bits-per-cell is set") {
    std::mt19937 rng(818);
    const OccupancyGrid x = test_helpers::random_occupancy(2, rng);
    StepOptions options;
    options.bits_per_cell = 8;
    const StepOutcome outcome = step(initial_session(2, 0.5), x, 7, options);
    REQUIRE(outcome.record.nominal_bits.has_value());
    CHECK(*outcome.record.nominal_bits == 8 * outcome.record.leaves_used);
}
