#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include <mqtc/grid.hpp>

#include "helpers.hpp"

using namespace mqtc;
using Catch::Approx;

TEST_CASE("innovation of identical maps is zero") {
    const OccupancyGrid half = uniform_grid(1, 0.5);
    const InnovationMap xi = innovation(half, half);
    for (const double v : xi.values()) CHECK(v == 0.0);
    CHECK(xi.depth() == 1);
}

TEST_CASE("innovation against a zero estimate reproduces the map") {
    const OccupancyGrid current(1, {1.0, 0.0, 0.0, 0.0});
    const OccupancyGrid zero = uniform_grid(1, 0.0);
    const InnovationMap xi = innovation(current, zero);
    CHECK(xi.values()[0] == 1.0);
    CHECK(xi.values()[1] == 0.0);
    CHECK(xi.values()[2] == 0.0);
    CHECK(xi.values()[3] == 0.0);
}

TEST_CASE("innovation is the cellwise difference") {
    const OccupancyGrid current(1, {0.9, 0.1, 0.5, 0.5});
    const OccupancyGrid estimate = uniform_grid(1, 0.5);
    const InnovationMap xi = innovation(current, estimate);
    CHECK(xi.values()[0] == Approx(0.4).margin(1e-15));
    CHECK(xi.values()[1] == Approx(-0.4).margin(1e-15));
    CHECK(xi.values()[2] == 0.0);
    CHECK(xi.values()[3] == 0.0);
}

TEST_CASE("innovation rejects mismatched depths") {
    CHECK_THROWS_AS(innovation(uniform_grid(1, 0.5), uniform_grid(2, 0.5)), DimensionError);
}

TEST_CASE("frobenius distance basics") {
    const OccupancyGrid a(1, {1.0, 0.0, 0.0, 0.0});
    const OccupancyGrid zero = uniform_grid(1, 0.0);
    CHECK(frobenius_distance(a, a) == 0.0);
    CHECK(frobenius_distance(a, zero) == 1.0);

    const InnovationMap d(1, {0.4, -0.4, 0.0, 0.0});
    const InnovationMap zeros(1, {0.0, 0.0, 0.0, 0.0});
    CHECK(frobenius_distance(d, zeros) == Approx(0.565685424949238).margin(1e-12));

    CHECK_THROWS_AS(frobenius_distance(a, uniform_grid(2, 0.0)), DimensionError);
}

TEST_CASE("uniform grid construction") {
    const OccupancyGrid half = uniform_grid(1, 0.5);
    CHECK(half.side() == 2);
    for (const double v : half.values()) CHECK(v == 0.5);

    const OccupancyGrid one = uniform_grid(0, 1.0);
    CHECK(one.cell_count() == 1);
    CHECK(one.values()[0] == 1.0);

    const OccupancyGrid zeros = uniform_grid(2, 0.0);
    CHECK(zeros.cell_count() == 16);

    CHECK_THROWS_AS(uniform_grid(1, 1.5), DomainError);
    CHECK_THROWS_AS(uniform_grid(1, -0.1), DomainError);
}

TEST_CASE("grids reject bad sizes and out-of-range values") {
    CHECK_THROWS_AS(OccupancyGrid(1, {0.5, 0.5, 0.5}), DimensionError);
    CHECK_THROWS_AS(OccupancyGrid(1, {0.5, 0.5, 0.5, 1.0001}), DomainError);
    CHECK_THROWS_AS(OccupancyGrid(0, {std::numeric_limits<double>::quiet_NaN()}), DomainError);
    CHECK_THROWS_AS(InnovationMap(0, {-1.0001}), DomainError);
}

TEST_CASE("innovation of valid grids always lies in [-1, 1]") {
    std::mt19937 rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const OccupancyGrid x = test_helpers::random_occupancy(3, rng);
        const OccupancyGrid est = test_helpers::random_occupancy(3, rng);
        const InnovationMap xi = innovation(x, est);
        for (const double v : xi.values()) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("frobenius distance satisfies the triangle inequality") {
    std::mt19937 rng(202);
    for (int trial = 0; trial < 200; ++trial) {
        const OccupancyGrid a = test_helpers::random_occupancy(2, rng);
        const OccupancyGrid b = test_helpers::random_occupancy(2, rng);
        const OccupancyGrid c = test_helpers::random_occupancy(2, rng);
        CHECK(frobenius_distance(a, c) <=
              frobenius_distance(a, b) + frobenius_distance(b, c) + 1e-12);
    }
}
