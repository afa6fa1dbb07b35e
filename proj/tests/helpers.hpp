#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <mqtc/grid.hpp>
#include <mqtc/quadtree.hpp>

namespace test_helpers {

inline double unit_double(std::mt19937& rng) {
    return static_cast<double>(rng()) * (1.0 / 4294967296.0);
}

inline mqtc::OccupancyGrid random_occupancy(std::size_t depth, std::mt19937& rng) {
    std::vector<double> values(mqtc::detail::cell_count(depth));
    for (double& v : values) v = unit_double(rng);
    return mqtc::OccupancyGrid(depth, std::move(values));
}

// Occupancy values on a 1/256 lattice; differences and sums of such values
// stay exactly representable, which the exact-reconstruction tests rely on.
inline mqtc::OccupancyGrid quantized_random_occupancy(std::size_t depth, std::mt19937& rng) {
    std::vector<double> values(mqtc::detail::cell_count(depth));
    for (double& v : values) v = static_cast<double>(rng() % 257) / 256.0;
    return mqtc::OccupancyGrid(depth, std::move(values));
}

inline mqtc::InnovationMap random_innovation(std::size_t depth, std::mt19937& rng) {
    std::vector<double> values(mqtc::detail::cell_count(depth));
    for (double& v : values) v = 2.0 * unit_double(rng) - 1.0;
    return mqtc::InnovationMap(depth, std::move(values));
}

// Valid by construction: a node may only be expanded when its parent is.
inline mqtc::TreeTopology random_valid_topology(std::size_t depth, std::mt19937& rng,
                                                double expand_probability = 0.5) {
    std::vector<std::uint8_t> bits(mqtc::interior_node_count(depth), 0);
    for (mqtc::NodeId t = 0; t < bits.size(); ++t) {
        const bool allowed = (t == 0) || bits[mqtc::parent_node(t)] != 0;
        bits[t] = (allowed && unit_double(rng) < expand_probability) ? 1 : 0;
    }
    return mqtc::TreeTopology(depth, std::move(bits));
}

// Independent count of valid pruned quadtrees: a subtree of height d is
// either aggregated or expanded into four independent height-(d-1) subtrees.
inline std::uint64_t topology_count_recurrence(std::size_t depth) {
    std::uint64_t count = 1;
    for (std::size_t d = 0; d < depth; ++d) {
        count = 1 + count * count * count * count;
    }
    return count;
}

// Fresh directory under the system temp root, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("mqtc_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::filesystem::path file(const std::string& name) const { return path / name; }
};

}  // namespace test_helpers
