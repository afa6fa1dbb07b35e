// Acceptance suite: runs every top-level requirement at its stated tolerance
// and prints one [PASS]/[FAIL] line per criterion. Exits nonzero on any
// failure. Expected wall time is a few seconds in a release build.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <mqtc/cli.hpp>
#include <mqtc/decoder.hpp>
#include <mqtc/encoder.hpp>
#include <mqtc/grid.hpp>
#include <mqtc/map_io.hpp>
#include <mqtc/payload.hpp>
#include <mqtc/pipeline.hpp>
#include <mqtc/quadtree.hpp>
#include <mqtc/sim.hpp>

#include "helpers.hpp"

using namespace mqtc;

namespace {

int g_failures = 0;

struct Line {
    int number;
    std::string text;
};
std::vector<Line> g_lines;

void report(int number, const char* name, bool ok, const std::string& detail) {
    char buffer[320];
    std::snprintf(buffer, sizeof(buffer), "[%s] %2d %s: %s", ok ? "PASS" : "FAIL", number, name,
                  detail.c_str());
    g_lines.push_back(Line{number, buffer});
    if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* fmt, ...) {
    char buffer[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buffer, sizeof(buffer), fmt, args);
    va_end(args);
    return buffer;
}

// Shared tally for the triangle bound: every step record produced anywhere in
// this suite is checked against it.
std::size_t g_bound_steps = 0;
std::size_t g_bound_violations = 0;

void check_bound(const std::vector<StepRecord>& records) {
    for (const StepRecord& r : records) {
        ++g_bound_steps;
        if (r.estimate_error > r.innovation_distortion + r.decode_distortion + 1e-9) {
            ++g_bound_violations;
        }
    }
}

void criterion_decomposition_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(2001);
    std::size_t checks = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const InnovationMap xi = test_helpers::random_innovation(2, rng);
        const DeltaVector delta = delta_distortion(xi);
        const double root = encoder_distortion(xi, root_tree(2));
        const double root_sq = root * root;
        for_each_valid_topology(2, [&](const TreeTopology& topology) {
            const double d = encoder_distortion(xi, topology);
            const double lhs = d * d;
            const double rhs = root_sq + tree_objective(topology, delta);
            const double rel = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
            worst = std::max(worst, rel);
            ++checks;
        });
    }
    const double dt = seconds_since(t0);
    const bool ok = worst <= 1e-9 && dt < 5.0;
    report(1, "decomposition identity", ok,
           format("%zu checks (200 maps x 17 topologies), max relative error %.3g, %.2f s", checks,
                  worst, dt));
}

void criterion_solver_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(2002);
    std::size_t checks = 0;
    double worst_dp = 0.0;
    double worst_bnb = 0.0;
    bool budgets_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        const InnovationMap xi = test_helpers::random_innovation(2, rng);
        const DeltaVector gains = solver_gains(delta_distortion(xi));
        for (std::size_t budget = 1; budget <= 16; ++budget) {
            const TreeTopology dp = solve_budgeted_tree(xi, budget);
            const TreeTopology bf = solve_bruteforce(xi, budget);
            const TreeTopology bnb =
                solve_budgeted_tree(xi, budget, SolverBackend::kBranchAndBound);
            worst_dp = std::max(worst_dp,
                                std::abs(tree_objective(dp, gains) - tree_objective(bf, gains)));
            worst_bnb = std::max(worst_bnb,
                                 std::abs(tree_objective(bnb, gains) - tree_objective(bf, gains)));
            budgets_ok = budgets_ok && leaf_count(dp) <= budget && leaf_count(bnb) <= budget;
            ++checks;
        }
    }
    const double dt = seconds_since(t0);
    const bool ok = worst_dp <= 1e-12 && worst_bnb <= 1e-12 && budgets_ok && dt < 30.0;
    report(2, "solver exactness", ok,
           format("%zu budget checks, objective gap dp %.3g / bnb %.3g, %.2f s", checks, worst_dp,
                  worst_bnb, dt));
}

void criterion_clipping_optimality() {
    std::mt19937 rng(2003);
    std::size_t violations = 0;
    std::size_t passthrough_errors = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const double estimate = test_helpers::unit_double(rng);
        const double z = 2.0 * test_helpers::unit_double(rng) - 1.0;
        const double lo = -estimate;
        const double hi = 1.0 - estimate;
        const double v =
            clip_decode(InnovationMap(0, {z}), OccupancyGrid(0, {estimate})).values()[0];
        const double span = hi - lo;
        const std::size_t grid_points = static_cast<std::size_t>(std::ceil(span / 1e-3));
        for (std::size_t k = 0; k <= grid_points; ++k) {
            const double w = std::clamp(
                lo + span * static_cast<double>(k) / static_cast<double>(grid_points), lo, hi);
            if (std::abs(z - v) > std::abs(z - w)) ++violations;
        }
        if (z >= lo && z <= hi && v != z) ++passthrough_errors;
    }
    const bool ok = violations == 0 && passthrough_errors == 0;
    report(3, "clipping-decoder optimality", ok,
           format("10000 pairs, %zu grid violations, %zu pass-through mismatches", violations,
                  passthrough_errors));
}

void criterion_full_budget_losslessness() {
    std::mt19937 rng(2005);
    bool exact_ok = true;
    // in-memory path: occupancy on a 1/256 lattice keeps every difference and
    // region mean exactly representable, so reconstruction is bit-exact
    for (int trial = 0; trial < 5; ++trial) {
        const OccupancyGrid x = test_helpers::quantized_random_occupancy(5, rng);
        const StepOutcome outcome = step(initial_session(5, 0.5), x, 1024);
        check_bound({outcome.record});
        if (outcome.record.estimate_error != 0.0 || !(outcome.state.estimate == x)) {
            exact_ok = false;
        }
    }
    // through the wire: binary32 values bound the one-step error
    double worst_wire = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const OccupancyGrid x = test_helpers::random_occupancy(5, rng);
        StepOptions options;
        options.quantize_binary32 = true;
        const StepOutcome outcome = step(initial_session(5, 0.5), x, 1024, options);
        check_bound({outcome.record});
        worst_wire = std::max(worst_wire, outcome.record.estimate_error);
    }
    const bool ok = exact_ok && worst_wire <= 1e-6;
    report(5, "full-budget losslessness", ok,
           format("exact in-memory reconstruction %s, wire-path worst error %.3g <= 1e-6",
                  exact_ok ? "holds" : "broken", worst_wire));
}

void criterion_static_experiment() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> pct{1, 5, 2, 20, 30, 5, 8, 15, 40, 15, 10};
    std::vector<double> fractions;
    for (const double p : pct) fractions.push_back(p / 100.0);
    const BandwidthSchedule schedule = BandwidthSchedule::from_fractions(fractions, 5);
    bool monotone = true;
    double worst_ratio = 0.0;
    for (std::uint32_t seed = 1; seed <= 20; ++seed) {
        const OccupancyGrid x = random_map(5, seed, 2);
        const double initial = frobenius_distance(x, uniform_grid(5, 0.5));
        const auto records = run([&x](std::size_t) { return x; }, schedule, 0.5);
        check_bound(records);
        double prev = initial;
        for (const StepRecord& r : records) {
            if (r.estimate_error > prev + 1e-12) monotone = false;
            prev = r.estimate_error;
        }
        worst_ratio = std::max(worst_ratio, records.back().estimate_error / initial);
    }
    const double dt = seconds_since(t0);
    const bool ok = monotone && worst_ratio < 0.10 && dt < 10.0;
    report(6, "static experiment (32x32, 11 steps, 20 seeds)", ok,
           format("monotone %s, worst final/initial %.3g < 0.1, %.2f s",
                  monotone ? "yes" : "NO", worst_ratio, dt));
}

void criterion_dynamic_experiment() {
    const auto t0 = std::chrono::steady_clock::now();
    const OccupancyGrid base = random_map(7, 11, 2);
    const auto path = shortest_path(base, GridCell{3, 3}, GridCell{126, 126});
    const std::size_t steps = std::min<std::size_t>(116, path.size());
    const AmoebaScenario scenario(base, path, 8, 1.0);
    const auto frames = dynamic_sequence(scenario, steps);
    const std::size_t budget = detail::cell_count(7) / 100;  // 1% of 16384 = 163
    const BandwidthSchedule schedule =
        BandwidthSchedule::from_leaves(std::vector<std::size_t>(steps, budget));
    const auto records = run(frames, schedule, 0.5);
    check_bound(records);
    bool budget_ok = true;
    std::size_t increases = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (records[k].leaves_used > budget) budget_ok = false;
        if (k > 0 && records[k].estimate_error > records[k - 1].estimate_error + 1e-12) {
            ++increases;
        }
    }
    const double dt = seconds_since(t0);
    const bool ok = steps >= 100 && budget_ok && increases >= 1 && dt < 60.0;
    report(7, "dynamic amoeba experiment (128x128)", ok,
           format("%zu steps, budget %zu leaves respected %s, %zu error increases, %.2f s", steps,
                  budget, budget_ok ? "yes" : "NO", increases, dt));
}

void criterion_triangle_bound() {
    // extra mixed runs on top of every record the other criteria produced
    std::mt19937 rng(2004);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<OccupancyGrid> maps;
        std::vector<std::size_t> budgets;
        for (int k = 0; k < 6; ++k) {
            maps.push_back(test_helpers::random_occupancy(4, rng));
            budgets.push_back(1 + rng() % 100);
        }
        check_bound(run(maps, BandwidthSchedule::from_leaves(budgets), 0.5));
    }
    const bool ok = g_bound_violations == 0 && g_bound_steps > 0;
    report(4, "triangle bound on every step", ok,
           format("%zu steps checked across all runs, %zu violations", g_bound_steps,
                  g_bound_violations));
}

void criterion_delta_forms() {
    std::mt19937 rng(2008);
    std::size_t maps = 0;
    double worst_gap = 0.0;
    double worst_positive = 0.0;
    for (std::size_t depth = 1; depth <= 6; ++depth) {
        for (int trial = 0; trial < 17; ++trial) {
            const OccupancyGrid x = test_helpers::random_occupancy(depth, rng);
            const OccupancyGrid est = test_helpers::random_occupancy(depth, rng);
            const InnovationMap xi = innovation(x, est);
            const DeltaVector aggregate = delta_distortion(xi);
            const DeltaVector quadratic = delta_distortion_quadratic(xi);
            for (std::size_t t = 0; t < aggregate.size(); ++t) {
                worst_positive = std::max({worst_positive, aggregate[t], quadratic[t]});
                worst_gap = std::max(worst_gap, std::abs(aggregate[t] - quadratic[t]));
            }
            ++maps;
        }
    }
    const bool ok = worst_positive <= 1e-12 && worst_gap <= 1e-12;
    report(8, "delta nonpositivity and form agreement", ok,
           format("%zu maps up to depth 6, largest entry %.3g, largest form gap %.3g", maps,
                  worst_positive, worst_gap));
}

void criterion_payload_roundtrip() {
    std::mt19937 rng(2009);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t depth = rng() % 5;
        const TreeTopology topology = test_helpers::random_valid_topology(depth, rng);
        const InnovationMap xi = test_helpers::random_innovation(depth, rng);
        const EncodedInnovation enc = encode(xi, topology);
        const PayloadBytes bytes = serialize_payload(enc);
        const EncodedInnovation back = deserialize_payload(bytes);
        if (!(serialize_payload(back) == bytes) || !(back.topology() == enc.topology())) {
            ++mismatches;
        }
    }
    std::size_t unexpected = 0;
    {
        std::mt19937 gen(2010);
        const PayloadBytes bytes =
            serialize_payload(encode(test_helpers::random_innovation(3, gen),
                                     test_helpers::random_valid_topology(3, gen)));
        for (std::size_t len = 0; len < bytes.size(); ++len) {
            try {
                deserialize_payload(std::span<const std::uint8_t>(bytes.data(), len));
                ++unexpected;  // truncation must never parse
            } catch (const FormatError&) {
            } catch (...) {
                ++unexpected;  // and must never raise anything else
            }
        }
        PayloadBytes bad_magic = bytes;
        bad_magic[0] ^= 0xFF;
        try {
            deserialize_payload(bad_magic);
            ++unexpected;
        } catch (const FormatError&) {
        } catch (...) {
            ++unexpected;
        }
    }
    const bool ok = mismatches == 0 && unexpected == 0;
    report(9, "payload round-trip and malformed input", ok,
           format("1000 encodings bit-exact (%zu mismatches), %zu bad-input misbehaviors",
                  mismatches, unexpected));
}

void criterion_determinism() {
    test_helpers::TempDir dir;
    const auto run_once = [&](const char* sub) {
        const std::string out_dir = (dir.path / sub).string();
        const std::vector<std::string> args{
            "simulate",       "--scenario", "static", "--ell",  "5",
            "--steps",        "11",         "--schedule-pct",
            "1,5,2,20,30,5,8,15,40,15,10",  "--seed", "7",      "--out", out_dir};
        std::vector<const char*> argv;
        argv.push_back("mqtc");
        for (const std::string& a : args) argv.push_back(a.c_str());
        std::ostringstream sink;  // keep per-step chatter out of the criterion report
        std::streambuf* saved = std::cout.rdbuf(sink.rdbuf());
        const int rc = cli_main(static_cast<int>(argv.size()), argv.data());
        std::cout.rdbuf(saved);
        return rc == 0 ? out_dir : std::string();
    };
    const std::string a = run_once("a");
    const std::string b = run_once("b");
    bool ok = !a.empty() && !b.empty();
    std::size_t files = 0;
    if (ok) {
        const auto bytes_of = [](const std::filesystem::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            return buf.str();
        };
        std::vector<std::string> names{"metrics.csv"};
        for (std::size_t k = 1; k <= 11; ++k) {
            char name[32];
            std::snprintf(name, sizeof(name), "payload_%04zu.bin", k);
            names.push_back(name);
        }
        for (const std::string& name : names) {
            ++files;
            if (bytes_of(std::filesystem::path(a) / name) !=
                bytes_of(std::filesystem::path(b) / name)) {
                ok = false;
            }
        }
    }
    report(10, "byte-identical repeated runs", ok,
           format("%zu files compared across two identical simulate runs", files));
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_decomposition_identity();
    criterion_solver_exactness();
    criterion_clipping_optimality();
    criterion_full_budget_losslessness();
    criterion_static_experiment();
    criterion_dynamic_experiment();
    criterion_triangle_bound();  // aggregates the bound over every run above
    criterion_delta_forms();
    criterion_payload_roundtrip();
    criterion_determinism();
    std::sort(g_lines.begin(), g_lines.end(),
              [](const Line& a, const Line& b) { return a.number < b.number; });
    for (const Line& line : g_lines) std::printf("%s\n", line.text.c_str());
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria FAILED\n", g_failures);
    return 1;
}
