#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mqtc/decoder.hpp"
#include "mqtc/encoder.hpp"
#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"
#include "mqtc/map_io.hpp"
#include "mqtc/payload.hpp"
#include "mqtc/pipeline.hpp"
#include "mqtc/quadtree.hpp"
#include "mqtc/sim.hpp"

namespace mqtc {

// Options of one simulation run; field names match the CLI flags, and a
// --config file uses the same keys in key=value lines.
struct RunConfig {
    std::string scenario = "static";  // static | amoeba | file-sequence
    std::size_t ell = 5;
    std::size_t steps = 0;  // 0: derive from the schedule, path or file list
    std::vector<double> schedule_pct;
    std::vector<std::size_t> schedule_leaves;
    double initial_estimate = 0.5;
    std::uint32_t seed = 0;
    std::string solver = "dp";  // dp | bnb
    std::string out = "out";
    std::size_t smoothness = 2;
    std::size_t radius = 3;
    double amoeba_value = 1.0;
    std::vector<std::size_t> start;  // row,col (1-based); empty: scenario default
    std::vector<std::size_t> goal;
    std::vector<std::string> maps;  // file-sequence inputs
    std::optional<unsigned> bits_per_cell;
};

namespace detail {

inline SolverBackend parse_solver(const std::string& name) {
    if (name == "dp") return SolverBackend::kTreeKnapsack;
    if (name == "bnb") return SolverBackend::kBranchAndBound;
    throw ConfigError("unknown solver \"" + name + "\", expected dp or bnb");
}

inline GridCell cell_from_flag(const std::vector<std::size_t>& pair, const char* flag) {
    if (pair.size() != 2) {
        throw ConfigError(std::string(flag) + " expects row,col");
    }
    return GridCell{pair[0], pair[1]};
}

struct ResolvedScenario {
    std::size_t depth = 0;
    std::size_t steps = 0;
    std::function<OccupancyGrid(std::size_t)> map_at;
};

inline ResolvedScenario resolve_scenario(const RunConfig& cfg) {
    ResolvedScenario resolved;
    if (cfg.scenario == "static") {
        resolved.depth = cfg.ell;
        auto map = std::make_shared<OccupancyGrid>(random_map(cfg.ell, cfg.seed, cfg.smoothness));
        resolved.map_at = [map](std::size_t) { return *map; };
        resolved.steps = cfg.steps;
    } else if (cfg.scenario == "amoeba") {
        resolved.depth = cfg.ell;
        OccupancyGrid base = random_map(cfg.ell, cfg.seed, cfg.smoothness);
        const std::size_t side = base.side();
        if (side < 2) throw ConfigError("amoeba scenario needs a grid of side >= 2");
        const GridCell start =
            cfg.start.empty() ? GridCell{1, 1} : cell_from_flag(cfg.start, "--start");
        const GridCell goal =
            cfg.goal.empty() ? GridCell{side, side} : cell_from_flag(cfg.goal, "--goal");
        std::vector<GridCell> path = shortest_path(base, start, goal);
        auto scenario = std::make_shared<AmoebaScenario>(std::move(base), std::move(path),
                                                         cfg.radius, cfg.amoeba_value);
        resolved.steps = cfg.steps > 0 ? cfg.steps : scenario->path().size();
        if (resolved.steps > scenario->path().size()) {
            throw ConfigError("requested " + std::to_string(resolved.steps) +
                              " steps but the amoeba path has only " +
                              std::to_string(scenario->path().size()) + " cells");
        }
        auto frames =
            std::make_shared<std::vector<OccupancyGrid>>(dynamic_sequence(*scenario, resolved.steps));
        resolved.map_at = [frames](std::size_t k) { return (*frames)[k]; };
    } else if (cfg.scenario == "file-sequence") {
        if (cfg.maps.empty()) throw ConfigError("file-sequence scenario needs --maps");
        auto frames = std::make_shared<std::vector<OccupancyGrid>>();
        frames->reserve(cfg.maps.size());
        for (const std::string& file : cfg.maps) frames->push_back(read_map(file));
        for (const OccupancyGrid& g : *frames) {
            if (g.depth() != frames->front().depth()) {
                throw ConfigError("file-sequence maps disagree on depth");
            }
        }
        resolved.depth = frames->front().depth();
        resolved.steps = cfg.steps > 0 ? cfg.steps : frames->size();
        if (resolved.steps != frames->size()) {
            throw ConfigError("file-sequence has " + std::to_string(frames->size()) +
                              " maps but " + std::to_string(resolved.steps) + " steps requested");
        }
        resolved.map_at = [frames](std::size_t k) { return (*frames)[k]; };
    } else {
        throw ConfigError("unknown scenario \"" + cfg.scenario +
                          "\", expected static, amoeba or file-sequence");
    }
    return resolved;
}

inline BandwidthSchedule resolve_schedule(const RunConfig& cfg, std::size_t depth,
                                          std::size_t& steps) {
    if (cfg.schedule_pct.empty() == cfg.schedule_leaves.empty()) {
        throw ConfigError("exactly one of --schedule-pct or --schedule-leaves is required");
    }
    std::vector<std::size_t> budgets;
    if (!cfg.schedule_leaves.empty()) {
        budgets = cfg.schedule_leaves;
        for (const std::size_t b : budgets) {
            if (b < 1) throw ConfigError("--schedule-leaves entries must be positive");
        }
    } else {
        std::vector<double> fractions;
        fractions.reserve(cfg.schedule_pct.size());
        for (const double pct : cfg.schedule_pct) {
            if (!(pct > 0.0)) throw ConfigError("--schedule-pct entries must be positive");
            fractions.push_back(pct / 100.0);
        }
        const BandwidthSchedule fractional = BandwidthSchedule::from_fractions(fractions, depth);
        budgets.assign(fractional.budgets().begin(), fractional.budgets().end());
    }
    if (steps == 0) steps = budgets.size();
    if (budgets.size() == 1 && steps > 1) {
        budgets.assign(steps, budgets.front());
    }
    if (budgets.size() != steps) {
        throw ConfigError("schedule has " + std::to_string(budgets.size()) + " entries for " +
                          std::to_string(steps) + " steps");
    }
    return BandwidthSchedule::from_leaves(std::move(budgets));
}

inline std::filesystem::path numbered_file(const std::filesystem::path& dir, const char* stem,
                                           std::size_t step, const char* extension) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04zu.%s", stem, step, extension);
    return dir / name;
}

inline std::string trim_copy(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

// Flat key=value run-configuration file; keys are the long flag names without
// the leading dashes. Blank lines and '#' comments are ignored.
inline std::vector<std::pair<std::string, std::string>> read_config_pairs(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const std::string stripped = trim_copy(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_number) +
                              ": expected key=value");
        }
        pairs.emplace_back(trim_copy(stripped.substr(0, eq)), trim_copy(stripped.substr(eq + 1)));
    }
    return pairs;
}

// Splices --config file contents into the argument list as ordinary flags.
// Flags given explicitly on the command line take precedence over the file.
inline std::vector<std::string> expand_config_argument(std::vector<std::string> args) {
    if (args.empty() || args.front() != "simulate") return args;
    std::string config_path;
    std::vector<std::string> kept;
    kept.reserve(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config expects a file path");
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            kept.push_back(args[i]);
        }
    }
    if (config_path.empty()) return kept;
    for (const auto& [key, value] : read_config_pairs(config_path)) {
        const std::string flag = "--" + key;
        bool overridden = false;
        for (const std::string& arg : kept) {
            if (arg == flag || arg.rfind(flag + "=", 0) == 0) overridden = true;
        }
        if (!overridden) {
            kept.push_back(flag);
            kept.push_back(value);
        }
    }
    return kept;
}

}  // namespace detail

inline int run_simulate(const RunConfig& cfg, std::ostream& out) {
    detail::ResolvedScenario scenario = detail::resolve_scenario(cfg);
    std::size_t steps = scenario.steps;
    const BandwidthSchedule schedule = detail::resolve_schedule(cfg, scenario.depth, steps);

    StepOptions options;
    options.solver = detail::parse_solver(cfg.solver);
    options.quantize_binary32 = true;  // keep the replica equal to a wire decode
    options.bits_per_cell = cfg.bits_per_cell;

    const std::filesystem::path out_dir(cfg.out);
    std::filesystem::create_directories(out_dir);

    std::vector<StepRecord> records;
    records.reserve(steps);
    SessionState state = initial_session(scenario.depth, cfg.initial_estimate);
    for (std::size_t k = 0; k < steps; ++k) {
        const OccupancyGrid observed = scenario.map_at(k);
        StepOutcome outcome = step(state, observed, schedule[k], options);
        const PayloadBytes payload = serialize_payload(outcome.encoded);
        write_payload_file(payload, detail::numbered_file(out_dir, "payload", k + 1, "bin"));
        write_map_csv(outcome.state.estimate,
                      detail::numbered_file(out_dir, "estimate", k + 1, "csv"));
        out << "step " << outcome.record.step << ": leaves " << outcome.record.leaves_used << "/"
            << outcome.record.budget_leaves << ", estimate error "
            << outcome.record.estimate_error << "\n";
        records.push_back(outcome.record);
        state = std::move(outcome.state);
    }
    write_metrics(records, out_dir / "metrics.csv");
    out << "wrote " << records.size() << " steps to " << out_dir.string() << "\n";
    return 0;
}

struct CompressArgs {
    std::string map_file;
    std::string estimate_file;  // empty: uniform initial estimate
    double initial_estimate = 0.5;
    std::size_t budget_leaves = 0;
    std::string solver = "dp";
    std::string payload_out;
    std::string estimate_out;  // empty: skip the sender-replica dump
    std::optional<unsigned> bits_per_cell;
};

inline int run_compress(const CompressArgs& args, std::ostream& out) {
    const OccupancyGrid observed = read_map(args.map_file);
    const OccupancyGrid estimate = args.estimate_file.empty()
                                       ? uniform_grid(observed.depth(), args.initial_estimate)
                                       : read_map(args.estimate_file);
    StepOptions options;
    options.solver = detail::parse_solver(args.solver);
    options.quantize_binary32 = true;
    options.bits_per_cell = args.bits_per_cell;
    const StepOutcome outcome = step(SessionState{estimate, 0}, observed, args.budget_leaves,
                                     options);
    const PayloadBytes payload = serialize_payload(outcome.encoded);
    write_payload_file(payload, args.payload_out);
    if (!args.estimate_out.empty()) write_map_csv(outcome.state.estimate, args.estimate_out);
    out << "leaves " << outcome.record.leaves_used << "/" << outcome.record.budget_leaves
        << ", payload bits " << outcome.record.payload_bits << ", innovation distortion "
        << outcome.record.innovation_distortion << ", estimate error "
        << outcome.record.estimate_error << "\n";
    return 0;
}

struct DecodeArgs {
    std::string payload_file;
    std::string estimate_file;  // empty: uniform initial estimate
    double initial_estimate = 0.5;
    std::string estimate_out;
};

inline int run_decode(const DecodeArgs& args, std::ostream& out) {
    const std::vector<std::uint8_t> bytes = read_payload_file(args.payload_file);
    const EncodedInnovation encoded = deserialize_payload(bytes);
    const std::size_t depth = encoded.topology().depth();
    const OccupancyGrid estimate = args.estimate_file.empty()
                                       ? uniform_grid(depth, args.initial_estimate)
                                       : read_map(args.estimate_file);
    if (estimate.depth() != depth) {
        throw DimensionError("decode: payload depth " + std::to_string(depth) +
                             " != estimate depth " + std::to_string(estimate.depth()));
    }
    const InnovationMap z_grid = encoded.to_grid();
    const ClippedUpdate v = clip_decode(z_grid, estimate);
    const OccupancyGrid next = apply_update(estimate, v);
    write_map_csv(next, args.estimate_out);
    out << "decoded " << encoded.values().size() << " leaves into " << args.estimate_out << "\n";
    return 0;
}

// Built-in self checks at depth 2: the squared-distortion decomposition over
// every valid topology, and the dynamic program against exhaustive
// enumeration for every budget.
inline bool run_verify(std::ostream& out) {
    bool all_ok = true;
    const std::size_t depth = 2;
    const std::size_t cells = detail::cell_count(depth);
    std::mt19937 rng(20240u);
    const auto random_innovation = [&]() {
        std::vector<double> values(cells);
        for (double& v : values) {
            v = static_cast<double>(rng()) * (2.0 / 4294967296.0) - 1.0;
        }
        return InnovationMap(depth, std::move(values));
    };

    {
        std::size_t checks = 0;
        double worst = 0.0;
        for (int m = 0; m < 50; ++m) {
            const InnovationMap xi = random_innovation();
            const DeltaVector delta = delta_distortion(xi);
            const double root_distortion = encoder_distortion(xi, root_tree(depth));
            const double root_sq = root_distortion * root_distortion;
            for_each_valid_topology(depth, [&](const TreeTopology& topology) {
                const double d = encoder_distortion(xi, topology);
                const double lhs = d * d;
                const double rhs = root_sq + tree_objective(topology, delta);
                const double rel =
                    std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
                worst = std::max(worst, rel);
                ++checks;
            });
        }
        const bool ok = worst <= 1e-9;
        out << (ok ? "[PASS]" : "[FAIL]") << " decomposition identity: " << checks
            << " checks, max relative error " << worst << "\n";
        all_ok = all_ok && ok;
    }

    {
        std::size_t checks = 0;
        double worst = 0.0;
        bool budgets_ok = true;
        for (int m = 0; m < 30; ++m) {
            const InnovationMap xi = random_innovation();
            const DeltaVector gains = solver_gains(delta_distortion(xi));
            for (std::size_t budget = 1; budget <= cells; ++budget) {
                const TreeTopology dp = solve_budgeted_tree(xi, budget);
                const TreeTopology bf = solve_bruteforce(xi, budget);
                worst = std::max(worst, std::abs(tree_objective(dp, gains) -
                                                 tree_objective(bf, gains)));
                budgets_ok = budgets_ok && leaf_count(dp) <= budget;
                ++checks;
            }
        }
        const bool ok = worst <= 1e-12 && budgets_ok;
        out << (ok ? "[PASS]" : "[FAIL]") << " solver exactness: " << checks
            << " budgets against enumeration, max objective gap " << worst << "\n";
        all_ok = all_ok && ok;
    }

    return all_ok;
}

inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Budgeted multi-resolution compression of occupancy grids"};
    app.require_subcommand(1);

    RunConfig cfg;
    CLI::App* simulate = app.add_subcommand("simulate", "Run a full compression session");
    std::string config_path_for_help;
    simulate->add_option("--config", config_path_for_help,
                         "Read options from a key=value file (flags override it)");
    simulate->add_option("--scenario", cfg.scenario, "static | amoeba | file-sequence")
        ->check(CLI::IsMember({"static", "amoeba", "file-sequence"}));
    simulate->add_option("--ell", cfg.ell, "Grid depth: side is 2^ell cells");
    simulate->add_option("--steps", cfg.steps, "Number of steps (0: derive)");
    simulate->add_option("--schedule-pct", cfg.schedule_pct,
                         "Per-step budgets as percent of the cell count")
        ->delimiter(',');
    simulate->add_option("--schedule-leaves", cfg.schedule_leaves, "Per-step leaf budgets")
        ->delimiter(',');
    simulate->add_option("--initial-estimate", cfg.initial_estimate,
                         "Receiver's initial occupancy value");
    simulate->add_option("--seed", cfg.seed, "Random seed for generated environments");
    simulate->add_option("--solver", cfg.solver, "dp | bnb")
        ->check(CLI::IsMember({"dp", "bnb"}));
    simulate->add_option("--out", cfg.out, "Output directory");
    simulate->add_option("--smoothness", cfg.smoothness, "Box-blur passes for generated maps");
    simulate->add_option("--radius", cfg.radius, "Amoeba radius in cells");
    simulate->add_option("--amoeba-value", cfg.amoeba_value, "Occupancy stamped by the amoeba");
    simulate->add_option("--start", cfg.start, "Amoeba path start as row,col (1-based)")
        ->delimiter(',');
    simulate->add_option("--goal", cfg.goal, "Amoeba path goal as row,col (1-based)")
        ->delimiter(',');
    simulate->add_option("--maps", cfg.maps, "Map files for the file-sequence scenario")
        ->delimiter(',');
    unsigned bits_per_cell = 0;
    CLI::Option* bits_opt = simulate->add_option(
        "--bits-per-cell", bits_per_cell, "Also report nominal bits = b * leaves");

    CompressArgs compress_args;
    CLI::App* compress = app.add_subcommand("compress", "Encode one map against an estimate");
    compress->add_option("--map", compress_args.map_file, "Observed map file (CSV or PGM)")
        ->required();
    compress->add_option("--estimate", compress_args.estimate_file,
                         "Previous estimate map file (default: uniform)");
    compress->add_option("--initial-estimate", compress_args.initial_estimate,
                         "Uniform estimate value when --estimate is absent");
    compress->add_option("--budget-leaves", compress_args.budget_leaves, "Leaf budget")
        ->required();
    compress->add_option("--solver", compress_args.solver, "dp | bnb")
        ->check(CLI::IsMember({"dp", "bnb"}));
    compress->add_option("--payload-out", compress_args.payload_out, "Payload output file")
        ->required();
    compress->add_option("--estimate-out", compress_args.estimate_out,
                         "Sender-replica estimate dump (CSV)");
    unsigned compress_bits = 0;
    CLI::Option* compress_bits_opt =
        compress->add_option("--bits-per-cell", compress_bits, "Report nominal bits");

    DecodeArgs decode_args;
    CLI::App* decode = app.add_subcommand("decode", "Apply a payload to an estimate");
    decode->add_option("--payload", decode_args.payload_file, "Payload file")->required();
    decode->add_option("--estimate", decode_args.estimate_file,
                       "Previous estimate map file (default: uniform)");
    decode->add_option("--initial-estimate", decode_args.initial_estimate,
                       "Uniform estimate value when --estimate is absent");
    decode->add_option("--estimate-out", decode_args.estimate_out, "Updated estimate output (CSV)")
        ->required();

    CLI::App* verify = app.add_subcommand("verify", "Run the built-in oracle suites");

    try {
        std::vector<std::string> args;
        for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
        args = detail::expand_config_argument(std::move(args));
        std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (simulate->parsed()) {
            if (bits_opt->count() > 0) cfg.bits_per_cell = bits_per_cell;
            return run_simulate(cfg, std::cout);
        }
        if (compress->parsed()) {
            if (compress_bits_opt->count() > 0) compress_args.bits_per_cell = compress_bits;
            return run_compress(compress_args, std::cout);
        }
        if (decode->parsed()) return run_decode(decode_args, std::cout);
        if (verify->parsed()) return run_verify(std::cout) ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace mqtc
