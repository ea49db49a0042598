#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridsched/search.hpp"

namespace gridsched {

enum class SolverVariant { oracle, sequential, memopt, parallel };

const char* to_string(SolverVariant v);
std::optional<SolverVariant> solver_variant_from_string(const std::string& name);

// Dispatches to the matching solver. threads only matters for parallel.
SolveResult run_solver(const ScheduleProblem& problem, SolverVariant variant,
                       const SolveOptions& options);

struct BenchInstance {
    std::string id;
    ScheduleProblem problem;
};

// One row per (instance, variant, threads, iteration). group_mean_ms and
// group_stddev_ms aggregate the row's iteration group.
struct BenchRow {
    std::string instance_id;
    SolverVariant variant = SolverVariant::sequential;
    int threads = 1;
    int iteration = 0;
    SolveStatus status = SolveStatus::infeasible;
    double duration_ms = 0.0;
    std::uint64_t nodes_expanded = 0;
    std::uint64_t nodes_pruned_policy = 0;
    std::uint64_t nodes_pruned_dominance = 0;
    std::optional<Money> total_cost;
    double group_mean_ms = 0.0;
    double group_stddev_ms = 0.0;
};

// Runs every instance x variant x thread-count combination `iterations`
// times. Thread counts apply to the parallel variant only; the others run
// once per iteration with threads=1.
std::vector<BenchRow> run_benchmark(std::span<const BenchInstance> instances,
                                    std::span<const SolverVariant> variants,
                                    std::span<const int> thread_counts, int iterations,
                                    const SolveOptions& base_options = {});

void write_benchmark_csv(std::ostream& os, std::span<const BenchRow> rows);

} // namespace gridsched
