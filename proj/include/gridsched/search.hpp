#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gridsched/domain.hpp"

namespace gridsched {

enum class SolveStatus { optimal, infeasible, budget_exceeded, refused };

const char* to_string(SolveStatus s);

struct SearchStats {
    std::uint64_t nodes_expanded = 0;
    std::uint64_t nodes_generated = 0;
    std::uint64_t nodes_pruned_policy = 0;
    std::uint64_t nodes_pruned_dominance = 0;
    double duration_ms = 0.0;
    // sequential variants assert the popped-cost sequence never decreases
    bool pop_costs_monotone = true;
};

struct SolveOptions {
    int threads = 1;
    bool memory_optimized = true;
    bool use_dominance = true;
    // local frontier size that triggers merging into the global frontier
    int merge_threshold = 64;
    // pseudocode-literal trigger: merge while the local queue is small
    bool merge_when_below_threshold = false;
    std::uint64_t node_budget = 50'000'000;
};

struct SolveResult {
    SolveStatus status = SolveStatus::infeasible;
    std::optional<Schedule> schedule;
    SearchStats stats;
    std::optional<Money> best_bound; // frontier minimum when the budget ran out
};

// Exhaustive enumeration of every complete assignment matrix, filtered by
// satisfied() and battery feasibility. Refuses instances beyond 4 devices
// or 8 slots. Independent of the uniform-cost machinery; exists to verify
// it.
SolveResult solve_oracle(const ScheduleProblem& problem);

// Uniform-cost search with policy-violation pruning and dominance
// deduplication. memory_optimized selects parent-link path storage instead
// of per-node prefix copies; the expansion order and result are identical.
SolveResult solve_sequential(const ScheduleProblem& problem, const SolveOptions& options = {});

// Parallel uniform-cost search: shared global frontier, per-worker local
// frontiers, threshold-triggered merges, and a full quiescent point before a
// goal is accepted. Cost-equal to the sequential result.
SolveResult solve_parallel(const ScheduleProblem& problem, const SolveOptions& options = {});

// Recomputes every derived schedule field (costs, demand, trajectory) from
// raw assignments through the dispatch rules. state_idx is [slot][device].
Schedule replay_schedule(const ScheduleProblem& problem,
                         const std::vector<std::vector<int>>& state_idx,
                         const std::vector<BatteryAction>& battery_actions);

// Same, resolving state ids against the problem's devices. Throws
// std::invalid_argument on unknown ids or shape mismatch.
Schedule replay_schedule_ids(const ScheduleProblem& problem,
                             const std::vector<std::vector<std::string>>& assignments,
                             const std::vector<BatteryAction>& battery_actions);

} // namespace gridsched
