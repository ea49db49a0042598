#include "gridsched/bench.hpp"

#include <cmath>
#include <ostream>

namespace gridsched {

const char* to_string(SolverVariant v) {
    switch (v) {
    case SolverVariant::oracle: return "oracle";
    case SolverVariant::sequential: return "sequential";
    case SolverVariant::memopt: return "memopt";
    case SolverVariant::parallel: return "parallel";
    }
    return "?";
}

std::optional<SolverVariant> solver_variant_from_string(const std::string& name) {
    if (name == "oracle") return SolverVariant::oracle;
    if (name == "sequential") return SolverVariant::sequential;
    if (name == "memopt") return SolverVariant::memopt;
    if (name == "parallel") return SolverVariant::parallel;
    return std::nullopt;
}

SolveResult run_solver(const ScheduleProblem& problem, SolverVariant variant,
                       const SolveOptions& options) {
    switch (variant) {
    case SolverVariant::oracle: return solve_oracle(problem);
    case SolverVariant::sequential: {
        SolveOptions o = options;
        o.memory_optimized = false;
        return solve_sequential(problem, o);
    }
    case SolverVariant::memopt: {
        SolveOptions o = options;
        o.memory_optimized = true;
        return solve_sequential(problem, o);
    }
    case SolverVariant::parallel: return solve_parallel(problem, options);
    }
    return {};
}

std::vector<BenchRow> run_benchmark(std::span<const BenchInstance> instances,
                                    std::span<const SolverVariant> variants,
                                    std::span<const int> thread_counts, int iterations,
                                    const SolveOptions& base_options) {
    std::vector<BenchRow> rows;
    const int single_thread[] = {1};
    for (const auto& inst : instances) {
        for (SolverVariant variant : variants) {
            std::span<const int> threads_list =
                variant == SolverVariant::parallel ? thread_counts
                                                   : std::span<const int>(single_thread);
            for (int threads : threads_list) {
                const size_t group_start = rows.size();
                for (int it = 0; it < iterations; ++it) {
                    SolveOptions opt = base_options;
                    opt.threads = threads;
                    BenchRow row;
                    row.instance_id = inst.id;
                    row.variant = variant;
                    row.threads = threads;
                    row.iteration = it;
                    try {
                        const SolveResult res = run_solver(inst.problem, variant, opt);
                        row.status = res.status;
                        row.duration_ms = res.stats.duration_ms;
                        row.nodes_expanded = res.stats.nodes_expanded;
                        row.nodes_pruned_policy = res.stats.nodes_pruned_policy;
                        row.nodes_pruned_dominance = res.stats.nodes_pruned_dominance;
                        if (res.schedule) row.total_cost = res.schedule->total_cost;
                    } catch (const std::exception&) {
                        row.status = SolveStatus::refused;
                    }
                    rows.push_back(std::move(row));
                }
                // iteration-group aggregates, repeated on every member row
                double sum = 0.0;
                const size_t n = rows.size() - group_start;
                for (size_t i = group_start; i < rows.size(); ++i) sum += rows[i].duration_ms;
                const double mean = n > 0 ? sum / n : 0.0;
                double var = 0.0;
                for (size_t i = group_start; i < rows.size(); ++i) {
                    const double d = rows[i].duration_ms - mean;
                    var += d * d;
                }
                const double stddev = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
                for (size_t i = group_start; i < rows.size(); ++i) {
                    rows[i].group_mean_ms = mean;
                    rows[i].group_stddev_ms = stddev;
                }
            }
        }
    }
    return rows;
}

void write_benchmark_csv(std::ostream& os, std::span<const BenchRow> rows) {
    os << "instance_id,variant,threads,duration_ms,nodes_expanded,nodes_pruned_policy,"
          "nodes_pruned_dominance,total_cost,iterations_mean,iterations_stddev,status\n";
    for (const auto& r : rows) {
        os << r.instance_id << ',' << to_string(r.variant) << ',' << r.threads << ','
           << r.duration_ms << ',' << r.nodes_expanded << ',' << r.nodes_pruned_policy << ','
           << r.nodes_pruned_dominance << ',' << (r.total_cost ? r.total_cost->str() : "") << ','
           << r.group_mean_ms << ',' << r.group_stddev_ms << ',' << to_string(r.status) << '\n';
    }
}

} // namespace gridsched
