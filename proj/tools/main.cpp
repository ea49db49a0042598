#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridsched/bench.hpp"
#include "gridsched/dispatch.hpp"
#include "gridsched/ingestion.hpp"
#include "gridsched/search.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;      // unreadable/invalid input files or problem
constexpr int kExitInfeasible = 3; // no schedule satisfies the policies
constexpr int kExitBudget = 4;     // node budget exhausted

using namespace gridsched;

struct ScheduleArgs {
    std::string scenario;
    std::string solver = "memopt";
    int threads = 1;
    std::optional<std::uint64_t> seed;
    std::string out = "schedule.json";
    bool no_battery = false;
    int merge_threshold = 64;
    std::uint64_t node_budget = 50'000'000;
};

int cmd_schedule(const ScheduleArgs& args) {
    const auto variant = solver_variant_from_string(args.solver);
    if (!variant) {
        std::cerr << "unknown solver '" << args.solver << "'\n";
        return kExitInput;
    }
    Scenario sc = load_scenario(args.scenario, args.seed);
    if (args.no_battery) {
        sc.battery.reset();
        sc.problem.battery.reset();
    }
    const auto report = validate_problem(sc.problem);
    if (!report.ok()) {
        for (const auto& v : report.violations)
            std::cerr << v.where << ": " << v.message << '\n';
        return kExitInput;
    }

    SolveOptions opt;
    opt.threads = args.threads;
    opt.merge_threshold = args.merge_threshold;
    opt.node_budget = args.node_budget;
    const SolveResult res = run_solver(sc.problem, *variant, opt);

    std::cout << "status=" << to_string(res.status)
              << " solver=" << to_string(*variant) << " threads="
              << (*variant == SolverVariant::parallel ? args.threads : 1);
    if (res.schedule) std::cout << " total_cost=" << res.schedule->total_cost.str();
    if (res.best_bound) std::cout << " best_bound=" << res.best_bound->str();
    std::cout << " duration_ms=" << res.stats.duration_ms
              << " nodes_expanded=" << res.stats.nodes_expanded
              << " nodes_pruned_policy=" << res.stats.nodes_pruned_policy
              << " nodes_pruned_dominance=" << res.stats.nodes_pruned_dominance << '\n';

    switch (res.status) {
    case SolveStatus::optimal: break;
    case SolveStatus::infeasible: return kExitInfeasible;
    case SolveStatus::budget_exceeded: return kExitBudget;
    case SolveStatus::refused: return kExitInput;
    }

    ScheduleMeta meta;
    meta.scenario_id = sc.scenario_id;
    meta.solver = to_string(*variant);
    meta.threads = *variant == SolverVariant::parallel ? args.threads : 1;
    meta.duration_ms = res.stats.duration_ms;
    write_schedule(*res.schedule, meta, sc.grid, args.out);
    return kExitOk;
}

int cmd_validate(const std::string& scenario) {
    const Scenario sc = load_scenario(scenario);
    const auto report = validate_problem(sc.problem);
    if (report.ok()) {
        std::cout << "status=valid devices=" << sc.problem.devices.size()
                  << " battery=" << (sc.problem.battery ? "yes" : "no")
                  << " horizon_slots=" << sc.grid.horizon_slots << '\n';
        return kExitOk;
    }
    for (const auto& v : report.violations) std::cout << v.where << ": " << v.message << '\n';
    std::cout << "status=invalid violations=" << report.violations.size() << '\n';
    return kExitInfeasible;
}

int cmd_gen_prosumers(const std::string& scenario, std::optional<std::uint64_t> seed,
                      const std::string& out) {
    const Scenario sc = load_scenario(scenario, seed);
    const auto lists = generate_prosumers(sc.prosumers, sc.grid_prices);
    std::ofstream os(out);
    if (!os) throw InputError("cannot write " + out);
    os << "slot,start,source_id,cost_per_kwh,energy_kwh\n";
    for (size_t t = 0; t < lists.size(); ++t)
        for (const auto& src : lists[t])
            os << t << ',' << slot_timestamp(sc.grid, static_cast<int>(t)) << ','
               << src.source_id << ',' << src.cost_per_kwh.str() << ','
               << kwh_from_micro(src.energy) << '\n';
    std::cout << "status=ok slots=" << lists.size() << " out=" << out << '\n';
    return kExitOk;
}

int cmd_predict_gen(const std::string& scenario, const std::string& out) {
    const Scenario sc = load_scenario(scenario);
    std::ofstream os(out);
    if (!os) throw InputError("cannot write " + out);
    os << "slot,start,wind_w,pv_w,wind_energy_kwh,pv_energy_kwh,wind_cost_per_kwh,"
          "pv_cost_per_kwh\n";
    for (int t = 0; t < sc.grid.horizon_slots; ++t) {
        double wind_w = 0.0, pv_w = 0.0;
        if (sc.turbine) {
            const double rho = air_density_kg_m3(sc.weather[t].pressure_hpa,
                                                 sc.weather[t].temperature_k(),
                                                 sc.weather[t].dew_point_c);
            wind_w = wind_power_w(*sc.turbine, rho, sc.weather[t].wind_speed_ms);
        }
        if (sc.panel)
            pv_w = pv_power_w(*sc.panel, sc.weather[t].dni_wm2, sc.weather[t].temperature_c);
        os << t << ',' << slot_timestamp(sc.grid, t) << ',' << wind_w << ',' << pv_w << ','
           << wind_w * sc.grid.slot_duration_hours / 1000.0 << ','
           << pv_w * sc.grid.slot_duration_hours / 1000.0 << ','
           << (sc.turbine ? std::to_string(sc.turbine->unit_cost_per_kwh) : "") << ','
           << (sc.panel ? std::to_string(sc.panel->unit_cost_per_kwh) : "") << '\n';
    }
    std::cout << "status=ok slots=" << sc.grid.horizon_slots << " out=" << out << '\n';
    return kExitOk;
}

int cmd_profile_device(const std::string& trace_path, int k, const std::string& out) {
    const PowerTrace trace = load_power_trace(trace_path);
    const auto states = cluster_power_states(trace, k);
    nlohmann::json doc;
    doc["device_id"] = trace.device_id;
    doc["samples"] = trace.samples.size();
    for (const auto& st : states)
        doc["states"].push_back({{"state_id", st.state_id}, {"power_w", st.power_w}});
    doc["boundaries_w"] = cluster_boundaries(states);
    if (out.empty()) {
        std::cout << doc.dump(2) << '\n';
    } else {
        std::ofstream os(out);
        if (!os) throw InputError("cannot write " + out);
        os << doc.dump(2) << '\n';
        std::cout << "status=ok states=" << states.size() << " out=" << out << '\n';
    }
    return kExitOk;
}

int cmd_bench(const std::string& matrix_path, const std::string& out) {
    const nlohmann::json doc = [&] {
        std::ifstream in(matrix_path);
        if (!in) throw InputError("cannot open " + matrix_path);
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(matrix_path + ": " + e.what());
        }
    }();
    const auto dir = std::filesystem::path(matrix_path).parent_path();

    std::vector<SolverVariant> variants;
    for (const auto& v : doc.value("variants", std::vector<std::string>{"memopt"})) {
        const auto variant = solver_variant_from_string(v);
        if (!variant) throw InputError(matrix_path + ": unknown variant '" + v + "'");
        variants.push_back(*variant);
    }
    std::vector<int> threads = doc.value("threads", std::vector<int>{1});
    const int iterations = doc.value("iterations", 10);
    SolveOptions base;
    base.merge_threshold = doc.value("merge_threshold", 64);
    base.node_budget = doc.value("node_budget", std::uint64_t{50'000'000});

    std::vector<BenchInstance> instances;
    std::vector<BenchRow> failures;
    for (const auto& js : doc.value("instances", std::vector<std::string>{})) {
        try {
            Scenario sc = load_scenario(dir / js);
            instances.push_back({sc.scenario_id, std::move(sc.problem)});
        } catch (const std::exception& e) {
            std::cerr << "instance " << js << " failed to load: " << e.what() << '\n';
            BenchRow row;
            row.instance_id = js;
            row.status = SolveStatus::refused;
            failures.push_back(std::move(row));
        }
    }

    auto rows = run_benchmark(instances, variants, threads, iterations, base);
    rows.insert(rows.end(), failures.begin(), failures.end());
    std::ofstream os(out);
    if (!os) throw InputError("cannot write " + out);
    write_benchmark_csv(os, rows);
    std::cout << "status=ok rows=" << rows.size() << " out=" << out << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Day-ahead device scheduling under dynamic prices, local generation and "
                 "battery storage"};
    app.require_subcommand(1);

    ScheduleArgs sargs;
    auto* sched = app.add_subcommand("schedule", "Compute the optimal day-ahead schedule");
    sched->add_option("--scenario", sargs.scenario, "Scenario JSON file")->required();
    sched->add_option("--solver", sargs.solver, "oracle|sequential|memopt|parallel");
    sched->add_option("--threads", sargs.threads, "Worker count for the parallel solver");
    sched->add_option("--seed", sargs.seed, "Override the prosumer RNG seed");
    sched->add_option("--out", sargs.out, "Schedule JSON output path");
    sched->add_flag("--no-battery", sargs.no_battery, "Drop the battery from the problem");
    sched->add_option("--merge-threshold", sargs.merge_threshold,
                      "Local frontier size that triggers a merge");
    sched->add_option("--node-budget", sargs.node_budget, "Expansion budget");

    std::string v_scenario;
    auto* validate = app.add_subcommand("validate", "Check a scenario against the invariants");
    validate->add_option("--scenario", v_scenario, "Scenario JSON file")->required();

    std::string gp_scenario, gp_out = "prosumers.csv";
    std::optional<std::uint64_t> gp_seed;
    auto* genp = app.add_subcommand("gen-prosumers", "Synthesize prosumer offers per slot");
    genp->add_option("--scenario", gp_scenario, "Scenario JSON file")->required();
    genp->add_option("--seed", gp_seed, "Override the prosumer RNG seed");
    genp->add_option("--out", gp_out, "CSV output path");

    std::string pg_scenario, pg_out = "generation.csv";
    auto* predict = app.add_subcommand("predict-gen", "Predict wind and PV output per slot");
    predict->add_option("--scenario", pg_scenario, "Scenario JSON file")->required();
    predict->add_option("--out", pg_out, "CSV output path");

    std::string pd_trace, pd_out;
    int pd_k = 2;
    auto* profile =
        app.add_subcommand("profile-device", "Cluster a power trace into device states");
    profile->add_option("--trace", pd_trace, "Trace CSV (timestamp,watts)")->required();
    profile->add_option("--k", pd_k, "Cluster count");
    profile->add_option("--out", pd_out, "JSON output path (stdout when omitted)");

    std::string b_matrix, b_out = "bench.csv";
    auto* bench = app.add_subcommand("bench", "Run the benchmark matrix");
    bench->add_option("--matrix", b_matrix, "Matrix JSON file")->required();
    bench->add_option("--out", b_out, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sched->parsed()) return cmd_schedule(sargs);
        if (validate->parsed()) return cmd_validate(v_scenario);
        if (genp->parsed()) return cmd_gen_prosumers(gp_scenario, gp_seed, gp_out);
        if (predict->parsed()) return cmd_predict_gen(pg_scenario, pg_out);
        if (profile->parsed()) return cmd_profile_device(pd_trace, pd_k, pd_out);
        if (bench->parsed()) return cmd_bench(b_matrix, b_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitOk;
}
