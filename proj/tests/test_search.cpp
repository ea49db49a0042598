#include <doctest.h>

#include <stdexcept>

#include <random>

#include "gridsched/search.hpp"
#include "test_helpers.hpp"

using namespace gridsched;
using namespace gridsched::testing;

namespace {

ScheduleProblem cheap_then_expensive() {
    ScheduleProblem p;
    p.grid = {2, 0.25, ""};
    p.devices.push_back(two_state_device("d", 0.0, 100.0, total_policy("S1", 1)));
    p.sources_per_slot = {{grid_source(0.10)}, {grid_source(0.90)}};
    return p;
}

void check_battery_invariants(const ScheduleProblem& problem, const Schedule& s) {
    if (!problem.battery) {
        CHECK(s.battery_trajectory.empty());
        return;
    }
    const auto& b = *problem.battery;
    REQUIRE(s.battery_trajectory.size() == s.assignments.size() + 1);
    const MicroKwh lo = micro_kwh_from_kwh(b.capacity_min_kwh);
    const MicroKwh hi = micro_kwh_from_kwh(b.capacity_max_kwh);
    for (MicroKwh c : s.battery_trajectory) {
        CHECK(c >= lo);
        CHECK(c <= hi);
    }
    if (b.enforce_end_equals_start)
        CHECK(s.battery_trajectory.front() == s.battery_trajectory.back());
}

void check_replay_exact(const ScheduleProblem& problem, const Schedule& s) {
    const Schedule replayed =
        replay_schedule_ids(problem, s.assignments, s.battery_actions);
    CHECK(replayed.total_cost == s.total_cost);
    CHECK(replayed.per_slot_cost == s.per_slot_cost);
    CHECK(replayed.per_slot_demand == s.per_slot_demand);
    CHECK(replayed.battery_trajectory == s.battery_trajectory);
}

} // namespace

TEST_CASE("oracle worked examples") {
    SUBCASE("single device runs in the cheap slot") {
        const auto res = solve_oracle(cheap_then_expensive());
        REQUIRE(res.status == SolveStatus::optimal);
        CHECK(res.schedule->assignments[0][0] == "S1");
        CHECK(res.schedule->assignments[1][0] == "S0");
        // 0.025 kWh at 0.10 -> 0.0025
        CHECK(res.schedule->total_cost == Money::from_units(0.0025));
    }
    SUBCASE("pattern-fixed problems have a unique schedule") {
        ScheduleProblem p;
        p.grid = {3, 0.25, ""};
        DeviceSpec dev = two_state_device("d", 5.0, 50.0, {"p", PatternPolicy{{"S1", "S0", "S1"}}});
        p.devices.push_back(dev);
        p.sources_per_slot.assign(3, {grid_source(0.42)});
        const auto res = solve_oracle(p);
        REQUIRE(res.status == SolveStatus::optimal);
        CHECK(res.schedule->assignments[0][0] == "S1");
        CHECK(res.schedule->assignments[1][0] == "S0");
        CHECK(res.schedule->assignments[2][0] == "S1");
    }
    SUBCASE("unsatisfiable policies are infeasible") {
        ScheduleProblem p;
        p.grid = {3, 0.25, ""};
        DeviceSpec d = two_state_device("d", 0.0, 100.0, {"p", SleepPolicy{"S0", 0, 3}});
        p.devices.push_back(d); // pinned off throughout, satisfiable alone
        // two 2-slot jobs plus a separator need 5 slots, horizon has 3
        p.devices.push_back(
            two_state_device("e", 0.0, 100.0, {"q", MultiplePolicy{"S1", 2, 2}}));
        p.sources_per_slot.assign(3, {grid_source(0.42)});
        CHECK(solve_oracle(p).status == SolveStatus::infeasible);
        CHECK(solve_sequential(p).status == SolveStatus::infeasible);
        CHECK(solve_parallel(p).status == SolveStatus::infeasible);
    }
    SUBCASE("size guard refuses big instances") {
        CHECK(solve_oracle(simple_problem(5, 4)).status == SolveStatus::refused);
        CHECK(solve_oracle(simple_problem(2, 9)).status == SolveStatus::refused);
    }
}

TEST_CASE("sequential matches the oracle and itself") {
    SUBCASE("zero-cost sources give a zero-cost schedule") {
        auto p = simple_problem(2, 4, 0.0);
        const auto res = solve_sequential(p);
        REQUIRE(res.status == SolveStatus::optimal);
        CHECK(res.schedule->total_cost == Money{});
        CHECK(res.stats.pop_costs_monotone);
    }
    SUBCASE("budget exhaustion reports the frontier bound") {
        auto p = simple_problem(3, 8);
        SolveOptions opt;
        opt.node_budget = 3;
        const auto res = solve_sequential(p, opt);
        CHECK(res.status == SolveStatus::budget_exceeded);
        REQUIRE(res.best_bound.has_value());
        const auto full = solve_sequential(p);
        REQUIRE(full.status == SolveStatus::optimal);
        CHECK(*res.best_bound <= full.schedule->total_cost);
    }
}

TEST_CASE("solver equivalence sweep") {
    std::mt19937_64 rng(20220205);
    RandomInstanceConfig cfg;
    cfg.max_leaves = 2e5; // keep the unit suite quick
    int optimal = 0, infeasible = 0;

    for (int trial = 0; trial < 200; ++trial) {
        const auto problem = random_instance(rng, cfg);
        CAPTURE(trial);
        const auto oracle = solve_oracle(problem);
        REQUIRE(oracle.status != SolveStatus::refused);

        const auto seq = [&] {
            SolveOptions o;
            o.memory_optimized = false;
            return solve_sequential(problem, o);
        }();
        const auto memopt = solve_sequential(problem);
        CHECK(seq.status == oracle.status);
        CHECK(memopt.status == oracle.status);
        CHECK(memopt.stats.pop_costs_monotone);
        // identical expansion order by construction
        CHECK(seq.stats.nodes_expanded == memopt.stats.nodes_expanded);
        CHECK(seq.stats.nodes_generated == memopt.stats.nodes_generated);

        if (oracle.status == SolveStatus::optimal) {
            ++optimal;
            CHECK(seq.schedule->total_cost == oracle.schedule->total_cost);
            CHECK(memopt.schedule->total_cost == oracle.schedule->total_cost);
            check_replay_exact(problem, *memopt.schedule);
            check_battery_invariants(problem, *memopt.schedule);
            check_battery_invariants(problem, *oracle.schedule);
        } else {
            ++infeasible;
        }

        if (trial % 4 == 0) {
            for (int threads : {1, 2, 4}) {
                SolveOptions o;
                o.threads = threads;
                const auto par = solve_parallel(problem, o);
                CHECK(par.status == oracle.status);
                if (oracle.status == SolveStatus::optimal) {
                    CHECK(par.schedule->total_cost == oracle.schedule->total_cost);
                    check_replay_exact(problem, *par.schedule);
                    check_battery_invariants(problem, *par.schedule);
                }
            }
        }
    }
    // the generator should produce a healthy mix
    CHECK(optimal > 50);
    CHECK(infeasible > 10);
}

TEST_CASE("dominance pruning is sound and only ever helps") {
    std::mt19937_64 rng(77);
    RandomInstanceConfig cfg;
    cfg.max_leaves = 5e4;
    for (int trial = 0; trial < 60; ++trial) {
        const auto problem = random_instance(rng, cfg);
        CAPTURE(trial);
        SolveOptions with;
        SolveOptions without;
        without.use_dominance = false;
        const auto a = solve_sequential(problem, with);
        const auto b = solve_sequential(problem, without);
        CHECK(a.status == b.status);
        if (a.status == SolveStatus::optimal)
            CHECK(a.schedule->total_cost == b.schedule->total_cost);
        CHECK(a.stats.nodes_expanded <= b.stats.nodes_expanded);
    }
}

TEST_CASE("parallel variants agree across thread counts and merge modes") {
    std::mt19937_64 rng(555);
    RandomInstanceConfig cfg;
    cfg.max_leaves = 5e4;
    for (int trial = 0; trial < 25; ++trial) {
        const auto problem = random_instance(rng, cfg);
        CAPTURE(trial);
        const auto base = solve_sequential(problem);

        for (int threads : {1, 3}) {
            SolveOptions o;
            o.threads = threads;
            o.merge_threshold = trial % 2 == 0 ? 64 : 4;
            o.merge_when_below_threshold = trial % 3 == 0;
            const auto par = solve_parallel(problem, o);
            CHECK(par.status == base.status);
            if (base.status == SolveStatus::optimal)
                CHECK(par.schedule->total_cost == base.schedule->total_cost);
        }
    }
}

TEST_CASE("reconstruction replays exactly") {
    SUBCASE("single forced slot") {
        ScheduleProblem p;
        p.grid = {1, 0.25, ""};
        p.devices.push_back(
            two_state_device("d", 3.0, 80.0, {"p", StrictPolicy{{"S1"}}}));
        p.sources_per_slot.assign(1, {grid_source(0.5)});
        const auto res = solve_sequential(p);
        REQUIRE(res.status == SolveStatus::optimal);
        CHECK(res.schedule->assignments.size() == 1);
        check_replay_exact(p, *res.schedule);
    }
    SUBCASE("battery end equals start on the returned schedule") {
        ScheduleProblem p = simple_problem(1, 6);
        // cheap early, expensive late invites one arbitrage cycle
        for (int t = 0; t < 6; ++t)
            p.sources_per_slot[t] = {grid_source(t < 3 ? 0.10 : 0.60)};
        BatterySpec b;
        b.capacity_max_kwh = 2.0;
        b.capacity_min_kwh = 0.0;
        b.charge_rate_max_w = 2000.0;
        b.discharge_rate_max_w = 2000.0;
        b.initial_charge_kwh = 0.0;
        b.enforce_end_equals_start = true;
        p.battery = b;
        const auto res = solve_sequential(p);
        REQUIRE(res.status == SolveStatus::optimal);
        check_battery_invariants(p, *res.schedule);
        check_replay_exact(p, *res.schedule);
    }
}
