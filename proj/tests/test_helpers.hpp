#pragma once

// Shared builders for small synthetic problems used across the test files.

#include <random>
#include <string>
#include <vector>

#include "gridsched/domain.hpp"

namespace gridsched::testing {

inline DeviceState st(std::string id, double w) { return {std::move(id), w}; }

inline DeviceSpec two_state_device(std::string id, double off_w, double on_w, Policy policy) {
    DeviceSpec d;
    d.device_id = std::move(id);
    d.states = {{"S0", off_w}, {"S1", on_w}};
    d.policy = std::move(policy);
    return d;
}

inline Policy total_policy(std::string target, int n) {
    return {"p_total", TotalPolicy{std::move(target), n}};
}

inline EnergySource grid_source(double cost_per_kwh) {
    return {"grid", SourceKind::grid, Money::from_units(cost_per_kwh), 0, true};
}

inline EnergySource finite_source(std::string id, SourceKind kind, double cost_per_kwh,
                                  double kwh) {
    return {std::move(id), kind, Money::from_units(cost_per_kwh), micro_kwh_from_kwh(kwh),
            false};
}

// A minimal well-formed problem: `n_devices` two-state devices under Total
// policies and a flat grid price.
inline ScheduleProblem simple_problem(int n_devices, int horizon, double grid_price = 0.50) {
    ScheduleProblem p;
    p.grid = {horizon, 0.25, "2022-02-08T00:00:00Z"};
    for (int i = 0; i < n_devices; ++i)
        p.devices.push_back(two_state_device("dev" + std::to_string(i), 0.0, 100.0 * (i + 1),
                                             total_policy("S1", 1)));
    p.sources_per_slot.assign(horizon, {grid_source(grid_price)});
    return p;
}

// Deterministic generator for randomized sweeps. Produces problems small
// enough for the enumeration oracle: the full cross product is capped.
struct RandomInstanceConfig {
    int max_devices = 3;
    int max_horizon = 8;
    int max_extra_sources = 2;
    bool allow_battery = true;
    double max_leaves = 1.5e6;
};

ScheduleProblem random_instance(std::mt19937_64& rng, const RandomInstanceConfig& cfg = {});

} // namespace gridsched::testing
