#pragma once

#include <span>
#include <vector>

#include "gridsched/domain.hpp"

namespace gridsched {

// Result of allocating one slot's demand across its sources.
struct SlotAllocation {
    std::vector<MicroKwh> drawn; // parallel to the source list
    Money slot_cost;
    MicroKwh unserved = 0; // nonzero only without an unbounded source
};

// Merit-order allocation: sources ascending by (cost, source_id), demand
// filled greedily. The cost sum is accumulated in 128-bit and rounded to a
// micro-unit once, so equal inputs give bit-equal costs. Throws
// std::invalid_argument on negative demand and std::runtime_error when the
// demand cannot be served (no unbounded source and too little energy).
SlotAllocation slot_cost(std::span<const EnergySource> sources, MicroKwh demand);

// Demand seen by the sources: device load plus battery charge draw minus
// battery discharge, floored at 0 (surplus discharge is forfeited, there is
// no export).
MicroKwh net_demand(MicroKwh device_energy, BatteryAction action, MicroKwh battery_flow);

} // namespace gridsched
