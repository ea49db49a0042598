#include "gridsched/dispatch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gridsched {

SlotAllocation slot_cost(std::span<const EnergySource> sources, MicroKwh demand) {
    if (demand < 0) throw std::invalid_argument("negative demand");

    std::vector<int> order(sources.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (sources[a].cost_per_kwh != sources[b].cost_per_kwh)
            return sources[a].cost_per_kwh < sources[b].cost_per_kwh;
        return sources[a].source_id < sources[b].source_id;
    });

    SlotAllocation alloc;
    alloc.drawn.assign(sources.size(), 0);
    MicroKwh remaining = demand;
    __int128 cost_sum = 0;
    for (int i : order) {
        if (remaining == 0) break;
        const MicroKwh take =
            sources[i].unbounded ? remaining : std::min(remaining, sources[i].energy);
        if (take <= 0) continue;
        alloc.drawn[i] = take;
        cost_sum += static_cast<__int128>(sources[i].cost_per_kwh.micro()) * take;
        remaining -= take;
    }
    if (remaining > 0)
        throw std::runtime_error("slot demand exceeds available energy and no unbounded source");
    alloc.unserved = remaining;
    alloc.slot_cost = Money::from_micro(static_cast<std::int64_t>((cost_sum + 500000) / 1000000));
    return alloc;
}

MicroKwh net_demand(MicroKwh device_energy, BatteryAction action, MicroKwh battery_flow) {
    switch (action) {
    case BatteryAction::charge: return device_energy + battery_flow;
    case BatteryAction::discharge: return std::max<MicroKwh>(0, device_energy - battery_flow);
    case BatteryAction::idle: break;
    }
    return device_energy;
}

} // namespace gridsched
