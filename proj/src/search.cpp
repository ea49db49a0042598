#include "gridsched/search.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <queue>
#include <stdexcept>

#include "gridsched/dispatch.hpp"
#include "search_core.hpp"

namespace gridsched {

using namespace detail;

const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::budget_exceeded: return "budget-exceeded";
    case SolveStatus::refused: return "refused";
    }
    return "?";
}

namespace detail {

CompiledProblem CompiledProblem::compile(const ScheduleProblem& problem) {
    const auto report = validate_problem(problem);
    if (!report.ok())
        throw std::invalid_argument("invalid problem: " + report.violations.front().where +
                                    ": " + report.violations.front().message);

    CompiledProblem cp;
    cp.src = &problem;
    cp.horizon = problem.grid.horizon_slots;
    cp.n_devices = static_cast<int>(problem.devices.size());
    cp.has_battery = problem.battery.has_value();
    if (cp.has_battery) cp.battery = BatteryEngine::compile(*problem.battery, problem.grid);

    std::vector<PolicyTracker> all_trackers;
    all_trackers.reserve(problem.devices.size());
    for (int i = 0; i < cp.n_devices; ++i) {
        const auto& dev = problem.devices[i];
        all_trackers.emplace_back(dev.policy, dev, problem.grid);
        switch (dev.policy.kind()) {
        case PolicyKind::total:
        case PolicyKind::continuous:
        case PolicyKind::repeat:
        case PolicyKind::multiple:
            cp.tracked.push_back({i, all_trackers.back()});
            break;
        default: break; // strict/pattern/sleep become forced states
        }
    }
    cp.n_digests = static_cast<int>(cp.tracked.size());
    cp.dominance_possible = cp.n_digests <= kMaxDigests;

    // per-device per-state slot energy
    std::vector<std::vector<MicroKwh>> energy(cp.n_devices);
    for (int i = 0; i < cp.n_devices; ++i)
        for (const auto& st : problem.devices[i].states)
            energy[i].push_back(
                micro_kwh_from_power(st.power_w, problem.grid.slot_duration_hours));

    const int n_actions = cp.has_battery ? 3 : 1;
    cp.depths.resize(cp.horizon);
    std::vector<int> free_devices;
    for (int d = 0; d < cp.horizon; ++d) {
        auto& dt = cp.depths[d];
        free_devices.clear();
        std::vector<int> forced(cp.n_devices, -1);
        int combos = n_actions;
        for (int i = 0; i < cp.n_devices; ++i) {
            forced[i] = all_trackers[i].forced_state(d);
            if (forced[i] < 0) {
                free_devices.push_back(i);
                combos *= static_cast<int>(problem.devices[i].states.size());
            }
        }
        if (combos > 0xffff)
            throw std::invalid_argument("more than 65535 branch combinations per slot");
        dt.n_combos = combos;
        dt.states.resize(static_cast<size_t>(combos) * cp.n_devices);
        dt.actions.resize(combos);
        dt.edge_cost.resize(combos);

        for (int c = 0; c < combos; ++c) {
            // battery action is the fastest-varying digit so that siblings
            // differing only in battery action sit next to each other with
            // idle first
            int rest = c;
            const auto action = static_cast<BatteryAction>(rest % n_actions);
            rest /= n_actions;
            std::uint8_t* row = dt.states.data() + static_cast<size_t>(c) * cp.n_devices;
            for (int i = 0; i < cp.n_devices; ++i)
                row[i] = static_cast<std::uint8_t>(std::max(forced[i], 0));
            for (auto it = free_devices.rbegin(); it != free_devices.rend(); ++it) {
                const int n = static_cast<int>(problem.devices[*it].states.size());
                row[*it] = static_cast<std::uint8_t>(rest % n);
                rest /= n;
            }
            dt.actions[c] = static_cast<std::uint8_t>(action);

            MicroKwh device_energy = 0;
            for (int i = 0; i < cp.n_devices; ++i) device_energy += energy[i][row[i]];
            const MicroKwh net =
                net_demand(device_energy, action, cp.has_battery ? cp.battery.flow(action) : 0);
            dt.edge_cost[c] = slot_cost(problem.sources_per_slot[d], net).slot_cost;
        }
    }
    return cp;
}

SolveResult finish_with_schedule(const CompiledProblem& cp,
                                 const std::vector<std::vector<int>>& state_idx,
                                 const std::vector<BatteryAction>& actions, SearchStats stats) {
    SolveResult res;
    res.status = SolveStatus::optimal;
    res.schedule = replay_schedule(*cp.src, state_idx, actions);
    res.stats = stats;
    return res;
}

} // namespace detail

// ---------------------------------------------------------------------------

Schedule replay_schedule(const ScheduleProblem& problem,
                         const std::vector<std::vector<int>>& state_idx,
                         const std::vector<BatteryAction>& battery_actions) {
    const int h = problem.grid.horizon_slots;
    const int nd = static_cast<int>(problem.devices.size());
    if (static_cast<int>(state_idx.size()) != h)
        throw std::invalid_argument("assignment matrix has wrong slot count");
    if (problem.battery && static_cast<int>(battery_actions.size()) != h)
        throw std::invalid_argument("battery action column has wrong slot count");

    Schedule s;
    for (const auto& dev : problem.devices) s.device_ids.push_back(dev.device_id);
    s.assignments.resize(h);
    s.per_slot_cost.resize(h);
    s.per_slot_demand.resize(h);
    if (problem.battery) s.battery_actions = battery_actions;

    BatteryEngine eng;
    MicroKwh charge = 0;
    if (problem.battery) {
        eng = BatteryEngine::compile(*problem.battery, problem.grid);
        charge = eng.initial;
        s.battery_trajectory.push_back(charge);
    }

    Money total;
    for (int t = 0; t < h; ++t) {
        if (static_cast<int>(state_idx[t].size()) != nd)
            throw std::invalid_argument("assignment row has wrong device count");
        MicroKwh device_energy = 0;
        s.assignments[t].resize(nd);
        for (int i = 0; i < nd; ++i) {
            const auto& dev = problem.devices[i];
            const int si = state_idx[t][i];
            if (si < 0 || si >= static_cast<int>(dev.states.size()))
                throw std::invalid_argument("state index out of range for " + dev.device_id);
            s.assignments[t][i] = dev.states[si].state_id;
            device_energy +=
                micro_kwh_from_power(dev.states[si].power_w, problem.grid.slot_duration_hours);
        }
        BatteryAction action = BatteryAction::idle;
        MicroKwh flow = 0;
        if (problem.battery) {
            action = battery_actions[t];
            flow = eng.flow(action);
            eng.step(charge, action);
            s.battery_trajectory.push_back(charge);
        }
        const MicroKwh net = net_demand(device_energy, action, flow);
        const auto alloc = slot_cost(problem.sources_per_slot[t], net);
        s.per_slot_cost[t] = alloc.slot_cost;
        s.per_slot_demand[t] =
            device_energy + (action == BatteryAction::charge ? flow : 0);
        total += alloc.slot_cost;
    }
    s.total_cost = total;
    return s;
}

Schedule replay_schedule_ids(const ScheduleProblem& problem,
                             const std::vector<std::vector<std::string>>& assignments,
                             const std::vector<BatteryAction>& battery_actions) {
    std::vector<std::vector<int>> idx(assignments.size());
    for (size_t t = 0; t < assignments.size(); ++t) {
        if (assignments[t].size() != problem.devices.size())
            throw std::invalid_argument("assignment row has wrong device count");
        idx[t].resize(assignments[t].size());
        for (size_t i = 0; i < assignments[t].size(); ++i) {
            const int si = problem.devices[i].state_index(assignments[t][i]);
            if (si < 0)
                throw std::invalid_argument("unknown state_id '" + assignments[t][i] + "'");
            idx[t][i] = si;
        }
    }
    return replay_schedule(problem, idx, battery_actions);
}

// ---------------------------------------------------------------------------
// Brute-force oracle: depth-first enumeration of the full cross product,
// narrowed only by hard battery-capacity bounds. Policies are checked on
// complete columns through the public satisfied() predicate, keeping this
// path independent of the incremental trackers the searches use.

SolveResult solve_oracle(const ScheduleProblem& problem) {
    const auto report = validate_problem(problem);
    if (!report.ok())
        throw std::invalid_argument("invalid problem: " + report.violations.front().where +
                                    ": " + report.violations.front().message);

    SolveResult res;
    if (problem.devices.size() > 4 || problem.grid.horizon_slots > 8) {
        res.status = SolveStatus::refused;
        return res;
    }
    const auto t0 = std::chrono::steady_clock::now();

    const int h = problem.grid.horizon_slots;
    const int nd = static_cast<int>(problem.devices.size());
    const bool has_battery = problem.battery.has_value();
    const int n_actions = has_battery ? 3 : 1;
    BatteryEngine eng;
    if (has_battery) eng = BatteryEngine::compile(*problem.battery, problem.grid);

    int combos = n_actions;
    for (const auto& dev : problem.devices) combos *= static_cast<int>(dev.states.size());

    // per (slot, combo): decoded states, action, edge cost
    std::vector<std::vector<Money>> cost(h, std::vector<Money>(combos));
    std::vector<std::vector<int>> decode(combos, std::vector<int>(nd));
    std::vector<BatteryAction> action_of(combos);
    std::vector<MicroKwh> device_energy(combos, 0);
    for (int c = 0; c < combos; ++c) {
        int rest = c;
        action_of[c] = static_cast<BatteryAction>(rest % n_actions);
        rest /= n_actions;
        for (int i = nd - 1; i >= 0; --i) {
            const int n = static_cast<int>(problem.devices[i].states.size());
            decode[c][i] = rest % n;
            rest /= n;
        }
        for (int i = 0; i < nd; ++i)
            device_energy[c] += micro_kwh_from_power(problem.devices[i].states[decode[c][i]].power_w,
                                                     problem.grid.slot_duration_hours);
    }
    for (int t = 0; t < h; ++t)
        for (int c = 0; c < combos; ++c) {
            const MicroKwh net = net_demand(device_energy[c], action_of[c],
                                            has_battery ? eng.flow(action_of[c]) : 0);
            cost[t][c] = slot_cost(problem.sources_per_slot[t], net).slot_cost;
        }

    // DFS state
    std::vector<int> chosen(h, 0);
    std::vector<Money> cost_prefix(h + 1);
    std::vector<MicroKwh> charge_prefix(h + 1);
    charge_prefix[0] = has_battery ? eng.initial : 0;
    std::vector<std::vector<std::string>> columns(nd, std::vector<std::string>(h));

    bool found = false;
    Money best_cost;
    std::vector<std::vector<int>> best_assign;
    std::vector<BatteryAction> best_actions;
    std::uint64_t leaves = 0;

    int depth = 0;
    chosen[0] = -1;
    while (depth >= 0) {
        if (++chosen[depth] >= combos) {
            --depth;
            continue;
        }
        const int c = chosen[depth];
        if (has_battery) {
            MicroKwh ch = charge_prefix[depth];
            if (!eng.step(ch, action_of[c])) continue; // capacity bound, hard constraint
            charge_prefix[depth + 1] = ch;
        }
        cost_prefix[depth + 1] = cost_prefix[depth] + cost[depth][c];
        for (int i = 0; i < nd; ++i)
            columns[i][depth] = problem.devices[i].states[decode[c][i]].state_id;

        if (depth + 1 < h) {
            ++depth;
            chosen[depth] = -1;
            continue;
        }

        ++leaves;
        if (has_battery && !eng.end_ok(charge_prefix[h])) continue;
        if (found && cost_prefix[h] >= best_cost) continue; // first-found wins ties
        bool ok = true;
        for (int i = 0; ok && i < nd; ++i)
            ok = satisfied(problem.devices[i].policy, columns[i], problem.grid);
        if (!ok) continue;
        found = true;
        best_cost = cost_prefix[h];
        best_assign.assign(h, std::vector<int>(nd));
        best_actions.assign(h, BatteryAction::idle);
        for (int t = 0; t < h; ++t) {
            best_assign[t] = decode[chosen[t]];
            best_actions[t] = action_of[chosen[t]];
        }
    }

    res.stats.nodes_expanded = leaves;
    res.stats.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!found) {
        res.status = SolveStatus::infeasible;
        return res;
    }
    res.status = SolveStatus::optimal;
    res.schedule = replay_schedule(problem, best_assign, best_actions);
    assert(res.schedule->total_cost == best_cost);
    return res;
}

// ---------------------------------------------------------------------------

namespace {

struct SequentialFrontier {
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCompare> heap;
};

} // namespace

SolveResult solve_sequential(const ScheduleProblem& problem, const SolveOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    const CompiledProblem cp = CompiledProblem::compile(problem);
    const bool fat_nodes = !options.memory_optimized;
    const bool use_dominance = options.use_dominance && cp.dominance_possible;

    NodeStore store(cp.n_digests);
    // the non-optimized variant copies the whole assignment prefix into
    // every node instead of chasing parent links
    std::vector<std::vector<std::uint16_t>> prefixes;

    SequentialFrontier frontier;
    DomMap seen;
    SearchStats stats;

    const std::array<std::uint64_t, kMaxDigests> zero_digests{};
    Node root{};
    root.cost = Money{};
    root.battery = cp.has_battery ? cp.battery.initial : 0;
    root.parent = pack_ref(0, kNoParent);
    root.depth = 0;
    const std::uint32_t root_idx = store.nodes.append(&root);
    store.digests.append(zero_digests.data());
    if (fat_nodes) prefixes.emplace_back();
    frontier.heap.push({root.cost, 0, root_idx, pack_ref(0, root_idx)});
    if (use_dominance)
        seen.emplace(make_key(cp, 0, root.battery, zero_digests.data()), root.cost);
    stats.nodes_generated = 1;

    Money last_pop;
    bool popped_any = false;
    ChildScratch scratch;

    auto elapsed_ms = [&t0]() {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    while (!frontier.heap.empty()) {
        const HeapEntry top = frontier.heap.top();
        frontier.heap.pop();
        const std::uint32_t idx = ref_index(top.ref);
        const Node node = *store.nodes.row(idx);
        const std::uint64_t* node_digests = store.digests.row(idx);

        if (popped_any && top.cost < last_pop) stats.pop_costs_monotone = false;
        last_pop = top.cost;
        popped_any = true;

        if (use_dominance) {
            const auto it = seen.find(make_key(cp, node.depth, node.battery, node_digests));
            if (it != seen.end() && it->second < node.cost) {
                ++stats.nodes_pruned_dominance;
                continue;
            }
        }

        if (node.depth == cp.horizon) {
            // goal: every tracker advance succeeded through the last slot and
            // the battery end constraint is folded into end_reachable
            std::vector<std::vector<int>> assign(cp.horizon, std::vector<int>(cp.n_devices));
            std::vector<BatteryAction> actions(cp.horizon, BatteryAction::idle);
            if (fat_nodes) {
                const auto& pre = prefixes[idx];
                for (int t = 0; t < cp.horizon; ++t) {
                    const auto& dt = cp.depths[t];
                    const std::uint8_t* row =
                        dt.states.data() + static_cast<size_t>(pre[t]) * cp.n_devices;
                    for (int i = 0; i < cp.n_devices; ++i) assign[t][i] = row[i];
                    actions[t] = static_cast<BatteryAction>(dt.actions[pre[t]]);
                }
            } else {
                std::uint32_t cur = idx;
                for (int t = cp.horizon - 1; t >= 0; --t) {
                    const Node* n = store.nodes.row(cur);
                    const auto& dt = cp.depths[t];
                    const std::uint8_t* row =
                        dt.states.data() + static_cast<size_t>(n->combo) * cp.n_devices;
                    for (int i = 0; i < cp.n_devices; ++i) assign[t][i] = row[i];
                    actions[t] = static_cast<BatteryAction>(dt.actions[n->combo]);
                    cur = ref_index(n->parent);
                }
            }
            stats.duration_ms = elapsed_ms();
            auto res = finish_with_schedule(cp, assign, actions, stats);
            assert(res.schedule->total_cost == node.cost);
            return res;
        }

        if (stats.nodes_expanded >= options.node_budget) {
            SolveResult res;
            res.status = SolveStatus::budget_exceeded;
            res.best_bound = top.cost; // frontier minimum
            stats.duration_ms = elapsed_ms();
            res.stats = stats;
            return res;
        }
        ++stats.nodes_expanded;

        const auto& dt = cp.depths[node.depth];
        for (int c = 0; c < dt.n_combos; ++c) {
            if (!evaluate_child(cp, node, node_digests, c, scratch)) {
                ++stats.nodes_pruned_policy;
                continue;
            }
            const int child_depth = node.depth + 1;
            if (use_dominance) {
                const auto key = make_key(cp, child_depth, scratch.battery,
                                          scratch.digests.data());
                const auto [it, inserted] = seen.try_emplace(key, scratch.cost);
                if (!inserted) {
                    if (it->second <= scratch.cost) {
                        ++stats.nodes_pruned_dominance;
                        continue;
                    }
                    it->second = scratch.cost; // replace: keep the cheaper path
                }
            }
            Node child;
            child.cost = scratch.cost;
            child.battery = scratch.battery;
            child.parent = pack_ref(0, idx);
            child.combo = static_cast<std::uint16_t>(c);
            child.depth = static_cast<std::uint16_t>(child_depth);
            const std::uint32_t child_idx = store.nodes.append(&child);
            store.digests.append(scratch.digests.data());
            if (fat_nodes) {
                auto pre = prefixes[idx];
                pre.push_back(static_cast<std::uint16_t>(c));
                prefixes.push_back(std::move(pre));
            }
            frontier.heap.push({child.cost, static_cast<std::uint16_t>(child_depth), child_idx,
                                pack_ref(0, child_idx)});
            ++stats.nodes_generated;
        }
    }

    SolveResult res;
    res.status = SolveStatus::infeasible;
    stats.duration_ms = elapsed_ms();
    res.stats = stats;
    return res;
}

} // namespace gridsched
