#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridsched/domain.hpp"

namespace gridsched {

// True iff the complete column obeys the policy. Battery policies expect a
// column of action names (idle/charge/discharge).
bool satisfied(const Policy& policy, std::span<const std::string> device_column,
               const TimeGrid& grid);

// Sound pruning predicate: false only when no completion of the prefix can
// satisfy the policy.
bool prefix_viable(const Policy& policy, std::span<const std::string> device_prefix,
                   const TimeGrid& grid);

struct BatteryFeasibility {
    bool viable = false;
    std::vector<MicroKwh> trajectory; // boundaries 0..k, micro-kWh
    std::vector<double> trajectory_kwh() const;
};

// Steps the charge through the action prefix. Viable iff every boundary
// stays inside [capacity_min, capacity_max], the end-equals-start target is
// still reachable with the remaining slots, and, on full-horizon columns
// with enforce_end_equals_start, the final charge equals the initial one
// exactly.
BatteryFeasibility battery_feasible(const BatterySpec& spec,
                                    std::span<const BatteryAction> action_prefix,
                                    const TimeGrid& grid);

// ---------------------------------------------------------------------------
// Incremental machinery shared by prefix_viable and the search kernel.

// Integer battery arithmetic. Quantization to micro-kWh happens once here;
// every later comparison (bounds, end-equals-start, dominance keys) is
// integer-exact.
struct BatteryEngine {
    MicroKwh cap_min = 0;
    MicroKwh cap_max = 0;
    MicroKwh initial = 0;
    MicroKwh charge_delta = 0;    // stored charge gained per charge slot
    MicroKwh discharge_delta = 0; // stored charge lost per discharge slot
    MicroKwh charge_flow = 0;     // demand added per charge slot
    MicroKwh discharge_flow = 0;  // demand offset per discharge slot
    bool enforce_end = false;
    int horizon = 0;

    static BatteryEngine compile(const BatterySpec& spec, const TimeGrid& grid);

    // Applies one action; false if the new charge leaves the capacity band.
    bool step(MicroKwh& charge, BatteryAction a) const;
    // False when the remaining slots cannot bring the charge back to the
    // initial value (only binds with enforce_end).
    bool end_reachable(MicroKwh charge, int slots_done) const;
    bool end_ok(MicroKwh charge) const { return !enforce_end || charge == initial; }
    MicroKwh flow(BatteryAction a) const {
        return a == BatteryAction::charge ? charge_flow
               : a == BatteryAction::discharge ? discharge_flow
                                               : 0;
    }
};

// Per-device policy progress digest: the minimal statistic that decides
// whether a prefix can still be completed. Two prefixes with equal depth and
// equal digests are interchangeable for the rest of the search.
class PolicyTracker {
public:
    // Throws std::invalid_argument for repeat periods wider than 65 slots;
    // the rolling-window digest is a single 64-bit word. validate_problem
    // reports the same limit.
    PolicyTracker(const Policy& policy, const DeviceSpec& device, const TimeGrid& grid);

    std::uint64_t initial_digest() const { return 0; }

    // Extends the prefix by one slot (slot index == slots_done). Returns
    // false when the new prefix is dead, i.e. no completion satisfies the
    // policy; on true the digest is updated in place. Calling this for every
    // slot of a full column makes a final completeness check unnecessary:
    // the last advance already requires the remainder to be coverable by
    // zero slots.
    bool advance(std::uint64_t& digest, int state_idx, int slots_done) const;

    // Forced state at this depth (strict/pattern always, sleep inside its
    // window), or -1 when the device may branch.
    int forced_state(int slots_done) const;

private:
    PolicyKind kind_;
    int horizon_ = 0;
    int target_ = -1;
    int required_ = 0;  // total/continuous
    int slots_on_ = 0, period_ = 1; // repeat
    int job_count_ = 0, job_len_ = 1; // multiple
    int win_start_ = 0, win_end_ = 0; // sleep
    std::vector<int> forced_column_;  // strict/pattern
    std::uint64_t window_mask_ = 0; // repeat: covers period-1 recent slots
};

} // namespace gridsched
