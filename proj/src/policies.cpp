#include "gridsched/policies.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace gridsched {

namespace {

std::vector<int> to_indices(const DeviceSpec& dev, std::span<const std::string> column) {
    std::vector<int> out;
    out.reserve(column.size());
    for (const auto& sid : column) {
        const int i = dev.state_index(sid);
        if (i < 0) throw std::invalid_argument("unknown state_id '" + sid + "'");
        out.push_back(i);
    }
    return out;
}

// The predicates below take columns of state ids; policies only compare
// against their own target/vector ids, so no DeviceSpec is needed.
bool column_satisfied(const Policy& policy, std::span<const std::string> col,
                      const TimeGrid& grid) {
    const int h = grid.horizon_slots;
    switch (policy.kind()) {
    case PolicyKind::total: {
        const auto& p = std::get<TotalPolicy>(policy.params);
        return std::count(col.begin(), col.end(), p.target_state) == p.slots_required;
    }
    case PolicyKind::continuous: {
        const auto& p = std::get<ContinuousPolicy>(policy.params);
        int count = 0, runs = 0, run = 0, maxrun = 0;
        for (const auto& s : col) {
            if (s == p.target_state) {
                ++count;
                if (++run > maxrun) maxrun = run;
                if (run == 1) ++runs;
            } else {
                run = 0;
            }
        }
        if (p.slots_required == 0) return count == 0;
        return count == p.slots_required && runs == 1 && maxrun == p.slots_required;
    }
    case PolicyKind::repeat: {
        const auto& p = std::get<RepeatPolicy>(policy.params);
        for (int w = 0; w + p.period_slots <= h; ++w) {
            int c = 0;
            for (int j = w; j < w + p.period_slots; ++j)
                if (col[j] == p.target_state) ++c;
            if (c < p.slots_on) return false;
        }
        return true;
    }
    case PolicyKind::multiple: {
        const auto& p = std::get<MultiplePolicy>(policy.params);
        int runs = 0, run = 0;
        bool ok = true;
        for (const auto& s : col) {
            if (s == p.target_state) {
                ++run;
            } else if (run > 0) {
                ++runs;
                if (run != p.job_length_slots) ok = false;
                run = 0;
            }
        }
        if (run > 0) {
            ++runs;
            if (run != p.job_length_slots) ok = false;
        }
        return ok && runs == p.job_count;
    }
    case PolicyKind::strict:
    case PolicyKind::pattern: {
        const auto& vec = policy.kind() == PolicyKind::strict
                              ? std::get<StrictPolicy>(policy.params).state_per_slot
                              : std::get<PatternPolicy>(policy.params).state_per_slot;
        return std::equal(col.begin(), col.end(), vec.begin(), vec.end());
    }
    case PolicyKind::sleep: {
        const auto& p = std::get<SleepPolicy>(policy.params);
        for (int t = p.window_start_slot; t < p.window_end_slot && t < h; ++t)
            if (col[t] != p.target_state) return false;
        return true;
    }
    case PolicyKind::battery:
        break; // handled by the caller
    }
    return false;
}

} // namespace

bool satisfied(const Policy& policy, std::span<const std::string> device_column,
               const TimeGrid& grid) {
    if (static_cast<int>(device_column.size()) != grid.horizon_slots) return false;
    if (policy.kind() == PolicyKind::battery) {
        const auto& spec = std::get<BatteryPolicy>(policy.params).spec;
        std::vector<BatteryAction> actions;
        actions.reserve(device_column.size());
        for (const auto& s : device_column) {
            auto a = battery_action_from_string(s);
            if (!a) return false;
            actions.push_back(*a);
        }
        return battery_feasible(spec, actions, grid).viable;
    }
    return column_satisfied(policy, device_column, grid);
}

bool prefix_viable(const Policy& policy, std::span<const std::string> device_prefix,
                   const TimeGrid& grid) {
    if (static_cast<int>(device_prefix.size()) > grid.horizon_slots) return false;
    if (policy.kind() == PolicyKind::battery) {
        const auto& spec = std::get<BatteryPolicy>(policy.params).spec;
        std::vector<BatteryAction> actions;
        for (const auto& s : device_prefix) {
            auto a = battery_action_from_string(s);
            if (!a) return false;
            actions.push_back(*a);
        }
        return battery_feasible(spec, actions, grid).viable;
    }

    // A tracker needs state indices; build a synthetic device holding the
    // ids this policy mentions plus the ones in the prefix.
    DeviceSpec dev;
    auto ensure = [&dev](const std::string& sid) {
        if (dev.state_index(sid) < 0) dev.states.push_back({sid, 0.0});
    };
    for (const auto& s : device_prefix) ensure(s);
    switch (policy.kind()) {
    case PolicyKind::total: ensure(std::get<TotalPolicy>(policy.params).target_state); break;
    case PolicyKind::continuous:
        ensure(std::get<ContinuousPolicy>(policy.params).target_state);
        break;
    case PolicyKind::repeat: ensure(std::get<RepeatPolicy>(policy.params).target_state); break;
    case PolicyKind::multiple:
        ensure(std::get<MultiplePolicy>(policy.params).target_state);
        break;
    case PolicyKind::sleep: ensure(std::get<SleepPolicy>(policy.params).target_state); break;
    case PolicyKind::strict:
        for (const auto& s : std::get<StrictPolicy>(policy.params).state_per_slot) ensure(s);
        break;
    case PolicyKind::pattern:
        for (const auto& s : std::get<PatternPolicy>(policy.params).state_per_slot) ensure(s);
        break;
    case PolicyKind::battery: break;
    }
    dev.policy = policy;

    PolicyTracker tracker(policy, dev, grid);
    const auto idx = to_indices(dev, device_prefix);
    std::uint64_t digest = tracker.initial_digest();
    for (size_t t = 0; t < idx.size(); ++t)
        if (!tracker.advance(digest, idx[t], static_cast<int>(t))) return false;
    return true;
}

// ---------------------------------------------------------------------------

BatteryEngine BatteryEngine::compile(const BatterySpec& spec, const TimeGrid& grid) {
    BatteryEngine e;
    const double dt = grid.slot_duration_hours;
    e.cap_min = micro_kwh_from_kwh(spec.capacity_min_kwh);
    e.cap_max = micro_kwh_from_kwh(spec.capacity_max_kwh);
    e.initial = micro_kwh_from_kwh(spec.initial_charge_kwh);
    const double eta = spec.efficiency;
    const double charge_stored = spec.efficiency_mode == EfficiencyMode::paper_literal
                                     ? spec.charge_rate_max_w * dt / eta
                                     : spec.charge_rate_max_w * dt * eta;
    e.charge_delta = micro_kwh_from_power(charge_stored / dt, dt);
    e.discharge_delta = micro_kwh_from_power(spec.discharge_rate_max_w / eta, dt);
    e.charge_flow = micro_kwh_from_power(spec.charge_rate_max_w, dt);
    e.discharge_flow = micro_kwh_from_power(spec.discharge_rate_max_w, dt);
    e.enforce_end = spec.enforce_end_equals_start;
    e.horizon = grid.horizon_slots;
    return e;
}

bool BatteryEngine::step(MicroKwh& charge, BatteryAction a) const {
    switch (a) {
    case BatteryAction::charge: charge += charge_delta; break;
    case BatteryAction::discharge: charge -= discharge_delta; break;
    case BatteryAction::idle: break;
    }
    return charge >= cap_min && charge <= cap_max;
}

bool BatteryEngine::end_reachable(MicroKwh charge, int slots_done) const {
    if (!enforce_end) return true;
    const MicroKwh remaining = horizon - slots_done;
    if (charge > initial) return charge - initial <= remaining * discharge_delta;
    if (charge < initial) return initial - charge <= remaining * charge_delta;
    return true;
}

BatteryFeasibility battery_feasible(const BatterySpec& spec,
                                    std::span<const BatteryAction> action_prefix,
                                    const TimeGrid& grid) {
    const BatteryEngine eng = BatteryEngine::compile(spec, grid);
    BatteryFeasibility out;
    out.trajectory.reserve(action_prefix.size() + 1);
    MicroKwh charge = eng.initial;
    out.trajectory.push_back(charge);
    if (charge < eng.cap_min || charge > eng.cap_max) return out;
    int done = 0;
    for (BatteryAction a : action_prefix) {
        if (!eng.step(charge, a)) {
            out.trajectory.push_back(charge);
            return out;
        }
        out.trajectory.push_back(charge);
        ++done;
    }
    if (!eng.end_reachable(charge, done)) return out;
    if (done == grid.horizon_slots && !eng.end_ok(charge)) return out;
    out.viable = true;
    return out;
}

std::vector<double> BatteryFeasibility::trajectory_kwh() const {
    std::vector<double> out;
    out.reserve(trajectory.size());
    for (MicroKwh c : trajectory) out.push_back(kwh_from_micro(c));
    return out;
}

// ---------------------------------------------------------------------------

PolicyTracker::PolicyTracker(const Policy& policy, const DeviceSpec& device,
                             const TimeGrid& grid)
    : kind_(policy.kind()), horizon_(grid.horizon_slots) {
    auto resolve = [&device](const std::string& sid) {
        const int i = device.state_index(sid);
        if (i < 0)
            throw std::invalid_argument("policy target state '" + sid + "' not on device " +
                                        device.device_id);
        return i;
    };
    switch (kind_) {
    case PolicyKind::total: {
        const auto& p = std::get<TotalPolicy>(policy.params);
        target_ = resolve(p.target_state);
        required_ = p.slots_required;
        break;
    }
    case PolicyKind::continuous: {
        const auto& p = std::get<ContinuousPolicy>(policy.params);
        target_ = resolve(p.target_state);
        required_ = p.slots_required;
        break;
    }
    case PolicyKind::repeat: {
        const auto& p = std::get<RepeatPolicy>(policy.params);
        target_ = resolve(p.target_state);
        slots_on_ = p.slots_on;
        period_ = p.period_slots;
        if (period_ - 1 > 64)
            throw std::invalid_argument(
                "repeat period wider than 65 slots exceeds the window digest");
        if (period_ >= 2)
            window_mask_ = (period_ - 1 == 64) ? ~0ull : ((1ull << (period_ - 1)) - 1);
        break;
    }
    case PolicyKind::multiple: {
        const auto& p = std::get<MultiplePolicy>(policy.params);
        target_ = resolve(p.target_state);
        job_count_ = p.job_count;
        job_len_ = p.job_length_slots;
        break;
    }
    case PolicyKind::strict:
    case PolicyKind::pattern: {
        const auto& vec = kind_ == PolicyKind::strict
                              ? std::get<StrictPolicy>(policy.params).state_per_slot
                              : std::get<PatternPolicy>(policy.params).state_per_slot;
        forced_column_.reserve(vec.size());
        for (const auto& sid : vec) forced_column_.push_back(resolve(sid));
        break;
    }
    case PolicyKind::sleep: {
        const auto& p = std::get<SleepPolicy>(policy.params);
        target_ = resolve(p.target_state);
        win_start_ = p.window_start_slot;
        win_end_ = p.window_end_slot;
        break;
    }
    case PolicyKind::battery:
        throw std::invalid_argument("battery policies are tracked by the battery engine");
    }
}

int PolicyTracker::forced_state(int slots_done) const {
    switch (kind_) {
    case PolicyKind::strict:
    case PolicyKind::pattern:
        return slots_done < static_cast<int>(forced_column_.size()) ? forced_column_[slots_done]
                                                                    : -1;
    case PolicyKind::sleep:
        return slots_done >= win_start_ && slots_done < win_end_ ? target_ : -1;
    default: return -1;
    }
}

bool PolicyTracker::advance(std::uint64_t& digest, int state_idx, int slots_done) const {
    const int depth_after = slots_done + 1;
    const int remaining = horizon_ - depth_after;
    const bool hit = state_idx == target_;

    switch (kind_) {
    case PolicyKind::total: {
        std::uint64_t count = digest + (hit ? 1 : 0);
        if (static_cast<int>(count) > required_) return false;
        if (static_cast<int>(count) + remaining < required_) return false;
        digest = count;
        return true;
    }
    case PolicyKind::continuous: {
        // digest: 0 = before the run, 1..required = run length, required+1 = done
        const std::uint64_t done_tag = static_cast<std::uint64_t>(required_) + 1;
        if (required_ == 0) {
            if (hit) return false;
            return true;
        }
        if (hit) {
            if (digest == done_tag || static_cast<int>(digest) == required_) return false;
            ++digest;
        } else {
            if (digest > 0 && static_cast<int>(digest) < required_) return false;
            if (static_cast<int>(digest) == required_) digest = done_tag;
        }
        if (digest == 0 && remaining < required_) return false;
        if (digest > 0 && digest != done_tag &&
            static_cast<int>(digest) + remaining < required_)
            return false;
        return true;
    }
    case PolicyKind::repeat: {
        const int p = period_, m = slots_on_;
        if (m == 0) { digest = 0; return true; }
        if (p == 1) return hit; // every slot is its own window
        const std::uint64_t old_mask = digest;
        // window that closes with this slot: the previous period-1 slots plus it
        if (depth_after >= p) {
            const int closed = std::popcount(old_mask) + (hit ? 1 : 0);
            if (closed < m) return false;
        }
        const std::uint64_t new_mask =
            ((old_mask << 1) | (hit ? 1ull : 0ull)) & window_mask_;
        // Earliest window still open binds tightest: occupancy loss per step
        // left never exceeds the slack gained.
        const int w_min = std::max(0, depth_after - (p - 1));
        if (w_min <= std::min(horizon_ - p, depth_after - 1)) {
            const int assigned = depth_after - w_min; // <= p-1
            const std::uint64_t span_mask =
                assigned >= 64 ? ~0ull : ((1ull << assigned) - 1);
            const int occupancy = std::popcount(new_mask & span_mask);
            const int free_slots = w_min + p - depth_after;
            if (occupancy + free_slots < m) return false;
        }
        digest = new_mask;
        return true;
    }
    case PolicyKind::multiple: {
        // digest: jobs_done * (job_len + 1) + current run length
        int jobs = static_cast<int>(digest) / (job_len_ + 1);
        int run = static_cast<int>(digest) % (job_len_ + 1);
        if (hit) {
            if (run == job_len_) return false; // jobs may not abut
            if (run == 0 && jobs >= job_count_) return false;
            ++run;
        } else if (run > 0) {
            if (run != job_len_) return false; // interrupted mid-job
            ++jobs;
            run = 0;
        }
        const int jobs_pending = run > 0 ? 1 : 0;
        const int jobs_left = job_count_ - jobs - jobs_pending;
        if (jobs_left < 0) return false;
        int need = jobs_left * job_len_;
        if (run > 0)
            need += (job_len_ - run) + jobs_left; // finish the run, gap before each next job
        else if (jobs_left > 1)
            need += jobs_left - 1;
        if (need > remaining) return false;
        digest = static_cast<std::uint64_t>(jobs) * (job_len_ + 1) + run;
        return true;
    }
    case PolicyKind::strict:
    case PolicyKind::pattern:
        return slots_done < static_cast<int>(forced_column_.size()) &&
               state_idx == forced_column_[slots_done];
    case PolicyKind::sleep:
        if (slots_done >= win_start_ && slots_done < win_end_) return hit;
        return true;
    case PolicyKind::battery: return false;
    }
    return false;
}

} // namespace gridsched
