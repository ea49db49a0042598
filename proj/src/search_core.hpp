#pragma once

// Internal machinery shared by the uniform-cost search variants: the
// compiled (index-based) view of a problem, per-slot branch tables with
// precomputed edge costs, node arenas, and the dominance map.

#include <array>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gridsched/dispatch.hpp"
#include "gridsched/domain.hpp"
#include "gridsched/policies.hpp"
#include "gridsched/search.hpp"

namespace gridsched::detail {

constexpr std::uint32_t kNoParent = 0xffffffffu;
constexpr int kMaxDigests = 12;

// Branch alternatives at one depth: the cross product of free-device states
// and battery actions. Forced devices (strict/pattern, sleep windows)
// contribute exactly one state. Edge costs depend only on (depth, combo),
// never on the battery charge, so they are precomputed.
struct DepthTable {
    int n_combos = 0;
    // decode: combo -> per-device state plus action, flattened row-major
    std::vector<std::uint8_t> states;  // n_combos x n_devices
    std::vector<std::uint8_t> actions; // n_combos (idle when no battery)
    std::vector<Money> edge_cost;      // n_combos
};

// Only total/continuous/repeat/multiple need runtime tracking; strict,
// pattern and sleep constraints are baked into the branch tables as forced
// states. Each tracked device owns one digest word.
struct CompiledDevice {
    int device_index = -1;
    PolicyTracker tracker;
};

struct CompiledProblem {
    const ScheduleProblem* src = nullptr;
    int horizon = 0;
    int n_devices = 0;
    bool has_battery = false;
    BatteryEngine battery;
    std::vector<CompiledDevice> tracked; // policies needing advance() calls
    int n_digests = 0;                   // tracked devices that carry state
    std::vector<DepthTable> depths;
    bool dominance_possible = true; // false when digests exceed kMaxDigests

    static CompiledProblem compile(const ScheduleProblem& problem);
};

struct Node {
    Money cost;
    MicroKwh battery = 0;
    std::uint64_t parent = 0; // packed ref; kNoParent in low word for root
    std::uint16_t combo = 0;  // edge taken into this node
    std::uint16_t depth = 0;
};

inline std::uint64_t pack_ref(int worker, std::uint32_t index) {
    return (static_cast<std::uint64_t>(worker) << 48) | index;
}
inline int ref_worker(std::uint64_t ref) { return static_cast<int>(ref >> 48); }
inline std::uint32_t ref_index(std::uint64_t ref) {
    return static_cast<std::uint32_t>(ref & 0xffffffffu);
}

// Append-only chunked storage. Chunks never move, and the chunk table is
// pre-reserved, so rows published to another thread through a mutex stay
// readable while the owner keeps appending.
template <class T> class RowArena {
public:
    explicit RowArena(size_t stride = 1) : stride_(stride) { chunks_.reserve(1 << 14); }

    std::uint32_t append(const T* row) {
        const size_t idx = size_++;
        const size_t chunk = idx >> kRowBits;
        if (chunk == chunks_.size())
            chunks_.push_back(std::make_unique<T[]>(kRows * stride_));
        T* dst = chunks_[chunk].get() + (idx & (kRows - 1)) * stride_;
        for (size_t i = 0; i < stride_; ++i) dst[i] = row[i];
        return static_cast<std::uint32_t>(idx);
    }

    const T* row(std::uint32_t idx) const {
        return chunks_[idx >> kRowBits].get() + (idx & (kRows - 1)) * stride_;
    }
    T* row(std::uint32_t idx) {
        return chunks_[idx >> kRowBits].get() + (idx & (kRows - 1)) * stride_;
    }

    size_t size() const { return size_; }

private:
    static constexpr size_t kRowBits = 12;
    static constexpr size_t kRows = 1 << kRowBits;
    size_t stride_;
    size_t size_ = 0;
    std::vector<std::unique_ptr<T[]>> chunks_;
};

// Worker-local (or solver-local) node storage. Index order doubles as the
// deterministic creation serial used for tie-breaking.
struct NodeStore {
    RowArena<Node> nodes;
    RowArena<std::uint64_t> digests;

    explicit NodeStore(int n_digests) : digests(std::max(1, n_digests)) {}
};

struct HeapEntry {
    Money cost;
    std::uint16_t depth;
    std::uint64_t serial; // packed ref; unique and creation-ordered per worker
    std::uint64_t ref;
};

// min-heap order: cheapest first, then deeper, then earliest created
struct HeapCompare {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
        if (a.cost != b.cost) return a.cost > b.cost;
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.serial > b.serial;
    }
};

struct DomKey {
    std::int64_t battery;
    std::uint32_t depth;
    std::uint32_t n;
    std::array<std::uint64_t, kMaxDigests> dig;

    bool operator==(const DomKey& o) const {
        if (battery != o.battery || depth != o.depth || n != o.n) return false;
        for (std::uint32_t i = 0; i < n; ++i)
            if (dig[i] != o.dig[i]) return false;
        return true;
    }
};

struct DomKeyHash {
    size_t operator()(const DomKey& k) const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](std::uint64_t v) {
            h ^= v;
            h *= 0x100000001b3ull;
        };
        mix(static_cast<std::uint64_t>(k.battery));
        mix((static_cast<std::uint64_t>(k.depth) << 32) | k.n);
        for (std::uint32_t i = 0; i < k.n; ++i) mix(k.dig[i]);
        return static_cast<size_t>(h);
    }
};

using DomMap = std::unordered_map<DomKey, Money, DomKeyHash>;

inline DomKey make_key(const CompiledProblem& cp, int depth, MicroKwh battery,
                       const std::uint64_t* digests) {
    DomKey k;
    k.battery = battery;
    k.depth = static_cast<std::uint32_t>(depth);
    k.n = static_cast<std::uint32_t>(cp.n_digests);
    for (int i = 0; i < cp.n_digests; ++i) k.dig[i] = digests[i];
    return k;
}

// Child evaluation shared by every variant: digest advance, battery step,
// edge cost. Returns false when policy or battery pruning rejects the child.
struct ChildScratch {
    std::array<std::uint64_t, kMaxDigests> digests;
    MicroKwh battery = 0;
    Money cost;
};

inline bool evaluate_child(const CompiledProblem& cp, const Node& parent,
                           const std::uint64_t* parent_digests, int combo,
                           ChildScratch& out) {
    const auto& dt = cp.depths[parent.depth];
    const std::uint8_t* states = dt.states.data() + static_cast<size_t>(combo) * cp.n_devices;

    for (int i = 0; i < cp.n_digests; ++i) out.digests[i] = parent_digests[i];
    for (size_t i = 0; i < cp.tracked.size(); ++i) {
        const auto& td = cp.tracked[i];
        if (!td.tracker.advance(out.digests[i], states[td.device_index], parent.depth))
            return false;
    }

    out.battery = parent.battery;
    if (cp.has_battery) {
        const auto action = static_cast<BatteryAction>(dt.actions[combo]);
        if (!cp.battery.step(out.battery, action)) return false;
        if (!cp.battery.end_reachable(out.battery, parent.depth + 1)) return false;
    }
    out.cost = parent.cost + dt.edge_cost[combo];
    return true;
}

SolveResult finish_with_schedule(const CompiledProblem& cp,
                                 const std::vector<std::vector<int>>& state_idx,
                                 const std::vector<BatteryAction>& actions, SearchStats stats);

} // namespace gridsched::detail
