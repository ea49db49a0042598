#include <atomic>
#include <cassert>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>

#include "gridsched/search.hpp"
#include "search_core.hpp"

namespace gridsched {

using namespace detail;

namespace {

using Heap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCompare>;

struct Candidate {
    Money cost;
    std::uint16_t depth;
    std::uint64_t serial;
    std::uint64_t ref;
};

// All cross-worker state. One mutex guards everything; workers touch it
// only when seeding, merging, at the acceptance barrier, and on shutdown.
struct SharedState {
    std::mutex m;
    std::condition_variable cv;
    Heap global;
    DomMap global_seen;
    int idle = 0;
    int parked = 0;
    bool pause = false;
    bool done = false;
    std::atomic<bool> pause_flag{false};
    std::atomic<bool> done_flag{false};
    std::vector<Candidate> candidates;
    bool have_winner = false;
    Candidate winner{};
    SolveStatus status = SolveStatus::infeasible;
    std::optional<Money> best_bound;
    std::atomic<std::uint64_t> expansions{0};
    std::vector<std::unique_ptr<NodeStore>> stores;
};

class Worker {
public:
    Worker(int id, const CompiledProblem& cp, const SolveOptions& opt, SharedState& sh)
        : id_(id), cp_(cp), opt_(opt), sh_(sh),
          use_dominance_(opt.use_dominance && cp.dominance_possible) {}

    SearchStats stats;

    void run() {
        NodeStore& store = *sh_.stores[id_];
        ChildScratch scratch;
        const int threads = static_cast<int>(sh_.stores.size());

        while (true) {
            if (sh_.done_flag.load(std::memory_order_relaxed)) return;
            if (sh_.pause_flag.load(std::memory_order_relaxed)) {
                if (!park()) return;
                continue;
            }
            if (local_.empty()) {
                if (!acquire_seed(threads)) return;
                continue;
            }

            const HeapEntry top = local_.top();
            local_.pop();
            // seeds pulled from the global queue may live in another
            // worker's arena
            const NodeStore& owner = *sh_.stores[ref_worker(top.ref)];
            const Node node = *owner.nodes.row(ref_index(top.ref));
            const std::uint64_t* node_digests = owner.digests.row(ref_index(top.ref));

            if (use_dominance_) {
                const auto it =
                    local_seen_.find(make_key(cp_, node.depth, node.battery, node_digests));
                if (it != local_seen_.end() && it->second < node.cost) {
                    ++stats.nodes_pruned_dominance;
                    continue;
                }
            }

            if (node.depth == cp_.horizon) {
                if (!submit_candidate(top, threads)) return;
                continue;
            }

            const std::uint64_t n =
                sh_.expansions.fetch_add(1, std::memory_order_relaxed);
            if (n >= opt_.node_budget) {
                declare_budget_exhausted(top.cost);
                return;
            }
            ++stats.nodes_expanded;

            const auto& dt = cp_.depths[node.depth];
            for (int c = 0; c < dt.n_combos; ++c) {
                if (!evaluate_child(cp_, node, node_digests, c, scratch)) {
                    ++stats.nodes_pruned_policy;
                    continue;
                }
                const int child_depth = node.depth + 1;
                if (use_dominance_) {
                    const auto key =
                        make_key(cp_, child_depth, scratch.battery, scratch.digests.data());
                    const auto [it, inserted] = local_seen_.try_emplace(key, scratch.cost);
                    if (!inserted) {
                        if (it->second <= scratch.cost) {
                            ++stats.nodes_pruned_dominance;
                            continue;
                        }
                        it->second = scratch.cost;
                    }
                }
                Node child;
                child.cost = scratch.cost;
                child.battery = scratch.battery;
                child.parent = top.ref;
                child.combo = static_cast<std::uint16_t>(c);
                child.depth = static_cast<std::uint16_t>(child_depth);
                const std::uint32_t child_idx = store.nodes.append(&child);
                store.digests.append(scratch.digests.data());
                const std::uint64_t ref = pack_ref(id_, child_idx);
                local_.push({child.cost, static_cast<std::uint16_t>(child_depth), ref, ref});
                ++stats.nodes_generated;
            }

            const bool should_merge =
                opt_.merge_when_below_threshold
                    ? static_cast<int>(local_.size()) <= opt_.merge_threshold
                    : static_cast<int>(local_.size()) > opt_.merge_threshold;
            if (should_merge && !local_.empty()) {
                std::unique_lock lock(sh_.m);
                merge_local_locked();
                sh_.cv.notify_all();
            }
        }
    }

private:
    // Requires sh_.m. Drains the local frontier into the global one,
    // filtering through the global dominance map.
    void merge_local_locked() {
        while (!local_.empty()) {
            HeapEntry e = local_.top();
            local_.pop();
            if (use_dominance_) {
                const NodeStore& store = *sh_.stores[ref_worker(e.ref)];
                const Node* n = store.nodes.row(ref_index(e.ref));
                const auto key =
                    make_key(cp_, n->depth, n->battery, store.digests.row(ref_index(e.ref)));
                const auto [it, inserted] = sh_.global_seen.try_emplace(key, e.cost);
                if (!inserted) {
                    if (it->second < e.cost) {
                        ++stats.nodes_pruned_dominance;
                        continue;
                    }
                    it->second = e.cost;
                }
            }
            sh_.global.push(e);
        }
    }

    // Barrier participation while another worker verifies a candidate.
    // Returns false when the search finished meanwhile.
    bool park() {
        std::unique_lock lock(sh_.m);
        merge_local_locked();
        ++sh_.parked;
        sh_.cv.notify_all();
        sh_.cv.wait(lock, [&] { return !sh_.pause || sh_.done; });
        --sh_.parked;
        return !sh_.done;
    }

    bool acquire_seed(int threads) {
        std::unique_lock lock(sh_.m);
        while (true) {
            if (sh_.done) return false;
            if (!sh_.pause) {
                while (!sh_.global.empty()) {
                    HeapEntry e = sh_.global.top();
                    if (use_dominance_) {
                        const NodeStore& store = *sh_.stores[ref_worker(e.ref)];
                        const Node* n = store.nodes.row(ref_index(e.ref));
                        const auto key = make_key(cp_, n->depth, n->battery,
                                                  store.digests.row(ref_index(e.ref)));
                        const auto it = sh_.global_seen.find(key);
                        if (it != sh_.global_seen.end() && it->second < e.cost) {
                            sh_.global.pop();
                            ++stats.nodes_pruned_dominance;
                            continue;
                        }
                    }
                    sh_.global.pop();
                    local_.push(e);
                    return true;
                }
                // nothing to do anywhere: the last idle worker ends the search
                if (sh_.idle == threads - 1 && sh_.candidates.empty()) {
                    sh_.done = true;
                    sh_.done_flag.store(true, std::memory_order_relaxed);
                    sh_.status = SolveStatus::infeasible;
                    sh_.cv.notify_all();
                    return false;
                }
            }
            ++sh_.idle;
            sh_.cv.notify_all(); // a pausing evaluator may be waiting on idle counts
            sh_.cv.wait(lock, [&] { return sh_.done || (!sh_.pause && !sh_.global.empty()); });
            --sh_.idle;
        }
    }

    // Goal handling: quiesce every worker, fold all local frontiers into the
    // global one, and accept only if no frontier node is strictly cheaper.
    bool submit_candidate(const HeapEntry& goal, int threads) {
        std::unique_lock lock(sh_.m);
        sh_.candidates.push_back({goal.cost, goal.depth, goal.serial, goal.ref});
        merge_local_locked();
        if (sh_.pause) {
            // someone else is already evaluating; join their barrier
            ++sh_.parked;
            sh_.cv.notify_all();
            sh_.cv.wait(lock, [&] { return !sh_.pause || sh_.done; });
            --sh_.parked;
            return !sh_.done;
        }
        sh_.pause = true;
        sh_.pause_flag.store(true, std::memory_order_relaxed);
        sh_.cv.notify_all();
        sh_.cv.wait(lock, [&] { return sh_.done || sh_.parked + sh_.idle == threads - 1; });
        if (sh_.done) return false;

        auto best = sh_.candidates.front();
        for (const auto& c : sh_.candidates)
            if (c.cost < best.cost || (c.cost == best.cost && c.ref < best.ref)) best = c;

        if (sh_.global.empty() || !(sh_.global.top().cost < best.cost)) {
            sh_.have_winner = true;
            sh_.winner = best;
            sh_.status = SolveStatus::optimal;
            sh_.done = true;
            sh_.done_flag.store(true, std::memory_order_relaxed);
            sh_.pause = false;
            sh_.pause_flag.store(false, std::memory_order_relaxed);
            sh_.cv.notify_all();
            return false;
        }
        // a cheaper frontier node exists: re-queue the candidates and resume
        for (const auto& c : sh_.candidates)
            sh_.global.push({c.cost, c.depth, c.serial, c.ref});
        sh_.candidates.clear();
        sh_.pause = false;
        sh_.pause_flag.store(false, std::memory_order_relaxed);
        sh_.cv.notify_all();
        return true;
    }

    void declare_budget_exhausted(Money frontier_cost) {
        std::unique_lock lock(sh_.m);
        if (!sh_.done) {
            sh_.done = true;
            sh_.done_flag.store(true, std::memory_order_relaxed);
            sh_.status = SolveStatus::budget_exceeded;
            Money bound = frontier_cost;
            if (!sh_.global.empty() && sh_.global.top().cost < bound)
                bound = sh_.global.top().cost;
            sh_.best_bound = bound;
            sh_.cv.notify_all();
        }
    }

    int id_;
    const CompiledProblem& cp_;
    const SolveOptions& opt_;
    SharedState& sh_;
    bool use_dominance_;
    Heap local_;
    DomMap local_seen_;
};

} // namespace

SolveResult solve_parallel(const ScheduleProblem& problem, const SolveOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    if (options.threads < 1) throw std::invalid_argument("threads must be >= 1");
    const CompiledProblem cp = CompiledProblem::compile(problem);

    SharedState sh;
    sh.stores.reserve(options.threads);
    for (int i = 0; i < options.threads; ++i)
        sh.stores.push_back(std::make_unique<NodeStore>(cp.n_digests));

    const std::array<std::uint64_t, kMaxDigests> zero_digests{};
    Node root{};
    root.cost = Money{};
    root.battery = cp.has_battery ? cp.battery.initial : 0;
    root.parent = pack_ref(0, kNoParent);
    const std::uint32_t root_idx = sh.stores[0]->nodes.append(&root);
    sh.stores[0]->digests.append(zero_digests.data());
    sh.global.push({root.cost, 0, root_idx, pack_ref(0, root_idx)});
    if (options.use_dominance && cp.dominance_possible)
        sh.global_seen.emplace(make_key(cp, 0, root.battery, zero_digests.data()), root.cost);

    std::vector<Worker> workers;
    workers.reserve(options.threads);
    for (int i = 0; i < options.threads; ++i) workers.emplace_back(i, cp, options, sh);

    {
        std::vector<std::thread> pool;
        pool.reserve(options.threads);
        for (auto& w : workers) pool.emplace_back([&w] { w.run(); });
        for (auto& t : pool) t.join();
    }

    SearchStats stats;
    stats.nodes_generated = 1;
    for (const auto& w : workers) {
        stats.nodes_expanded += w.stats.nodes_expanded;
        stats.nodes_generated += w.stats.nodes_generated;
        stats.nodes_pruned_policy += w.stats.nodes_pruned_policy;
        stats.nodes_pruned_dominance += w.stats.nodes_pruned_dominance;
    }
    stats.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    SolveResult res;
    res.stats = stats;
    res.status = sh.status;
    res.best_bound = sh.best_bound;
    if (sh.status != SolveStatus::optimal || !sh.have_winner) return res;

    // path reconstruction across worker arenas
    std::vector<std::vector<int>> assign(cp.horizon, std::vector<int>(cp.n_devices));
    std::vector<BatteryAction> actions(cp.horizon, BatteryAction::idle);
    std::uint64_t cur = sh.winner.ref;
    for (int t = cp.horizon - 1; t >= 0; --t) {
        const NodeStore& store = *sh.stores[ref_worker(cur)];
        const Node* n = store.nodes.row(ref_index(cur));
        const auto& dt = cp.depths[t];
        const std::uint8_t* row = dt.states.data() + static_cast<size_t>(n->combo) * cp.n_devices;
        for (int i = 0; i < cp.n_devices; ++i) assign[t][i] = row[i];
        actions[t] = static_cast<BatteryAction>(dt.actions[n->combo]);
        cur = n->parent;
    }
    auto out = finish_with_schedule(cp, assign, actions, stats);
    out.stats.duration_ms = stats.duration_ms;
    assert(out.schedule->total_cost == sh.winner.cost);
    return out;
}

} // namespace gridsched
