#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "octoflow/block_forest.hpp"
#include "octoflow/comm/exchange.hpp"
#include "octoflow/grid_data.hpp"
#include "octoflow/level_params.hpp"

namespace octoflow {

//! Everything one virtual rank owns.
struct RankState {
    std::uint32_t rank = 0;
    BlockForest forest;
    std::vector<std::unique_ptr<BlockGrid>> grids;
    std::map<int, std::vector<BlockGrid*>> by_level;
    std::unique_ptr<comm::Communicator> comm;

    const std::vector<BlockGrid*>& level(int l) const {
        static const std::vector<BlockGrid*> none;
        auto it = by_level.find(l);
        return it == by_level.end() ? none : it->second;
    }
};

enum class StepAlgorithm {
    optimized, //!< two-phase exchange, fused kernel on the finest level
    reference, //!< blocking exchange, separate kernels, original call order
};

struct SolverOptions {
    comm::CommMode mode = comm::CommMode::minimal;
    comm::ExchangeOptions exchange{};
    StepAlgorithm algorithm = StepAlgorithm::optimized;
    unsigned workers = 1; //!< worker threads; 0 picks min(ranks, OCTOFLOW_THREADS or hardware)
    std::chrono::milliseconds timeout = std::chrono::minutes(10);
};

//! Worker count after applying OCTOFLOW_THREADS and the rank count.
inline unsigned resolve_workers(unsigned requested, std::uint32_t ranks) {
    unsigned cap = 0;
    if (const char* env = std::getenv("OCTOFLOW_THREADS")) {
        try {
            cap = unsigned(std::stoul(env));
        } catch (const std::exception&) {
            throw Error(std::string("OCTOFLOW_THREADS is not a number: ") + env);
        }
    }
    unsigned w = requested;
    if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
    if (cap > 0) w = std::min(w, cap);
    return std::max(1u, std::min<unsigned>(w, ranks));
}

//! Performs a phase of the time step on a group of ranks in lockstep: every operation is applied
//! to all ranks of the group before the next one starts. Since all ranks run the same sequence and
//! every finish comes after its initiate, this never waits on a message that is not yet posted by
//! a rank of any group that is still behind.
class RankGroup {
public:
    RankGroup(std::vector<RankState*> ranks, const std::vector<LevelParams>& params, int finest)
        : ranks_(std::move(ranks)), params_(&params), finest_(finest) {}

    void collide(int l) {
        for (auto* r : ranks_)
            for (auto* g : r->level(l)) octoflow::collide(*g, (*params_)[l]);
    }
    void stream(int l) {
        for (auto* r : ranks_)
            for (auto* g : r->level(l)) octoflow::stream(*g);
    }
    void fused(int l) {
        for (auto* r : ranks_)
            for (auto* g : r->level(l)) fused_stream_collide(*g, (*params_)[l]);
    }
    void initiate(int l, comm::Pattern p) {
        for (auto* r : ranks_) r->comm->initiate(l, p);
    }
    void finish(int l, comm::Pattern p) {
        for (auto* r : ranks_) r->comm->finish(l, p);
    }
    void exchange(int l, comm::Pattern p) {
        initiate(l, p);
        finish(l, p);
    }

    //! Two-phase recursion with the fused kernel on the finest level.
    void optimized_step(int L) {
        using comm::Pattern;
        const bool coarsest = L == 0, finest = L == finest_;
        collide(L);
        if (!coarsest) initiate(L, Pattern::coarse_to_fine);
        initiate(L, Pattern::equal);
        if (!finest) {
            optimized_step(L + 1);
            initiate(L, Pattern::fine_to_coarse);
        }
        if (!coarsest) finish(L, Pattern::coarse_to_fine);
        finish(L, Pattern::equal);
        if (finest && !coarsest) {
            fused(L);
        } else {
            stream(L);
            if (!finest) finish(L, Pattern::fine_to_coarse);
            if (coarsest) return;
            collide(L);
        }
        initiate(L, Pattern::equal);
        if (!finest) {
            optimized_step(L + 1);
            initiate(L, Pattern::fine_to_coarse);
        }
        finish(L, Pattern::equal);
        stream(L);
        if (!finest) finish(L, Pattern::fine_to_coarse);
    }

    //! Blocking exchanges, separate kernels, recursion before the level's own communication.
    void reference_step(int L) {
        using comm::Pattern;
        const bool coarsest = L == 0, finest = L == finest_;
        collide(L);
        if (!finest) reference_step(L + 1);
        if (!coarsest) exchange(L, Pattern::coarse_to_fine);
        exchange(L, Pattern::equal);
        stream(L);
        if (!finest) exchange(L, Pattern::fine_to_coarse);
        if (coarsest) return;
        collide(L);
        if (!finest) reference_step(L + 1);
        exchange(L, Pattern::equal);
        stream(L);
        if (!finest) exchange(L, Pattern::fine_to_coarse);
    }

    //! Single-level forests: collide, exchange, stream.
    void uniform_step() {
        collide(0);
        exchange(0, comm::Pattern::equal);
        stream(0);
    }

private:
    std::vector<RankState*> ranks_;
    const std::vector<LevelParams>* params_;
    int finest_;
};

class Solver {
public:
    Solver(const SetupForest& setup, const GeometryFn& geometry, const RelaxationConfig& relax,
           const ForceConfig& force, SolverOptions options = {})
        : geometry_(setup.geometry), options_(options),
          transport_(std::max<std::uint32_t>(1, setup.rank_count), options.timeout) {
        finest_ = setup.max_level();
        params_ = make_all_level_params(relax, force, finest_);
        const std::uint32_t nranks = transport_.ranks();
        ranks_.resize(nranks);
        for (std::uint32_t r = 0; r < nranks; ++r) {
            auto& st = ranks_[r];
            st = std::make_unique<RankState>();
            st->rank = r;
            st->forest = make_local_forest(setup, r);
            std::map<BlockId, BlockGrid*> lookup;
            for (const Block& b : st->forest.local_blocks) {
                auto g = std::make_unique<BlockGrid>();
                init_block_grid(*g, geometry_, b, geometry, force.rho_0);
                st->by_level[b.level].push_back(g.get());
                lookup[b.id] = g.get();
                st->grids.push_back(std::move(g));
            }
            st->comm = std::make_unique<comm::Communicator>(r, transport_, comm::build_comm_schedule(st->forest, options_.mode),
                                                            std::move(lookup), options_.exchange);
        }
        workers_ = resolve_workers(options_.workers, nranks);
    }

    int finest_level() const { return finest_; }
    const std::vector<LevelParams>& params() const { return params_; }
    const ForestGeometry& geometry() const { return geometry_; }
    std::uint32_t rank_count() const { return std::uint32_t(ranks_.size()); }
    const RankState& rank(std::uint32_t r) const { return *ranks_.at(r); }
    RankState& rank(std::uint32_t r) { return *ranks_.at(r); }
    comm::Transport& transport() { return transport_; }
    unsigned workers() const { return workers_; }
    std::uint64_t steps_done() const { return steps_; }

    //! All blocks of all ranks ordered by block id (fixed reduction order).
    std::vector<const BlockGrid*> blocks() const {
        std::vector<const BlockGrid*> out;
        for (auto& r : ranks_)
            for (auto& g : r->grids) out.push_back(g.get());
        std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
        return out;
    }
    std::vector<BlockGrid*> blocks() {
        std::vector<BlockGrid*> out;
        for (auto& r : ranks_)
            for (auto& g : r->grids) out.push_back(g.get());
        std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
        return out;
    }

    //! Fluid cell updates per coarse step, level-L cells counted 2^L times.
    std::uint64_t weighted_updates_per_step() const {
        std::uint64_t n = 0;
        for (auto& r : ranks_)
            for (auto& g : r->grids) n += g->fluid_cells << g->level;
        return n;
    }

    //! Advances every rank by `n` coarse steps.
    void advance(std::uint64_t n) {
        if (n == 0) return;
        std::vector<std::vector<RankState*>> groups(workers_);
        for (std::uint32_t r = 0; r < ranks_.size(); ++r) groups[r % workers_].push_back(ranks_[r].get());
        auto body = [&](std::vector<RankState*> mine) {
            RankGroup group(std::move(mine), params_, finest_);
            for (std::uint64_t s = 0; s < n; ++s) {
                if (finest_ == 0) group.uniform_step();
                else if (options_.algorithm == StepAlgorithm::optimized) group.optimized_step(0);
                else group.reference_step(0);
            }
        };
        if (workers_ == 1) {
            body(groups[0]);
        } else {
            std::vector<std::exception_ptr> errors(workers_);
            std::vector<std::thread> threads;
            for (unsigned w = 0; w < workers_; ++w)
                threads.emplace_back([&, w] {
                    try {
                        body(groups[w]);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            for (auto& t : threads) t.join();
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        }
        steps_ += n;
    }

    using Observer = std::function<void(Solver&)>;

    //! Runs `n` coarse steps; observers fire after every `interval` steps (and after the last one).
    void run(std::uint64_t n, std::uint64_t interval = 0, const std::vector<Observer>& observers = {}) {
        if (interval == 0) interval = n;
        std::uint64_t done = 0;
        while (done < n) {
            const std::uint64_t chunk = std::min(interval, n - done);
            advance(chunk);
            done += chunk;
            for (auto& obs : observers) {
                try {
                    obs(*this);
                } catch (const std::exception& e) {
                    throw Error("observer failed after coarse step " + std::to_string(steps_) + ": " + e.what());
                }
            }
        }
    }

private:
    ForestGeometry geometry_;
    SolverOptions options_;
    comm::Transport transport_;
    int finest_ = 0;
    std::vector<LevelParams> params_;
    std::vector<std::unique_ptr<RankState>> ranks_;
    unsigned workers_ = 1;
    std::uint64_t steps_ = 0;
};

} // namespace octoflow
