#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>

#include "octoflow/forest_file.hpp"
#include "octoflow/harness/analysis.hpp"

namespace octoflow::harness {

struct RunSummary {
    std::vector<NormReport> history;
    bool converged = false;
    std::uint64_t steps = 0; //!< coarse steps
    double seconds = 0;
    std::uint64_t weighted_updates = 0;
    double mlups = 0;
    NormReport last() const { return history.empty() ? NormReport{} : history.back(); }
};

struct RunControl {
    std::uint64_t max_steps = 0; //!< coarse steps
    std::uint64_t interval = 100;
    double tolerance = 0;        //!< stop once |L2 change| <= tolerance * max(L2, 1); 0 disables
    std::function<void(const NormReport&)> on_report;
};

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& config, std::optional<SetupForest> forest = std::nullopt)
        : scenario_(make_scenario(config)) {
        if (forest) {
            if (!(forest->geometry == scenario_.geometry)) throw Error("forest file does not match the configuration's geometry");
            if (forest->rank_count != config.ranks) level_wise_balance(*forest, config.ranks, config.curve).apply(*forest);
            forest_ = std::move(*forest);
        } else {
            forest_ = build_forest(scenario_);
        }
        SolverOptions opts;
        opts.mode = config.comm_mode;
        opts.exchange.interpolate = config.interpolate;
        opts.workers = config.workers;
        solver_ = std::make_unique<Solver>(forest_, scenario_.cells, scenario_.relax, scenario_.force, opts);
    }

    const Scenario& scenario() const { return scenario_; }
    const SetupForest& forest() const { return forest_; }
    Solver& solver() { return *solver_; }
    const Solver& solver() const { return *solver_; }

    NormReport evaluate(double rate = 0) const { return harness::evaluate(*solver_, scenario_, rate); }

    RunSummary run(const RunControl& ctl) {
        RunSummary sum;
        const std::uint64_t interval = std::max<std::uint64_t>(1, ctl.interval);
        const std::uint64_t per_step = solver_->weighted_updates_per_step();
        std::optional<double> previous;
        while (sum.steps < ctl.max_steps) {
            const std::uint64_t chunk = std::min(interval, ctl.max_steps - sum.steps);
            const auto t0 = std::chrono::steady_clock::now();
            solver_->advance(chunk);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            sum.steps += chunk;
            sum.seconds += dt;
            sum.weighted_updates += chunk * per_step;
            const double rate = scenario_.config.record_timing && dt > 0 ? mlups(chunk * per_step, dt) : 0.0;
            NormReport r = evaluate(rate);
            sum.history.push_back(r);
            if (ctl.on_report) ctl.on_report(r);
            if (ctl.tolerance > 0 && scenario_.has_analytic()) {
                if (previous && std::abs(r.L2 - *previous) <= ctl.tolerance * std::max(r.L2, 1.0)) {
                    sum.converged = true;
                    break;
                }
                previous = r.L2;
            }
        }
        if (sum.seconds > 0) sum.mlups = mlups(sum.weighted_updates, sum.seconds);
        return sum;
    }

private:
    Scenario scenario_;
    SetupForest forest_;
    std::unique_ptr<Solver> solver_;
};

inline void write_csv(const std::string& path, const std::vector<NormReport>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path);
    out << csv_header << '\n';
    for (auto& r : rows) out << csv_row(r) << '\n';
    if (!out) throw Error("failed writing " + path);
}

//! One legacy VTK file per block (cell data: velocity, density, flag) plus an index listing them.
inline void write_vtk(const std::string& dir, const Solver& solver, const Scenario& s) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& g = solver.geometry();
    std::ofstream index(fs::path(dir) / "blocks.txt");
    for (const BlockGrid* b : solver.blocks()) {
        char name[64];
        std::snprintf(name, sizeof name, "block_%016llx.vtk", (unsigned long long)b->id.bits);
        index << name << '\n';
        std::ofstream out(fs::path(dir) / name);
        const auto d = b->pdf.dims();
        const auto h = g.cell_size(b->level);
        const Vec3 lo = g.aabb(b->id).lo;
        out << "# vtk DataFile Version 3.0\nblock level " << b->level << "\nASCII\nDATASET STRUCTURED_POINTS\n";
        out << "DIMENSIONS " << d[0] + 1 << ' ' << d[1] + 1 << ' ' << d[2] + 1 << '\n';
        out << "ORIGIN " << lo[0] << ' ' << lo[1] << ' ' << lo[2] << '\n';
        out << "SPACING " << h[0] << ' ' << h[1] << ' ' << h[2] << '\n';
        out << "CELL_DATA " << d[0] * d[1] * d[2] << '\n';
        const auto& p = solver.params()[b->level];
        out << "VECTORS velocity double\n";
        for_each_cell(b->interior, [&](const Int3& c) {
            const auto m = cell_moments(*b, b->pdf.index(c), p);
            const Vec3 u = b->flags.is_fluid(b->pdf.index(c)) ? m.u * (1.0 / s.u_ref) : Vec3{0, 0, 0};
            out << u[0] << ' ' << u[1] << ' ' << u[2] << '\n';
        });
        out << "SCALARS density double 1\nLOOKUP_TABLE default\n";
        for_each_cell(b->interior, [&](const Int3& c) {
            const std::size_t i = b->pdf.index(c);
            out << (b->flags.is_fluid(i) ? cell_moments(*b, i, p).rho : 0.0) << '\n';
        });
        out << "SCALARS flag int 1\nLOOKUP_TABLE default\n";
        for_each_cell(b->interior, [&](const Int3& c) { out << int(b->flags.type(b->pdf.index(c))) << '\n'; });
    }
}

} // namespace octoflow::harness
