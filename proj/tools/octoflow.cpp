// octoflow command line: partition, run, validate, bench, info.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "octoflow/harness/simulation.hpp"

using namespace octoflow;
using namespace octoflow::harness;
namespace fs = std::filesystem;

namespace {

void print_report(const NormReport& r) {
    std::printf("t %8llu  L1 %.4e  L2 %.4e  Linf %.4e  flow %.6f  flow_err %.4e  mlups %.2f\n", (unsigned long long)r.t,
                r.L1, r.L2, r.Linf, r.flow_rate, r.flow_rate_error, r.mlups);
    std::fflush(stdout);
}

void print_shares(const SetupForest& f) {
    const auto s = level_shares(f);
    std::printf("%5s %8s %12s %12s %12s\n", "level", "blocks", "coverage %", "workload %", "memory %");
    for (auto& [level, n] : s.blocks)
        std::printf("%5d %8llu %12.4f %12.4f %12.4f\n", level, (unsigned long long)n, 100 * s.coverage.at(level),
                    100 * s.workload.at(level), 100 * s.memory.at(level));
}

void print_setup(const Simulation& sim) {
    const auto& c = sim.scenario().config;
    std::printf("scenario %s, region %s, level %d, %zu blocks on %u ranks, %u worker(s)\n", to_string(c.scenario),
                to_string(c.region), sim.scenario().max_level, sim.forest().size(), sim.forest().rank_count,
                sim.solver().workers());
    std::printf("weighted cell updates per coarse step %llu\n", (unsigned long long)sim.solver().weighted_updates_per_step());
}

//! Reference pipe errors (flow rate error, Linf) of a 60 cell diameter for a refinement region and level.
std::optional<std::pair<double, double>> pipe_reference(RegionKind region, int level) {
    if (level == 0) return std::pair{7.96e-3, 19.2e-3};
    switch (region) {
    case RegionKind::global: {
        const std::pair<double, double> rows[] = {{4.98e-3, 8.92e-3}, {1.86e-3, 4.59e-3}, {1.05e-3, 2.87e-3}};
        if (level <= 3) return rows[level - 1];
        break;
    }
    case RegionKind::near_wall: {
        const std::pair<double, double> rows[] = {{5.14e-3, 8.92e-3}, {1.96e-3, 4.59e-3}, {1.13e-3, 2.87e-3}};
        if (level <= 3) return rows[level - 1];
        break;
    }
    case RegionKind::center: {
        const std::pair<double, double> rows[] = {{7.95e-3, 19.2e-3}, {7.92e-3, 19.2e-3}, {7.92e-3, 19.2e-3}};
        if (level <= 3) return rows[level - 1];
        break;
    }
    default: break;
    }
    return std::nullopt;
}

RunSummary run_to_end(Simulation& sim, const ScenarioConfig& c, const std::string& vtk_dir) {
    RunControl ctl;
    ctl.max_steps = c.max_steps;
    ctl.interval = c.interval;
    ctl.tolerance = c.tolerance;
    std::ofstream index;
    if (!vtk_dir.empty()) {
        fs::create_directories(vtk_dir);
        index.open(fs::path(vtk_dir) / "index.csv");
        index << "t,directory\n";
    }
    ctl.on_report = [&](const NormReport& r) {
        print_report(r);
        if (!vtk_dir.empty()) {
            const std::string sub = "t" + std::to_string(r.t);
            write_vtk((fs::path(vtk_dir) / sub).string(), sim.solver(), sim.scenario());
            index << r.t << ',' << sub << '\n' << std::flush;
        }
    };
    return sim.run(ctl);
}

int cmd_partition(const std::string& config_path, const std::string& out) {
    const auto c = load_config(config_path);
    const auto forest = build_forest(make_scenario(c));
    write_forest_file(forest, out);
    std::printf("wrote %s: %zu blocks, %u ranks\n", out.c_str(), forest.size(), forest.rank_count);
    print_shares(forest);
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& forest_path, std::optional<std::uint32_t> ranks,
            const std::string& csv, const std::string& vtk) {
    auto c = load_config(config_path);
    if (ranks) c.ranks = *ranks;
    if (c.ranks < 1) throw ConfigError("--ranks must be positive");
    std::optional<SetupForest> forest;
    if (!forest_path.empty()) forest = read_forest_file(forest_path);
    Simulation sim(c, std::move(forest));
    print_setup(sim);
    const auto sum = run_to_end(sim, c, vtk);
    std::printf("%s after %llu coarse steps, %.2f s, %.2f MLUPS\n", sum.converged ? "converged" : "stopped",
                (unsigned long long)sum.steps, sum.seconds, sum.mlups);
    if (!csv.empty()) write_csv(csv, sum.history);
    return 0;
}

int cmd_validate(const std::string& kind, const std::string& config_path) {
    const auto c = load_config(config_path);
    const ScenarioKind want = kind == "plane" ? ScenarioKind::plane_poiseuille : ScenarioKind::pipe_poiseuille;
    if (c.scenario != want) throw ConfigError("validate " + kind + " needs scenario.kind = " + to_string(want));
    Simulation sim(c);
    print_setup(sim);
    const auto sum = run_to_end(sim, c, "");
    const auto r = sum.last();
    bool ok = sum.converged;
    if (!sum.converged) std::printf("not converged within %llu coarse steps\n", (unsigned long long)c.max_steps);
    if (want == ScenarioKind::plane_poiseuille) {
        const bool acc = r.Linf < 1e-10;
        std::printf("Linf %.3e, required below 1e-10: %s\n", r.Linf, acc ? "ok" : "too large");
        ok = ok && acc;
    } else {
        const auto ref = pipe_reference(c.region, sim.scenario().max_level);
        if (!ref) throw ConfigError("no reference values for this refinement region and level");
        const double ef = std::abs(r.flow_rate_error / ref->first - 1), el = std::abs(r.Linf / ref->second - 1);
        std::printf("flow rate error %.3e (reference %.3e, %+.1f%%)\n", r.flow_rate_error, ref->first,
                    100 * (r.flow_rate_error / ref->first - 1));
        std::printf("Linf %.3e (reference %.3e, %+.1f%%)\n", r.Linf, ref->second, 100 * (r.Linf / ref->second - 1));
        if (c.root_dims[1] * c.cells_per_block != 60)
            std::printf("note: the references are for a 60 cell diameter, this run has %d\n", c.root_dims[1] * c.cells_per_block);
        ok = ok && ef <= 0.15 && el <= 0.15;
    }
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_bench(const std::string& config_path) {
    const auto c = load_config(config_path);
    if (c.scenario != ScenarioKind::lid_cavity) throw ConfigError("bench cavity needs scenario.kind = lid_cavity");
    Simulation sim(c);
    print_setup(sim);
    print_shares(sim.forest());
    sim.solver().advance(1); // warm-up
    RunControl ctl;
    ctl.max_steps = c.max_steps;
    ctl.interval = c.interval;
    ctl.on_report = [&](const NormReport& r) { std::printf("t %llu  mlups %.2f\n", (unsigned long long)r.t, r.mlups); };
    const auto sum = sim.run(ctl);
    std::printf("%llu coarse steps, %llu weighted cell updates, %.2f s, %.2f MLUPS\n", (unsigned long long)sum.steps,
                (unsigned long long)sum.weighted_updates, sum.seconds, sum.mlups);
    return 0;
}

int cmd_info(const std::string& path) {
    const auto f = read_forest_file(path);
    const auto& g = f.geometry;
    std::printf("root grid %d x %d x %d, %d x %d x %d cells per block, periodic %d%d%d\n", g.root_dims[0], g.root_dims[1],
                g.root_dims[2], g.cells_per_block[0], g.cells_per_block[1], g.cells_per_block[2], int(g.periodic[0]),
                int(g.periodic[1]), int(g.periodic[2]));
    std::printf("%zu blocks on %u ranks, finest level %d\n", f.size(), f.rank_count, f.max_level());
    print_shares(f);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Block-structured lattice Boltzmann solver on a forest of octrees"};
    app.require_subcommand(1);

    std::string config, out = "forest.ofbf", forest, csv, vtk, kind, file;
    std::optional<std::uint32_t> ranks;

    auto* partition = app.add_subcommand("partition", "build, balance and save the block forest of a configuration");
    partition->add_option("config", config, "configuration file")->required()->check(CLI::ExistingFile);
    partition->add_option("-o,--output", out, "forest file to write");

    auto* run = app.add_subcommand("run", "run a configuration and report error norms");
    run->add_option("config", config, "configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--forest", forest, "forest file from 'partition'")->check(CLI::ExistingFile);
    run->add_option("--ranks", ranks, "virtual ranks (overrides run.ranks)");
    run->add_option("--csv", csv, "write the report history as CSV");
    run->add_option("--vtk", vtk, "write VTK files at every report into this directory");

    auto* validate = app.add_subcommand("validate", "run to steady state and check the accuracy thresholds");
    validate->add_option("kind", kind, "plane or pipe")->required()->check(CLI::IsMember({"plane", "pipe"}));
    validate->add_option("config", config, "configuration file")->required()->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("bench", "measure MLUPS");
    bench->add_option("kind", kind, "benchmark scenario")->required()->check(CLI::IsMember({"cavity"}));
    bench->add_option("config", config, "configuration file")->required()->check(CLI::ExistingFile);

    auto* info = app.add_subcommand("info", "describe a forest file");
    info->add_option("forest", file, "forest file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*partition) return cmd_partition(config, out);
        if (*run) return cmd_run(config, forest, ranks, csv, vtk);
        if (*validate) return cmd_validate(kind, config);
        if (*bench) return cmd_bench(config);
        if (*info) return cmd_info(file);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
