#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "octoflow/comm/schedule.hpp"
#include "octoflow/lattice_model.hpp"
#include "octoflow/load_balance.hpp"

namespace octoflow::harness {

enum class ScenarioKind { plane_poiseuille, pipe_poiseuille, lid_cavity, custom };
enum class RegionKind { none, near_wall, center, global, lid_edges };
enum class WallSide { bottom, top, both };

struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::plane_poiseuille;
    std::array<int, 3> root_dims{6, 6, 6};
    int cells_per_block = 10;

    RegionKind region = RegionKind::none;
    int level = 0;
    WallSide walls = WallSide::both; //!< plane channel: which plates near_wall refines

    CollisionKind collision = CollisionKind::trt;
    double lambda_eo = 3.0 / 16.0;
    double reynolds = 10.0;
    double u_max = 0.02;     //!< lattice units of level 0
    double lid_velocity = 0.05;
    std::optional<double> viscosity; //!< level-0 lattice units; derived from Re when absent

    std::uint32_t ranks = 1;
    Curve curve = Curve::morton;
    unsigned workers = 1;
    bool interpolate = true;
    comm::CommMode comm_mode = comm::CommMode::minimal;

    std::uint64_t max_steps = 20000; //!< coarse steps
    std::uint64_t interval = 100;    //!< coarse steps between evaluations
    double tolerance = 1e-12;        //!< relative change of L2 between evaluations
    std::uint64_t seed = 1;
    bool record_timing = true;       //!< false writes mlups = 0 so that CSV files are reproducible
};

inline const char* to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::plane_poiseuille: return "plane_poiseuille";
    case ScenarioKind::pipe_poiseuille: return "pipe_poiseuille";
    case ScenarioKind::lid_cavity: return "lid_cavity";
    case ScenarioKind::custom: return "custom";
    }
    return "?";
}

inline const char* to_string(RegionKind k) {
    switch (k) {
    case RegionKind::none: return "none";
    case RegionKind::near_wall: return "near_wall";
    case RegionKind::center: return "center";
    case RegionKind::global: return "global";
    case RegionKind::lid_edges: return "lid_edges";
    }
    return "?";
}

class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <class E, std::size_t N>
E parse_enum(const std::string& key, const std::string& value, const std::array<std::pair<const char*, E>, N>& table) {
    for (auto& [name, e] : table)
        if (value == name) return e;
    std::string options;
    for (auto& [name, e] : table) options += std::string(options.empty() ? "" : ", ") + name;
    throw ConfigError(key + ": unknown value '" + value + "' (expected one of " + options + ")");
}

inline std::array<int, 3> parse_triple(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    std::array<int, 3> v{};
    for (auto& x : v)
        if (!(is >> x) || x < 1) throw ConfigError(key + ": expected three positive integers, got '" + value + "'");
    std::string rest;
    if (is >> rest) throw ConfigError(key + ": trailing input '" + rest + "'");
    return v;
}

} // namespace detail

//! Derived level-0 viscosity, after checking Re = u_max * D / nu.
inline double viscosity_of(const ScenarioConfig& c, double diameter_cells) {
    const double nu_re = c.u_max * diameter_cells / c.reynolds;
    if (c.viscosity) {
        if (std::abs(*c.viscosity - nu_re) > 1e-9 * nu_re)
            throw ConfigError("viscosity " + std::to_string(*c.viscosity) + " contradicts Re = u_max * D / nu (expects " +
                              std::to_string(nu_re) + ")");
        return *c.viscosity;
    }
    return nu_re;
}

inline ScenarioConfig config_from_ptree(const boost::property_tree::ptree& pt) {
    using namespace std::string_literals;
    ScenarioConfig c;
    static const std::set<std::string> known = {
        "scenario.kind", "scenario.root_dims", "scenario.cells_per_block",
        "refinement.region", "refinement.level", "refinement.walls",
        "physics.collision", "physics.lambda_eo", "physics.reynolds", "physics.u_max", "physics.viscosity",
        "physics.lid_velocity",
        "run.ranks", "run.curve", "run.workers", "run.explosion", "run.comm", "run.max_steps", "run.interval",
        "run.tolerance", "run.seed", "run.record_timing"};
    for (auto& [section, body] : pt) {
        if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside of a section");
        for (auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!known.count(full)) throw ConfigError("unknown key '" + full + "'");
        }
    }
    auto get = [&](const char* path) { return pt.get_optional<std::string>(path); };
    auto number = [&](const char* path, auto& out) {
        if (auto v = get(path)) {
            try {
                std::size_t used = 0;
                if constexpr (std::is_floating_point_v<std::decay_t<decltype(out)>>) out = std::stod(*v, &used);
                else out = static_cast<std::decay_t<decltype(out)>>(std::stoull(*v, &used));
                if (used != v->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError(std::string(path) + ": not a number: '" + *v + "'");
            }
        }
    };

    if (auto v = get("scenario.kind"))
        c.scenario = detail::parse_enum<ScenarioKind, 4>(
            "scenario.kind", *v,
            {{{"plane_poiseuille", ScenarioKind::plane_poiseuille}, {"pipe_poiseuille", ScenarioKind::pipe_poiseuille},
              {"lid_cavity", ScenarioKind::lid_cavity}, {"custom", ScenarioKind::custom}}});
    if (c.scenario == ScenarioKind::custom) throw ConfigError("scenario.kind custom is reserved for programmatic setups");
    if (auto v = get("scenario.root_dims")) c.root_dims = detail::parse_triple("scenario.root_dims", *v);
    number("scenario.cells_per_block", c.cells_per_block);

    if (auto v = get("refinement.region"))
        c.region = detail::parse_enum<RegionKind, 5>(
            "refinement.region", *v,
            {{{"none", RegionKind::none}, {"near_wall", RegionKind::near_wall}, {"center", RegionKind::center},
              {"global", RegionKind::global}, {"lid_edges", RegionKind::lid_edges}}});
    number("refinement.level", c.level);
    if (auto v = get("refinement.walls"))
        c.walls = detail::parse_enum<WallSide, 3>(
            "refinement.walls", *v, {{{"bottom", WallSide::bottom}, {"top", WallSide::top}, {"both", WallSide::both}}});

    if (auto v = get("physics.collision"))
        c.collision = detail::parse_enum<CollisionKind, 2>("physics.collision", *v,
                                                           {{{"srt", CollisionKind::srt}, {"trt", CollisionKind::trt}}});
    number("physics.lambda_eo", c.lambda_eo);
    number("physics.reynolds", c.reynolds);
    number("physics.u_max", c.u_max);
    number("physics.lid_velocity", c.lid_velocity);
    if (get("physics.viscosity")) {
        double nu = 0;
        number("physics.viscosity", nu);
        c.viscosity = nu;
    }

    number("run.ranks", c.ranks);
    if (auto v = get("run.curve"))
        c.curve = detail::parse_enum<Curve, 2>("run.curve", *v, {{{"morton", Curve::morton}, {"hilbert", Curve::hilbert}}});
    number("run.workers", c.workers);
    if (auto v = get("run.explosion"))
        c.interpolate = detail::parse_enum<bool, 2>("run.explosion", *v, {{{"interpolate", true}, {"homogeneous", false}}});
    if (auto v = get("run.comm"))
        c.comm_mode = detail::parse_enum<comm::CommMode, 2>(
            "run.comm", *v, {{{"minimal", comm::CommMode::minimal}, {"all_connections", comm::CommMode::all_connections}}});
    number("run.max_steps", c.max_steps);
    number("run.interval", c.interval);
    number("run.tolerance", c.tolerance);
    number("run.seed", c.seed);
    if (auto v = get("run.record_timing"))
        c.record_timing = detail::parse_enum<bool, 2>("run.record_timing", *v, {{{"true", true}, {"false", false}}});

    if (c.cells_per_block < 8 || c.cells_per_block % 2) throw ConfigError("scenario.cells_per_block must be even and >= 8");
    if (c.level < 0 || c.level > 8) throw ConfigError("refinement.level must be in [0, 8]");
    if (c.region == RegionKind::none && c.level != 0) throw ConfigError("refinement.level set without refinement.region");
    if (!(c.reynolds > 0)) throw ConfigError("physics.reynolds must be positive");
    if (!(c.u_max > 0 && c.u_max < 0.3)) throw ConfigError("physics.u_max must be in (0, 0.3)");
    if (c.ranks < 1) throw ConfigError("run.ranks must be positive");
    if (c.interval < 1) throw ConfigError("run.interval must be positive");
    return c;
}

inline ScenarioConfig parse_config(std::istream& in) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    return config_from_ptree(pt);
}

inline ScenarioConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(in);
}

} // namespace octoflow::harness
