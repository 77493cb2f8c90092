#pragma once

#include <array>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <mrcm/common.hpp>
#include <mrcm/downscale.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>
#include <mrcm/mrcm.hpp>
#include <mrcm/spaces.hpp>
#include <mrcm/subdomain.hpp>
#include <mrcm/transport.hpp>

namespace mrcm {

enum class Preset { Mrcm, Mmmfem, Mhm, Amrcm };
enum class BcType { SlabFlux, SlabPressure, QuarterFiveSpot, Custom };

/// One coupling method: a Robin-weight rule plus an interface-space scheme.
struct MethodSpec {
    Preset preset = Preset::Mrcm;
    Scheme scheme = Scheme::Polynomial;
    double alpha = 1.0;        ///< constant weight (mrcm preset)
    double alpha_small = 1e-2; ///< adaptive preset, conductive-flagged edges
    double alpha_large = 1e2;

    std::string label() const {
        std::string p;
        switch (preset) {
            case Preset::Mrcm: p = "mrcm"; break;
            case Preset::Mmmfem: p = "mmmfem"; break;
            case Preset::Mhm: p = "mhm"; break;
            case Preset::Amrcm: p = "amrcm"; break;
        }
        switch (scheme) {
            case Scheme::Polynomial: return p + "-pol";
            case Scheme::PhysicsBased: return p + "-pbs";
            case Scheme::FullFine: return p + "-full";
        }
        return p;
    }
};

struct ScenarioConfig {
    // grid and decomposition
    int nx = 0, ny = 0;
    double lx = 1.0, ly = 1.0;
    int mx = 1, my = 1;
    // permeability: explicit file or synthetic features
    std::string field_file;
    double background = 1.0;
    double kmax = 1.0;
    double kmin = 1.0;
    std::vector<Feature> fractures;  ///< values assigned at build time
    std::vector<Feature> barriers;
    // boundary conditions
    BcType bc = BcType::SlabFlux;
    double rate = 1.0;       ///< slab-flux inflow velocity
    double pleft = 1.0;      ///< slab-pressure values
    double pright = 0.0;
    double well_rate = 1.0;  ///< quarter-five-spot total rate
    std::array<std::pair<char, double>, 4> custom{{{'f', 0}, {'f', 0}, {'f', 0}, {'f', 0}}};
    // method and spaces
    MethodSpec method;
    int degree = 1;
    double zeta_max = 1.0;
    double zeta_min = 1.0;
    // downscaling
    int thickness = 2;
    // fluid and splitting
    Fluid fluid;
    TransportOptions splitting;
    // sweep axes
    std::vector<double> contrasts;
    std::vector<double> alphas;
    std::vector<std::string> sweep_methods;
    std::vector<std::pair<int, int>> decomps;
    std::vector<std::pair<double, double>> adaptive_pairs{{1e-2, 1e2}, {1e-6, 1e6}};
    // two-phase
    std::vector<double> checkpoints;
    std::vector<std::string> twophase_methods;
    // output
    std::string out_dir = "out";
    bool vtk = true;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

inline double parse_num(const std::string& t, const std::string& loc) {
    double v{};
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        throw ConfigError(loc + ": bad number '" + t + "'");
    return v;
}

inline int parse_int(const std::string& t, const std::string& loc) {
    int v{};
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        throw ConfigError(loc + ": bad integer '" + t + "'");
    return v;
}

inline bool parse_bool(const std::string& t, const std::string& loc) {
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    throw ConfigError(loc + ": bad boolean '" + t + "'");
}

inline Feature parse_feature(const std::string& value, bool high, const std::string& loc) {
    const auto tok = split_ws(value);
    if (tok.size() != 4 && tok.size() != 5)
        throw ConfigError(loc + ": expected 'x0 y0 x1 y1 [width-cells]'");
    Feature f;
    f.high = high;
    f.x0 = parse_num(tok[0], loc);
    f.y0 = parse_num(tok[1], loc);
    f.x1 = parse_num(tok[2], loc);
    f.y1 = parse_num(tok[3], loc);
    if (tok.size() == 5) {
        f.width_cells = parse_num(tok[4], loc);
        if (!(f.width_cells > 0.0)) throw ConfigError(loc + ": feature width must be positive");
    }
    return f;
}

}  // namespace detail

/// Parses a method token such as "mmmfem-pbs" or "amrcm-pol"; weight values
/// not implied by the preset are taken from the base spec.
inline MethodSpec parse_method(const std::string& token, const MethodSpec& base,
                               const std::string& loc = "method") {
    MethodSpec m = base;
    std::string p = token, s;
    if (const auto dash = token.rfind('-'); dash != std::string::npos) {
        p = token.substr(0, dash);
        s = token.substr(dash + 1);
    }
    if (p == "mrcm") m.preset = Preset::Mrcm;
    else if (p == "mmmfem") m.preset = Preset::Mmmfem;
    else if (p == "mhm") m.preset = Preset::Mhm;
    else if (p == "amrcm") m.preset = Preset::Amrcm;
    else throw ConfigError(loc + ": unknown method '" + token + "'");
    if (s == "pol") m.scheme = Scheme::Polynomial;
    else if (s == "pbs") m.scheme = Scheme::PhysicsBased;
    else if (s == "full") m.scheme = Scheme::FullFine;
    else if (!s.empty()) throw ConfigError(loc + ": unknown scheme '" + s + "' in '" + token + "'");
    return m;
}

/// Parses "key = value" sections from a stream. Unknown sections or keys,
/// and malformed values, raise ConfigError with a name:line prefix.
inline ScenarioConfig parse_config_stream(std::istream& in, const std::string& name) {
    ScenarioConfig cfg;
    std::string line, section;
    int lineno = 0;
    bool have_nx = false, have_ny = false;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string loc = name + ":" + std::to_string(lineno);
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(loc + ": unterminated section header");
            section = t.substr(1, t.size() - 2);
            static const char* known[] = {"grid", "decomposition", "field", "bc", "method",
                                          "spaces", "downscale", "fluid", "splitting", "sweep",
                                          "twophase", "output"};
            bool ok = false;
            for (const char* k : known) ok = ok || section == k;
            if (!ok) throw ConfigError(loc + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(loc + ": expected 'key = value'");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(loc + ": empty key or value");
        const std::string where = loc + " [" + section + "] " + key;

        auto num = [&] { return detail::parse_num(value, where); };
        auto integer = [&] { return detail::parse_int(value, where); };
        auto numbers = [&] {
            std::vector<double> out;
            for (const auto& tok : detail::split_ws(value)) out.push_back(detail::parse_num(tok, where));
            return out;
        };
        auto side_bc = [&]() -> std::pair<char, double> {
            const auto tok = detail::split_ws(value);
            if (tok.size() != 2 || (tok[0] != "flux" && tok[0] != "pressure"))
                throw ConfigError(where + ": expected 'flux <v>' or 'pressure <v>'");
            return {tok[0][0], detail::parse_num(tok[1], where)};
        };

        bool handled = true;
        if (section == "grid") {
            if (key == "nx") { cfg.nx = integer(); have_nx = true; }
            else if (key == "ny") { cfg.ny = integer(); have_ny = true; }
            else if (key == "lx") cfg.lx = num();
            else if (key == "ly") cfg.ly = num();
            else handled = false;
        } else if (section == "decomposition") {
            if (key == "mx") cfg.mx = integer();
            else if (key == "my") cfg.my = integer();
            else handled = false;
        } else if (section == "field") {
            if (key == "file") cfg.field_file = value;
            else if (key == "background") cfg.background = num();
            else if (key == "kmax") cfg.kmax = num();
            else if (key == "kmin") cfg.kmin = num();
            else if (key == "fracture") cfg.fractures.push_back(detail::parse_feature(value, true, where));
            else if (key == "barrier") cfg.barriers.push_back(detail::parse_feature(value, false, where));
            else handled = false;
        } else if (section == "bc") {
            if (key == "type") {
                if (value == "slab-flux") cfg.bc = BcType::SlabFlux;
                else if (value == "slab-pressure") cfg.bc = BcType::SlabPressure;
                else if (value == "quarter-five-spot") cfg.bc = BcType::QuarterFiveSpot;
                else if (value == "custom") cfg.bc = BcType::Custom;
                else throw ConfigError(where + ": unknown type '" + value + "'");
            } else if (key == "rate") cfg.rate = num();
            else if (key == "pleft") cfg.pleft = num();
            else if (key == "pright") cfg.pright = num();
            else if (key == "well-rate") cfg.well_rate = num();
            else if (key == "west") cfg.custom[West] = side_bc();
            else if (key == "east") cfg.custom[East] = side_bc();
            else if (key == "south") cfg.custom[South] = side_bc();
            else if (key == "north") cfg.custom[North] = side_bc();
            else handled = false;
        } else if (section == "method") {
            if (key == "preset") cfg.method = parse_method(value, cfg.method, where);
            else if (key == "scheme") {
                if (value == "pol") cfg.method.scheme = Scheme::Polynomial;
                else if (value == "pbs") cfg.method.scheme = Scheme::PhysicsBased;
                else if (value == "full") cfg.method.scheme = Scheme::FullFine;
                else throw ConfigError(where + ": unknown scheme '" + value + "'");
            } else if (key == "alpha") cfg.method.alpha = num();
            else if (key == "alpha-small") cfg.method.alpha_small = num();
            else if (key == "alpha-large") cfg.method.alpha_large = num();
            else if (key == "degree") cfg.degree = integer();
            else handled = false;
        } else if (section == "spaces") {
            if (key == "zeta-max") cfg.zeta_max = num();
            else if (key == "zeta-min") cfg.zeta_min = num();
            else handled = false;
        } else if (section == "downscale") {
            if (key == "thickness") cfg.thickness = integer();
            else handled = false;
        } else if (section == "fluid") {
            if (key == "mu-w") cfg.fluid.mu_w = num();
            else if (key == "mu-o") cfg.fluid.mu_o = num();
            else if (key == "s-inj") cfg.fluid.s_inj = num();
            else handled = false;
        } else if (section == "splitting") {
            if (key == "substeps") cfg.splitting.substeps_per_pressure = integer();
            else if (key == "cfl") cfg.splitting.cfl = num();
            else if (key == "s0") cfg.splitting.s0 = num();
            else handled = false;
        } else if (section == "sweep") {
            if (key == "contrasts") cfg.contrasts = numbers();
            else if (key == "alphas") cfg.alphas = numbers();
            else if (key == "methods") cfg.sweep_methods = detail::split_ws(value);
            else if (key == "decomps") {
                cfg.decomps.clear();
                for (const auto& tok : detail::split_ws(value)) {
                    const auto x = tok.find('x');
                    if (x == std::string::npos)
                        throw ConfigError(where + ": expected MxN, got '" + tok + "'");
                    cfg.decomps.emplace_back(detail::parse_int(tok.substr(0, x), where),
                                             detail::parse_int(tok.substr(x + 1), where));
                }
            } else if (key == "adaptive-pairs") {
                cfg.adaptive_pairs.clear();
                for (const auto& tok : detail::split_ws(value)) {
                    const auto c = tok.find(':');
                    if (c == std::string::npos)
                        throw ConfigError(where + ": expected small:large, got '" + tok + "'");
                    cfg.adaptive_pairs.emplace_back(detail::parse_num(tok.substr(0, c), where),
                                                    detail::parse_num(tok.substr(c + 1), where));
                }
            } else handled = false;
        } else if (section == "twophase") {
            if (key == "checkpoints") cfg.checkpoints = numbers();
            else if (key == "methods") cfg.twophase_methods = detail::split_ws(value);
            else handled = false;
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = value;
            else if (key == "vtk") cfg.vtk = detail::parse_bool(value, where);
            else handled = false;
        } else {
            throw ConfigError(loc + ": key outside any section");
        }
        if (!handled) throw ConfigError(loc + ": unknown key '" + key + "' in [" + section + "]");
    }

    if (!have_nx || !have_ny) throw ConfigError(name + ": [grid] nx and ny are required");
    if (cfg.nx < 1 || cfg.ny < 1) throw ConfigError(name + ": grid dimensions must be >= 1");
    if (!cfg.field_file.empty() && !(cfg.fractures.empty() && cfg.barriers.empty()))
        throw ConfigError(name + ": [field] file and synthetic features are mutually exclusive");
    if (!cfg.fractures.empty() && cfg.kmax < cfg.background)
        throw ConfigError(name + ": [field] kmax must be >= background");
    if (!cfg.barriers.empty() && cfg.kmin > cfg.background)
        throw ConfigError(name + ": [field] kmin must be <= background");
    if (!(cfg.zeta_min <= cfg.zeta_max))
        throw ConfigError(name + ": [spaces] zeta-min must be <= zeta-max");
    if (!(cfg.method.alpha_small < cfg.method.alpha_large))
        throw ConfigError(name + ": [method] alpha-small must be < alpha-large");
    for (double c : cfg.contrasts)
        if (!(c >= 1.0)) throw ConfigError(name + ": [sweep] contrasts must be >= 1");
    for (double a : cfg.alphas)
        if (!(a > 0.0)) throw ConfigError(name + ": [sweep] alphas must be positive");
    for (const auto& [s, l] : cfg.adaptive_pairs)
        if (!(s > 0.0 && s < l)) throw ConfigError(name + ": [sweep] bad adaptive pair");
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i)
        if (!(cfg.checkpoints[i] > (i ? cfg.checkpoints[i - 1] : 0.0)))
            throw ConfigError(name + ": [twophase] checkpoints must be increasing and positive");
    // fail early on malformed method tokens
    for (const auto& tok : cfg.sweep_methods) parse_method(tok, cfg.method, name + ": [sweep] methods");
    for (const auto& tok : cfg.twophase_methods)
        parse_method(tok, cfg.method, name + ": [twophase] methods");
    return cfg;
}

inline ScenarioConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config_stream(in, path);
}

// ---------------------------------------------------------------------------
// scenario assembly
// ---------------------------------------------------------------------------

/// Fully assembled problem: geometry, permeability, boundary data, wells.
struct Scenario {
    FineGrid grid;
    Decomposition dec;
    Skeleton sk;
    CellField K;
    std::array<SideSpec, 4> sides;
    SideData data;
    std::vector<double> source;  ///< empty when there are no wells
};

/// Synthetic field with feature values set by a target contrast: fractures
/// only raise kmax, barriers only lower kmin, and a field with both splits
/// the contrast evenly on a log scale around the background.
inline CellField build_field_at_contrast(const ScenarioConfig& cfg, const FineGrid& g,
                                         double contrast) {
    if (!cfg.field_file.empty())
        throw ConfigError("contrast sweep requires a synthetic field description");
    if (cfg.fractures.empty() && cfg.barriers.empty())
        throw ConfigError("contrast sweep requires at least one fracture or barrier");
    FieldSpec spec;
    spec.background = cfg.background;
    const bool both = !cfg.fractures.empty() && !cfg.barriers.empty();
    const double up = both ? std::sqrt(contrast) : contrast;
    for (Feature f : cfg.fractures) {
        f.value = cfg.background * up;
        spec.features.push_back(f);
    }
    for (Feature f : cfg.barriers) {
        f.value = cfg.background / up;
        spec.features.push_back(f);
    }
    return build_permeability(g, spec);
}

inline CellField build_field(const ScenarioConfig& cfg, const FineGrid& g) {
    if (!cfg.field_file.empty()) return load_field(cfg.field_file, g);
    FieldSpec spec;
    spec.background = cfg.background;
    for (Feature f : cfg.fractures) {
        f.value = cfg.kmax;
        spec.features.push_back(f);
    }
    for (Feature f : cfg.barriers) {
        f.value = cfg.kmin;
        spec.features.push_back(f);
    }
    return build_permeability(g, spec);
}

inline Scenario build_scenario(const ScenarioConfig& cfg, int mx = 0, int my = 0) {
    Scenario sc;
    sc.grid = build_grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly);
    std::tie(sc.dec, sc.sk) = build_decomposition(sc.grid, mx > 0 ? mx : cfg.mx, my > 0 ? my : cfg.my);
    sc.K = build_field(cfg, sc.grid);

    switch (cfg.bc) {
        case BcType::SlabFlux:
            sc.data[West].assign(sc.grid.ny, -cfg.rate);  // outward normal flux: inflow
            sc.data[East].assign(sc.grid.ny, cfg.rate);
            break;
        case BcType::SlabPressure:
            sc.sides[West].kind = SideSpec::Pressure;
            sc.sides[East].kind = SideSpec::Pressure;
            sc.data[West].assign(sc.grid.ny, cfg.pleft);
            sc.data[East].assign(sc.grid.ny, cfg.pright);
            break;
        case BcType::QuarterFiveSpot:
            sc.source.assign(sc.grid.cells(), 0.0);
            sc.source[sc.grid.cell(0, 0)] = cfg.well_rate;
            sc.source[sc.grid.cell(sc.grid.nx - 1, sc.grid.ny - 1)] = -cfg.well_rate;
            break;
        case BcType::Custom:
            for (int s = 0; s < 4; ++s) {
                const auto [kind, v] = cfg.custom[s];
                if (kind == 'p') sc.sides[s].kind = SideSpec::Pressure;
                const int n = (s == West || s == East) ? sc.grid.ny : sc.grid.nx;
                sc.data[s].assign(n, v);
            }
            break;
    }
    return sc;
}

inline SpaceOptions space_options(const ScenarioConfig& cfg, const MethodSpec& m) {
    SpaceOptions so;
    so.scheme = m.scheme;
    so.degree = cfg.degree;
    so.zeta_max = cfg.zeta_max;
    so.zeta_min = cfg.zeta_min;
    switch (m.preset) {
        // the pressure-based and flux-based limit methods each carry a single
        // interface unknown, so only that space is ever adapted
        case Preset::Mmmfem:
            so.alpha = 1e-6;
            so.pbs_flux = false;
            break;
        case Preset::Mhm:
            so.alpha = 1e6;
            so.pbs_pressure = false;
            break;
        case Preset::Mrcm: so.alpha = m.alpha; break;
        case Preset::Amrcm:
            so.adaptive_alpha = true;
            so.alpha_small = m.alpha_small;
            so.alpha_large = m.alpha_large;
            break;
    }
    return so;
}

// ---------------------------------------------------------------------------
// runs
// ---------------------------------------------------------------------------

struct MethodErrors {
    double pressure = 0.0;       ///< relative L2 vs the fine reference
    double flux_raw = 0.0;       ///< multiscale flux, face-averaged layers
    double flux_stitched = 0.0;  ///< after conservative downscaling
};

struct SinglePhaseResult {
    MrcmSolution ms;
    FaceField stitched;
    MethodErrors err;
};

/// Solves one multiscale method against a precomputed fine reference.
inline SinglePhaseResult run_single_phase(const Scenario& sc, const ScenarioConfig& cfg,
                                          const MethodSpec& m, const FlowSolution& fine,
                                          int threads = 1) {
    const auto setups = build_interface_setups(sc.grid, sc.sk, sc.K, space_options(cfg, m));
    MrcmSolver solver(sc.grid, sc.dec, sc.sk, sc.K, setups, sc.sides, threads);
    SinglePhaseResult r;
    r.ms = solver.solve(sc.data, sc.source);
    r.stitched = sc.sk.interfaces.empty()
                     ? r.ms.flux
                     : stitch_fluxes(sc.grid, sc.dec, sc.sk, sc.K, r.ms.flux, sc.source,
                                     {cfg.thickness, threads});
    r.err.pressure = rel_l2_cells(r.ms.pressure, fine.pressure, sc.grid);
    r.err.flux_raw = rel_l2_faces(r.ms.flux, fine.flux);
    r.err.flux_stitched = rel_l2_faces(r.stitched, fine.flux);
    return r;
}

/**
 * Velocity-update callback for the sequential two-phase loop: scales the
 * permeability by the total mobility, solves with the chosen method (null:
 * monolithic fine solve) and downscales to a conservative field. Interface
 * classification and spaces are fixed from the initial permeability.
 */
inline PressureSolver make_pressure_solver(const Scenario& sc, const ScenarioConfig& cfg,
                                           const MethodSpec* m, int threads = 1) {
    if (m == nullptr) {
        return [&sc, &cfg](const CellField& s) {
            CellField kappa(sc.K.size());
            for (std::size_t c = 0; c < kappa.size(); ++c)
                kappa[c] = mobility(s[c], cfg.fluid) * sc.K[c];
            return solve_fine(sc.grid, kappa, sc.sides, sc.data, sc.source).flux;
        };
    }
    auto setups = std::make_shared<const std::vector<InterfaceSetup>>(
        build_interface_setups(sc.grid, sc.sk, sc.K, space_options(cfg, *m)));
    return [&sc, &cfg, setups, threads](const CellField& s) {
        CellField kappa(sc.K.size());
        for (std::size_t c = 0; c < kappa.size(); ++c)
            kappa[c] = mobility(s[c], cfg.fluid) * sc.K[c];
        MrcmSolver solver(sc.grid, sc.dec, sc.sk, kappa, *setups, sc.sides, threads);
        const MrcmSolution sol = solver.solve(sc.data, sc.source);
        if (sc.sk.interfaces.empty()) return sol.flux;
        return stitch_fluxes(sc.grid, sc.dec, sc.sk, kappa, sol.flux, sc.source,
                             {cfg.thickness, threads});
    };
}

/// Two-phase run for one method (null: fine reference).
inline TwoPhaseResult run_two_phase_scenario(const Scenario& sc, const ScenarioConfig& cfg,
                                             const MethodSpec* m, int threads = 1) {
    require(!cfg.checkpoints.empty(), "twophase: [twophase] checkpoints required");
    return run_two_phase(sc.grid, sc.source, cfg.fluid, cfg.splitting, cfg.checkpoints,
                         make_pressure_solver(sc, cfg, m, threads));
}

}  // namespace mrcm
