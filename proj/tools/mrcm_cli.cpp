// Command-line front end: single-phase error studies, contrast/alpha sweeps
// and sequential two-phase runs driven by a sectioned key=value config.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <mrcm/io.hpp>
#include <mrcm/scenario.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mrcm;

namespace {

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

std::string hash_field(const CellField& k) {
    return hex64(fnv1a64(k.data(), k.size() * sizeof(double)));
}

fs::path resolve_out(const ScenarioConfig& cfg, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("MRCM_OUT_DIR")) return env;
    return cfg.out_dir;
}

std::vector<std::string> method_tokens(const std::vector<std::string>& listed,
                                       const ScenarioConfig& cfg) {
    if (!listed.empty()) return listed;
    return {cfg.method.label()};
}

std::vector<std::pair<int, int>> decomp_list(const ScenarioConfig& cfg) {
    if (!cfg.decomps.empty()) return cfg.decomps;
    return {{cfg.mx, cfg.my}};
}

void run_solve(const ScenarioConfig& cfg, const fs::path& out, int threads, json& man) {
    const Scenario sc = build_scenario(cfg);
    const FlowSolution fine = solve_fine(sc.grid, sc.K, sc.sides, sc.data, sc.source);
    const SinglePhaseResult r = run_single_phase(sc, cfg, cfg.method, fine, threads);
    const std::string label = cfg.method.label();
    man["field_hash"] = hash_field(sc.K);
    man["errors"] = {{"pressure", r.err.pressure},
                     {"flux", r.err.flux_raw},
                     {"flux_downscaled", r.err.flux_stitched}};
    man["gauge_shift"] = {{"fine", fine.gauge_shift}, {label, r.ms.gauge_shift}};

    fs::create_directories(out);
    save_field_text((out / "field.txt").string(), sc.K);
    write_csv((out / "errors.csv").string(),
              {"method", "pressure_error", "flux_error", "flux_error_downscaled"},
              {{label, format_double(r.err.pressure), format_double(r.err.flux_raw),
                format_double(r.err.flux_stitched)}});
    const CellField sp_fine = cell_speed(sc.grid, fine.flux);
    const CellField sp_ms = cell_speed(sc.grid, r.ms.flux);
    const CellField sp_ds = cell_speed(sc.grid, r.stitched);
    const NamedCells arrays = {{"permeability", &sc.K},
                               {"pressure_fine", &fine.pressure},
                               {"pressure_" + label, &r.ms.pressure},
                               {"speed_fine", &sp_fine},
                               {"speed_" + label, &sp_ms},
                               {"speed_" + label + "_downscaled", &sp_ds}};
    write_cells_csv((out / "cells.csv").string(), sc.grid, arrays);
    if (cfg.vtk) write_vtk((out / "solution.vtk").string(), sc.grid, arrays);
    std::cout << label << ": pressure " << format_double(r.err.pressure) << ", flux "
              << format_double(r.err.flux_raw) << ", downscaled "
              << format_double(r.err.flux_stitched) << "\n";
}

void run_sweep(const ScenarioConfig& cfg, const fs::path& out, int threads, json& man) {
    const bool by_contrast = !cfg.contrasts.empty();
    const bool by_alpha = !cfg.alphas.empty();
    if (by_contrast == by_alpha)
        throw ConfigError("sweep: exactly one of [sweep] contrasts or alphas must be set");
    const auto tokens = method_tokens(cfg.sweep_methods, cfg);
    std::vector<MethodSpec> methods;
    for (const auto& t : tokens) {
        methods.push_back(parse_method(t, cfg.method));
        if (by_alpha && methods.back().preset != Preset::Mrcm)
            throw ConfigError("sweep: alpha-sweep methods must use the mrcm preset, got '" + t + "'");
    }
    if (by_contrast && !cfg.field_file.empty())
        throw ConfigError("sweep: contrast sweep requires a synthetic field description");

    // validate geometry for every requested decomposition before writing anything
    const auto decomps = decomp_list(cfg);
    for (const auto& [mx, my] : decomps) build_decomposition(build_grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly), mx, my);
    const Scenario base = build_scenario(cfg);
    man["field_hash"] = hash_field(base.K);
    man["axis"] = by_contrast ? "contrast" : "alpha";

    fs::create_directories(out);
    save_field_text((out / "field.txt").string(), base.K);

    std::vector<std::string> header{by_contrast ? "contrast" : "alpha"};
    header.insert(header.end(), tokens.begin(), tokens.end());

    for (const auto& [mx, my] : decomps) {
        std::vector<std::vector<std::string>> rows_p, rows_u, rows_d;
        auto run_row = [&](const std::string& head, const std::vector<MethodSpec>& row_methods,
                           const Scenario& sc, const FlowSolution& fine) {
            std::vector<std::string> rp{head}, ru{head}, rd{head};
            for (const auto& m : row_methods) {
                const SinglePhaseResult r = run_single_phase(sc, cfg, m, fine, threads);
                rp.push_back(format_double(r.err.pressure));
                ru.push_back(format_double(r.err.flux_raw));
                rd.push_back(format_double(r.err.flux_stitched));
            }
            rows_p.push_back(rp);
            rows_u.push_back(ru);
            rows_d.push_back(rd);
            std::cout << mx << "x" << my << " " << header[0] << " " << head << " done\n";
        };

        if (by_contrast) {
            for (const double c : cfg.contrasts) {
                Scenario sc = build_scenario(cfg, mx, my);
                sc.K = build_field_at_contrast(cfg, sc.grid, c);
                const FlowSolution fine = solve_fine(sc.grid, sc.K, sc.sides, sc.data, sc.source);
                run_row(format_double(c), methods, sc, fine);
            }
        } else {
            const Scenario sc = build_scenario(cfg, mx, my);
            const FlowSolution fine = solve_fine(sc.grid, sc.K, sc.sides, sc.data, sc.source);
            for (const double a : cfg.alphas) {
                auto row = methods;
                for (auto& m : row) m.alpha = a;
                run_row(format_double(a), row, sc, fine);
            }
            for (const auto& [small, large] : cfg.adaptive_pairs) {
                auto row = methods;
                for (auto& m : row) {
                    m.preset = Preset::Amrcm;
                    m.alpha_small = small;
                    m.alpha_large = large;
                }
                run_row(format_double(small) + ":" + format_double(large), row, sc, fine);
            }
        }

        const std::string tag = "_" + std::to_string(mx) + "x" + std::to_string(my) + ".csv";
        write_csv((out / ("pressure_errors" + tag)).string(), header, rows_p);
        write_csv((out / ("flux_errors" + tag)).string(), header, rows_u);
        write_csv((out / ("flux_errors_downscaled" + tag)).string(), header, rows_d);
    }
}

void run_twophase(const ScenarioConfig& cfg, const fs::path& out, int threads, json& man) {
    if (cfg.checkpoints.empty()) throw ConfigError("twophase: [twophase] checkpoints required");
    const auto tokens = method_tokens(cfg.twophase_methods, cfg);
    std::vector<MethodSpec> methods;
    for (const auto& t : tokens) methods.push_back(parse_method(t, cfg.method));

    const Scenario sc = build_scenario(cfg);
    man["field_hash"] = hash_field(sc.K);

    std::cout << "fine reference..." << std::endl;
    const TwoPhaseResult ref = run_two_phase_scenario(sc, cfg, nullptr, threads);
    std::vector<TwoPhaseResult> results;
    for (const auto& m : methods) {
        std::cout << m.label() << "..." << std::endl;
        results.push_back(run_two_phase_scenario(sc, cfg, &m, threads));
    }

    fs::create_directories(out);
    save_field_text((out / "field.txt").string(), sc.K);

    std::vector<std::string> header{"pvi"};
    header.insert(header.end(), tokens.begin(), tokens.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < cfg.checkpoints.size(); ++k) {
        std::vector<std::string> row{format_double(cfg.checkpoints[k])};
        for (const auto& r : results)
            row.push_back(format_double(rel_l1_cells(r.snapshots[k], ref.snapshots[k])));
        rows.push_back(row);
    }
    write_csv((out / "saturation_errors.csv").string(), header, rows);
    for (const auto& row : rows) {
        std::cout << "pvi " << row[0] << ":";
        for (std::size_t i = 1; i < row.size(); ++i) std::cout << " " << tokens[i - 1] << "=" << row[i];
        std::cout << "\n";
    }

    NamedCells arrays{{"permeability", &sc.K}, {"saturation_fine", &ref.saturation}};
    for (std::size_t i = 0; i < methods.size(); ++i)
        arrays.emplace_back("saturation_" + tokens[i], &results[i].saturation);
    write_cells_csv((out / "cells.csv").string(), sc.grid, arrays);
    if (cfg.vtk) {
        auto dump = [&](const std::string& name, const TwoPhaseResult& r) {
            NamedCells snaps;
            for (std::size_t k = 0; k < r.snapshots.size(); ++k)
                snaps.emplace_back("s_pvi_" + format_double(cfg.checkpoints[k]), &r.snapshots[k]);
            write_vtk((out / ("saturation_" + name + ".vtk")).string(), sc.grid, snaps);
        };
        dump("fine", ref);
        for (std::size_t i = 0; i < methods.size(); ++i) dump(tokens[i], results[i]);
    }

    json balance;
    auto report = [](const TwoPhaseResult& r) {
        return json{{"injected", r.injected},
                    {"produced", r.produced},
                    {"pressure_solves", r.pressure_solves}};
    };
    balance["fine"] = report(ref);
    for (std::size_t i = 0; i < methods.size(); ++i) balance[tokens[i]] = report(results[i]);
    man["mass_balance"] = balance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multiscale mixed-method simulator for flow in high-contrast porous media"};
    app.require_subcommand(1);
    std::string config_path, out_flag, method_flag, scheme_flag;
    int threads = 1;
    for (auto [name, desc] : {std::pair{"solve", "single-phase solve with error report"},
                              {"sweep", "contrast or alpha error sweep"},
                              {"twophase", "sequential two-phase run"}}) {
        auto* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--out", out_flag, "output directory (overrides config and MRCM_OUT_DIR)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--method", method_flag, "method token, e.g. amrcm-pbs (overrides config)");
        sub->add_option("--scheme", scheme_flag, "interface-space scheme: pol | pbs | full");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        ScenarioConfig cfg = parse_config(config_path);
        if (!method_flag.empty()) cfg.method = parse_method(method_flag, cfg.method, "--method");
        if (!scheme_flag.empty()) {
            if (scheme_flag == "pol") cfg.method.scheme = Scheme::Polynomial;
            else if (scheme_flag == "pbs") cfg.method.scheme = Scheme::PhysicsBased;
            else if (scheme_flag == "full") cfg.method.scheme = Scheme::FullFine;
            else throw ConfigError("--scheme: unknown scheme '" + scheme_flag + "'");
        }
        const fs::path out = resolve_out(cfg, out_flag);

        json man;
        man["version"] = "0.1.0";
        man["subcommand"] = sub;
        man["config"] = config_path;
        man["config_hash"] = hash_file(config_path);
        man["grid"] = {cfg.nx, cfg.ny};
        man["decomposition"] = {cfg.mx, cfg.my};
        man["threads"] = threads;

        const auto t0 = std::chrono::steady_clock::now();
        if (sub == "solve") run_solve(cfg, out, threads, man);
        else if (sub == "sweep") run_sweep(cfg, out, threads, man);
        else run_twophase(cfg, out, threads, man);
        man["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::ofstream mf(out / "manifest.json");
        mf << man.dump(2) << "\n";
        if (!mf) throw DataError("cannot write manifest in " + out.string());
        std::cout << "wrote " << out.string() << "\n";
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error (" << sub << " " << config_path << "): " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
