#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <mrcm/common.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>

namespace mrcm {

/// Named per-cell scalar arrays for dumps.
using NamedCells = std::vector<std::pair<std::string, const CellField*>>;

/// Cell-centered speed |u| from face-averaged velocity components.
inline CellField cell_speed(const FineGrid& g, const FaceField& u) {
    CellField out(g.cells());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double ux = 0.5 * (u.x_avg(i, j) + u.x_avg(i + 1, j));
            const double uy = 0.5 * (u.y_avg(i, j) + u.y_avg(i, j + 1));
            out[g.cell(i, j)] = std::hypot(ux, uy);
        }
    return out;
}

/// Legacy ASCII VTK structured-points file with one CELL_DATA scalar array
/// per entry. Array names must be single tokens.
inline void write_vtk(const std::string& path, const FineGrid& g, const NamedCells& arrays) {
    require(!arrays.empty(), "vtk: nothing to write");
    std::ofstream out(path);
    if (!out) throw DataError("vtk: cannot open " + path + " for writing");
    out << "# vtk DataFile Version 3.0\ncell fields\nASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << g.nx + 1 << " " << g.ny + 1 << " 1\n";
    out << "ORIGIN 0 0 0\n";
    out << "SPACING " << format_double(g.hx) << " " << format_double(g.hy) << " 1\n";
    out << "CELL_DATA " << g.cells() << "\n";
    for (const auto& [name, field] : arrays) {
        require(field && static_cast<int>(field->size()) == g.cells(),
                "vtk: field does not match grid");
        require(name.find_first_of(" \t\n") == std::string::npos, "vtk: array name must be one token");
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : *field) out << format_double(v) << "\n";
    }
    if (!out) throw DataError("vtk: write failed for " + path);
}

/// Comma-separated table; cells are written verbatim (pre-formatted).
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("csv: cannot open " + path + " for writing");
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << "\n";
    };
    emit(header);
    for (const auto& r : rows) {
        require(r.size() == header.size(), "csv: row width does not match header");
        emit(r);
    }
    if (!out) throw DataError("csv: write failed for " + path);
}

/// Per-cell table: i, j, then one column per named array.
inline void write_cells_csv(const std::string& path, const FineGrid& g, const NamedCells& arrays) {
    std::vector<std::string> header{"i", "j"};
    for (const auto& [name, field] : arrays) {
        require(field && static_cast<int>(field->size()) == g.cells(),
                "csv: field does not match grid");
        header.push_back(name);
    }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(g.cells());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            std::vector<std::string> row{std::to_string(i), std::to_string(j)};
            for (const auto& [name, field] : arrays) row.push_back(format_double((*field)[g.cell(i, j)]));
            rows.push_back(std::move(row));
        }
    write_csv(path, header, rows);
}

}  // namespace mrcm
