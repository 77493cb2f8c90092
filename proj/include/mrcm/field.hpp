#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <mrcm/common.hpp>
#include <mrcm/grid.hpp>

namespace mrcm {

/// Scalar value per cell, row-major like the grid.
using CellField = std::vector<double>;

/**
 * Velocity components on the faces of a MAC layout, stored twice: once as
 * computed from the cell on the lower-coordinate side of the face and once
 * from the higher side. Multiscale solutions are two-valued on the skeleton;
 * everywhere else both layers agree. Values are velocity components with a
 * fixed global orientation (+x across x-faces, +y across y-faces).
 */
struct FaceField {
    int nx = 0, ny = 0;
    double hx = 0.0, hy = 0.0;
    std::vector<double> x_lo, x_hi;  ///< (nx+1)*ny x-faces
    std::vector<double> y_lo, y_hi;  ///< nx*(ny+1) y-faces

    static FaceField zeros(const FineGrid& g) {
        FaceField f;
        f.nx = g.nx;
        f.ny = g.ny;
        f.hx = g.hx;
        f.hy = g.hy;
        f.x_lo.assign(static_cast<std::size_t>(g.nx + 1) * g.ny, 0.0);
        f.x_hi = f.x_lo;
        f.y_lo.assign(static_cast<std::size_t>(g.nx) * (g.ny + 1), 0.0);
        f.y_hi = f.y_lo;
        return f;
    }

    int xface(int i, int j) const { return j * (nx + 1) + i; }
    int yface(int i, int j) const { return j * nx + i; }

    void set_x(int i, int j, double v) { x_lo[xface(i, j)] = x_hi[xface(i, j)] = v; }
    void set_y(int i, int j, double v) { y_lo[yface(i, j)] = y_hi[yface(i, j)] = v; }

    double x_avg(int i, int j) const {
        const int f = xface(i, j);
        return 0.5 * (x_lo[f] + x_hi[f]);
    }
    double y_avg(int i, int j) const {
        const int f = yface(i, j);
        return 0.5 * (y_lo[f] + y_hi[f]);
    }

    /// Largest absolute disagreement between the two layers over all faces.
    double max_jump() const {
        double m = 0.0;
        for (std::size_t f = 0; f < x_lo.size(); ++f) m = std::max(m, std::abs(x_lo[f] - x_hi[f]));
        for (std::size_t f = 0; f < y_lo.size(); ++f) m = std::max(m, std::abs(y_lo[f] - y_hi[f]));
        return m;
    }

    /**
     * Net outflow of cell (i,j) integrated over its boundary, using each
     * face value as seen from this cell.
     */
    double divergence(int i, int j) const {
        return hy * (x_lo[xface(i + 1, j)] - x_hi[xface(i, j)]) +
               hx * (y_lo[yface(i, j + 1)] - y_hi[yface(i, j)]);
    }

    /// Collapses both layers to their average (single-valued field).
    void average_layers() {
        for (std::size_t f = 0; f < x_lo.size(); ++f) x_lo[f] = x_hi[f] = 0.5 * (x_lo[f] + x_hi[f]);
        for (std::size_t f = 0; f < y_lo.size(); ++f) y_lo[f] = y_hi[f] = 0.5 * (y_lo[f] + y_hi[f]);
    }
};

inline FaceField operator*(double a, const FaceField& f) {
    FaceField r = f;
    for (auto& v : r.x_lo) v *= a;
    for (auto& v : r.x_hi) v *= a;
    for (auto& v : r.y_lo) v *= a;
    for (auto& v : r.y_hi) v *= a;
    return r;
}

inline FaceField operator+(const FaceField& a, const FaceField& b) {
    require(a.nx == b.nx && a.ny == b.ny, "FaceField: size mismatch");
    FaceField r = a;
    for (std::size_t f = 0; f < r.x_lo.size(); ++f) {
        r.x_lo[f] += b.x_lo[f];
        r.x_hi[f] += b.x_hi[f];
    }
    for (std::size_t f = 0; f < r.y_lo.size(); ++f) {
        r.y_lo[f] += b.y_lo[f];
        r.y_hi[f] += b.y_hi[f];
    }
    return r;
}

/**
 * A thin straight feature embedded in the permeability field. Endpoints are
 * in physical coordinates; the painted band is width_cells fine cells wide
 * perpendicular to the dominant direction. High-permeability features
 * (channels, fractures) carry value > background, low ones (barriers) the
 * opposite; barriers are painted last and win where features overlap.
 */
struct Feature {
    bool high = true;  ///< true: conductive fracture; false: blocking barrier
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double width_cells = 1.0;
    double value = 1.0;
};

/// Background permeability plus embedded linear features.
struct FieldSpec {
    double background = 1.0;
    std::vector<Feature> features;
};

namespace detail {

inline void paint_feature(const FineGrid& g, const Feature& f, CellField& k) {
    for (double v : {f.x0, f.x1})
        if (v < 0.0 || v > g.lx) throw ConfigError("field: feature endpoint outside domain");
    for (double v : {f.y0, f.y1})
        if (v < 0.0 || v > g.ly) throw ConfigError("field: feature endpoint outside domain");
    const double dx = f.x1 - f.x0, dy = f.y1 - f.y0;
    const double len = std::hypot(dx, dy);
    if (len == 0.0) throw ConfigError("field: feature endpoints coincide");
    const double tx = dx / len, ty = dy / len;
    // a feature closer to vertical is given a width measured in x-cells
    const double w = f.width_cells * (std::abs(dy) >= std::abs(dx) ? g.hx : g.hy);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const auto [cx, cy] = g.center(i, j);
            const double rx = cx - f.x0, ry = cy - f.y0;
            const double t = rx * tx + ry * ty;
            if (t < 0.0 || t > len) continue;
            const double d = -rx * ty + ry * tx;  // signed perpendicular offset
            if (d >= -0.5 * w && d < 0.5 * w) k[g.cell(i, j)] = f.value;
        }
    }
}

}  // namespace detail

/// Rasterizes a field spec onto the grid. Low features override high ones.
inline CellField build_permeability(const FineGrid& g, const FieldSpec& spec) {
    if (!(spec.background > 0.0)) throw ConfigError("field: background permeability must be positive");
    for (const auto& f : spec.features)
        if (!(f.value > 0.0)) throw ConfigError("field: feature permeability must be positive");
    CellField k(g.cells(), spec.background);
    for (const auto& f : spec.features)
        if (f.high) detail::paint_feature(g, f, k);
    for (const auto& f : spec.features)
        if (!f.high) detail::paint_feature(g, f, k);
    return k;
}

inline double field_min(const CellField& k) {
    return *std::min_element(k.begin(), k.end());
}

inline double field_max(const CellField& k) {
    return *std::max_element(k.begin(), k.end());
}

// ---------------------------------------------------------------------------
// field files: plain text (one value per line, row-major) and a sized binary
// format with magic "MRCMFLD1", little-endian u32 nx, u32 ny, f64 values.
// ---------------------------------------------------------------------------

inline constexpr char kFieldMagic[8] = {'M', 'R', 'C', 'M', 'F', 'L', 'D', '1'};

inline void save_field_text(const std::string& path, const CellField& k) {
    std::ofstream out(path);
    if (!out) throw DataError("field: cannot open " + path + " for writing");
    for (double v : k) out << format_double(v) << "\n";
    if (!out) throw DataError("field: write failed for " + path);
}

inline CellField load_field_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("field: cannot open " + path);
    CellField k;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            k.push_back(v);
        } catch (const std::exception&) {
            throw DataError("field: bad value '" + tok + "' in " + path);
        }
    }
    if (k.empty()) throw DataError("field: no values in " + path);
    return k;
}

inline void save_field_binary(const std::string& path, const FineGrid& g, const CellField& k) {
    require(static_cast<int>(k.size()) == g.cells(), "field: size does not match grid");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("field: cannot open " + path + " for writing");
    out.write(kFieldMagic, 8);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(g.nx), static_cast<std::uint32_t>(g.ny)};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(k.data()), static_cast<std::streamsize>(k.size() * sizeof(double)));
    if (!out) throw DataError("field: write failed for " + path);
}

inline CellField load_field_binary(const std::string& path, int* nx_out = nullptr, int* ny_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("field: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kFieldMagic))
        throw DataError("field: " + path + " is not a binary field file");
    std::uint32_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in) throw DataError("field: truncated header in " + path);
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1];
    if (n == 0 || n > (std::size_t{1} << 28)) throw DataError("field: implausible dimensions in " + path);
    CellField k(n);
    in.read(reinterpret_cast<char*>(k.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("field: truncated data in " + path);
    if (nx_out) *nx_out = static_cast<int>(dims[0]);
    if (ny_out) *ny_out = static_cast<int>(dims[1]);
    return k;
}

/// Loads a field file, sniffing the binary magic; validates the cell count.
inline CellField load_field(const std::string& path, const FineGrid& g) {
    bool binary = false;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("field: cannot open " + path);
        char magic[8] = {};
        in.read(magic, 8);
        binary = in && std::equal(magic, magic + 8, kFieldMagic);
    }
    CellField k;
    if (binary) {
        int nx = 0, ny = 0;
        k = load_field_binary(path, &nx, &ny);
        if (nx != g.nx || ny != g.ny)
            throw DataError("field: " + path + " is " + std::to_string(nx) + "x" + std::to_string(ny) +
                            ", expected " + std::to_string(g.nx) + "x" + std::to_string(g.ny));
    } else {
        k = load_field_text(path);
        if (static_cast<int>(k.size()) != g.cells())
            throw DataError("field: " + path + " has " + std::to_string(k.size()) + " values, expected " +
                            std::to_string(g.cells()));
    }
    for (double v : k)
        if (!(v > 0.0) || !std::isfinite(v)) throw DataError("field: nonpositive or nonfinite value in " + path);
    return k;
}

// ---------------------------------------------------------------------------
// norms
// ---------------------------------------------------------------------------

/// Relative cell-volume-weighted L2 distance between two cell fields.
inline double rel_l2_cells(const CellField& a, const CellField& ref, const FineGrid& g) {
    require(a.size() == ref.size() && static_cast<int>(a.size()) == g.cells(), "norm: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double d = a[c] - ref[c];
        num += d * d;
        den += ref[c] * ref[c];
    }
    num *= g.cell_volume();
    den *= g.cell_volume();
    if (den == 0.0) throw SolverError("norm: reference field has zero norm");
    return std::sqrt(num / den);
}

/// Relative L1 distance between two cell fields (volume weights cancel).
inline double rel_l1_cells(const CellField& a, const CellField& ref) {
    require(a.size() == ref.size(), "norm: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        num += std::abs(a[c] - ref[c]);
        den += std::abs(ref[c]);
    }
    if (den == 0.0) throw SolverError("norm: reference field has zero norm");
    return num / den;
}

/**
 * Relative L2 distance between two face velocity fields over both component
 * grids, each face weighted by hx*hy (half weight on external boundary
 * faces). Layers are averaged first, so two-valued multiscale fluxes are
 * compared through their face means.
 */
inline double rel_l2_faces(const FaceField& a, const FaceField& ref) {
    require(a.nx == ref.nx && a.ny == ref.ny, "norm: size mismatch");
    const double wfull = a.hx * a.hy;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < a.ny; ++j) {
        for (int i = 0; i <= a.nx; ++i) {
            const double w = (i == 0 || i == a.nx) ? 0.5 * wfull : wfull;
            const double d = a.x_avg(i, j) - ref.x_avg(i, j);
            num += w * d * d;
            den += w * ref.x_avg(i, j) * ref.x_avg(i, j);
        }
    }
    for (int j = 0; j <= a.ny; ++j) {
        for (int i = 0; i < a.nx; ++i) {
            const double w = (j == 0 || j == a.ny) ? 0.5 * wfull : wfull;
            const double d = a.y_avg(i, j) - ref.y_avg(i, j);
            num += w * d * d;
            den += w * ref.y_avg(i, j) * ref.y_avg(i, j);
        }
    }
    if (den == 0.0) throw SolverError("norm: reference field has zero norm");
    return std::sqrt(num / den);
}

}  // namespace mrcm
