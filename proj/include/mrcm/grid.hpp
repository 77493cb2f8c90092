#pragma once

#include <array>
#include <utility>
#include <vector>

#include <mrcm/common.hpp>

namespace mrcm {

/**
 * Uniform Cartesian cell grid on [0,Lx] x [0,Ly].
 *
 * Cells are indexed (i,j), 0-based, stored row-major with x fastest.
 * Cell (i,j) has its center at ((i+0.5)hx, (j+0.5)hy).
 */
struct FineGrid {
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    double hx = 0.0, hy = 0.0;

    int cells() const { return nx * ny; }
    int cell(int i, int j) const { return j * nx + i; }
    double cell_volume() const { return hx * hy; }
    std::pair<double, double> center(int i, int j) const {
        return {(i + 0.5) * hx, (j + 0.5) * hy};
    }
    /// Mesh parameter h = max cell size.
    double h() const { return hx > hy ? hx : hy; }
};

inline FineGrid build_grid(int nx, int ny, double lx, double ly) {
    if (nx < 1 || ny < 1) throw ConfigError("grid: cell counts must be >= 1");
    if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("grid: domain extents must be positive");
    FineGrid g;
    g.nx = nx;
    g.ny = ny;
    g.lx = lx;
    g.ly = ly;
    g.hx = lx / nx;
    g.hy = ly / ny;
    return g;
}

/// Sides of a rectangle (subdomain or whole domain), fixed order.
enum Side : int { West = 0, East = 1, South = 2, North = 3 };

/**
 * Non-overlapping partition of the grid into mx x my equal rectangular
 * subdomains. Subdomain (sx,sy) is indexed sy*mx + sx and owns cells
 * [sx*sub_nx, (sx+1)*sub_nx) x [sy*sub_ny, (sy+1)*sub_ny).
 */
struct Decomposition {
    int mx = 0, my = 0;
    int sub_nx = 0, sub_ny = 0;
    double coarse_h = 0.0;  ///< characteristic subdomain size H

    int count() const { return mx * my; }
    int id(int sx, int sy) const { return sy * mx + sx; }
    int sx_of(int s) const { return s % mx; }
    int sy_of(int s) const { return s / mx; }
    /// First owned cell (i0,j0) of subdomain s.
    std::pair<int, int> origin(int s) const {
        return {sx_of(s) * sub_nx, sy_of(s) * sub_ny};
    }
};

/**
 * One interface of the skeleton: the maximal straight segment shared by two
 * adjacent subdomains, carrying an ordered list of fine edges.
 *
 * The fixed unit normal points from sub_lo (smaller index) to sub_hi, which
 * for this row-major numbering is always the +x direction for vertical
 * interfaces and +y for horizontal ones. Edge e of a vertical interface
 * separates global cells (line-1, start+e) and (line, start+e); for a
 * horizontal interface, cells (start+e, line-1) and (start+e, line).
 */
struct Interface {
    bool vertical = true;
    int line = 0;    ///< global face index: x-face column (vertical) or y-face row (horizontal)
    int start = 0;   ///< first transverse cell index (j for vertical, i for horizontal)
    int count = 0;   ///< number of fine edges m_k
    int sub_lo = -1; ///< adjacent subdomain with the smaller index
    int sub_hi = -1;
    double edge_len = 0.0;

    /// Global cell ids on the (lo, hi) sides of edge e.
    std::pair<int, int> edge_cells(const FineGrid& g, int e) const {
        if (vertical) return {g.cell(line - 1, start + e), g.cell(line, start + e)};
        return {g.cell(start + e, line - 1), g.cell(start + e, line)};
    }
};

/**
 * The skeleton of a decomposition: all interfaces plus, per subdomain, the
 * interface id seen from each of its four sides (-1 where the side lies on
 * the external boundary).
 */
struct Skeleton {
    std::vector<Interface> interfaces;
    std::vector<std::array<int, 4>> sub_interfaces;

    int edge_count() const {
        int n = 0;
        for (const auto& f : interfaces) n += f.count;
        return n;
    }
    /// +1 if the fixed interface normal is outward for subdomain s, else -1.
    static int orientation_sign(const Interface& f, int s) {
        return s == f.sub_lo ? +1 : -1;
    }
};

inline std::pair<Decomposition, Skeleton> build_decomposition(const FineGrid& grid, int mx, int my) {
    if (mx < 1 || my < 1) throw ConfigError("decomposition: subdomain counts must be >= 1");
    if (grid.nx % mx != 0 || grid.ny % my != 0)
        throw ConfigError("decomposition: subdomain counts must divide the grid (" +
                          std::to_string(grid.nx) + "x" + std::to_string(grid.ny) + " into " +
                          std::to_string(mx) + "x" + std::to_string(my) + ")");
    Decomposition d;
    d.mx = mx;
    d.my = my;
    d.sub_nx = grid.nx / mx;
    d.sub_ny = grid.ny / my;
    d.coarse_h = std::max(grid.lx / mx, grid.ly / my);

    Skeleton sk;
    sk.sub_interfaces.assign(d.count(), {-1, -1, -1, -1});
    // vertical interfaces first, then horizontal; both scanned row-major
    for (int sy = 0; sy < my; ++sy) {
        for (int sx = 0; sx + 1 < mx; ++sx) {
            Interface f;
            f.vertical = true;
            f.line = (sx + 1) * d.sub_nx;
            f.start = sy * d.sub_ny;
            f.count = d.sub_ny;
            f.sub_lo = d.id(sx, sy);
            f.sub_hi = d.id(sx + 1, sy);
            f.edge_len = grid.hy;
            const int id = static_cast<int>(sk.interfaces.size());
            sk.interfaces.push_back(f);
            sk.sub_interfaces[f.sub_lo][East] = id;
            sk.sub_interfaces[f.sub_hi][West] = id;
        }
    }
    for (int sy = 0; sy + 1 < my; ++sy) {
        for (int sx = 0; sx < mx; ++sx) {
            Interface f;
            f.vertical = false;
            f.line = (sy + 1) * d.sub_ny;
            f.start = sx * d.sub_nx;
            f.count = d.sub_nx;
            f.sub_lo = d.id(sx, sy);
            f.sub_hi = d.id(sx, sy + 1);
            f.edge_len = grid.hx;
            const int id = static_cast<int>(sk.interfaces.size());
            sk.interfaces.push_back(f);
            sk.sub_interfaces[f.sub_lo][North] = id;
            sk.sub_interfaces[f.sub_hi][South] = id;
        }
    }
    return {d, sk};
}

}  // namespace mrcm
