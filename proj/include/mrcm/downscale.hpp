#pragma once

#include <vector>

#include <mrcm/common.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>
#include <mrcm/subdomain.hpp>

namespace mrcm {

struct StitchOptions {
    int thickness = 2;  ///< strip half-width in cells on each side of an interface
    int threads = 1;
};

/// Largest |net outflow - source| over all cells, each face seen from the
/// cell's own side. Zero source vector means no wells.
inline double max_conservation_defect(const FineGrid& g, const FaceField& f,
                                      const std::vector<double>& source = {}) {
    double worst = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double q = source.empty() ? 0.0 : source[g.cell(i, j)];
            worst = std::max(worst, std::abs(f.divergence(i, j) - q));
        }
    return worst;
}

namespace detail {

/// Harmonic face transmissibilities of the boundary faces of a cell region,
/// used to spread a tiny closure defect where flow can actually pass.
struct StripPatch {
    int i0, j0, w, h;

    void boundary_data(const FineGrid& g, const CellField& kappa, const FaceField& f,
                       SideData& data, std::vector<double>& t_weights) const {
        data = {};
        t_weights.clear();
        auto trans_x = [&](int i, int j) {
            // face between (i-1,j) and (i,j); half-cell value on the boundary
            if (i == 0) return 2.0 * kappa[g.cell(0, j)] * g.hy / g.hx;
            if (i == g.nx) return 2.0 * kappa[g.cell(g.nx - 1, j)] * g.hy / g.hx;
            const double k1 = kappa[g.cell(i - 1, j)], k2 = kappa[g.cell(i, j)];
            return g.hy / (0.5 * g.hx / k1 + 0.5 * g.hx / k2);
        };
        auto trans_y = [&](int i, int j) {
            if (j == 0) return 2.0 * kappa[g.cell(i, 0)] * g.hx / g.hy;
            if (j == g.ny) return 2.0 * kappa[g.cell(i, g.ny - 1)] * g.hx / g.hy;
            const double k1 = kappa[g.cell(i, j - 1)], k2 = kappa[g.cell(i, j)];
            return g.hx / (0.5 * g.hy / k1 + 0.5 * g.hy / k2);
        };
        data[West].resize(h);
        data[East].resize(h);
        for (int e = 0; e < h; ++e) {
            // the layer seen from the cell inside the patch
            data[West][e] = -f.x_hi[f.xface(i0, j0 + e)];
            data[East][e] = f.x_lo[f.xface(i0 + w, j0 + e)];
            t_weights.push_back(trans_x(i0, j0 + e));
            t_weights.push_back(trans_x(i0 + w, j0 + e));
        }
        data[South].resize(w);
        data[North].resize(w);
        for (int e = 0; e < w; ++e) {
            data[South][e] = -f.y_hi[f.yface(i0 + e, j0)];
            data[North][e] = f.y_lo[f.yface(i0 + e, j0 + h)];
            t_weights.push_back(trans_y(i0 + e, j0));
            t_weights.push_back(trans_y(i0 + e, j0 + h));
        }
    }

    void solve_and_write(const FineGrid& g, const CellField& kappa,
                         const std::vector<double>& source, FaceField& f) const {
        SideData data;
        std::vector<double> tw;
        boundary_data(g, kappa, f, data, tw);

        std::vector<double> src;
        if (!source.empty()) {
            src.resize(static_cast<std::size_t>(w) * h);
            for (int j = 0; j < h; ++j)
                for (int i = 0; i < w; ++i) src[j * w + i] = source[g.cell(i0 + i, j0 + j)];
        }

        // make the all-Neumann patch exactly compatible: remove the closure
        // defect from the boundary fluxes, transmissibility-weighted
        double defect = 0.0, tsum = 0.0, scale = 0.0;
        for (int e = 0; e < h; ++e) {
            defect += (data[West][e] + data[East][e]) * g.hy;
            scale += (std::abs(data[West][e]) + std::abs(data[East][e])) * g.hy;
        }
        for (int e = 0; e < w; ++e) {
            defect += (data[South][e] + data[North][e]) * g.hx;
            scale += (std::abs(data[South][e]) + std::abs(data[North][e])) * g.hx;
        }
        for (double q : src) {
            defect -= q;
            scale += std::abs(q);
        }
        if (std::abs(defect) > 1e-6 * std::max(1.0, scale))
            throw SolverError("stitch: patch data defect " + format_double(defect) +
                              " beyond correction tolerance");
        for (double t : tw) tsum += t;
        std::size_t ti = 0;
        for (int e = 0; e < h; ++e) {
            data[West][e] -= defect * tw[ti++] / (tsum * g.hy);
            data[East][e] -= defect * tw[ti++] / (tsum * g.hy);
        }
        for (int e = 0; e < w; ++e) {
            data[South][e] -= defect * tw[ti++] / (tsum * g.hx);
            data[North][e] -= defect * tw[ti++] / (tsum * g.hx);
        }

        std::array<SideSpec, 4> sides;  // all prescribed-flux: floating patch
        TpfaSolver patch(g, i0, j0, w, h, kappa, sides);
        const Eigen::MatrixXd p = patch.solve(patch.assemble_rhs(data, src));
        patch.fill_interior(p.col(0), f);
    }
};

inline StripPatch strip_for(const FineGrid& g, const Interface& f, int thickness) {
    StripPatch s{};
    if (f.vertical) {
        s.i0 = std::max(0, f.line - thickness);
        const int i1 = std::min(g.nx, f.line + thickness);
        s.w = i1 - s.i0;
        s.j0 = f.start;
        s.h = f.count;
    } else {
        s.j0 = std::max(0, f.line - thickness);
        const int j1 = std::min(g.ny, f.line + thickness);
        s.h = j1 - s.j0;
        s.i0 = f.start;
        s.w = f.count;
    }
    return s;
}

}  // namespace detail

/**
 * Turns a two-valued multiscale flux field into a single-valued, cell-wise
 * conservative one. Around every interface a strip of cells is re-solved
 * with prescribed-flux data taken from the current field (each boundary
 * face read from the side of the cell inside the strip) and only faces
 * strictly inside the strip are rewritten. Vertical interfaces are
 * processed first, so the horizontal pass reads already-reconciled data on
 * its strip ends. A field that is already a single-valued conservative
 * potential flow, like the monolithic fine solution, passes through
 * unchanged up to roundoff.
 */
inline FaceField stitch_fluxes(const FineGrid& g, const Decomposition& dec, const Skeleton& sk,
                               const CellField& kappa, const FaceField& multiscale,
                               const std::vector<double>& source = {},
                               const StitchOptions& opt = {}) {
    require(opt.thickness >= 1, "stitch: thickness must be >= 1");
    require(multiscale.nx == g.nx && multiscale.ny == g.ny, "stitch: flux does not match grid");
    require(source.empty() || static_cast<int>(source.size()) == g.cells(),
            "stitch: source does not match grid");
    FaceField out = multiscale;
    for (int pass = 0; pass < 2; ++pass) {
        const bool vertical = pass == 0;
        std::vector<int> ids;
        for (int k = 0; k < static_cast<int>(sk.interfaces.size()); ++k)
            if (sk.interfaces[k].vertical == vertical) ids.push_back(k);
        // strips of one pass write disjoint faces when they do not overlap
        const bool disjoint = vertical ? 2 * opt.thickness <= dec.sub_nx
                                       : 2 * opt.thickness <= dec.sub_ny;
        const int threads = disjoint ? opt.threads : 1;
        parallel_for(static_cast<int>(ids.size()), threads, [&](int n) {
            const auto strip = detail::strip_for(g, sk.interfaces[ids[n]], opt.thickness);
            strip.solve_and_write(g, kappa, source, out);
        });
    }
    return out;
}

}  // namespace mrcm
