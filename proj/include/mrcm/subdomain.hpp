#pragma once

#include <array>
#include <cmath>
#ifdef MRCM_DIAG
#include <cstdio>
#endif
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <mrcm/common.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>

namespace mrcm {

/**
 * Boundary condition kind for one side of a rectangular region. The Robin
 * kind carries a fixed weight profile beta (one value per fine edge); the
 * data applied with any kind lives in SideData and may change per solve.
 */
struct SideSpec {
    enum Kind { Flux, Pressure, Robin } kind = Flux;
    std::vector<double> beta;
};

/// Per-side boundary data, indexed by Side. Meaning depends on the side
/// kind: outward normal velocity (Flux), pressure (Pressure), or the Robin
/// right-hand side r in p - beta*(u.n) = r. Empty vectors mean zero data.
using SideData = std::array<std::vector<double>, 4>;

/// b - A*x with exact products and compensated accumulation. Evaluated in
/// plain doubles the residual bottoms out near eps*|A|*|x|, which caps
/// iterative refinement well above machine precision when the matrix
/// entries span many decades.
inline Eigen::VectorXd compensated_residual(const Eigen::SparseMatrix<double>& A,
                                            const Eigen::VectorXd& b,
                                            const Eigen::VectorXd& x) {
    Eigen::VectorXd hi = b, lo = Eigen::VectorXd::Zero(b.size());
    for (int j = 0; j < A.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) {
            const double p = -it.value() * x[j];
            const double e = std::fma(-it.value(), x[j], -p);
            const auto i = it.row();
            const double s = hi[i] + p;
            lo[i] += (std::abs(hi[i]) >= std::abs(p) ? (hi[i] - s) + p : (p - s) + hi[i]) + e;
            hi[i] = s;
        }
    return hi + lo;
}

/// Row/column equilibration by powers of two, one round each. Returns the
/// scaled matrix and fills the scale vectors; scaling is exact, so it only
/// conditions the factorization and never perturbs a representable value.
/// Matrices here mix permeabilities and Robin weights across many decades,
/// which otherwise degrades sparse LU enough to stall refinement.
inline Eigen::SparseMatrix<double> equilibrated(const Eigen::SparseMatrix<double>& A,
                                                Eigen::VectorXd& rs, Eigen::VectorXd& cs) {
    rs = Eigen::VectorXd::Ones(A.rows());
    cs = Eigen::VectorXd::Ones(A.cols());
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(A.rows());
    for (int j = 0; j < A.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
            rmax[it.row()] = std::max(rmax[it.row()], std::abs(it.value()));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (rmax[i] > 0.0) {
            int e = 0;
            std::frexp(rmax[i], &e);
            rs[i] = std::ldexp(1.0, -e);
        }
    Eigen::SparseMatrix<double> out = A;
    for (int j = 0; j < out.outerSize(); ++j) {
        double cmax = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(out, j); it; ++it) {
            it.valueRef() *= rs[it.row()];
            cmax = std::max(cmax, std::abs(it.value()));
        }
        if (cmax > 0.0) {
            int e = 0;
            std::frexp(cmax, &e);
            cs[j] = std::ldexp(1.0, -e);
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(out, j); it; ++it)
            it.valueRef() *= cs[j];
    }
    return out;
}

/**
 * Two-point flux finite volume solver on a rectangular cell region of a
 * parent grid. The matrix depends on the region, the permeability and the
 * side kinds/weights only, so one factorization serves any number of
 * right-hand sides (boundary data and sources).
 *
 * Interior faces use harmonic transmissibilities; Dirichlet and Robin sides
 * are eliminated through the half-cell two-point approximation, giving
 *   u.n = (p_c - r) / (h/(2*kappa_c) + beta)
 * on a Robin edge. A region whose four sides are all prescribed-flux is
 * floating; its system is solved with a volume-mean-zero constraint row and
 * the data must be compatible.
 */
class TpfaSolver {
  public:
    TpfaSolver(const FineGrid& parent, int i0, int j0, int nx, int ny, const CellField& kappa,
               std::array<SideSpec, 4> sides)
        : parent_(parent), i0_(i0), j0_(j0), nx_(nx), ny_(ny), sides_(std::move(sides)) {
        require(nx_ >= 1 && ny_ >= 1, "tpfa: empty region");
        require(i0_ >= 0 && j0_ >= 0 && i0_ + nx_ <= parent.nx && j0_ + ny_ <= parent.ny,
                "tpfa: region outside parent grid");
        require(static_cast<int>(kappa.size()) == parent.cells(), "tpfa: field does not match grid");
        kappa_.resize(static_cast<std::size_t>(nx_) * ny_);
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i)
                kappa_[cell(i, j)] = kappa[parent.cell(i0_ + i, j0_ + j)];
        for (int s = 0; s < 4; ++s) {
            if (sides_[s].kind == SideSpec::Robin)
                require(static_cast<int>(sides_[s].beta.size()) == side_edges(static_cast<Side>(s)),
                        "tpfa: Robin weights do not match side length");
            for (double b : sides_[s].beta)
                require(b >= 0.0, "tpfa: Robin weights must be nonnegative");
        }
        floating_ = sides_[0].kind == SideSpec::Flux && sides_[1].kind == SideSpec::Flux &&
                    sides_[2].kind == SideSpec::Flux && sides_[3].kind == SideSpec::Flux;
        assemble();
    }

    TpfaSolver(const TpfaSolver&) = delete;
    TpfaSolver& operator=(const TpfaSolver&) = delete;

    int cells() const { return nx_ * ny_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    bool floating() const { return floating_; }
    int side_edges(Side s) const { return (s == West || s == East) ? ny_ : nx_; }
    double kappa_cell(int i, int j) const { return kappa_[cell(i, j)]; }

    /// Assembles one right-hand side from boundary data and cell sources
    /// (total rate per cell). Vectors may be empty for zero.
    Eigen::VectorXd assemble_rhs(const SideData& data, const std::vector<double>& source) const {
        for (int s = 0; s < 4; ++s)
            require(data[s].empty() || static_cast<int>(data[s].size()) == side_edges(static_cast<Side>(s)),
                    "tpfa: boundary data does not match side length");
        require(source.empty() || static_cast<int>(source.size()) == cells(),
                "tpfa: source does not match region");
        Eigen::VectorXd b = Eigen::VectorXd::Zero(rows_);
        if (!source.empty())
            for (int c = 0; c < cells(); ++c) b[c] = source[c];
        for (int s = 0; s < 4; ++s) {
            const Side side = static_cast<Side>(s);
            if (data[s].empty()) continue;
            const int n = side_edges(side);
            for (int e = 0; e < n; ++e) {
                const int c = side_cell(side, e);
                switch (sides_[s].kind) {
                    case SideSpec::Flux:
                        b[c] -= data[s][e] * side_area(side);
                        break;
                    case SideSpec::Pressure:
                    case SideSpec::Robin:
                        b[c] += side_coef_[s][e] * data[s][e];
                        break;
                }
            }
        }
        return b;
    }

    /// Solves for all columns at once; returns cell pressures (cells x k).
    /// Floating regions reject incompatible data and fix the volume mean.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
        require(rhs.rows() == rows_, "tpfa: rhs size mismatch");
        if (floating_) {
            for (int k = 0; k < rhs.cols(); ++k) {
                const double defect = rhs.col(k).head(cells()).sum();
                const double scale = rhs.col(k).head(cells()).cwiseAbs().sum();
                if (std::abs(defect) > 1e-8 * std::max(1.0, scale))
                    throw SolverError("tpfa: incompatible data on floating region (defect " +
                                      format_double(defect) + ")");
            }
        }
        Eigen::MatrixXd p = cs_.asDiagonal() * lu_.solve((rs_.asDiagonal() * rhs).eval());
        if (lu_.info() != Eigen::Success) throw SolverError("tpfa: linear solve failed");
        // iterative refinement keeps the cell balances near machine
        // precision even at extreme permeability contrasts
        for (int k = 0; k < p.cols(); ++k)
            for (int pass = 0; pass < 2; ++pass)
                p.col(k) += cs_.cwiseProduct(lu_.solve(
                    rs_.cwiseProduct(compensated_residual(mat_, rhs.col(k), p.col(k))).eval()));
#ifdef MRCM_DIAG
        for (int k = 0; k < p.cols(); ++k) {
            const double rn = compensated_residual(mat_, rhs.col(k), p.col(k))
                                  .lpNorm<Eigen::Infinity>();
            if (rn > 1e-10)
                std::printf("tpfa resid %.3e at i0 %d j0 %d col %d of %d\n", rn, i0_, j0_, k,
                            (int)p.cols());
        }
#endif
        return p.topRows(cells());
    }

    std::vector<double> solve_one(const SideData& data, const std::vector<double>& source) const {
        const Eigen::MatrixXd p = solve(assemble_rhs(data, source));
        return {p.data(), p.data() + cells()};
    }

    /// Outward normal velocity on each fine edge of a side, for a solved
    /// pressure column and the data that produced it.
    std::vector<double> side_trace(const Eigen::VectorXd& p, Side side, const std::vector<double>& data) const {
        const int s = side;
        const int n = side_edges(side);
        require(data.empty() || static_cast<int>(data.size()) == n,
                "tpfa: boundary data does not match side length");
        std::vector<double> t(n);
        for (int e = 0; e < n; ++e) {
            const double g = data.empty() ? 0.0 : data[e];
            switch (sides_[s].kind) {
                case SideSpec::Flux:
                    t[e] = g;
                    break;
                case SideSpec::Pressure:
                case SideSpec::Robin:
                    t[e] = side_coef_[s][e] * (p[side_cell(side, e)] - g) / side_area(side);
                    break;
            }
        }
        return t;
    }

    /// Writes velocities of faces strictly inside the region (both layers).
    void fill_interior(const Eigen::VectorXd& p, FaceField& out) const {
        for (int j = 0; j < ny_; ++j)
            for (int i = 1; i < nx_; ++i) {
                const double t = trans(kappa_[cell(i - 1, j)], kappa_[cell(i, j)], parent_.hx, parent_.hy);
                out.set_x(i0_ + i, j0_ + j, t * (p[cell(i - 1, j)] - p[cell(i, j)]) / parent_.hy);
            }
        for (int j = 1; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i) {
                const double t = trans(kappa_[cell(i, j - 1)], kappa_[cell(i, j)], parent_.hy, parent_.hx);
                out.set_y(i0_ + i, j0_ + j, t * (p[cell(i, j - 1)] - p[cell(i, j)]) / parent_.hx);
            }
    }

    /**
     * Writes velocities of the region's side faces. Faces on the parent
     * boundary get both layers; internal side faces get only the layer this
     * region owns (seen from its own cells).
     */
    void fill_sides(const Eigen::VectorXd& p, const SideData& data, FaceField& out) const {
        for (int s = 0; s < 4; ++s) {
            const Side side = static_cast<Side>(s);
            const auto t = side_trace(p, side, data[s]);
            for (int e = 0; e < side_edges(side); ++e) {
                // outward trace converted to the fixed +x/+y orientation
                switch (side) {
                    case West: {
                        const int f = out.xface(i0_, j0_ + e);
                        out.x_hi[f] = -t[e];
                        if (i0_ == 0) out.x_lo[f] = -t[e];
                        break;
                    }
                    case East: {
                        const int f = out.xface(i0_ + nx_, j0_ + e);
                        out.x_lo[f] = t[e];
                        if (i0_ + nx_ == parent_.nx) out.x_hi[f] = t[e];
                        break;
                    }
                    case South: {
                        const int f = out.yface(i0_ + e, j0_);
                        out.y_hi[f] = -t[e];
                        if (j0_ == 0) out.y_lo[f] = -t[e];
                        break;
                    }
                    case North: {
                        const int f = out.yface(i0_ + e, j0_ + ny_);
                        out.y_lo[f] = t[e];
                        if (j0_ + ny_ == parent_.ny) out.y_hi[f] = t[e];
                        break;
                    }
                }
            }
        }
    }

  private:
    int cell(int i, int j) const { return j * nx_ + i; }
    /// Local cell touching edge e of a side.
    int side_cell(Side s, int e) const {
        switch (s) {
            case West: return cell(0, e);
            case East: return cell(nx_ - 1, e);
            case South: return cell(e, 0);
            default: return cell(e, ny_ - 1);
        }
    }
    double side_area(Side s) const { return (s == West || s == East) ? parent_.hy : parent_.hx; }
    double side_h(Side s) const { return (s == West || s == East) ? parent_.hx : parent_.hy; }
    static double trans(double k1, double k2, double h, double area) {
        return area / (0.5 * h / k1 + 0.5 * h / k2);
    }

    void assemble() {
        const int n = cells();
        rows_ = n + (floating_ ? 1 : 0);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(n) * 6);
        std::vector<double> diag(n, 0.0);
        auto couple = [&](int c1, int c2, double t) {
            diag[c1] += t;
            diag[c2] += t;
            trip.emplace_back(c1, c2, -t);
            trip.emplace_back(c2, c1, -t);
        };
        for (int j = 0; j < ny_; ++j)
            for (int i = 1; i < nx_; ++i)
                couple(cell(i - 1, j), cell(i, j),
                       trans(kappa_[cell(i - 1, j)], kappa_[cell(i, j)], parent_.hx, parent_.hy));
        for (int j = 1; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i)
                couple(cell(i, j - 1), cell(i, j),
                       trans(kappa_[cell(i, j - 1)], kappa_[cell(i, j)], parent_.hy, parent_.hx));

        for (int s = 0; s < 4; ++s) {
            const Side side = static_cast<Side>(s);
            const int ne = side_edges(side);
            auto& coef = side_coef_[s];
            coef.assign(ne, 0.0);
            if (sides_[s].kind == SideSpec::Flux) continue;
            for (int e = 0; e < ne; ++e) {
                const int c = side_cell(side, e);
                const double hk = 0.5 * side_h(side) / kappa_[c];
                const double beta = sides_[s].kind == SideSpec::Robin ? sides_[s].beta[e] : 0.0;
                coef[e] = side_area(side) / (hk + beta);
                diag[c] += coef[e];
            }
        }
        for (int c = 0; c < n; ++c) trip.emplace_back(c, c, diag[c]);
        if (floating_) {
            const double vol = parent_.cell_volume();
            for (int c = 0; c < n; ++c) {
                trip.emplace_back(n, c, vol);
                trip.emplace_back(c, n, vol);
            }
        }
        mat_.resize(rows_, rows_);
        mat_.setFromTriplets(trip.begin(), trip.end());
        lu_.compute(equilibrated(mat_, rs_, cs_));
        if (lu_.info() != Eigen::Success) throw SolverError("tpfa: factorization failed");
    }

    FineGrid parent_;
    int i0_, j0_, nx_, ny_;
    std::array<SideSpec, 4> sides_;
    CellField kappa_;
    std::array<std::vector<double>, 4> side_coef_;  ///< Dirichlet/Robin edge coefficients
    bool floating_ = false;
    int rows_ = 0;
    Eigen::SparseMatrix<double> mat_;
    Eigen::VectorXd rs_, cs_;  ///< equilibration scales, powers of two
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

/// Cell pressures plus face velocities of one flow solve. For floating
/// problems gauge_shift records the constant subtracted to zero the mean.
struct FlowSolution {
    CellField pressure;
    FaceField flux;
    double gauge_shift = 0.0;
};

/// Subtracts the volume-weighted mean pressure (uniform cells: plain mean)
/// and returns the subtracted constant.
inline double normalize_pressure(CellField& p) {
    double mean = 0.0;
    for (double v : p) mean += v;
    mean /= static_cast<double>(p.size());
    for (double& v : p) v -= mean;
    return mean;
}

/**
 * Monolithic fine-scale solve of the whole grid: the reference every
 * multiscale run is measured against. Floating problems are normalized to
 * zero mean pressure.
 */
inline FlowSolution solve_fine(const FineGrid& g, const CellField& kappa,
                               const std::array<SideSpec, 4>& sides, const SideData& data,
                               const std::vector<double>& source = {}) {
    TpfaSolver solver(g, 0, 0, g.nx, g.ny, kappa, sides);
    const Eigen::MatrixXd p = solver.solve(solver.assemble_rhs(data, source));
    FlowSolution sol;
    sol.pressure.assign(p.data(), p.data() + g.cells());
    if (solver.floating()) sol.gauge_shift = normalize_pressure(sol.pressure);
    sol.flux = FaceField::zeros(g);
    const Eigen::VectorXd pc = Eigen::Map<const Eigen::VectorXd>(sol.pressure.data(), g.cells());
    solver.fill_interior(pc, sol.flux);
    solver.fill_sides(pc, data, sol.flux);
    return sol;
}

}  // namespace mrcm
