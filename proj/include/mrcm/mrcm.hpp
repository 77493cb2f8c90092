#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <mrcm/common.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>
#include <mrcm/spaces.hpp>
#include <mrcm/subdomain.hpp>

namespace mrcm {

/// Multiscale solution: two-valued fluxes on the skeleton, plus the solved
/// interface unknowns (one coefficient vector per interface and space).
/// For floating problems gauge_shift is the constant removed from pressure.
struct MrcmSolution {
    CellField pressure;
    FaceField flux;
    std::vector<std::vector<double>> u_coef;
    std::vector<std::vector<double>> p_coef;
    bool floating = false;
    double gauge_shift = 0.0;
};

/**
 * Robin-coupled domain decomposition solver. Each subdomain carries a Robin
 * condition p - beta*(u.n) = -beta*(n.n_i)*U + P on the skeleton, with
 * beta = alpha*H/kappa taken from the cell on its own side; the interface
 * unknowns (U, P) are closed by weak continuity of normal flux against the
 * pressure space and of the Robin mismatch against the flux space.
 *
 * Construction factorizes every subdomain once and solves all local basis
 * responses, then factorizes the coupled interface system; solve() closes
 * the interface unknowns for the actual boundary data and sources and
 * re-solves each subdomain against the composed Robin data. Large alpha
 * drives the coupling toward prescribed-flux interfaces, small alpha toward
 * prescribed-pressure ones.
 */
class MrcmSolver {
  public:
    MrcmSolver(const FineGrid& grid, const Decomposition& dec, const Skeleton& sk,
               const CellField& kappa, const std::vector<InterfaceSetup>& setups,
               const std::array<SideSpec, 4>& global_sides, int threads = 1)
        : grid_(grid), dec_(dec), sk_(sk), setups_(setups), global_sides_(global_sides) {
        require(static_cast<int>(kappa.size()) == grid.cells(), "mrcm: field does not match grid");
        require(setups.size() == sk.interfaces.size(), "mrcm: one setup per interface required");
        for (std::size_t k = 0; k < setups.size(); ++k) {
            for (const auto* sp : {&setups[k].flux_space, &setups[k].pressure_space}) {
                require(sp->edges == sk.interfaces[k].count, "mrcm: space does not match interface");
                for (const auto& fn : sp->basis) {
                    bool nonzero = false;
                    for (double v : fn) nonzero = nonzero || v != 0.0;
                    require(nonzero, "mrcm: zero basis function");
                }
            }
        }
        floating_ = global_sides[0].kind == SideSpec::Flux && global_sides[1].kind == SideSpec::Flux &&
                    global_sides[2].kind == SideSpec::Flux && global_sides[3].kind == SideSpec::Flux;
        layout_columns();
        build_subdomains(kappa, threads);
        assemble_interface_system();
    }

    int system_dim() const { return dim_; }
    bool floating() const { return floating_; }
    int response_count(int s) const { return static_cast<int>(subs_[s].cols.size()); }

    MrcmSolution solve(const SideData& data, const std::vector<double>& source = {}) const {
        for (int s = 0; s < 4; ++s)
            require(data[s].empty() || static_cast<int>(data[s].size()) ==
                                           ((s == West || s == East) ? grid_.ny : grid_.nx),
                    "mrcm: boundary data does not match grid side");
        require(source.empty() || static_cast<int>(source.size()) == grid_.cells(),
                "mrcm: source does not match grid");
        if (floating_) check_compatibility(data, source);

        const int nsub = dec_.count();
        auto local_source = [&](int s) {
            std::vector<double> src;
            if (!source.empty()) {
                const auto [i0, j0] = dec_.origin(s);
                src.resize(subs_[s].solver->cells());
                for (int j = 0; j < dec_.sub_ny; ++j)
                    for (int i = 0; i < dec_.sub_nx; ++i)
                        src[j * dec_.sub_nx + i] = source[grid_.cell(i0 + i, j0 + j)];
            }
            return src;
        };
        std::vector<Eigen::VectorXd> part(nsub);
        for (int s = 0; s < nsub; ++s) {
            const auto& su = subs_[s];
            const SideData sd = external_data(s, data);
            part[s] = su.solver->solve(su.solver->assemble_rhs(sd, local_source(s))).col(0);
        }

        Eigen::VectorXd coef = Eigen::VectorXd::Zero(std::max(dim_ + (floating_ ? 1 : 0), 0));
        if (dim_ > 0) {
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_ + (floating_ ? 1 : 0));
            for (int k = 0; k < static_cast<int>(sk_.interfaces.size()); ++k) {
                const auto& f = sk_.interfaces[k];
                for (const int s : {f.sub_lo, f.sub_hi}) {
                    const auto tr = subs_[s].solver->side_trace(
                        part[s], static_cast<Side>(side_facing(s, k)), {});
                    accumulate_rows(k, s, tr, -1.0, rhs);
                }
            }
            coef = cs_.cwiseProduct(lu_.solve(rs_.cwiseProduct(rhs).eval()));
            if (lu_.info() != Eigen::Success) throw SolverError("mrcm: interface solve failed");
            // refinement against the unscaled system, corrections through the
            // equilibrated factorization
            for (int pass = 0; pass < 2; ++pass)
                coef += cs_.cwiseProduct(lu_.solve(
                    rs_.cwiseProduct(compensated_residual(mat_, rhs, coef)).eval()));
        }

        // reconstruct with a fresh solve per subdomain against the composed
        // interface data; summing the scaled basis responses instead loses
        // the cell balances to cancellation when the Robin weights are extreme
        std::vector<SideData> sds(nsub);
        std::vector<Eigen::VectorXd> pres(nsub);
        auto reconstruct = [&](int s) {
            const auto& su = subs_[s];
            SideData sd = external_data(s, data);
            for (int side = 0; side < 4; ++side) {
                const int k = su.iface[side];
                if (k < 0) continue;
                const auto& f = sk_.interfaces[k];
                const auto& st = setups_[k];
                const int nu = st.flux_space.dim();
                const double sg = Skeleton::orientation_sign(f, s);
                auto& g = sd[side];
                g.assign(f.count, 0.0);
                for (int e = 0; e < f.count; ++e) {
                    double uh = 0.0, ph = 0.0;
                    for (int j = 0; j < nu; ++j)
                        uh += coef[col_base_[k] + j] * st.flux_space.basis[j][e];
                    for (int j = 0; j < st.pressure_space.dim(); ++j)
                        ph += coef[col_base_[k] + nu + j] * st.pressure_space.basis[j][e];
                    g[e] = -su.beta[side][e] * sg * uh + ph;
                }
            }
            sds[s] = std::move(sd);
            pres[s] = su.solver->solve(su.solver->assemble_rhs(sds[s], local_source(s))).col(0);
        };
        for (int s = 0; s < nsub; ++s) reconstruct(s);

        MrcmSolution sol;
        sol.floating = floating_;
        sol.pressure.assign(grid_.cells(), 0.0);
        sol.flux = FaceField::zeros(grid_);
        sol.u_coef.resize(sk_.interfaces.size());
        sol.p_coef.resize(sk_.interfaces.size());
        for (int k = 0; k < static_cast<int>(sk_.interfaces.size()); ++k) {
            const int nu = setups_[k].flux_space.dim();
            const int np = setups_[k].pressure_space.dim();
            sol.u_coef[k].assign(coef.data() + col_base_[k], coef.data() + col_base_[k] + nu);
            sol.p_coef[k].assign(coef.data() + col_base_[k] + nu,
                                 coef.data() + col_base_[k] + nu + np);
        }

        for (int s = 0; s < nsub; ++s) {
            const auto [i0, j0] = dec_.origin(s);
            for (int j = 0; j < dec_.sub_ny; ++j)
                for (int i = 0; i < dec_.sub_nx; ++i)
                    sol.pressure[grid_.cell(i0 + i, j0 + j)] = pres[s][j * dec_.sub_nx + i];
            subs_[s].solver->fill_interior(pres[s], sol.flux);
            subs_[s].solver->fill_sides(pres[s], sds[s], sol.flux);
        }
        if (floating_) sol.gauge_shift = normalize_pressure(sol.pressure);
        return sol;
    }

  private:
    struct ColKey {
        int iface;
        bool is_u;
        int j;
    };
    struct SubInfo {
        std::unique_ptr<TpfaSolver> solver;
        std::array<int, 4> iface{-1, -1, -1, -1};
        std::array<std::vector<double>, 4> beta;  ///< Robin weights on interface sides
        std::vector<ColKey> cols;
        std::vector<int> col_global;
        Eigen::MatrixXd responses;                 ///< cells x cols
        std::array<Eigen::MatrixXd, 4> trace;      ///< per interface side: edges x cols
    };

    int side_facing(int s, int k) const {
        for (int side = 0; side < 4; ++side)
            if (sk_.sub_interfaces[s][side] == k) return side;
        throw SolverError("mrcm: interface not adjacent to subdomain");
    }

    /// Adds w times the continuity-row integrals of one side's flux trace:
    /// flux jump tested against the pressure space, Robin term against the
    /// flux space. Same quadrature as the assembled system rows.
    void accumulate_rows(int k, int s, const std::vector<double>& tr, double w,
                         Eigen::VectorXd& out) const {
        const auto& f = sk_.interfaces[k];
        const auto& st = setups_[k];
        const int np = st.pressure_space.dim();
        const double sg = Skeleton::orientation_sign(f, s);
        const auto& beta = subs_[s].beta[side_facing(s, k)];
        for (int jp = 0; jp < np; ++jp) {
            double v = 0.0;
            for (int e = 0; e < f.count; ++e) v += tr[e] * st.pressure_space.basis[jp][e];
            out[row_base_[k] + jp] += w * v * f.edge_len;
        }
        for (int ju = 0; ju < st.flux_space.dim(); ++ju) {
            double v = 0.0;
            for (int e = 0; e < f.count; ++e) v += beta[e] * tr[e] * st.flux_space.basis[ju][e];
            out[row_base_[k] + np + ju] += w * v * sg * f.edge_len;
        }
    }

    void layout_columns() {
        const int nk = static_cast<int>(sk_.interfaces.size());
        col_base_.resize(nk);
        row_base_.resize(nk);
        dim_ = 0;
        for (int k = 0; k < nk; ++k) {
            col_base_[k] = dim_;
            row_base_[k] = dim_;
            dim_ += setups_[k].flux_space.dim() + setups_[k].pressure_space.dim();
        }
    }

    /// Robin data of one basis response on one side of subdomain s: zero
    /// unless the column's interface is the one this side faces.
    std::vector<double> column_side_data(const SubInfo& su, int side, const ColKey& key) const {
        const int k = su.iface[side];
        if (k != key.iface) return {};
        const auto& f = sk_.interfaces[k];
        std::vector<double> r(f.count);
        const double sgn = Skeleton::orientation_sign(f, sub_of(su));
        if (key.is_u) {
            for (int e = 0; e < f.count; ++e)
                r[e] = -su.beta[side][e] * sgn * setups_[k].flux_space.basis[key.j][e];
        } else {
            for (int e = 0; e < f.count; ++e) r[e] = setups_[k].pressure_space.basis[key.j][e];
        }
        return r;
    }

    int sub_of(const SubInfo& su) const { return static_cast<int>(&su - subs_.data()); }

    SideData external_data(int s, const SideData& global) const {
        SideData sd;
        const auto [i0, j0] = dec_.origin(s);
        for (int side = 0; side < 4; ++side) {
            if (subs_[s].iface[side] >= 0) continue;
            if (global[side].empty()) continue;
            const bool we = side == West || side == East;
            const int off = we ? j0 : i0;
            const int n = we ? dec_.sub_ny : dec_.sub_nx;
            sd[side].assign(global[side].begin() + off, global[side].begin() + off + n);
        }
        return sd;
    }

    void build_subdomains(const CellField& kappa, int threads) {
        const int nsub = dec_.count();
        subs_.resize(nsub);
        for (int s = 0; s < nsub; ++s) {
            auto& su = subs_[s];
            su.iface = sk_.sub_interfaces[s];
            const auto [i0, j0] = dec_.origin(s);
            std::array<SideSpec, 4> sides;
            for (int side = 0; side < 4; ++side) {
                const int k = su.iface[side];
                if (k < 0) {
                    sides[side] = global_sides_[side];
                    if (sides[side].kind == SideSpec::Robin) {
                        const bool we = side == West || side == East;
                        const int off = we ? j0 : i0;
                        const int n = we ? dec_.sub_ny : dec_.sub_nx;
                        require(static_cast<int>(global_sides_[side].beta.size()) ==
                                    (we ? grid_.ny : grid_.nx),
                                "mrcm: global Robin weights do not match grid side");
                        sides[side].beta.assign(global_sides_[side].beta.begin() + off,
                                                global_sides_[side].beta.begin() + off + n);
                    }
                    continue;
                }
                const auto& f = sk_.interfaces[k];
                sides[side].kind = SideSpec::Robin;
                sides[side].beta.resize(f.count);
                for (int e = 0; e < f.count; ++e) {
                    const auto [clo, chi] = f.edge_cells(grid_, e);
                    const int inside = s == f.sub_lo ? clo : chi;
                    sides[side].beta[e] = setups_[k].alpha[e] * dec_.coarse_h / kappa[inside];
                }
                su.beta[side] = sides[side].beta;
            }
            su.solver = std::make_unique<TpfaSolver>(grid_, i0, j0, dec_.sub_nx, dec_.sub_ny,
                                                     kappa, sides);
            for (int side = 0; side < 4; ++side) {
                const int k = su.iface[side];
                if (k < 0) continue;
                for (int j = 0; j < setups_[k].flux_space.dim(); ++j) {
                    su.cols.push_back({k, true, j});
                    su.col_global.push_back(col_base_[k] + j);
                }
                for (int j = 0; j < setups_[k].pressure_space.dim(); ++j) {
                    su.cols.push_back({k, false, j});
                    su.col_global.push_back(col_base_[k] + setups_[k].flux_space.dim() + j);
                }
            }
        }
        parallel_for(nsub, threads, [&](int s) {
            auto& su = subs_[s];
            const int ncols = static_cast<int>(su.cols.size());
            Eigen::MatrixXd rhs(su.solver->cells() + (su.solver->floating() ? 1 : 0), ncols);
            for (int c = 0; c < ncols; ++c) {
                SideData sd;
                for (int side = 0; side < 4; ++side)
                    if (su.iface[side] >= 0) sd[side] = column_side_data(su, side, su.cols[c]);
                rhs.col(c) = su.solver->assemble_rhs(sd, {});
            }
            su.responses = ncols > 0 ? su.solver->solve(rhs)
                                     : Eigen::MatrixXd(su.solver->cells(), 0);
            for (int side = 0; side < 4; ++side) {
                const int k = su.iface[side];
                if (k < 0) continue;
                const int m = sk_.interfaces[k].count;
                su.trace[side].resize(m, ncols);
                for (int c = 0; c < ncols; ++c) {
                    const auto data = column_side_data(su, side, su.cols[c]);
                    const auto t = su.solver->side_trace(su.responses.col(c),
                                                         static_cast<Side>(side), data);
                    for (int e = 0; e < m; ++e) su.trace[side](e, c) = t[e];
                }
            }
        });
    }

    void assemble_interface_system() {
        if (dim_ == 0) return;
        const int total = dim_ + (floating_ ? 1 : 0);
        std::vector<Eigen::Triplet<double>> trip;
        for (int k = 0; k < static_cast<int>(sk_.interfaces.size()); ++k) {
            const auto& f = sk_.interfaces[k];
            const auto& st = setups_[k];
            const int np = st.pressure_space.dim();
            const int nu = st.flux_space.dim();
            for (const int s : {f.sub_lo, f.sub_hi}) {
                const auto& su = subs_[s];
                const int side = side_facing(s, k);
                const double sg = Skeleton::orientation_sign(f, s);
                for (std::size_t c = 0; c < su.cols.size(); ++c) {
                    for (int jp = 0; jp < np; ++jp) {
                        double v = 0.0;
                        for (int e = 0; e < f.count; ++e)
                            v += su.trace[side](e, static_cast<Eigen::Index>(c)) *
                                 st.pressure_space.basis[jp][e];
                        if (v != 0.0)
                            trip.emplace_back(row_base_[k] + jp, su.col_global[c], v * f.edge_len);
                    }
                    for (int ju = 0; ju < nu; ++ju) {
                        double v = 0.0;
                        for (int e = 0; e < f.count; ++e)
                            v += su.beta[side][e] * su.trace[side](e, static_cast<Eigen::Index>(c)) *
                                 st.flux_space.basis[ju][e];
                        if (v != 0.0)
                            trip.emplace_back(row_base_[k] + np + ju, su.col_global[c],
                                              v * sg * f.edge_len);
                    }
                }
            }
            // direct Robin mismatch term, -sum_i beta_i U phi' over the interface
            const auto& beta_lo = subs_[f.sub_lo].beta[side_facing(f.sub_lo, k)];
            const auto& beta_hi = subs_[f.sub_hi].beta[side_facing(f.sub_hi, k)];
            for (int ju = 0; ju < nu; ++ju)
                for (int j = 0; j < nu; ++j) {
                    double v = 0.0;
                    for (int e = 0; e < f.count; ++e)
                        v += (beta_lo[e] + beta_hi[e]) * st.flux_space.basis[j][e] *
                             st.flux_space.basis[ju][e];
                    if (v != 0.0)
                        trip.emplace_back(row_base_[k] + np + ju, col_base_[k] + j,
                                          -v * f.edge_len);
                }
            if (floating_) {
                for (int jp = 0; jp < np; ++jp) {
                    double w = 0.0;
                    for (int e = 0; e < f.count; ++e) w += st.pressure_space.basis[jp][e];
                    w *= f.edge_len;
                    trip.emplace_back(dim_, col_base_[k] + nu + jp, w);
                    trip.emplace_back(col_base_[k] + nu + jp, dim_, w);
                }
            }
        }
        mat_.resize(total, total);
        mat_.setFromTriplets(trip.begin(), trip.end());
        // entries mix Robin weights from opposite ends of the contrast
        // range, so the raw system can sit many decades out of balance
        lu_.compute(equilibrated(mat_, rs_, cs_));
        if (lu_.info() != Eigen::Success)
            throw SolverError("mrcm: interface system factorization failed");
    }

    void check_compatibility(const SideData& data, const std::vector<double>& source) const {
        double net = 0.0, scale = 0.0;
        for (int s = 0; s < 4; ++s) {
            const double area = (s == West || s == East) ? grid_.hy : grid_.hx;
            for (double z : data[s]) {
                net += z * area;
                scale += std::abs(z) * area;
            }
        }
        for (double q : source) {
            net -= q;
            scale += std::abs(q);
        }
        if (std::abs(net) > 1e-8 * std::max(1.0, scale))
            throw SolverError("mrcm: boundary data and sources are incompatible (net " +
                              format_double(net) + ")");
    }

    FineGrid grid_;
    Decomposition dec_;
    Skeleton sk_;
    std::vector<InterfaceSetup> setups_;
    std::array<SideSpec, 4> global_sides_;
    bool floating_ = false;
    int dim_ = 0;
    std::vector<int> col_base_, row_base_;
    std::vector<SubInfo> subs_;
    Eigen::SparseMatrix<double> mat_;
    Eigen::VectorXd rs_, cs_;  ///< equilibration scales, powers of two
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace mrcm
