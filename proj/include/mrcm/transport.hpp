#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <mrcm/common.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>

namespace mrcm {

/// Quadratic relative permeabilities, water injected at saturation s_inj.
struct Fluid {
    double mu_w = 1.0;
    double mu_o = 10.0;
    double s_inj = 1.0;
};

/// Total mobility s^2/mu_w + (1-s)^2/mu_o.
inline double mobility(double s, const Fluid& fl) {
    return s * s / fl.mu_w + (1.0 - s) * (1.0 - s) / fl.mu_o;
}

/// Water fractional flow M s^2 / (M s^2 + (1-s)^2), M = mu_o/mu_w.
inline double frac_flow(double s, const Fluid& fl) {
    const double m = fl.mu_o / fl.mu_w;
    const double w = m * s * s;
    return w / (w + (1.0 - s) * (1.0 - s));
}

inline double frac_flow_deriv(double s, const Fluid& fl) {
    const double m = fl.mu_o / fl.mu_w;
    const double d = m * s * s + (1.0 - s) * (1.0 - s);
    return 2.0 * m * s * (1.0 - s) / (d * d);
}

/// Largest |f'| over a 1001-point sample of [0,1].
inline double max_frac_flow_deriv(const Fluid& fl) {
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i)
        worst = std::max(worst, std::abs(frac_flow_deriv(i / 1000.0, fl)));
    return worst;
}

/// Water added to / removed from the domain by one advection step.
struct AdvectTally {
    double injected = 0.0;  ///< water in through boundary inflow and injectors
    double produced = 0.0;  ///< water out through boundary outflow and sinks
};

/**
 * One explicit upwind step of the saturation equation with unit porosity.
 * The velocity must be single-valued; inflowing boundaries and injector
 * cells carry the injected saturation, sinks produce at the cell's own
 * fractional flow. Source entries are total rates per cell.
 */
inline AdvectTally advect(const FineGrid& g, const FaceField& u, const std::vector<double>& source,
                          const Fluid& fl, double dt, CellField& s) {
    require(static_cast<int>(s.size()) == g.cells(), "transport: saturation does not match grid");
    require(source.empty() || static_cast<int>(source.size()) == g.cells(),
            "transport: source does not match grid");
    std::vector<double> net(g.cells(), 0.0);
    AdvectTally tally;
    const double f_inj = frac_flow(fl.s_inj, fl);

    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i <= g.nx; ++i) {
            const double flux = u.x_lo[u.xface(i, j)] * g.hy;
            if (i == 0) {
                const int c = g.cell(0, j);
                const double w = flux > 0.0 ? flux * f_inj : flux * frac_flow(s[c], fl);
                net[c] += w;
                (flux > 0.0 ? tally.injected : tally.produced) += std::abs(w);
            } else if (i == g.nx) {
                const int c = g.cell(g.nx - 1, j);
                const double w = flux > 0.0 ? flux * frac_flow(s[c], fl) : flux * f_inj;
                net[c] -= w;
                (flux > 0.0 ? tally.produced : tally.injected) += std::abs(w);
            } else {
                const int cw = g.cell(i - 1, j), ce = g.cell(i, j);
                const double w = flux * frac_flow(s[flux > 0.0 ? cw : ce], fl);
                net[cw] -= w;
                net[ce] += w;
            }
        }
    }
    for (int j = 0; j <= g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double flux = u.y_lo[u.yface(i, j)] * g.hx;
            if (j == 0) {
                const int c = g.cell(i, 0);
                const double w = flux > 0.0 ? flux * f_inj : flux * frac_flow(s[c], fl);
                net[c] += w;
                (flux > 0.0 ? tally.injected : tally.produced) += std::abs(w);
            } else if (j == g.ny) {
                const int c = g.cell(i, g.ny - 1);
                const double w = flux > 0.0 ? flux * frac_flow(s[c], fl) : flux * f_inj;
                net[c] -= w;
                (flux > 0.0 ? tally.produced : tally.injected) += std::abs(w);
            } else {
                const int cs = g.cell(i, j - 1), cn = g.cell(i, j);
                const double w = flux * frac_flow(s[flux > 0.0 ? cs : cn], fl);
                net[cs] -= w;
                net[cn] += w;
            }
        }
    }
    if (!source.empty()) {
        for (int c = 0; c < g.cells(); ++c) {
            const double q = source[c];
            if (q > 0.0) {
                net[c] += q * f_inj;
                tally.injected += q * f_inj;
            } else if (q < 0.0) {
                const double w = q * frac_flow(s[c], fl);
                net[c] += w;
                tally.produced -= w;
            }
        }
    }
    const double inv_vol = 1.0 / g.cell_volume();
    for (int c = 0; c < g.cells(); ++c) {
        const double v = s[c] + dt * net[c] * inv_vol;
        if (v < -1e-10 || v > 1.0 + 1e-10)
            throw SolverError("transport: saturation overshoot (CFL violated?) at value " +
                              format_double(v));
        // tiny closure defects of the velocity may still graze the bounds
        s[c] = std::clamp(v, 0.0, 1.0);
    }
    tally.injected *= dt;
    tally.produced *= dt;
    return tally;
}

/**
 * Largest stable explicit step: cfl * min over cells of
 * volume / (max|f'| * total outflow), sinks counted as outflow. A velocity
 * field with no outflow anywhere gives an unbounded step (infinity); the
 * caller caps it.
 */
inline double stable_dt(const FineGrid& g, const FaceField& u, const std::vector<double>& source,
                        const Fluid& fl, double cfl) {
    const double dfmax = max_frac_flow_deriv(fl);
    double worst = 0.0;  // max outflow per cell
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double out = 0.0;
            out += std::max(0.0, u.x_lo[u.xface(i + 1, j)] * g.hy);
            out += std::max(0.0, -u.x_hi[u.xface(i, j)] * g.hy);
            out += std::max(0.0, u.y_lo[u.yface(i, j + 1)] * g.hx);
            out += std::max(0.0, -u.y_hi[u.yface(i, j)] * g.hx);
            if (!source.empty()) out += std::max(0.0, -source[g.cell(i, j)]);
            worst = std::max(worst, out);
        }
    }
    if (worst == 0.0) return std::numeric_limits<double>::infinity();
    return cfl * g.cell_volume() / (dfmax * worst);
}

/**
 * Velocity at time t from the last two pressure solves at t_prev < t_cur,
 * linearly extrapolated; with a single solve so far (t_prev == t_cur) the
 * newest field is returned unchanged.
 */
inline FaceField extrapolate_velocity(const FaceField& u_prev, const FaceField& u_cur,
                                      double t_prev, double t_cur, double t) {
    require(t_cur >= t_prev, "transport: solve times out of order");
    require(t >= t_cur, "transport: extrapolation time before the newest solve");
    if (t_cur == t_prev) return u_cur;
    const double dtp = t_cur - t_prev;
    const double a = (t - t_prev) / dtp;
    const double b = (t - t_cur) / dtp;  // a - b = 1
    return a * u_cur + (-b) * u_prev;
}

/// Pore volumes injected per unit time: (boundary inflow + injector rates)
/// divided by the pore volume of the domain (porosity one).
inline double pvi_rate(const FineGrid& g, const FaceField& u, const std::vector<double>& source) {
    double in = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        in += std::max(0.0, u.x_lo[u.xface(0, j)] * g.hy);
        in += std::max(0.0, -u.x_lo[u.xface(g.nx, j)] * g.hy);
    }
    for (int i = 0; i < g.nx; ++i) {
        in += std::max(0.0, u.y_lo[u.yface(i, 0)] * g.hx);
        in += std::max(0.0, -u.y_lo[u.yface(i, g.ny)] * g.hx);
    }
    for (double q : source) in += std::max(0.0, q);
    return in / (g.lx * g.ly);
}

struct TransportOptions {
    double cfl = 0.9;
    int substeps_per_pressure = 20;  ///< transport steps between pressure updates
    double s0 = 0.0;                 ///< initial water saturation
};

/// Saturation snapshots at the requested injection checkpoints.
struct TwoPhaseResult {
    std::vector<CellField> snapshots;
    std::vector<double> snapshot_times;  ///< physical time of each checkpoint
    CellField saturation;                ///< state at the final checkpoint
    int pressure_solves = 0;
    double injected = 0.0;
    double produced = 0.0;
};

/// Computes a conservative single-valued velocity field for a saturation.
using PressureSolver = std::function<FaceField(const CellField& s)>;

/**
 * Sequential implicit-pressure explicit-saturation loop. Pressure is
 * re-solved every C transport substeps; between solves the velocity is
 * extrapolated linearly from the last two solves (held constant before the
 * second one exists), evaluated at the start of each substep. Each substep
 * advances by one stable step of the extrapolated field it advects with,
 * shortened to land exactly on each checkpoint, measured in pore volumes
 * injected.
 */
inline TwoPhaseResult run_two_phase(const FineGrid& g, const std::vector<double>& source,
                                    const Fluid& fl, const TransportOptions& opt,
                                    const std::vector<double>& checkpoints,
                                    const PressureSolver& solve_pressure) {
    require(!checkpoints.empty(), "transport: need at least one checkpoint");
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
        require(checkpoints[i] > (i ? checkpoints[i - 1] : 0.0),
                "transport: checkpoints must be positive and increasing");
    require(opt.cfl > 0.0 && opt.cfl <= 1.0, "transport: cfl must be in (0,1]");
    require(opt.substeps_per_pressure >= 1, "transport: need at least one substep");

    TwoPhaseResult res;
    res.saturation.assign(g.cells(), opt.s0);
    CellField& s = res.saturation;

    FaceField u_cur = solve_pressure(s);
    FaceField u_prev = u_cur;
    FaceField u_t = u_cur;
    res.pressure_solves = 1;
    double t_cur = 0.0, t_prev = 0.0;  // times of the last two pressure solves
    double t = 0.0, pvi = 0.0;
    std::size_t next = 0;

    auto blend = [](double a, double b, const std::vector<double>& x, const std::vector<double>& y,
                    std::vector<double>& out) {
        for (std::size_t f = 0; f < out.size(); ++f) out[f] = a * x[f] - b * y[f];
    };

    while (next < checkpoints.size()) {
        for (int sub = 0; sub < opt.substeps_per_pressure && next < checkpoints.size(); ++sub) {
            if (t_cur > t_prev) {
                const double dtp = t_cur - t_prev;
                const double a = (t - t_prev) / dtp;  // affine: a - b = 1
                const double b = (t - t_cur) / dtp;
                blend(a, b, u_cur.x_lo, u_prev.x_lo, u_t.x_lo);
                blend(a, b, u_cur.x_hi, u_prev.x_hi, u_t.x_hi);
                blend(a, b, u_cur.y_lo, u_prev.y_lo, u_t.y_lo);
                blend(a, b, u_cur.y_hi, u_prev.y_hi, u_t.y_hi);
            } else {
                u_t = u_cur;
            }
            const double rate = pvi_rate(g, u_t, source);
            if (!(rate > 0.0))
                throw SolverError("transport: nothing injected; cannot reach checkpoint");
            double dt = stable_dt(g, u_t, source, fl, opt.cfl);
            bool hit = false;
            if (pvi + dt * rate >= checkpoints[next]) {  // also caps an unbounded step
                dt = (checkpoints[next] - pvi) / rate;
                hit = true;
            }
            const AdvectTally tally = advect(g, u_t, source, fl, dt, s);
            res.injected += tally.injected;
            res.produced += tally.produced;
            t += dt;
            pvi = hit ? checkpoints[next] : pvi + dt * rate;
            if (hit) {
                res.snapshots.push_back(s);
                res.snapshot_times.push_back(t);
                ++next;
            }
        }
        if (next >= checkpoints.size()) break;
        u_prev = u_cur;
        t_prev = t_cur;
        u_cur = solve_pressure(s);
        t_cur = t;
        ++res.pressure_solves;
    }
    return res;
}

}  // namespace mrcm
