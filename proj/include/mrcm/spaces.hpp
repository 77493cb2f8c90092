#pragma once

#include <utility>
#include <vector>

#include <mrcm/common.hpp>
#include <mrcm/field.hpp>
#include <mrcm/grid.hpp>

namespace mrcm {

/**
 * A finite-dimensional function space on one interface, spanned by piecewise
 * constants over its fine edges. basis[j][e] is function j on edge e.
 */
struct InterfaceSpace {
    int edges = 0;
    std::vector<std::vector<double>> basis;

    int dim() const { return static_cast<int>(basis.size()); }
};

/// Monomials 1, x, ..., x^degree sampled at edge midpoints of [0,1].
inline InterfaceSpace polynomial_space(int m, int degree) {
    require(m >= 1, "spaces: need m >= 1");
    require(degree == 0 || degree == 1, "spaces: only constant and linear polynomials supported");
    InterfaceSpace s;
    s.edges = m;
    s.basis.assign(degree + 1, std::vector<double>(m));
    for (int e = 0; e < m; ++e) {
        const double x = (e + 0.5) / m;
        double p = 1.0;
        for (int j = 0; j <= degree; ++j) {
            s.basis[j][e] = p;
            p *= x;
        }
    }
    return s;
}

/// One indicator per fine edge: the full piecewise-constant trace space.
inline InterfaceSpace indicator_space(int m) {
    require(m >= 1, "spaces: need m >= 1");
    InterfaceSpace s;
    s.edges = m;
    s.basis.assign(m, std::vector<double>(m, 0.0));
    for (int e = 0; e < m; ++e) s.basis[e][e] = 1.0;
    return s;
}

/// Maximal runs of set flags, as inclusive [first,last] edge ranges.
inline std::vector<std::pair<int, int>> flagged_runs(const std::vector<char>& flags) {
    std::vector<std::pair<int, int>> runs;
    const int m = static_cast<int>(flags.size());
    int e = 0;
    while (e < m) {
        if (!flags[e]) {
            ++e;
            continue;
        }
        int last = e;
        while (last + 1 < m && flags[last + 1]) ++last;
        runs.emplace_back(e, last);
        e = last + 2;
    }
    return runs;
}

namespace detail {

inline void check_runs(int m, const std::vector<std::pair<int, int>>& runs) {
    require(m >= 1 && !runs.empty(), "spaces: need at least one run");
    int prev_end = -2;
    for (const auto& [a, b] : runs) {
        require(0 <= a && a <= b && b < m, "spaces: run out of range");
        require(a > prev_end + 1, "spaces: runs must be disjoint, ordered, non-adjacent");
        prev_end = b;
    }
}

}  // namespace detail

/**
 * Pressure space adapted to highly conductive streaks crossing the
 * interface. The trace of the pressure is nearly constant across each
 * streak, so the space consists of one plateau function per run of flagged
 * edges (exactly 1 on the run, linear ramps across the neighbouring gaps)
 * plus end ramps where the first/last run does not touch the interface ends.
 * Ramp pairs are complements of each other, so the functions sum to exactly
 * one on every edge.
 */
inline InterfaceSpace pbs_pressure_space(int m, const std::vector<std::pair<int, int>>& runs) {
    detail::check_runs(m, runs);
    const int R = static_cast<int>(runs.size());
    const bool left_ramp = runs.front().first > 0;
    const bool right_ramp = runs.back().second < m - 1;

    InterfaceSpace s;
    s.edges = m;
    const int dim = R + (left_ramp ? 1 : 0) + (right_ramp ? 1 : 0);
    s.basis.assign(dim, std::vector<double>(m, 0.0));
    const int plateau0 = left_ramp ? 1 : 0;  // index of the first plateau function

    for (int r = 0; r < R; ++r)
        for (int e = runs[r].first; e <= runs[r].second; ++e) s.basis[plateau0 + r][e] = 1.0;

    // gap g sits before run g (g = R: after the last run)
    for (int g = 0; g <= R; ++g) {
        const int gb = g == 0 ? 0 : runs[g - 1].second + 1;
        const int ge = g == R ? m : runs[g].first;
        if (gb >= ge) continue;
        const double left = static_cast<double>(gb) / m;
        const double right = static_cast<double>(ge) / m;
        const int up = g < R ? plateau0 + g : dim - 1;                  // ramps toward run g, or the right end
        const int down = g == 0 ? 0 : plateau0 + g - 1;                 // left end ramp, or previous plateau
        for (int e = gb; e < ge; ++e) {
            const double u = ((e + 0.5) / m - left) / (right - left);
            s.basis[up][e] = u;
            s.basis[down][e] = 1.0 - u;
        }
    }
    return s;
}

/**
 * Flux space adapted to blocking streaks crossing the interface. The normal
 * flux is nearly zero across each streak and roughly independent between the
 * open segments, so the space is the set of indicators of the runs and of
 * the gaps between and around them (empty end gaps dropped). Disjoint
 * indicators partition the interface exactly.
 */
inline InterfaceSpace pbs_flux_space(int m, const std::vector<std::pair<int, int>>& runs) {
    detail::check_runs(m, runs);
    const int R = static_cast<int>(runs.size());

    InterfaceSpace s;
    s.edges = m;
    auto add_indicator = [&](int first, int last) {
        std::vector<double> v(m, 0.0);
        for (int e = first; e <= last; ++e) v[e] = 1.0;
        s.basis.push_back(std::move(v));
    };
    for (int g = 0; g <= R; ++g) {
        const int gb = g == 0 ? 0 : runs[g - 1].second + 1;
        const int ge = g == R ? m : runs[g].first;
        if (gb < ge) add_indicator(gb, ge - 1);
        if (g < R) add_indicator(runs[g].first, runs[g].second);
    }
    return s;
}

// ---------------------------------------------------------------------------
// per-interface setup: edge classification, space selection, Robin weights
// ---------------------------------------------------------------------------

/// Per-edge contrast flags for one interface.
struct InterfaceClassification {
    std::vector<char> frac;     ///< highly conductive cell touches the edge
    std::vector<char> barrier;  ///< blocking cell touches the edge
    bool any_frac = false;
    bool any_barrier = false;
};

/**
 * Flags each fine edge of the interface by the permeability of its two
 * adjacent cells: conductive if max(K-,K+) > zeta_max, blocking if
 * min(K-,K+) < zeta_min.
 */
inline InterfaceClassification classify_interface(const FineGrid& g, const Interface& f,
                                                  const CellField& K, double zeta_max,
                                                  double zeta_min) {
    InterfaceClassification c;
    c.frac.assign(f.count, 0);
    c.barrier.assign(f.count, 0);
    for (int e = 0; e < f.count; ++e) {
        const auto [lo, hi] = f.edge_cells(g, e);
        const double kmin = std::min(K[lo], K[hi]);
        const double kmax = std::max(K[lo], K[hi]);
        if (kmax > zeta_max) {
            c.frac[e] = 1;
            c.any_frac = true;
        }
        if (kmin < zeta_min) {
            c.barrier[e] = 1;
            c.any_barrier = true;
        }
    }
    return c;
}

enum class Scheme {
    Polynomial,    ///< same polynomial spaces on every interface
    PhysicsBased,  ///< adapted spaces on flagged interfaces, linear elsewhere
    FullFine,      ///< one indicator per edge; reproduces the fine solution
};

struct SpaceOptions {
    Scheme scheme = Scheme::Polynomial;
    int degree = 1;
    double zeta_max = 1.0;  ///< conductive threshold
    double zeta_min = 1.0;  ///< blocking threshold
    /// Methods that carry only one interface unknown keep the other space
    /// polynomial even under the adapted scheme.
    bool pbs_pressure = true;
    bool pbs_flux = true;
    bool adaptive_alpha = false;
    double alpha = 1.0;        ///< constant Robin weight
    double alpha_small = 1e-2; ///< adaptive weight on conductive-flagged edges
    double alpha_large = 1e2;  ///< adaptive weight elsewhere
};

/// Spaces and Robin weight profile chosen for one interface.
struct InterfaceSetup {
    InterfaceSpace flux_space;      ///< U_H
    InterfaceSpace pressure_space;  ///< P_H
    std::vector<double> alpha;      ///< dimensionless weight per fine edge
    InterfaceClassification cls;
};

/**
 * Applies the classification-driven selection on every interface: the
 * adapted pressure space where conductive streaks cross, the adapted flux
 * space where blocking streaks cross, polynomials elsewhere; and the
 * per-edge Robin weights (small on conductive-flagged edges when adaptive).
 */
inline std::vector<InterfaceSetup> build_interface_setups(const FineGrid& g, const Skeleton& sk,
                                                          const CellField& K,
                                                          const SpaceOptions& opt) {
    require(static_cast<int>(K.size()) == g.cells(), "spaces: field does not match grid");
    require(opt.alpha > 0.0 && opt.alpha_small > 0.0 && opt.alpha_large > 0.0,
            "spaces: Robin weights must be positive");
    std::vector<InterfaceSetup> setups;
    setups.reserve(sk.interfaces.size());
    for (const auto& f : sk.interfaces) {
        InterfaceSetup su;
        su.cls = classify_interface(g, f, K, opt.zeta_max, opt.zeta_min);
        switch (opt.scheme) {
            case Scheme::FullFine:
                su.flux_space = indicator_space(f.count);
                su.pressure_space = indicator_space(f.count);
                break;
            case Scheme::Polynomial:
                su.flux_space = polynomial_space(f.count, opt.degree);
                su.pressure_space = polynomial_space(f.count, opt.degree);
                break;
            case Scheme::PhysicsBased:
                su.pressure_space = (opt.pbs_pressure && su.cls.any_frac)
                                        ? pbs_pressure_space(f.count, flagged_runs(su.cls.frac))
                                        : polynomial_space(f.count, opt.degree);
                su.flux_space = (opt.pbs_flux && su.cls.any_barrier)
                                    ? pbs_flux_space(f.count, flagged_runs(su.cls.barrier))
                                    : polynomial_space(f.count, opt.degree);
                break;
        }
        su.alpha.assign(f.count, opt.alpha);
        if (opt.adaptive_alpha)
            for (int e = 0; e < f.count; ++e)
                su.alpha[e] = su.cls.frac[e] ? opt.alpha_small : opt.alpha_large;
        setups.push_back(std::move(su));
    }
    return setups;
}

}  // namespace mrcm
