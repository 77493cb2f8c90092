#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <mrcm/spaces.hpp>

using namespace mrcm;
using Catch::Approx;

TEST_CASE("polynomial spaces sample monomials at edge midpoints") {
    const InterfaceSpace s = polynomial_space(2, 1);
    REQUIRE(s.dim() == 2);
    CHECK(s.basis[0] == std::vector<double>{1.0, 1.0});
    CHECK(s.basis[1] == std::vector<double>{0.25, 0.75});

    const InterfaceSpace c = polynomial_space(3, 0);
    REQUIRE(c.dim() == 1);
    CHECK(c.basis[0] == std::vector<double>{1.0, 1.0, 1.0});

    CHECK_THROWS_AS(polynomial_space(4, 2), std::invalid_argument);
    CHECK_THROWS_AS(polynomial_space(0, 1), std::invalid_argument);
}

TEST_CASE("indicator space is the identity basis") {
    const InterfaceSpace s = indicator_space(3);
    REQUIRE(s.dim() == 3);
    for (int j = 0; j < 3; ++j)
        for (int e = 0; e < 3; ++e) CHECK(s.basis[j][e] == (j == e ? 1.0 : 0.0));
}

TEST_CASE("flagged runs are maximal and ordered") {
    CHECK(flagged_runs({0, 1, 1, 0, 0, 1, 0}) ==
          std::vector<std::pair<int, int>>{{1, 2}, {5, 5}});
    CHECK(flagged_runs({1, 1}) == std::vector<std::pair<int, int>>{{0, 1}});
    CHECK(flagged_runs({0, 0, 0}).empty());
}

TEST_CASE("pressure space plateaus and ramps, interior run") {
    // run on edges 4..5 of 10: left end ramp, plateau, right end ramp
    const InterfaceSpace s = pbs_pressure_space(10, {{4, 5}});
    REQUIRE(s.dim() == 3);
    CHECK(s.basis[1][4] == 1.0);
    CHECK(s.basis[1][5] == 1.0);
    // gap 0: midpoints (e+0.5)/10 mapped onto [0, 0.4]
    CHECK(s.basis[1][0] == Approx(0.125));
    CHECK(s.basis[0][0] == Approx(0.875));
    CHECK(s.basis[1][3] == Approx(0.875));
    CHECK(s.basis[0][3] == Approx(0.125));
    // gap 1: ramp down from the plateau, up toward the right end
    CHECK(s.basis[2][9] == Approx(0.875));
    CHECK(s.basis[1][9] == Approx(0.125));
    CHECK(s.basis[2][4] == 0.0);
    for (int e = 0; e < 10; ++e) {
        const double sum = s.basis[0][e] + s.basis[1][e] + s.basis[2][e];
        CHECK(std::abs(sum - 1.0) <= 1e-15);
    }
}

TEST_CASE("pressure space drops end ramps at touched ends") {
    const InterfaceSpace left = pbs_pressure_space(6, {{0, 2}});
    REQUIRE(left.dim() == 2);
    CHECK(left.basis[0][0] == 1.0);
    CHECK(left.basis[0][2] == 1.0);
    CHECK(left.basis[1][3] == Approx((3.5 / 6.0 - 0.5) / 0.5));
    CHECK(left.basis[0][3] + left.basis[1][3] == 1.0);

    const InterfaceSpace both = pbs_pressure_space(6, {{0, 1}, {4, 5}});
    REQUIRE(both.dim() == 2);
    CHECK(both.basis[0][1] == 1.0);
    CHECK(both.basis[1][4] == 1.0);
    CHECK(both.basis[0][2] + both.basis[1][2] == 1.0);

    const InterfaceSpace full = pbs_pressure_space(6, {{0, 5}});
    REQUIRE(full.dim() == 1);
    CHECK(full.basis[0] == std::vector<double>(6, 1.0));
}

TEST_CASE("flux space is disjoint indicators of gaps and runs") {
    const InterfaceSpace s = pbs_flux_space(10, {{4, 5}});
    REQUIRE(s.dim() == 3);
    CHECK(s.basis[0][0] == 1.0);
    CHECK(s.basis[0][3] == 1.0);
    CHECK(s.basis[0][4] == 0.0);
    CHECK(s.basis[1][4] == 1.0);
    CHECK(s.basis[1][5] == 1.0);
    CHECK(s.basis[2][6] == 1.0);
    CHECK(s.basis[2][9] == 1.0);
    for (int e = 0; e < 10; ++e) {
        double sum = 0.0;
        int hits = 0;
        for (int j = 0; j < s.dim(); ++j) {
            sum += s.basis[j][e];
            hits += s.basis[j][e] != 0.0;
        }
        CHECK(sum == 1.0);
        CHECK(hits == 1);
    }

    CHECK(pbs_flux_space(6, {{0, 2}}).dim() == 2);  // no empty left gap
    CHECK(pbs_flux_space(6, {{0, 5}}).dim() == 1);
}

TEST_CASE("run lists are validated") {
    CHECK_THROWS_AS(pbs_pressure_space(6, {}), std::invalid_argument);
    CHECK_THROWS_AS(pbs_pressure_space(6, {{-1, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(pbs_pressure_space(6, {{0, 6}}), std::invalid_argument);
    CHECK_THROWS_AS(pbs_pressure_space(6, {{2, 1}}), std::invalid_argument);
    // adjacent runs would really be one run
    CHECK_THROWS_AS(pbs_flux_space(6, {{0, 2}, {3, 4}}), std::invalid_argument);
    CHECK_THROWS_AS(pbs_flux_space(6, {{4, 5}, {0, 1}}), std::invalid_argument);
}

TEST_CASE("randomized spaces keep the exact partition of unity") {
    std::mt19937 rng(20240817);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 39);
        std::vector<char> flags(m, 0);
        const int nset = 1 + static_cast<int>(rng() % m);
        for (int k = 0; k < nset; ++k) flags[rng() % m] = 1;
        const auto runs = flagged_runs(flags);
        if (runs.empty()) continue;

        const InterfaceSpace p = pbs_pressure_space(m, runs);
        const InterfaceSpace u = pbs_flux_space(m, runs);
        for (int e = 0; e < m; ++e) {
            double ps = 0.0, us = 0.0;
            int hits = 0;
            for (const auto& fn : p.basis) ps += fn[e];
            for (const auto& fn : u.basis) {
                us += fn[e];
                hits += fn[e] != 0.0;
            }
            REQUIRE(std::abs(ps - 1.0) <= 1e-15);
            REQUIRE(us == 1.0);
            REQUIRE(hits == 1);
        }
    }
}

TEST_CASE("interface classification flags contrast edges") {
    const FineGrid g = build_grid(8, 8, 1.0, 1.0);
    const auto [dec, sk] = build_decomposition(g, 2, 2);
    CellField K(64, 1.0);
    K[g.cell(3, 1)] = 1e4;   // conductive, vertical interface 0, edges 1..2
    K[g.cell(3, 2)] = 1e4;
    K[g.cell(1, 4)] = 1e-4;  // blocking, horizontal interface 2, edge 1
    K[g.cell(6, 3)] = 1e4;   // horizontal interface 3, edge 2: both flags
    K[g.cell(6, 4)] = 1e-4;

    const auto c0 = classify_interface(g, sk.interfaces[0], K, 1.0, 1.0);
    CHECK(c0.frac == std::vector<char>{0, 1, 1, 0});
    CHECK(c0.barrier == std::vector<char>{0, 0, 0, 0});
    CHECK(c0.any_frac);
    CHECK_FALSE(c0.any_barrier);

    const auto c2 = classify_interface(g, sk.interfaces[2], K, 1.0, 1.0);
    CHECK(c2.barrier == std::vector<char>{0, 1, 0, 0});
    CHECK_FALSE(c2.any_frac);

    const auto c3 = classify_interface(g, sk.interfaces[3], K, 1.0, 1.0);
    CHECK(c3.frac == std::vector<char>{0, 0, 1, 0});
    CHECK(c3.barrier == std::vector<char>{0, 0, 1, 0});

    // thresholds are strict
    const auto loose = classify_interface(g, sk.interfaces[0], K, 1e4, 1.0);
    CHECK_FALSE(loose.any_frac);
}

TEST_CASE("space selection per scheme and per-space gates") {
    const FineGrid g = build_grid(8, 8, 1.0, 1.0);
    const auto [dec, sk] = build_decomposition(g, 2, 2);
    CellField K(64, 1.0);
    K[g.cell(3, 1)] = 1e4;
    K[g.cell(3, 2)] = 1e4;
    K[g.cell(1, 4)] = 1e-4;

    SpaceOptions opt;
    opt.scheme = Scheme::PhysicsBased;
    auto setups = build_interface_setups(g, sk, K, opt);
    REQUIRE(setups.size() == 4);
    CHECK(setups[0].pressure_space.dim() == 3);  // run (1,2) plus two end ramps
    CHECK(setups[0].flux_space.dim() == 2);
    CHECK(setups[2].flux_space.dim() == 3);      // gap, run (1,1), gap
    CHECK(setups[2].pressure_space.dim() == 2);
    CHECK(setups[1].pressure_space.dim() == 2);
    CHECK(setups[1].flux_space.dim() == 2);

    opt.pbs_pressure = false;
    opt.pbs_flux = false;
    setups = build_interface_setups(g, sk, K, opt);
    CHECK(setups[0].pressure_space.dim() == 2);
    CHECK(setups[2].flux_space.dim() == 2);

    opt = {};
    opt.scheme = Scheme::Polynomial;
    opt.degree = 0;
    setups = build_interface_setups(g, sk, K, opt);
    CHECK(setups[0].pressure_space.dim() == 1);
    CHECK(setups[0].flux_space.dim() == 1);

    opt = {};
    opt.scheme = Scheme::FullFine;
    setups = build_interface_setups(g, sk, K, opt);
    CHECK(setups[0].pressure_space.dim() == 4);
    CHECK(setups[0].flux_space.dim() == 4);
}

TEST_CASE("robin weights follow the classification when adaptive") {
    const FineGrid g = build_grid(8, 8, 1.0, 1.0);
    const auto [dec, sk] = build_decomposition(g, 2, 2);
    CellField K(64, 1.0);
    K[g.cell(3, 1)] = 1e4;
    K[g.cell(3, 2)] = 1e4;
    K[g.cell(1, 4)] = 1e-4;

    SpaceOptions opt;
    opt.scheme = Scheme::PhysicsBased;
    opt.alpha = 7.0;
    auto setups = build_interface_setups(g, sk, K, opt);
    CHECK(setups[0].alpha == std::vector<double>(4, 7.0));

    opt.adaptive_alpha = true;
    opt.alpha_small = 1e-2;
    opt.alpha_large = 1e2;
    setups = build_interface_setups(g, sk, K, opt);
    CHECK(setups[0].alpha == std::vector<double>{1e2, 1e-2, 1e-2, 1e2});
    // blocking edges are not conductive-flagged, so they keep the large weight
    CHECK(setups[2].alpha == std::vector<double>(4, 1e2));

    opt.alpha_large = -1.0;
    CHECK_THROWS_AS(build_interface_setups(g, sk, K, opt), std::invalid_argument);
}
