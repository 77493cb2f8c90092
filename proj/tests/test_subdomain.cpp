#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <mrcm/subdomain.hpp>

using namespace mrcm;
using Catch::Approx;

namespace {

std::array<SideSpec, 4> pressure_we() {
    std::array<SideSpec, 4> sides;
    sides[West].kind = SideSpec::Pressure;
    sides[East].kind = SideSpec::Pressure;
    return sides;
}

}  // namespace

TEST_CASE("two cells in series against the resistor oracle") {
    const FineGrid g = build_grid(2, 1, 1.0, 1.0);
    const CellField k = {1.0, 4.0};
    SideData data;
    data[West] = {1.0};
    data[East] = {0.0};
    const FlowSolution sol = solve_fine(g, k, pressure_we(), data);

    // transmissibilities 4 | 3.2 | 16 give p = (0.6, 0.1), u = 1.6 throughout
    CHECK(sol.pressure[0] == Approx(0.6).margin(1e-13));
    CHECK(sol.pressure[1] == Approx(0.1).margin(1e-13));
    for (int i = 0; i <= 2; ++i) {
        CHECK(sol.flux.x_lo[sol.flux.xface(i, 0)] == Approx(1.6).margin(1e-12));
        CHECK(sol.flux.x_hi[sol.flux.xface(i, 0)] == Approx(1.6).margin(1e-12));
    }
    CHECK(sol.flux.y_lo[sol.flux.yface(0, 0)] == 0.0);
    CHECK(std::abs(sol.flux.divergence(0, 0)) <= 1e-12);
    CHECK(sol.gauge_shift == 0.0);
}

TEST_CASE("robin side closes the half-cell model") {
    const FineGrid g = build_grid(2, 1, 1.0, 1.0);
    const CellField k = {1.0, 1.0};
    std::array<SideSpec, 4> sides;
    sides[West].kind = SideSpec::Robin;
    sides[West].beta = {0.5};
    sides[East].kind = SideSpec::Pressure;
    SideData data;
    data[West] = {2.0};
    data[East] = {0.0};
    const FlowSolution sol = solve_fine(g, k, sides, data);

    CHECK(sol.pressure[0] == Approx(1.0));
    CHECK(sol.pressure[1] == Approx(1.0 / 3.0));
    for (int i = 0; i <= 2; ++i)
        CHECK(sol.flux.x_lo[sol.flux.xface(i, 0)] == Approx(4.0 / 3.0));

    // reconstruct the face pressure and verify p_f - beta*(u.n) = r
    const double un_west = -4.0 / 3.0;  // outward at the west side
    const double p_face = sol.pressure[0] - un_west * (0.5 * g.hx / k[0]);
    CHECK(p_face - 0.5 * un_west == Approx(2.0));
}

TEST_CASE("linear pressure fields are reproduced exactly") {
    const FineGrid g = build_grid(8, 4, 2.0, 1.0);
    const CellField k(g.cells(), 3.0);
    SideData data;
    data[West].assign(g.ny, 2.0);
    data[East].assign(g.ny, 0.0);
    const FlowSolution sol = solve_fine(g, k, pressure_we(), data);

    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const auto [cx, cy] = g.center(i, j);
            CHECK(sol.pressure[g.cell(i, j)] == Approx(2.0 - cx).margin(1e-12));
        }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            CHECK(sol.flux.x_lo[sol.flux.xface(i, j)] == Approx(3.0).margin(1e-12));
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            CHECK(std::abs(sol.flux.y_lo[sol.flux.yface(i, j)]) <= 1e-12);
}

TEST_CASE("floating region fixes the gauge and checks compatibility") {
    const FineGrid g = build_grid(4, 4, 1.0, 1.0);
    const CellField k(g.cells(), 1.0);
    std::array<SideSpec, 4> sides;  // all prescribed-flux
    SideData data;
    data[West].assign(4, -1.0);
    data[East].assign(4, 1.0);
    const FlowSolution sol = solve_fine(g, k, sides, data);

    double mean = 0.0;
    for (double p : sol.pressure) mean += p;
    CHECK(std::abs(mean) <= 1e-12);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            CHECK(sol.flux.x_lo[sol.flux.xface(i, j)] == Approx(1.0).margin(1e-12));
    // the reported shift restores the raw solver gauge
    CHECK(std::isfinite(sol.gauge_shift));

    data[East].assign(4, 2.0);  // net outflow with no source
    CHECK_THROWS_AS(solve_fine(g, k, sides, data), SolverError);
}

TEST_CASE("tiny robin weights behave like pressure data") {
    const FineGrid g = build_grid(4, 4, 1.0, 1.0);
    CellField k(g.cells(), 1.0);
    k[g.cell(1, 1)] = 100.0;
    k[g.cell(2, 2)] = 0.01;
    std::array<SideSpec, 4> sides;
    SideData data;
    for (int s = 0; s < 4; ++s) {
        sides[s].kind = SideSpec::Robin;
        sides[s].beta.assign(4, 1e-12);
        data[s].assign(4, 5.0);
    }
    const FlowSolution sol = solve_fine(g, k, sides, data);
    for (double p : sol.pressure) CHECK(p == Approx(5.0).margin(1e-9));
    CHECK(sol.flux.max_jump() <= 1e-9);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            CHECK(std::abs(sol.flux.x_lo[sol.flux.xface(i, j)]) <= 1e-9);
}

TEST_CASE("solver extracts its region from the parent grid") {
    const FineGrid g = build_grid(4, 4, 1.0, 1.0);
    CellField k(g.cells());
    for (int c = 0; c < g.cells(); ++c) k[c] = 1.0 + c;
    const TpfaSolver solver(g, 2, 1, 2, 2, k, pressure_we());
    CHECK(solver.cells() == 4);
    CHECK(solver.floating() == false);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
            CHECK(solver.kappa_cell(i, j) == k[g.cell(2 + i, 1 + j)]);
}

TEST_CASE("solver validates construction and data sizes") {
    const FineGrid g = build_grid(4, 4, 1.0, 1.0);
    const CellField k(g.cells(), 1.0);
    CHECK_THROWS_AS(TpfaSolver(g, 3, 0, 2, 2, k, {}), std::invalid_argument);
    CHECK_THROWS_AS(TpfaSolver(g, 0, 0, 0, 2, k, {}), std::invalid_argument);
    CHECK_THROWS_AS(TpfaSolver(g, 0, 0, 4, 4, CellField(3, 1.0), {}), std::invalid_argument);

    std::array<SideSpec, 4> sides;
    sides[West].kind = SideSpec::Robin;
    sides[West].beta = {1.0};  // needs 4 entries
    CHECK_THROWS_AS(TpfaSolver(g, 0, 0, 4, 4, k, sides), std::invalid_argument);
    sides[West].beta.assign(4, -1.0);
    CHECK_THROWS_AS(TpfaSolver(g, 0, 0, 4, 4, k, sides), std::invalid_argument);

    const TpfaSolver solver(g, 0, 0, 4, 4, k, pressure_we());
    SideData bad;
    bad[West] = {1.0, 2.0};
    CHECK_THROWS_AS(solver.assemble_rhs(bad, {}), std::invalid_argument);
    CHECK_THROWS_AS(solver.assemble_rhs({}, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("batched right-hand sides match one-at-a-time solves") {
    const FineGrid g = build_grid(6, 6, 1.0, 1.0);
    CellField k(g.cells());
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(0.5, 2.0);
    for (double& v : k) v = dist(rng);

    const TpfaSolver solver(g, 0, 0, 6, 6, k, pressure_we());
    std::vector<SideData> cases(3);
    for (int c = 0; c < 3; ++c) {
        cases[c][West].assign(6, 0.0);
        cases[c][East].assign(6, 0.0);
        for (int e = 0; e < 6; ++e) {
            cases[c][West][e] = dist(rng);
            cases[c][East][e] = dist(rng);
        }
    }
    Eigen::MatrixXd rhs(solver.assemble_rhs(cases[0], {}).rows(), 3);
    for (int c = 0; c < 3; ++c) rhs.col(c) = solver.assemble_rhs(cases[c], {});
    const Eigen::MatrixXd batch = solver.solve(rhs);
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> one = solver.solve_one(cases[c], {});
        for (int cell = 0; cell < solver.cells(); ++cell)
            CHECK(batch(cell, c) == Approx(one[cell]).margin(1e-14));
    }
}

TEST_CASE("solutions superpose in the boundary data") {
    const FineGrid g = build_grid(6, 4, 1.5, 1.0);
    CellField k(g.cells(), 1.0);
    k[g.cell(2, 1)] = 50.0;
    k[g.cell(3, 2)] = 0.02;
    SideData d1, d2, d12;
    d1[West].assign(4, 1.0);
    d1[East].assign(4, 0.0);
    d2[West].assign(4, 0.0);
    d2[East].assign(4, 2.0);
    d12[West].assign(4, 1.0);
    d12[East].assign(4, 2.0);
    const FlowSolution s1 = solve_fine(g, k, pressure_we(), d1);
    const FlowSolution s2 = solve_fine(g, k, pressure_we(), d2);
    const FlowSolution s12 = solve_fine(g, k, pressure_we(), d12);
    for (int c = 0; c < g.cells(); ++c)
        CHECK(s1.pressure[c] + s2.pressure[c] == Approx(s12.pressure[c]).margin(1e-12));
    for (std::size_t f = 0; f < s12.flux.x_lo.size(); ++f)
        CHECK(s1.flux.x_lo[f] + s2.flux.x_lo[f] == Approx(s12.flux.x_lo[f]).margin(1e-12));
}
