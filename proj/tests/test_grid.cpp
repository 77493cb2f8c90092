#include <catch2/catch_amalgamated.hpp>

#include <mrcm/grid.hpp>

using namespace mrcm;
using Catch::Approx;

TEST_CASE("grid geometry and indexing") {
    const FineGrid g = build_grid(8, 4, 2.0, 1.0);
    CHECK(g.cells() == 32);
    CHECK(g.hx == Approx(0.25));
    CHECK(g.hy == Approx(0.25));
    CHECK(g.cell(3, 2) == 19);
    const auto [cx, cy] = g.center(0, 0);
    CHECK(cx == Approx(0.125));
    CHECK(cy == Approx(0.125));
    CHECK(g.cell_volume() == Approx(0.0625));
    CHECK(g.h() == Approx(0.25));
}

TEST_CASE("grid construction rejects bad input") {
    CHECK_THROWS_AS(build_grid(0, 4, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid(4, -1, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid(4, 4, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid(4, 4, 1.0, -2.0), ConfigError);
}

TEST_CASE("decomposition must divide the grid evenly") {
    const FineGrid g = build_grid(40, 40, 1.0, 1.0);
    CHECK_THROWS_AS(build_decomposition(g, 3, 2), ConfigError);
    CHECK_THROWS_AS(build_decomposition(g, 2, 7), ConfigError);
    CHECK_THROWS_AS(build_decomposition(g, 0, 2), ConfigError);
}

TEST_CASE("interface count follows the lattice formula") {
    const FineGrid g = build_grid(160, 160, 1.0, 1.0);
    const auto count = [&](int mx, int my) {
        return static_cast<int>(build_decomposition(g, mx, my).second.interfaces.size());
    };
    // (mx-1)*my vertical plus (my-1)*mx horizontal interfaces
    CHECK(count(1, 1) == 0);
    CHECK(count(2, 2) == 4);
    CHECK(count(4, 4) == 24);
    CHECK(count(8, 8) == 112);
    CHECK(count(4, 1) == 3);
    CHECK(count(1, 5) == 4);
}

TEST_CASE("skeleton wiring on a 2x2 split") {
    const FineGrid g = build_grid(40, 40, 1.0, 1.0);
    const auto [d, sk] = build_decomposition(g, 2, 2);
    CHECK(d.sub_nx == 20);
    CHECK(d.sub_ny == 20);
    CHECK(d.coarse_h == Approx(0.5));
    CHECK(d.id(1, 1) == 3);
    CHECK(d.origin(3) == std::pair<int, int>{20, 20});
    REQUIRE(sk.interfaces.size() == 4);
    CHECK(sk.edge_count() == 80);

    const Interface& v = sk.interfaces[0];
    CHECK(v.vertical);
    CHECK(v.line == 20);
    CHECK(v.start == 0);
    CHECK(v.count == 20);
    CHECK(v.sub_lo == 0);
    CHECK(v.sub_hi == 1);
    CHECK(v.edge_len == Approx(0.025));
    CHECK(v.edge_cells(g, 5) == std::pair<int, int>{5 * 40 + 19, 5 * 40 + 20});

    const Interface& h = sk.interfaces[2];
    CHECK_FALSE(h.vertical);
    CHECK(h.line == 20);
    CHECK(h.start == 0);
    CHECK(h.count == 20);
    CHECK(h.sub_lo == 0);
    CHECK(h.sub_hi == 2);
    CHECK(h.edge_cells(g, 7) == std::pair<int, int>{19 * 40 + 7, 20 * 40 + 7});

    CHECK(sk.sub_interfaces[0] == std::array<int, 4>{-1, 0, -1, 2});
    CHECK(sk.sub_interfaces[1] == std::array<int, 4>{0, -1, -1, 3});
    CHECK(sk.sub_interfaces[2] == std::array<int, 4>{-1, 1, 2, -1});
    CHECK(sk.sub_interfaces[3] == std::array<int, 4>{1, -1, 3, -1});

    // the fixed normal is outward for the lower-numbered neighbour
    CHECK(Skeleton::orientation_sign(v, 0) == 1);
    CHECK(Skeleton::orientation_sign(v, 1) == -1);
    CHECK(Skeleton::orientation_sign(h, 0) == 1);
    CHECK(Skeleton::orientation_sign(h, 2) == -1);
}

TEST_CASE("coarse size uses the larger subdomain extent") {
    const FineGrid g = build_grid(160, 80, 2.0, 1.0);
    CHECK(build_decomposition(g, 4, 2).first.coarse_h == Approx(0.5));
    CHECK(build_decomposition(g, 8, 2).first.coarse_h == Approx(0.5));
    CHECK(build_decomposition(g, 8, 4).first.coarse_h == Approx(0.25));
}
