#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include <mrcm/field.hpp>

#include "helpers.hpp"

using namespace mrcm;
using Catch::Approx;

TEST_CASE("face field layers and cell divergence") {
    const FineGrid g = build_grid(4, 4, 2.0, 2.0);
    FaceField f = FaceField::zeros(g);
    REQUIRE(f.x_lo.size() == 5 * 4);
    REQUIRE(f.y_lo.size() == 4 * 5);
    f.set_x(1, 1, 3.0);
    f.set_x(2, 1, 5.0);
    f.set_y(1, 1, 7.0);
    f.set_y(1, 2, 11.0);
    // hy*(5-3) + hx*(11-7) with hx = hy = 0.5
    CHECK(f.divergence(1, 1) == Approx(3.0));
    CHECK(f.max_jump() == 0.0);

    f.x_lo[f.xface(1, 1)] = 2.0;  // split the layers at one face
    f.x_hi[f.xface(1, 1)] = 4.0;
    CHECK(f.max_jump() == Approx(2.0));
    CHECK(f.x_avg(1, 1) == Approx(3.0));
    f.average_layers();
    CHECK(f.max_jump() == 0.0);
    CHECK(f.x_lo[f.xface(1, 1)] == Approx(3.0));
}

TEST_CASE("face field linear combinations") {
    const FineGrid g = build_grid(2, 2, 1.0, 1.0);
    FaceField a = FaceField::zeros(g), b = FaceField::zeros(g);
    a.set_x(1, 0, 1.0);
    b.set_x(1, 0, 2.0);
    b.set_y(0, 1, 4.0);
    const FaceField c = 2.0 * a + b;
    CHECK(c.x_lo[c.xface(1, 0)] == Approx(4.0));
    CHECK(c.x_hi[c.xface(1, 0)] == Approx(4.0));
    CHECK(c.y_hi[c.yface(0, 1)] == Approx(4.0));
}

TEST_CASE("a narrow vertical streak paints the expected cells") {
    const FineGrid g = build_grid(160, 160, 1.0, 1.0);
    FieldSpec spec;
    spec.background = 1.0;
    spec.features.push_back({true, 0.284, 0.1, 0.284, 0.9, 2.0, 100.0});
    const CellField k = build_permeability(g, spec);
    int painted = 0;
    for (double v : k) painted += v > 1.0;
    CHECK(painted == 2 * 128);  // columns 44 and 45, rows 16..143
    CHECK(k[g.cell(44, 16)] == 100.0);
    CHECK(k[g.cell(45, 143)] == 100.0);
    CHECK(k[g.cell(43, 80)] == 1.0);
    CHECK(k[g.cell(46, 80)] == 1.0);
    CHECK(k[g.cell(44, 15)] == 1.0);
    CHECK(k[g.cell(44, 144)] == 1.0);
}

TEST_CASE("blocking features override conductive ones where they cross") {
    const FineGrid g = build_grid(10, 10, 1.0, 1.0);
    FieldSpec spec;
    spec.background = 1.0;
    spec.features.push_back({true, 0.45, 0.0, 0.45, 1.0, 1.0, 10.0});
    spec.features.push_back({false, 0.0, 0.45, 1.0, 0.45, 1.0, 0.1});
    const CellField k = build_permeability(g, spec);
    CHECK(k[g.cell(4, 4)] == 0.1);
    CHECK(k[g.cell(4, 0)] == 10.0);
    CHECK(k[g.cell(0, 4)] == 0.1);
    CHECK(k[g.cell(0, 0)] == 1.0);
    CHECK(field_min(k) == 0.1);
    CHECK(field_max(k) == 10.0);
}

TEST_CASE("field construction rejects bad specs") {
    const FineGrid g = build_grid(10, 10, 1.0, 1.0);
    FieldSpec spec;
    spec.background = 0.0;
    CHECK_THROWS_AS(build_permeability(g, spec), ConfigError);
    spec.background = 1.0;
    spec.features.push_back({true, -0.1, 0.5, 0.5, 0.5, 1.0, 10.0});
    CHECK_THROWS_AS(build_permeability(g, spec), ConfigError);
    spec.features[0] = {true, 0.5, 0.5, 0.5, 0.5, 1.0, 10.0};
    CHECK_THROWS_AS(build_permeability(g, spec), ConfigError);
    spec.features[0] = {true, 0.2, 0.5, 0.8, 0.5, 1.0, -1.0};
    CHECK_THROWS_AS(build_permeability(g, spec), ConfigError);
}

TEST_CASE("field files round-trip exactly in both formats") {
    TempDir tmp;
    const FineGrid g = build_grid(3, 2, 1.0, 1.0);
    const CellField k = {1.0, 2.5, 1e-8, 3.14159, 1e8, 1.0 / 3.0};
    save_field_text(tmp.file("k.txt"), k);
    CHECK(load_field(tmp.file("k.txt"), g) == k);
    save_field_binary(tmp.file("k.bin"), g, k);
    CHECK(load_field(tmp.file("k.bin"), g) == k);
}

TEST_CASE("field loading validates size and content") {
    TempDir tmp;
    const FineGrid g = build_grid(3, 2, 1.0, 1.0);
    {
        std::ofstream out(tmp.file("short.txt"));
        out << "1.0 2.0 3.0\n";
    }
    CHECK_THROWS_AS(load_field(tmp.file("short.txt"), g), DataError);
    {
        std::ofstream out(tmp.file("bad.txt"));
        out << "1.0 2.0 oops 4.0 5.0 6.0\n";
    }
    CHECK_THROWS_AS(load_field(tmp.file("bad.txt"), g), DataError);
    {
        std::ofstream out(tmp.file("neg.txt"));
        out << "1 2 -3 4 5 6\n";
    }
    CHECK_THROWS_AS(load_field(tmp.file("neg.txt"), g), DataError);
    save_field_binary(tmp.file("k.bin"), g, CellField(6, 1.0));
    const FineGrid g2 = build_grid(2, 3, 1.0, 1.0);
    CHECK_THROWS_AS(load_field(tmp.file("k.bin"), g2), DataError);
    {
        std::ofstream out(tmp.file("trunc.bin"), std::ios::binary);
        out.write(kFieldMagic, 8);
    }
    CHECK_THROWS_AS(load_field(tmp.file("trunc.bin"), g), DataError);
    CHECK_THROWS_AS(load_field(tmp.file("missing.txt"), g), DataError);
}

TEST_CASE("norms against hand values") {
    const FineGrid g = build_grid(2, 1, 2.0, 1.0);
    const CellField ref = {1.0, 1.0}, a = {1.0, 2.0};
    CHECK(rel_l2_cells(a, ref, g) == Approx(1.0 / std::sqrt(2.0)));
    CHECK(rel_l1_cells(a, ref) == Approx(0.5));

    const FineGrid g1 = build_grid(1, 1, 1.0, 1.0);
    FaceField fr = FaceField::zeros(g1);
    fr.set_x(0, 0, 2.0);
    fr.set_x(1, 0, 2.0);
    FaceField fa = fr;
    fa.set_x(1, 0, 4.0);
    CHECK(rel_l2_faces(fa, fr) == Approx(1.0 / std::sqrt(2.0)));

    fa.x_lo[fa.xface(1, 0)] = 0.0;  // layers that average back to the reference
    fa.x_hi[fa.xface(1, 0)] = 4.0;
    CHECK(rel_l2_faces(fa, fr) == 0.0);

    CHECK_THROWS_AS(rel_l2_cells(a, CellField(2, 0.0), g), SolverError);
    CHECK_THROWS_AS(rel_l1_cells(a, CellField(2, 0.0)), SolverError);
    CHECK_THROWS_AS(rel_l2_faces(fa, FaceField::zeros(g1)), SolverError);
}
