#include "pur/currents.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pur;

namespace {

const HilbertTower& htower()
{
    static const HilbertTower T = build_hilbert_tower(2, DeltaSchedule::hilbert());
    return T;
}

const StageEmbedding& cube()
{
    static const auto st = [] {
        TowerConfig c;
        c.k = 3;
        return build_stage0(c);
    }();
    return st->embedding;
}

} // namespace

TEST(Currents, MassIsOne)
{
    for (const auto& st : htower().stages) EXPECT_EQ(stage_current(st.embedding).mass(), 1);
    EXPECT_EQ(stage_current(cube()).mass(), 1);
}

TEST(Currents, CoordinateFormsOnTheUnitSquare)
{
    const auto& S0 = htower().stages[0].embedding;
    const auto N = stage_current(S0);
    const auto w = coordinate_form(2, {0, 1});
    // Hilbert stages carry no affine pieces: quadrature throughout
    const auto a = eval_current(N, w);
    EXPECT_FALSE(a.exact);
    EXPECT_NEAR(a.value, 1.0, 1e-14);
    EXPECT_NEAR(eval_current(N, coordinate_form(2, {1, 0})).value, -1.0, 1e-14);
    EXPECT_NEAR(eval_current(flipped(N), w).value, -1.0, 1e-14);
    // ∫ x dx∧dy = 1/2, ∫ xy dx∧dy = 1/4 on the quadrature path
    const auto x = eval_current(N, times(w, [](const std::vector<double>& p) { return p[0]; }, "x dxdy"));
    EXPECT_NEAR(x.value, 0.5, 1e-12);
    const auto xy = eval_current(N, times(w, [](const std::vector<double>& p) { return p[0] * p[1]; }, "xy dxdy"));
    EXPECT_NEAR(xy.value, 0.25, 1e-12);
}

TEST(Currents, Linearity)
{
    const auto& S = htower().stages[1].embedding;
    const auto N = stage_current(S);
    const auto w = coordinate_form(S.dim, {0, 1});
    const auto f = times(w, [](const std::vector<double>& p) { return std::sin(p[0]) + p[1]; }, "f");
    const auto g = times(w, [](const std::vector<double>& p) { return p[0] * p[0]; }, "g");
    const double lhs = eval_current(N, sum_forms(f, g)).value;
    EXPECT_NEAR(lhs, eval_current(N, f).value + eval_current(N, g).value, 1e-12);
}

TEST(Currents, BaseAreaIsPreservedByTheCovers)
{
    // two sheets of weight 1/2 over every annulus: the base projection still has degree one
    for (const auto& st : htower().stages) {
        const auto v = eval_current(stage_current(st.embedding), coordinate_form(st.embedding.dim, {0, 1}));
        EXPECT_NEAR(v.value, 1.0, 1e-12) << st.n;
    }
}

TEST(Currents, CubeVolumeForm)
{
    const auto N = stage_current(cube());
    const auto v = eval_current(N, coordinate_form(cube().dim, {0, 1, 2}));
    EXPECT_TRUE(v.exact);
    EXPECT_NEAR(v.value, 1.0, 1e-14);
    EXPECT_NEAR(eval_current(N, coordinate_form(cube().dim, {0, 2, 1})).value, -1.0, 1e-14);
    // a form missing one base axis vanishes on a flat cube
    EXPECT_NEAR(eval_current(N, coordinate_form(cube().dim, {0, 1, 3})).value, 0.0, 1e-14);
}

TEST(Currents, BoundaryMassOfTheUnitCells)
{
    EXPECT_NEAR(boundary_mass(htower().stages[0].embedding), 4.0, 1e-12);
    EXPECT_NEAR(boundary_mass(cube()), 6.0, 1e-12);
}

TEST(Currents, PlainSubdivisionIsInvisible)
{
    const auto& S0 = htower().stages[0].embedding;
    const auto S = plain_subdivision(S0, 1);
    EXPECT_EQ(S.complex.cells.size(), 25u);
    EXPECT_EQ(stage_current(S).mass(), 1);
    EXPECT_NEAR(boundary_mass(S), 4.0, 1e-12);
    const auto w = times(coordinate_form(2, {0, 1}), [](const std::vector<double>& p) { return p[0] * p[1]; }, "xy");
    EXPECT_NEAR(eval_current(stage_current(S), w).value, eval_current(stage_current(S0), w).value, 1e-12);
    const auto C = plain_subdivision(cube(), 1);
    EXPECT_EQ(C.complex.cells.size(), 125u);
    EXPECT_NEAR(boundary_mass(C), 6.0, 1e-12);
}

TEST(Currents, HilbertPushforwardsAgree)
{
    for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}) {
        const auto P = pushforward_check(htower(), i, j);
        EXPECT_TRUE(P.pass()) << i << "," << j;
        EXPECT_EQ(P.forms.size(), 5u);
        for (const auto& f : P.forms) EXPECT_LE(f.diff, P.tolerance) << f.form;
    }
}
