#include "pur/rk.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace pur;

namespace {

// sampling budgets are cut down; the default budgets run in the acceptance binary
const AffineTower& tower()
{
    static const AffineTower T = [] {
        TowerConfig c;
        c.k = 3;
        c.claim_samples = 2000;
        c.search_samples = 2000;
        return build_tower_rk(3, c);
    }();
    return T;
}

} // namespace

TEST(Rk, PlaneCycle)
{
    EXPECT_EQ(plane_count(3), 3);
    EXPECT_EQ(plane_count(4), 6);
    EXPECT_EQ(plane_count(6), 15);
    // independent enumeration of 1 <= ξ < ζ <= k in lexicographic order
    for (int k : {3, 4, 5}) {
        std::vector<std::pair<int, int>> lex;
        for (int a = 1; a <= k; ++a)
            for (int b = a + 1; b <= k; ++b) lex.emplace_back(a, b);
        for (int j = 0; j < 3 * plane_count(k); ++j)
            EXPECT_EQ(plane_for_stage(j, k), lex[static_cast<std::size_t>(j) % lex.size()]) << k << " " << j;
    }
}

TEST(Rk, StageCounts)
{
    // 85 whole children; 40 annulus columns × 2 sheets × (25 subsquares × 2 triangles × 5 layers)
    EXPECT_EQ(tower().stage(1).complex.cells.size(), 85u + 40u * 2u * 250u);
    EXPECT_EQ(tower().stage(2).complex.cells.size(), 41781u);
    for (int j = 0; j <= 2; ++j) {
        EXPECT_EQ(tower().stage(j).complex.total_mass(), 1);
        EXPECT_EQ(tower().stage(j).dim, 5);
    }
}

TEST(Rk, TemplateIsConstantAlongTheFibre)
{
    for (int j = 1; j <= 2; ++j) {
        const auto F = fiber_constancy(tower(), j);
        EXPECT_TRUE(F.pass()) << j << ": " << F.max_jacobian << " " << F.max_vertex;
        EXPECT_GT(F.vertex_pairs, 0u);
    }
}

TEST(Rk, PlanesFollowTheCycle)
{
    for (int j = 1; j <= 2; ++j)
        for (const auto& a : tower().stages[static_cast<std::size_t>(j)]->applications) {
            const auto [xi, zeta] = plane_for_stage(j - 1, 3);
            EXPECT_EQ(a.plane, (std::array<int, 2>{xi - 1, zeta - 1}));
        }
}

TEST(Rk, DiagramBetweenLaterStages)
{
    const auto D = check_diagram_affine(tower(), 1, 2);
    EXPECT_TRUE(D.pass()) << D.mismatches << " err " << D.max_err;
}

TEST(Rk, VerticesOnTransverseFacesLeaveTheFirstNeighbourhood)
{
    // Φ is extended constantly along axis 2, so it stays nonzero on the faces
    // x2 ∈ {0,1} of the unit cube where the cutoff of stage 0 vanishes; there
    // P_0 has no radial neighbourhood to project in. Everywhere else the
    // diagram to stage 0 commutes.
    const auto& S = tower().stage(1);
    std::size_t outside = 0, off_face = 0;
    std::set<mpq_class> faces;
    for (const auto& site : vertex_sites(S)) {
        std::vector<hp> x;
        for (const auto& q : site.x) x.push_back(to_hp(q));
        const auto p = S.pieces[static_cast<std::size_t>(site.cell)].eval(x);
        const auto q = project_down(tower(), 1, 0, p);
        if (!q) {
            ++outside;
            faces.insert(site.x[2]);
            continue;
        }
        ++off_face;
        EXPECT_LT(to_d(dist(*q, eval_ancestor(tower(), 1, site.cell, 0, x))), 1e-30);
    }
    EXPECT_EQ(outside, 632u);
    EXPECT_EQ(faces, (std::set<mpq_class>{0, 1}));
    EXPECT_GT(off_face, 0u);
    const auto D = check_diagram_affine(tower(), 0, 1);
    EXPECT_EQ(D.mismatches, outside);
}
