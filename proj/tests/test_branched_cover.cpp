#include "pur/branched_cover.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace pur;

namespace {

const BranchedCoverRecord& root_cover()
{
    static const BranchedCoverRecord cov = build_double_cover(classify_children(root_address(2)));
    return cov;
}

} // namespace

TEST(BranchedCover, RecordShape)
{
    const auto& cov = root_cover();
    EXPECT_EQ(cov.base_annulus.size(), 8u);
    EXPECT_EQ(cov.sheets.size(), 16u);
    // 8 interior child edges × 2 sheets, stored in both directions
    EXPECT_EQ(cov.glue.size(), 32u);
    for (const auto& g : cov.glue) {
        int reverse = 0;
        for (const auto& h : cov.glue)
            reverse += h.from == g.to && h.from_bit == g.to_bit && h.to == g.from && h.to_bit == g.from_bit;
        EXPECT_EQ(reverse, 1);
    }
    std::set<std::pair<CellAddress, int>> sheets;
    for (const auto& s : cov.sheets) {
        ASSERT_FALSE(s.covers.empty());
        EXPECT_TRUE(s.covers.back().bit == 0 || s.covers.back().bit == 1);
        sheets.insert({s.prefix(1), s.covers.back().bit});
    }
    EXPECT_EQ(sheets.size(), 16u);
}

TEST(BranchedCover, PolarChartHandValues)
{
    // east child, centre of the ring of radius 1: r = 1/2, arclength 1/2 of 8
    auto p = polar_chart<mpq_class>(mpq_class(7, 2), mpq_class(5, 2), 3, 2, 0);
    EXPECT_EQ(p.r, mpq_class(1, 2));
    EXPECT_EQ(p.u, mpq_class(1, 8));
    p = polar_chart<mpq_class>(mpq_class(7, 2), mpq_class(5, 2), 3, 2, 1);
    EXPECT_EQ(p.u, mpq_class(17, 8));
    // north-west corner: σ to the NE corner is 3/2, the north side 2 more, of 8
    p = polar_chart<mpq_class>(mpq_class(3, 2), mpq_class(7, 2), 1, 3, 0);
    EXPECT_EQ(p.r, mpq_class(1, 2));
    EXPECT_EQ(p.u, mpq_class(7, 8));
    // just below σ closes the turn
    p = polar_chart<mpq_class>(mpq_class(7, 2), mpq_class(19, 10), 3, 1, 0);
    EXPECT_GT(p.u, mpq_class(19, 10));
    EXPECT_LT(p.u, mpq_class(2));
}

TEST(BranchedCover, CutPointsAreRejected)
{
    EXPECT_THROW(polar_coords(3.5, 2.0, 3, 2, 0), CutPointError);
    EXPECT_NO_THROW(polar_coords(3.5, 2.1, 3, 2, 0));
    const auto c = polar_coords(3.5, 2.5, 3, 2, 1);
    EXPECT_NEAR(c.theta, 2 * M_PI + M_PI / 8, 1e-15);
}

TEST(BranchedCover, MonodromyOfTheRing)
{
    // one turn around Q_c through the child centres ends on the other sheet
    const auto& cov = root_cover();
    const std::vector<std::array<double, 2>> path{{3.5, 2.5}, {3.5, 3.5}, {2.5, 3.5}, {1.5, 3.5}, {1.5, 2.5},
                                                  {1.5, 1.5}, {2.5, 1.5}, {3.5, 1.5}, {3.5, 2.5}};
    for (int bit : {0, 1}) {
        CoverPoint p{3.5, 2.5, {3, 2}, bit};
        for (std::size_t i = 1; i < path.size(); ++i) p = lift_segment(cov, p, path[i][0], path[i][1]);
        EXPECT_EQ(p.child, (std::array<int, 2>{3, 2}));
        EXPECT_EQ(p.bit, 1 - bit);
        // two turns come back
        for (std::size_t i = 1; i < path.size(); ++i) p = lift_segment(cov, p, path[i][0], path[i][1]);
        EXPECT_EQ(p.bit, bit);
    }
}

TEST(BranchedCover, SegmentsAwayFromSigmaKeepTheSheet)
{
    const auto& cov = root_cover();
    const CoverPoint p{3.5, 2.5, {3, 2}, 0};
    const auto q = lift_segment(cov, p, 2.5, 3.5);
    EXPECT_EQ(q.bit, 0);
    EXPECT_EQ(q.child, (std::array<int, 2>{2, 3}));
    const auto crossed = lift_segment(cov, CoverPoint{3.5, 2.01, {3, 2}, 0}, 3.5, 1.99);
    EXPECT_EQ(crossed.bit, 1);
    EXPECT_EQ(crossed.child, (std::array<int, 2>{3, 1}));
}

TEST(BranchedCover, DeckIsAnInvolutionShiftingThetaBy2Pi)
{
    std::mt19937_64 g(5);
    int tested = 0;
    while (tested < 1000) {
        const double X = 1 + 3 * u01(g), Y = 1 + 3 * u01(g);
        const auto ch = child_of(X, Y);
        if (child_role(ch[0], ch[1]) != Role::annulus || Y == 2.0) continue;
        ++tested;
        const CoverPoint p{X, Y, ch, static_cast<int>(g() & 1)};
        const auto q = deck(p);
        EXPECT_NE(q.bit, p.bit);
        EXPECT_EQ(deck(q).bit, p.bit);
        const auto a = polar_coords(X, Y, ch[0], ch[1], p.bit), b = polar_coords(X, Y, ch[0], ch[1], q.bit);
        EXPECT_EQ(a.r, b.r);
        EXPECT_NEAR(std::abs(a.theta - b.theta), 2 * M_PI, 1e-14);
    }
}

TEST(BranchedCover, ShSepHoldsOnTheInnerAnnulus)
{
    for (const auto& q : {root_address(2), root_address(2).child({0, 0}), root_address(2).child({3, 2})}) {
        const auto cov = build_double_cover(classify_children(q));
        const auto c = check_shsep(cov, 10000, 77);
        EXPECT_GE(c.hypothesis_pairs, 10000u);
        EXPECT_TRUE(c.pass()) << c.violations.size() << " violations";
    }
}

TEST(BranchedCover, ShSepFailsLiterallyNextToTheCollapsedBoundary)
{
    // p and q lie over opposite sides of σ on the same sheet, next to ∂Q_c.
    // The path p → (3, 2.01) → q runs through a collapsed fibre of ∂Q_a, so
    // they are closer than 5^{-i-3} = 1/25 child units in the glued cover.
    const auto& cov = root_cover();
    const CoverPoint p{3.01, 2.01, {3, 2}, 0};
    const CoverPoint q{3.01, 1.99, {3, 1}, 0};
    const double via_boundary = std::hypot(0.01, 0.0) + std::hypot(0.01, 0.02);
    EXPECT_LT(via_boundary, 1.0 / 25.0);
    // the straight lift lands on the other sheet, so the label test would flag the pair
    EXPECT_NE(lift_segment(cov, p, q.X, q.Y).bit, q.bit);
    // outside Q̂_a the hypothesis is not applied
    EXPECT_FALSE(shsep_pair(cov, p, q.X, q.Y).has_value());
    // inside Q̂_a the same configuration separates
    const auto inside = shsep_pair(cov, CoverPoint{3.5, 2.01, {3, 2}, 0}, 3.5, 1.99);
    ASSERT_TRUE(inside.has_value());
    EXPECT_TRUE(*inside);
}

TEST(BranchedCover, LiftedCoversCommuteWithProjection)
{
    for (auto [xi, zeta] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}) {
        const auto rec = lift_cover(root_address(3), xi, zeta);
        // 8 annulus columns of 5 cubes, two sheets each
        EXPECT_EQ(rec.lifted.size(), 80u);
        EXPECT_EQ(rec.central.size(), 5u);
        EXPECT_EQ(rec.outer.size(), 80u);
        const auto L = check_lift_commutes(rec);
        EXPECT_GT(L.vertices, 0u);
        EXPECT_EQ(L.failures, 0u);
    }
}

TEST(BranchedCover, BoundaryFibresCollapse)
{
    // child-grid vertices of ∂Q_a: 12 on the outer square, 4 on the inner one
    EXPECT_EQ(root_cover().boundary_fibers.size(), 16u);
    const auto [on_boundary, total] = enumerate_cover_vertices(root_cover(), 0);
    EXPECT_EQ(on_boundary, 16u);
    // Q_a has no interior child-grid vertex
    EXPECT_EQ(total, 16u);
    // one level finer: 4·15 + 4·5 = 80 boundary points; interior lattice points
    // of Q_a (16·16 lattice minus 4·4 in the open centre minus 80 = 160) appear
    // once per sheet; σ's points are glued, not doubled again
    const auto [b1, t1] = enumerate_cover_vertices(root_cover(), 1);
    EXPECT_EQ(b1, 80u);
    EXPECT_EQ(t1, 80u + 2u * 160u);
}
