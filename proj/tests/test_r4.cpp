#include "pur/currents.hpp"
#include "pur/r4.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pur;

namespace {

const AffineTower& tower()
{
    static const AffineTower T = build_tower_r4();
    return T;
}

} // namespace

TEST(R4, PreconditionOracle)
{
    // S = Σ_{n≥1} (offset+n)^{-2} lies between 1/(offset+1) − 1/(offset+1)² ... and 1/offset
    for (const auto& s : {DeltaSchedule::r4(), DeltaSchedule::hilbert()}) {
        const auto P = claim_j_s1(s);
        const double off = static_cast<double>(s.offset);
        EXPECT_LE(P.S_lo, 1.0 / off);
        EXPECT_GE(P.S_hi, 1.0 / (off + 1));
        EXPECT_LE(P.S_lo, P.S_hi);
        EXPECT_NEAR(P.lhs_hi, 4e3 * std::sqrt(1 + P.S_hi) * P.S_hi, 1e-12 * P.lhs_hi);
    }
    EXPECT_TRUE(claim_j_s1(DeltaSchedule::r4()).holds);
    EXPECT_LT(claim_j_s1(DeltaSchedule::r4()).lhs_hi, 1.0 / 8);
    // 1/(10+n) is far too large for the radial-basis argument
    EXPECT_TRUE(claim_j_s1(DeltaSchedule::hilbert()).violated);
}

TEST(R4, RefusesTheHilbertSchedule)
{
    const auto& S0 = tower().stage(0);
    const auto rn = build_radn(S0, hp(1));
    EXPECT_THROW(certify_claim_j(rn, DeltaSchedule::hilbert(), 1.0, 100, 1), PreconditionRefused);
}

TEST(R4, StageCounts)
{
    // stage 1: 17 whole children plus 8 annulus children × 2 sheets × 25 subsquares × 2 triangles
    EXPECT_EQ(tower().stage(1).complex.cells.size(), 17u + 800u);
    // frozen from the default configuration
    EXPECT_EQ(tower().stage(0).vertices.size(), 4u);
    EXPECT_EQ(tower().stage(1).vertices.size(), 420u);
    EXPECT_EQ(tower().stage(2).complex.cells.size(), 21529u);
    EXPECT_EQ(tower().stage(2).vertices.size(), 11060u);
    for (int j = 0; j <= 2; ++j) {
        EXPECT_EQ(tower().stage(j).complex.total_mass(), 1);
        EXPECT_EQ(tower().stage(j).dim, 4);
    }
}

TEST(R4, AdaptedSubdivision)
{
    const auto& ad = *tower().stages[2]->adapted;
    EXPECT_EQ(ad.cells.size(), 25u);
    for (const auto& c : ad.cells) {
        EXPECT_TRUE(c.size_ok);
        EXPECT_TRUE(c.tube_ok);
        EXPECT_EQ(c.addr.depth(), 14);
    }
    // every placement replaced one adapted cell by a full template
    EXPECT_EQ(tower().stages[2]->applications.size(), 25u);
    for (const auto& a : tower().stages[2]->applications) EXPECT_EQ(a.cells, 817u);
}

TEST(R4, SigmaSearchTerminates)
{
    ASSERT_EQ(tower().sigma.size(), 2u);
    EXPECT_EQ(tower().sigma[0].exponent, -10);
    EXPECT_EQ(tower().sigma[1].exponent, -1);
    for (const auto& s : tower().sigma) EXPECT_TRUE(s.certificate.pass());
}

TEST(R4, ClaimCertificates)
{
    ASSERT_EQ(tower().claims.size(), 2u);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto& c = tower().claims[j];
        EXPECT_TRUE(c.pass()) << j;
        EXPECT_EQ(c.pairs, 100000u);
        EXPECT_LE(c.max_ratio, 1 + tower().eps(static_cast<int>(j)));
        EXPECT_LE(c.drift_max, 100 * inv5d(static_cast<int>(j)));
        EXPECT_GT(c.same, 0u);
        EXPECT_GT(c.distant, 0u);
    }
    // stage 1 has neighbouring pieces and stacked sheets
    EXPECT_GT(tower().claims[1].adjacent, 0u);
    EXPECT_GT(tower().claims[1].stacked, 0u);
}

TEST(R4, ProjectionRetractsOntoTheImage)
{
    // P_j(F_j(x) + y) = F_j(x) for y normal within the tube
    const auto& rn = tower().radn[1];
    std::mt19937_64 g(12);
    int checked = 0;
    for (int t = 0; t < 200; ++t) {
        const int piece = static_cast<int>(g() % tower().stage(1).complex.cells.size());
        const auto p = sample_member(rn, piece, g, 0.5);
        const auto m = rn.member(p);
        if (!m) continue;
        ++checked;
        const auto back = rn.project(m->foot);
        ASSERT_TRUE(back.has_value());
        EXPECT_LT(to_d(dist(*back, m->foot)), 1e-40);
    }
    EXPECT_GT(checked, 150);
    EXPECT_STREQ(RadialNeighborhood::anchor, "radial-basis function");
}

TEST(R4, DiagramsCommute)
{
    for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {0, 2}}) {
        const auto D = check_diagram_affine(tower(), i, j);
        EXPECT_TRUE(D.pass()) << i << "," << j << ": " << D.mismatches << " err " << D.max_err;
        EXPECT_LE(D.max_err, 1e-30);
    }
}

TEST(R4, LipschitzIntervalAndSupMove)
{
    for (int j = 0; j <= 2; ++j) {
        const auto L = lipschitz_interval(tower(), j);
        EXPECT_TRUE(L.pass()) << j;
        EXPECT_GE(L.min_piece, L.lo);
        EXPECT_LE(L.max_piece, L.hi);
    }
    for (int j = 0; j < 2; ++j) {
        const auto S = sup_move_affine(tower(), j, 200, 13);
        EXPECT_LE(S.measured_C, 56.0) << j;
        EXPECT_GT(S.sup, 0.0);
    }
}

TEST(R4, CompositeAndInjective)
{
    for (int j = 0; j <= 1; ++j) {
        const auto C = composite_lipschitz(tower(), j, 500, 14);
        EXPECT_TRUE(C.pass()) << j << ": " << C.max_ratio << " vs " << C.bound;
    }
    for (int j = 1; j <= 2; ++j) {
        const auto F = fiber_separation(tower(), j, 500, 15);
        EXPECT_TRUE(F.pass()) << j;
    }
}

TEST(R4, DirectionSets)
{
    for (int j = 1; j <= 2; ++j) {
        const auto D = direction_sets(tower(), j);
        EXPECT_TRUE(D.pass()) << j << ": frame error " << D.frame_error;
        EXPECT_GT(D.placements, 0u);
    }
}

TEST(R4, PushforwardAgreesWithStageZero)
{
    for (int j = 1; j <= 2; ++j) {
        const auto P = pushforward_check(tower(), 0, j);
        EXPECT_TRUE(P.pass()) << j;
        EXPECT_EQ(P.failed_cells, 0u);
    }
}
