#include "pur/deformation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pur;

namespace {

const mpq_class D(1, 11); // δ_1 of the Hilbert schedule
const mpq_class L(1, 5);

} // namespace

TEST(Deformation, ProfileBreakpointsExact)
{
    EXPECT_EQ(h1<mpq_class>(0, D), 0);
    EXPECT_EQ(h1<mpq_class>(1, D), D / 2);
    EXPECT_EQ(h1<mpq_class>(2, D), D);
    EXPECT_EQ(h1<mpq_class>(3, D), D / 2);
    EXPECT_EQ(h1<mpq_class>(4, D), 0);
    EXPECT_EQ(h2<mpq_class>(0, D), 0);
    EXPECT_EQ(h2<mpq_class>(1, D), -D);
    EXPECT_EQ(h2<mpq_class>(2, D), 0);
    EXPECT_EQ(h2<mpq_class>(3, D), D);
    EXPECT_EQ(h2<mpq_class>(4, D), 0);
    EXPECT_EQ(phi_cutoff<mpq_class>(0, L), 0);
    EXPECT_EQ(phi_cutoff<mpq_class>(L / 5, L), L);
    EXPECT_EQ(phi_cutoff<mpq_class>(L / 2, L), L);
    EXPECT_EQ(phi_cutoff<mpq_class>(4 * L / 5, L), L);
    EXPECT_EQ(phi_cutoff<mpq_class>(L, L), 0);
}

TEST(Deformation, LipschitzConstantsFromSlopes)
{
    mpq_class m1 = 0, m2 = 0, mp = 0;
    for (const auto& s : h1_slopes(D)) m1 = qmax(m1, qabs(s));
    for (const auto& s : h2_slopes(D)) m2 = qmax(m2, qabs(s));
    for (const auto& s : phi_slopes()) mp = qmax(mp, qabs(s));
    // in u = θ/π: δ/2 and δ, i.e. δ/(2π) and δ/π in θ
    EXPECT_EQ(m1, D / 2);
    EXPECT_EQ(m2, D);
    EXPECT_EQ(mp, 5);
    // finite differences agree with the slopes
    for (double u = 0.05; u < 4; u += 0.1) {
        const double d1 = (h1<double>(u + 1e-7, D.get_d()) - h1<double>(u, D.get_d())) / 1e-7;
        EXPECT_LE(std::abs(d1), D.get_d() / 2 + 1e-9);
    }
}

TEST(Deformation, RadianApiChecksRange)
{
    EXPECT_NEAR(h1_theta(2 * M_PI, 0.1), 0.1, 1e-15);
    EXPECT_THROW(h1_theta(-0.1, 0.1), std::out_of_range);
    EXPECT_THROW(h2_theta(4 * M_PI + 0.1, 0.1), std::out_of_range);
    EXPECT_THROW(phi_checked(-1e-3, 0), std::out_of_range);
}

TEST(Deformation, FiberGapMinimumExact)
{
    // on [0,1] the gap² is δ²((u−1)² + 4u²), minimal at u = 1/5 with 4δ²/5
    EXPECT_EQ(fiber_gap_sq<mpq_class>(mpq_class(1, 5), D), 4 * D * D / 5);
    EXPECT_EQ(fiber_gap_sq<mpq_class>(mpq_class(9, 5), D), 4 * D * D / 5);
    const auto H = certify_hlow(D, 100000);
    EXPECT_TRUE(H.pass);
    EXPECT_EQ(H.min_sq, 4 * D * D / 5);
    EXPECT_TRUE(H.argmin == mpq_class(1, 5) || H.argmin == mpq_class(9, 5));
    EXPECT_GE(H.grid_min, D.get_d() / 2 - 1e-12);
    EXPECT_EQ(H.grid_points, 100000u);
    // a dense rational grid never goes below the certified minimum
    for (int i = 0; i <= 2000; ++i) EXPECT_GE(fiber_gap_sq<mpq_class>(mpq_class(i, 1000), D), H.min_sq);
}

TEST(Deformation, FiberSeparationOnConstructedPairs)
{
    // 10^4 fibre pairs (same base point, two sheets): ‖Ψ − Ψ'‖² ≥ (δ/2)²φ², exact
    std::mt19937_64 g(3);
    int pairs = 0;
    while (pairs < 10000) {
        const mpq_class X(static_cast<long>(g() % 3000) + 1000, 1000), Y(static_cast<long>(g() % 3000) + 1000, 1000);
        const auto ch = child_of(X.get_d(), Y.get_d());
        if (child_role(ch[0], ch[1]) != Role::annulus || Y == 2) continue;
        if (X.get_d() == ch[0] || Y.get_d() == ch[1]) continue; // child edges belong to two children
        ++pairs;
        const auto a = psi_value<mpq_class>(X, Y, ch[0], ch[1], 0, D, L);
        const auto b = psi_value<mpq_class>(X, Y, ch[0], ch[1], 1, D, L);
        const auto pc = polar_chart<mpq_class>(X, Y, ch[0], ch[1], 0);
        const mpq_class phi = phi_cutoff<mpq_class>(pc.r * L, L);
        const mpq_class gap = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
        ASSERT_GE(gap, D * D / 4 * phi * phi);
        // ‖Ψ‖ ≤ δ·diam Q with diam Q = 5L√2
        ASSERT_LE(a[0] * a[0] + a[1] * a[1], D * D * 50 * L * L);
    }
}

TEST(Deformation, SampledLipschitzOfPsi)
{
    std::mt19937_64 g(4);
    double glip = 0;
    for (int s = 0; s < 20000; ++s) {
        const double X = 1 + 3 * u01(g), Y = 1 + 3 * u01(g);
        const auto ch = child_of(X, Y);
        if (child_role(ch[0], ch[1]) != Role::annulus || Y == 2.0) continue;
        const auto J = psi_jet(X, Y, ch[0], ch[1], static_cast<int>(g() & 1), D.get_d(), L.get_d());
        glip = std::max(glip, sigma_max(J.d));
    }
    EXPECT_GE(glip, D.get_d());
    EXPECT_LE(glip, 7 * D.get_d() * 1.05);
}

TEST(Deformation, PsiContinuousAcrossGluedEdges)
{
    const auto cov = build_double_cover(classify_children(root_address(2)));
    for (const auto& gl : cov.glue)
        for (const mpq_class t : {mpq_class(1, 9), mpq_class(1, 2), mpq_class(7, 9)}) {
            mpq_class X, Y;
            if (gl.from[0] == gl.to[0]) {
                X = gl.from[0] + t;
                Y = std::max(gl.from[1], gl.to[1]);
            } else {
                X = std::max(gl.from[0], gl.to[0]);
                Y = gl.from[1] + t;
            }
            EXPECT_EQ(psi_value<mpq_class>(X, Y, gl.from[0], gl.from[1], gl.from_bit, D, L),
                      psi_value<mpq_class>(X, Y, gl.to[0], gl.to[1], gl.to_bit, D, L));
        }
    // σ: approaching from above on sheet 0 equals approaching from below on sheet 1
    const mpq_class X(7, 2);
    const auto above = psi_value<mpq_class>(X, mpq_class(2), 3, 2, 0, D, L);
    const auto below = psi_value<mpq_class>(X, mpq_class(2), 3, 1, 1, D, L);
    EXPECT_EQ(above, below);
    // zero on ∂Q_a and over the central and outer children
    EXPECT_EQ(psi_value<mpq_class>(mpq_class(1), mpq_class(5, 2), 1, 2, 0, D, L)[0], 0);
    EXPECT_EQ(psi_value<mpq_class>(mpq_class(5, 2), mpq_class(5, 2), 2, 2, 0, D, L)[1], 0);
}

TEST(Deformation, OperatorNormPredicates)
{
    const std::array<std::array<mpq_class, 2>, 2> A{{{3, 0}, {0, 4}}};
    EXPECT_TRUE(lambda_max_le(A, 16));
    EXPECT_FALSE(lambda_max_le(A, mpq_class(1599, 100)));
    EXPECT_TRUE(lambda_max_ge(A, 16));
    EXPECT_FALSE(lambda_max_ge(A, mpq_class(1601, 100)));
    // rotation by a Pythagorean angle times 2: every singular value is 2
    const std::array<std::array<mpq_class, 2>, 2> R{{{mpq_class(6, 5), mpq_class(-8, 5)}, {mpq_class(8, 5), mpq_class(6, 5)}}};
    EXPECT_TRUE(lambda_max_le(R, 4));
    EXPECT_TRUE(lambda_max_ge(R, 4));
    EXPECT_NEAR(sigma_max(std::array<std::array<double, 2>, 2>{{{1.2, -1.6}, {1.6, 1.2}}}), 2.0, 1e-15);
}

TEST(Deformation, AffineApproximationCertified)
{
    const auto A = find_affine_approx(D, 3);
    EXPECT_EQ(A.N, 1);
    // 17 whole children plus 8 annulus children × 2 sheets × 25 subsquares × 2 triangles
    EXPECT_EQ(A.pieces.size(), 17u + 8u * 2u * 25u * 2u);
    EXPECT_TRUE(A.certified_bounds.ok()) << A.certified_bounds.violated;
    EXPECT_LE(A.certified_bounds.glip, 23 * D.get_d());
    EXPECT_GE(A.certified_bounds.glip, D.get_d() / 16);
    EXPECT_LE(A.certified_bounds.sup, A.certified_bounds.sup_bound);
    // refinement brings Φ closer to Ψ
    const auto B = build_affine_approx_unchecked(D, 2);
    EXPECT_LT(midpoint_error(B), midpoint_error(A));
}

TEST(Deformation, SmallDeltaAlsoCertifies)
{
    const mpq_class d(1, 1000000001);
    const auto A = find_affine_approx(d, 3);
    EXPECT_TRUE(A.certified_bounds.ok());
}
