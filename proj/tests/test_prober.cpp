#include "pur/prober.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pur;

namespace {

const HilbertTower& tower()
{
    static const HilbertTower T = build_hilbert_tower(2, DeltaSchedule::hilbert());
    return T;
}

CellAddress q_for(int n) { return n == 1 ? root_address(2) : root_address(2).child({0, 0}); }

ProbeCertificate probe(int n, const std::string& name)
{
    const auto sched = DeltaSchedule::hilbert();
    const auto& S = tower().stages[static_cast<std::size_t>(n)].embedding;
    const int d = ring_depth_for(n, sched, ProbeConfig{}.c);
    for (const auto& surf : surface_battery(S, q_for(n), d))
        if (surf.name == name) return probe_cell(S, sched, surf, q_for(n));
    throw std::runtime_error("no surface " + name);
}

} // namespace

TEST(Prober, ConstantsByHand)
{
    const double c = choose_c(1.0, 1.1175);
    EXPECT_DOUBLE_EQ(c, 1e-6 / 2.1175);
    // 5^{-3}·c/11 ≈ 3.43e-10 and log_5 of its inverse is 13.5
    EXPECT_EQ(compute_in(1, c, mpq_class(1, 11)), 14);
    EXPECT_EQ(compute_in(1, 1.0, mpq_class(1, 11)), 5);  // 5^{-3}/11 ≈ 7.3e-4
    EXPECT_DOUBLE_EQ(choose_c_rk(4, 1.0, 1.0), 1e-6 / 3.0);
    // the chain inequality at the chosen constant
    EXPECT_LT(8 * (1.0 + 1.1175) * c, std::pow(5.0, -3) / 2);
}

TEST(Prober, RunLengthRoundTrip)
{
    std::mt19937_64 g(21);
    for (int t = 0; t < 200; ++t) {
        std::vector<std::uint8_t> bits(1 + g() % 700);
        const unsigned density = 1 + static_cast<unsigned>(g() % 8);
        for (auto& b : bits) b = (g() % density) == 0;
        const auto runs = rle_encode(bits);
        i64 total = 0;
        for (auto r : runs) total += r;
        EXPECT_EQ(static_cast<std::size_t>(total), bits.size());
        EXPECT_EQ(rle_decode(runs, bits.size()), bits);
    }
    EXPECT_EQ(rle_encode({1, 1, 0}), (std::vector<i64>{0, 2, 1}));
    EXPECT_THROW(rle_decode({3}, 2), std::invalid_argument);
}

TEST(Prober, KSequenceMatchesRecursion)
{
    const auto s = DeltaSchedule::hilbert();
    const auto k = k_sequence(s, 10.0, 80);
    // δ_n = 1/(10 + n): k_{j+1} = k_j + ⌊10 log_10(10 + k_j)⌋
    std::vector<i64> oracle{1};
    while (true) {
        const i64 next = oracle.back() + static_cast<i64>(std::floor(10 * std::log10(10.0 + static_cast<double>(oracle.back()))));
        if (next > 80) break;
        oracle.push_back(next);
    }
    EXPECT_EQ(k, oracle);
    EXPECT_EQ(k, (std::vector<i64>{1, 11, 24, 39, 55, 73}));
}

TEST(Prober, FlatSurfaceHasAHoleInEveryRing)
{
    const double frozen[2] = {0.002112, 0.002304};
    for (int n = 1; n <= 2; ++n) {
        const auto P = probe(n, "flat");
        EXPECT_EQ(P.annuli.size(), 75u);
        EXPECT_EQ(P.holes(), 75u);
        EXPECT_EQ(P.contradictions(), 0u);
        EXPECT_NEAR(P.gamma, frozen[n - 1], 5e-7) << n;
        EXPECT_NEAR(P.product, 1 - P.gamma * P.delta_n, 1e-15);
        EXPECT_LT(P.chain_upper, P.chain_lower);
    }
}

TEST(Prober, EmptySurfaceMissesEverything)
{
    const auto P = probe(1, "empty");
    for (const auto& a : P.annuli) {
        EXPECT_EQ(a.outcome, ProbeOutcome::hole_found);
        EXPECT_EQ(a.missed, a.cells);
    }
}

TEST(Prober, SingleSheetWalkBreaksWithAVerifiedWitness)
{
    for (int n = 1; n <= 2; ++n) {
        const auto P = probe(n, "single sheet");
        EXPECT_GT(P.contradictions(), 0u);
        EXPECT_EQ(P.lip_violations(), 0u);
        for (const auto& a : P.annuli) {
            EXPECT_NE(a.hole.has_value(), a.witness.has_value());
            if (!a.witness) continue;
            const auto& w = *a.witness;
            EXPECT_TRUE(verify_witness(q_for(n), w));
            EXPECT_TRUE(w.shsep_separates);
            EXPECT_GE(w.separation, w.sep_lower);
            EXPECT_LE(a.max_step, w.lip_bound);
        }
    }
}

TEST(Prober, EveryRingResolves)
{
    for (const char* name : {"tilt 0.25", "tilt 0.50", "tilt 1.00"})
        for (const auto& a : probe(1, name).annuli) EXPECT_NE(a.hole.has_value(), a.witness.has_value()) << name;
}

TEST(Prober, DecadeBlocks)
{
    const auto D = divergence_check(DeltaSchedule::hilbert(), 5);
    ASSERT_EQ(D.blocks.size(), 4u);
    for (const auto& b : D.blocks) {
        EXPECT_TRUE(b.harmonic_ok) << b.t;
        EXPECT_TRUE(b.sparse_ok) << b.t;
        EXPECT_TRUE(b.gap_ok) << b.t;
        // the 1/16 floor for the sparse sums only holds in the first two decades
        EXPECT_EQ(b.sparse_above_16th, b.t <= 3) << b.t;
    }
    EXPECT_EQ(D.blocks.front().t, 2);
    // t = 2 harmonic block against a long-double sum
    long double h = 0;
    for (int j = 100; j <= 1000; ++j) h += 1.0L / j;
    const auto& b2 = D.blocks.front();
    EXPECT_LE(b2.harmonic_lo.get_d(), static_cast<double>(h) + 1e-15);
    EXPECT_NEAR(b2.harmonic_lo.get_d(), static_cast<double>(h), 1e-6);
    ASSERT_TRUE(b2.harmonic_exact.has_value());
    EXPECT_LE(b2.harmonic_lo, *b2.harmonic_exact);
    EXPECT_TRUE(D.pass());
    EXPECT_GE(D.total_lo, D.target);
}

TEST(Prober, CumulativeBoundDecreases)
{
    const auto C = cumulative_bound(0.002112, 10.0, DeltaSchedule::hilbert(), 200);
    ASSERT_EQ(C.products.size(), C.k.size());
    for (std::size_t i = 1; i < C.products.size(); ++i) {
        EXPECT_LT(C.products[i], C.products[i - 1]);
        EXPECT_GT(C.delta_sums[i], C.delta_sums[i - 1]);
    }
    // 1 − x <= e^{−x}
    EXPECT_LE(C.value, std::exp(-0.002112 * C.delta_sums.back()) + 1e-15);
}
