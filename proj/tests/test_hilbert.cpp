#include "pur/hilbert.hpp"

#include <gtest/gtest.h>

using namespace pur;

namespace {

const HilbertTower& tower()
{
    static const HilbertTower T = build_hilbert_tower(3, DeltaSchedule::hilbert());
    return T;
}

// interior lattice points of the open middle annulus of one event, counted on
// the grid `extra` levels below its children: (5^{e+1}·3+1)² − (5^{e+1}−1)² − boundary
std::size_t open_annulus_points(int extra)
{
    const std::size_t s = static_cast<std::size_t>(pow5(extra)); // child side in lattice units
    const std::size_t outer = 3 * s + 1, inner = s - 1;
    const std::size_t boundary = 4 * (3 * s) + 4 * s;
    return outer * outer - inner * inner - boundary;
}

} // namespace

TEST(Hilbert, CellCountsAre33ToTheN)
{
    // 17 whole children plus 8 annulus children on two sheets
    std::size_t expect = 1;
    for (int n = 0; n <= 3; ++n) {
        EXPECT_EQ(tower().stages[static_cast<std::size_t>(n)].embedding.complex.cells.size(), expect);
        expect *= 33;
    }
}

TEST(Hilbert, VertexCountsFromLatticeOracle)
{
    EXPECT_EQ(open_annulus_points(0), 0u);
    EXPECT_EQ(open_annulus_points(1), 160u);
    EXPECT_EQ(open_annulus_points(2), 4800u);
    const auto lattice = [](int n) { return static_cast<std::size_t>((pow5(n) + 1) * (pow5(n) + 1)); };
    // stage n: the base lattice, one extra copy per sheet layer over each open annulus
    const std::size_t v2 = lattice(2) + open_annulus_points(1);
    const std::size_t v3 = lattice(3) + open_annulus_points(2) + 17 * open_annulus_points(1) + 8 * 2 * open_annulus_points(1);
    EXPECT_EQ(tower().stages[0].embedding.vertices.size(), 4u);
    EXPECT_EQ(tower().stages[1].embedding.vertices.size(), lattice(1));
    EXPECT_EQ(tower().stages[2].embedding.vertices.size(), v2);
    EXPECT_EQ(tower().stages[3].embedding.vertices.size(), v3);
    EXPECT_EQ(v2, 836u);
    EXPECT_EQ(v3, 25956u);
}

TEST(Hilbert, MassAndDepth)
{
    for (const auto& st : tower().stages) {
        EXPECT_EQ(st.embedding.complex.total_mass(), 1);
        EXPECT_EQ(st.ambient_dim, 2 + 2 * st.n);
        for (const auto& c : st.embedding.complex.cells) EXPECT_EQ(c.addr.depth(), st.n);
    }
}

TEST(Hilbert, DiagramsCommuteExactly)
{
    for (int i = 0; i <= 3; ++i)
        for (int j = i; j <= 3; ++j) {
            const auto D = check_diagram_hilbert(tower(), i, j);
            EXPECT_TRUE(D.pass()) << i << "," << j << ": " << D.mismatches;
            EXPECT_EQ(D.vertices, tower().stages[static_cast<std::size_t>(j)].embedding.vertices.size());
        }
}

TEST(Hilbert, BasePointIsTheFirstTwoCoordinates)
{
    const auto& st = tower().stages[2];
    std::mt19937_64 g(6);
    for (int t = 0; t < 200; ++t) {
        const std::size_t c = g() % st.embedding.complex.cells.size();
        const auto& cell = st.embedding.complex.cells[c];
        const mpq_class side = inv5(2);
        std::vector<mpq_class> x{cell.addr.corner(0) * side + side / 3, cell.addr.corner(1) * side + side / 7};
        const auto v = hilbert_eval_exact(cell.addr, x, st.schedule);
        ASSERT_EQ(v.size(), 6u);
        EXPECT_EQ(v[0], x[0]);
        EXPECT_EQ(v[1], x[1]);
    }
}

TEST(Hilbert, NewCoordinatesVanishOutsideCoveredCells)
{
    const auto& S = tower().stages[2].embedding;
    for (std::size_t c = 0; c < S.complex.cells.size(); ++c) {
        const auto& cell = S.complex.cells[c];
        for (int s = 0; s < 2; ++s) {
            const CoverMark* m = cell.addr.cover_at(s);
            if (m && m->bit >= 0) continue;
            for (int v : S.cell_vertices[c]) {
                const auto& x = S.vertices_exact[static_cast<std::size_t>(v)];
                EXPECT_EQ(x[static_cast<std::size_t>(2 + 2 * s)], 0);
                EXPECT_EQ(x[static_cast<std::size_t>(3 + 2 * s)], 0);
            }
        }
    }
}

TEST(Hilbert, TruncationIsTheEarlierStage)
{
    const auto P = project_hilbert(tower().stages[2], 1);
    EXPECT_EQ(P.dim, 4);
    for (const auto& v : P.vertices) EXPECT_EQ(v.size(), 4u);
}

TEST(Hilbert, SupMoveWithinCauchyConstant)
{
    for (int i = 0; i < 3; ++i) {
        const auto S = sup_move_hilbert(tower(), i, 300, 9);
        EXPECT_TRUE(S.pass()) << i << ": " << S.measured_C;
        EXPECT_GT(S.sup, 0.0);
    }
}

TEST(Hilbert, LipschitzAndInjectivity)
{
    for (int n = 1; n <= 2; ++n) {
        const auto& st = tower().stages[static_cast<std::size_t>(n)];
        const auto L = lipschitz_hilbert(st, 2000, 10);
        EXPECT_TRUE(L.pass()) << L.C;
        EXPECT_GE(L.glip, 1.0);
        const auto I = injectivity_radius_report(st, 2000, 11);
        EXPECT_TRUE(I.pass());
        EXPECT_GT(I.pairs, 0u);
    }
}

TEST(Hilbert, CellCeilingIsEnforced)
{
    EXPECT_THROW(build_hilbert_tower(3, DeltaSchedule::hilbert(), 5000), ResourceLimit);
}
