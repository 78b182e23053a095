#include "pur/complex_core.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace pur;

namespace {

// independent role oracle: outer = touches the boundary of Q, central = (2,2)
Role role_oracle(int a, int b)
{
    if (a == 0 || a == 4 || b == 0 || b == 4) return Role::outer;
    if (a == 2 && b == 2) return Role::central;
    return Role::annulus;
}

CellAddress random_cell(std::mt19937_64& g, int k, int depth)
{
    CellAddress c = root_address(k);
    for (int d = 0; d < depth; ++d) {
        std::vector<int> t(static_cast<std::size_t>(k));
        for (auto& x : t) x = static_cast<int>(g() % 5);
        c = c.child(t);
    }
    return c;
}

} // namespace

TEST(ComplexCore, ChildRoleMatchesOracle)
{
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) EXPECT_EQ(child_role(a, b), role_oracle(a, b)) << a << "," << b;
}

TEST(ComplexCore, ClassifyCounts)
{
    std::mt19937_64 g(1);
    for (int t = 0; t < 20; ++t) {
        const auto q = random_cell(g, 2, t % 4);
        const auto d = classify_children(q);
        EXPECT_EQ(d.central.size(), 1u);
        EXPECT_EQ(d.outer.size(), 16u);
        EXPECT_EQ(d.annulus.size(), 8u);
        for (const auto& c : d.annulus) EXPECT_EQ(role_oracle(c.digit(q.depth(), 0), c.digit(q.depth(), 1)), Role::annulus);
    }
}

TEST(ComplexCore, ClassifyInOtherPlanesOfA3Cube)
{
    // each fibre along the third axis contributes one 2-d pattern
    const auto d = classify_children(root_address(3), 0, 2);
    EXPECT_EQ(d.central.size(), 5u);
    EXPECT_EQ(d.outer.size(), 80u);
    EXPECT_EQ(d.annulus.size(), 40u);
}

TEST(ComplexCore, SubdivideCountsAndComposition)
{
    EXPECT_EQ(subdivide(root_address(2), 1).size(), 25u);
    EXPECT_EQ(subdivide(root_address(2), 3).size(), 15625u);
    EXPECT_EQ(subdivide(root_address(3), 1).size(), 125u);
    EXPECT_THROW(subdivide(root_address(2), 0), std::invalid_argument);

    std::mt19937_64 g(2);
    for (int t = 0; t < 10; ++t) {
        const auto c = random_cell(g, 2, static_cast<int>(g() % 3));
        const int a = 1 + static_cast<int>(g() % 2), b = 1 + static_cast<int>(g() % 2);
        const auto direct = subdivide(c, a + b);
        std::set<CellAddress> lhs(direct.begin(), direct.end()), rhs;
        for (const auto& x : subdivide(c, a))
            for (const auto& y : subdivide(x, b)) rhs.insert(y);
        EXPECT_EQ(lhs, rhs);
    }
}

TEST(ComplexCore, CornersAndPrefixes)
{
    const auto c = root_address(2).child({3, 1}).child({4, 2});
    EXPECT_EQ(c.depth(), 2);
    EXPECT_EQ(c.corner(0), 3 * 5 + 4);
    EXPECT_EQ(c.corner(1), 1 * 5 + 2);
    EXPECT_EQ(c.corner_at(0, 1), 3);
    EXPECT_EQ(c.corner_at(0, 3), (3 * 5 + 4) * 5);
    EXPECT_EQ(c.prefix(1), root_address(2).child({3, 1}));
}

TEST(ComplexCore, MassOfSubdividedComplexIsOne)
{
    for (int k : {2, 3}) {
        StageComplex sc;
        sc.k = k;
        for (const auto& a : subdivide(root_address(k), 2)) {
            CellRecord r;
            r.addr = a;
            sc.cells.push_back(r);
        }
        EXPECT_EQ(sc.total_mass(), 1);
    }
}

TEST(ComplexCore, HalfCellsHaveHalfVolume)
{
    CellRecord r;
    r.addr = root_address(2).child({1, 1});
    const mpq_class whole = r.volume();
    EXPECT_EQ(whole, mpq_class(1, 25));
    for (bool anti : {false, true})
        for (bool upper : {false, true}) {
            r.shape = Shape{true, 0, 1, anti, upper};
            EXPECT_EQ(r.volume(), whole / 2);
        }
}

TEST(ComplexCore, InnerAnnulusGrandchildOracle)
{
    // Q̂_a: grandchildren at least one grandchild side from ∂Q_a, in grandchild units
    // Q_a = [5,20]² minus (10,15)²
    for (int a = 0; a < 25; ++a)
        for (int b = 0; b < 25; ++b) {
            const bool in_outer = a >= 6 && a <= 18 && b >= 6 && b <= 18;
            const bool near_inner = a >= 9 && a <= 15 && b >= 9 && b <= 15;
            EXPECT_EQ(inner_annulus_grandchild(a, b), in_outer && !near_inner) << a << "," << b;
        }
}

TEST(ComplexCore, AnnulusRingsAreSimpleCycles)
{
    for (int depth : {2, 3, 4}) {
        const auto rings = partition_annuli(depth);
        ASSERT_FALSE(rings.empty());
        std::set<std::array<i64, 2>> all;
        for (const auto& A : rings) {
            EXPECT_EQ(A.cells.size(), static_cast<std::size_t>(8 * A.layer));
            for (std::size_t i = 0; i < A.cells.size(); ++i) {
                const auto& p = A.cells[i];
                const auto& q = A.cells[(i + 1) % A.cells.size()];
                EXPECT_EQ(std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]), 1);
                EXPECT_TRUE(all.insert(p).second) << "rings overlap";
            }
        }
    }
}

TEST(ComplexCore, LatticeKeysAgreeOnSharedCorners)
{
    // two neighbours outside every cover event: the shared corner has one key
    const auto a = root_address(2).child({0, 0}), b = root_address(2).child({1, 0});
    const int m = 1;
    const auto ka = lattice_key(a, {1, 1}, m, 1);
    const auto kb = lattice_key(b, {1, 1}, m, 1);
    EXPECT_EQ(ka, kb);
    EXPECT_NE(lattice_key(a, {0, 0}, m, 1), ka);
}

TEST(ComplexCore, BoundaryChainOfTheUnitSquare)
{
    StageComplex sc;
    sc.k = 2;
    sc.resolution = 1;
    for (const auto& a : subdivide(root_address(2), 1)) {
        CellRecord r;
        r.addr = a;
        sc.cells.push_back(r);
    }
    // interior faces cancel; 20 unit-length child edges remain on ∂Q
    const auto chain = boundary_chain(sc, 1);
    EXPECT_EQ(chain.size(), 20u);
    const auto adj = face_adjacency(sc);
    std::size_t edges = 0;
    for (std::size_t i = 0; i < adj.size(); ++i)
        for (int j : adj[i]) {
            ++edges;
            const auto& n = adj[static_cast<std::size_t>(j)];
            EXPECT_NE(std::find(n.begin(), n.end(), static_cast<int>(i)), n.end());
        }
    EXPECT_EQ(edges, 2u * 40u); // 5x5 grid: 2·5·4 interior edges
}
