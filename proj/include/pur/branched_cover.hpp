#pragma once
// Branched double cover of the middle annulus, its polar chart, sheet labels,
// (ShSep) sampling, and the k-dimensional lifted covers.

#include "pur/complex_core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pur {

// ---- polar chart ------------------------------------------------------------
// Coordinates are Q-local "child units": Q = [0,5]^2, the annulus is
// [1,4]^2 \ (2,3)^2, σ is the segment Y = 2, 3 <= X <= 4.
// r is Chebyshev distance to ∂Q_c in child units (0..1); u = θ/π.
// Arclength t on the Chebyshev square of radius ρ is measured anticlockwise
// from σ and u = t/(4ρ) + 2·bit, so u ∈ [0,2] on Σ₋ and [2,4] on Σ₊.

enum class ChartSide : std::uint8_t { east, north, west, south, east_below };

template <class T>
struct PolarPoint {
    T r;
    T u;
    ChartSide side;
};

// side of a point of the annulus child (c1,c2)
template <class T>
ChartSide chart_side(const T& dx, const T& dy, int c1, int c2)
{
    if (c1 == 3 && c2 == 2) return ChartSide::east;
    if (c1 == 2 && c2 == 3) return ChartSide::north;
    if (c1 == 1 && c2 == 2) return ChartSide::west;
    if (c1 == 2 && c2 == 1) return ChartSide::south;
    if (c1 == 3 && c2 == 3) return dx >= dy ? ChartSide::east : ChartSide::north;
    if (c1 == 1 && c2 == 3) return dy >= -dx ? ChartSide::north : ChartSide::west;
    if (c1 == 1 && c2 == 1) return -dx >= -dy ? ChartSide::west : ChartSide::south;
    if (c1 == 3 && c2 == 1) return -dy >= dx ? ChartSide::south : ChartSide::east_below;
    throw std::invalid_argument("chart_side: child is not in the annulus");
}

template <class T>
PolarPoint<T> polar_chart(const T& X, const T& Y, int c1, int c2, int bit)
{
    const T half = T(1) / T(2);
    const T dx = X - T(5) / T(2);
    const T dy = Y - T(5) / T(2);
    const T rho = nmax(nabs(dx), nabs(dy));
    const ChartSide side = chart_side<T>(dx, dy, c1, c2);
    T t;
    switch (side) {
    case ChartSide::east: t = dy + half; break;
    case ChartSide::north: t = T(2) * rho - dx + half; break;
    case ChartSide::west: t = T(4) * rho - dy + half; break;
    case ChartSide::south: t = T(6) * rho + dx + half; break;
    default: t = T(8) * rho + dy + half; break;
    }
    PolarPoint<T> p{rho - half, t / (T(4) * rho), side};
    if (bit) p.u += T(2);
    return p;
}

// Checked API: signals the cut (σ) and points outside the annulus.
struct PolarCoords {
    double r;     // child units
    double theta; // radians, in (0,4π) \ {2π}
};
struct CutPointError : std::domain_error {
    using std::domain_error::domain_error;
};
PolarCoords polar_coords(double X, double Y, int c1, int c2, int bit);

// ---- cover record -------------------------------------------------------------
struct ChildEdge {
    std::array<int, 2> a; // child digits on one side
    std::array<int, 2> b; // the other side
    bool sigma = false;
};

struct SheetGlue {
    std::array<int, 2> from;
    int from_bit;
    std::array<int, 2> to;
    int to_bit;
};

struct BranchedCoverRecord {
    CellAddress q;
    int xi = 0;
    int zeta = 1;
    std::vector<CellAddress> base_annulus; // 8
    std::array<std::array<int, 2>, 2> sigma{{{3, 2}, {4, 2}}}; // child units
    std::vector<CellAddress> sheets;       // 16, each with its CoverMark
    std::vector<SheetGlue> glue;           // across the 8 interior child edges, both sheets
    std::vector<LatticeKey> boundary_fibers; // collapsed fibers at child-grid vertices of ∂Q_a

    int lift_across(std::array<int, 2> from, int bit, std::array<int, 2> to) const;
};

BranchedCoverRecord build_double_cover(const AnnulusDecomposition& dec,
                                       std::array<std::array<int, 2>, 2> sigma_choice = {{{3, 2}, {4, 2}}});

// Exhaustive vertex enumeration of the cover at depth `extra` below the children:
// returns (distinct vertex keys over ∂Q_a, distinct keys total).
std::pair<std::size_t, std::size_t> enumerate_cover_vertices(const BranchedCoverRecord& cov, int extra);

// ---- (ShSep) --------------------------------------------------------------------
struct CoverPoint {
    double X, Y;          // child units
    std::array<int, 2> child;
    int bit;
};

// Lift of the straight segment from p to base point (X,Y): the sheet reached
// by walking the gluing table.
CoverPoint lift_segment(const BranchedCoverRecord& cov, const CoverPoint& p, double X, double Y);
std::array<int, 2> child_of(double X, double Y);

struct ShSepViolation {
    CoverPoint p, q;
    double dist;
    double dtheta;
};
struct ShSepCertificate {
    std::size_t drawn = 0;
    std::size_t hypothesis_pairs = 0;
    std::vector<ShSepViolation> violations;
    bool pass() const { return violations.empty(); }
};

// Pairs are drawn in Q̂_a (r ∈ [1/5, 4/5] child units), biased towards σ so
// that `samples` of them satisfy the hypothesis d ≤ 5^{-i-3}, gap ≥ π.
ShSepCertificate check_shsep(const BranchedCoverRecord& cov, std::size_t samples, std::uint64_t seed);
// The per-pair test (hypothesis → distinct labels); returns nullopt when the
// hypothesis is not met.
std::optional<bool> shsep_pair(const BranchedCoverRecord& cov, const CoverPoint& p, double X, double Y,
                               double* dtheta = nullptr);

// ---- lifted covers (k >= 2) ------------------------------------------------------
struct LiftedCoverRecord {
    CellAddress base_cell; // K
    int xi = 0, zeta = 1;
    CellAddress shadow;    // pj(K), a k=2 address
    std::vector<CellAddress> lifted; // K̃_a cells (2 per annulus child)
    std::vector<CellAddress> central, outer;
    BranchedCoverRecord shadow_cover;
};

CellAddress project_address(const CellAddress& c, int xi, int zeta);
LiftedCoverRecord lift_cover(const CellAddress& k_cell, int xi, int zeta);

struct LiftCheck {
    std::size_t vertices = 0;
    std::size_t failures = 0;
};
// π̃_Q ∘ p̃j = pj ∘ π̃ on every vertex of K̃ (exact lattice keys).
LiftCheck check_lift_commutes(const LiftedCoverRecord& rec);

// deck involution on a cover point
CoverPoint deck(const CoverPoint& p);

} // namespace pur
