#pragma once
// 5-adic square/cube complexes: addresses, subdivision, annulus decomposition,
// lattice keys for vertices and faces, annulus rings.

#include "pur/exact.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace pur {

enum class Role : std::uint8_t { plain, central, outer, annulus };
const char* role_name(Role r);

// Role of a child from its two in-plane digits.
Role child_role(int d1, int d2);

// One cover event on the path of a cell: the ancestor at depth `step` had its
// children covered in plane (xi, zeta) (0-based axes).  `bit` is the sheet of
// the cell, or -1 when the cell sits over the central or outer children.
struct CoverMark {
    int step = 0;
    int xi = 0;
    int zeta = 1;
    int bit = -1;
    auto operator<=>(const CoverMark&) const = default;
};

struct CellAddress {
    int root_id = 0;
    int k = 2;
    std::vector<std::uint8_t> digits; // depth*k entries; tuple s is digits[s*k .. s*k+k)
    std::vector<CoverMark> covers;    // ordered by step, all steps < depth()

    int depth() const { return static_cast<int>(digits.size()) / k; }
    int digit(int step, int axis) const { return digits[static_cast<std::size_t>(step * k + axis)]; }
    std::vector<int> branch_word() const;
    // corner coordinate along axis in units of 5^{-depth}
    i64 corner(int axis) const;
    // corner coordinate in units of 5^{-m}; for m < depth, the corner of the depth-m ancestor
    i64 corner_at(int axis, int m) const;
    CellAddress child(const std::vector<int>& tuple) const;
    CellAddress prefix(int depth) const;
    const CoverMark* cover_at(int step) const;
    std::string str() const;

    auto operator<=>(const CellAddress&) const = default;
};

CellAddress root_address(int k, int root_id = 0);

// Half-cells: the frame box cut by a diagonal of the (a,b) face.
// anti == false: main diagonal u_a = u_b, lower half is {u_a >= u_b}.
// anti == true : anti diagonal u_a + u_b = 1, lower half is {u_a + u_b <= 1}.
struct Shape {
    bool half = false;
    int a = 0;
    int b = 1;
    bool anti = false;
    bool upper = false;
    auto operator<=>(const Shape&) const = default;
    bool contains(const std::vector<double>& u, double tol = 0.0) const;
    // corner list (as 0/1 tuples) of the half along the (a,b) face
    std::vector<std::array<int, 2>> plane_corners() const;
    std::string str() const;
};

struct CellRecord {
    CellAddress addr;
    Shape shape;
    int weight_exp = 0; // weight = 2^{-weight_exp}
    Role role = Role::plain;
    bool skeleton = false; // has a face on the boundary of its previous-stage parent
    int parent = -1;

    mpq_class weight() const { return dyadic(weight_exp); }
    mpq_class volume() const; // Euclidean volume of the base region
};

struct StageComplex {
    int k = 2;
    int generation = 0;
    int resolution = 0; // max cell depth
    std::vector<CellRecord> cells;

    mpq_class total_mass() const; // Σ weight × volume, exact
};

// Children of a cell; times >= 1 (throws std::invalid_argument otherwise).
std::vector<CellAddress> subdivide(const CellAddress& cell, int times);

struct AnnulusDecomposition {
    CellAddress parent;
    int xi = 0;
    int zeta = 1;
    std::vector<CellAddress> central;
    std::vector<CellAddress> outer;
    std::vector<CellAddress> annulus;
    std::vector<CellAddress> annulus_children; // grandchildren of Q inside Q_a, filled by refine()
    bool refined = false;
};

AnnulusDecomposition classify_children(const CellAddress& cell, int xi = 0, int zeta = 1);
void refine(AnnulusDecomposition& dec);
// Grandchildren at lattice distance >= one grandchild side from ∂Q_a.
std::vector<CellAddress> inner_annulus(const AnnulusDecomposition& dec);
// Q-local grandchild test (a, b in 0..24)
bool inner_annulus_grandchild(int a, int b);

// One ring of cells at depth d below Q inside Q̂_a, anticlockwise, starting with
// the east cell just above σ and ending with the east cell just below it.
struct Annulus {
    int depth = 0;  // relative to Q
    int layer = 0;  // Chebyshev layer of cell centres (cells per ring = 8*layer)
    std::vector<std::array<i64, 2>> cells; // Q-local integer coordinates at depth
};

std::vector<Annulus> partition_annuli(int depth);
CellAddress ring_cell_address(const CellAddress& q, int depth, std::array<i64, 2> ij);

// ---- lattice keys ----------------------------------------------------------
// A point given by numerators x (denominator scale*5^m) inside the closure of
// `cell` is keyed by its coordinates plus the sheet labels of every cover event
// whose open annulus region contains it (σ points seen from child (3,1) take
// the label of the (3,2) side).  Equal keys = same point of the glued complex.
struct LatticeKey {
    std::vector<i64> x;
    std::vector<std::pair<int, int>> labels; // (step, label)
    std::string str() const;
    auto operator<=>(const LatticeKey&) const = default;
};

LatticeKey lattice_key(const CellAddress& cell, const std::vector<i64>& x, int m, i64 scale);

// in-region test for one event in units U = child side
bool in_open_annulus(i64 X, i64 Y, i64 U);

// ---- faces -----------------------------------------------------------------
// Oriented (k-1)-faces; boundary faces of the cell's base region.
struct FaceRecord {
    int cell = -1;
    int sign = 1;       // outward orientation relative to the group's reference
    std::string group;  // plane + context; faces in one group live on one hyperplane patch
    std::vector<std::array<i64, 2>> box; // extents along the face's free axes at denominator 2*5^m
    bool diagonal = false;
    int axis = -1;
    i64 coord = 0;
    std::string context;  // sheet labels at the face centre
    bool tri = false;     // triangular face of a half cell (k >= 3)
    bool tri_upper = false;
    i64 wnum_override = 0;
};

std::vector<FaceRecord> cell_faces(const StageComplex& sc, int cell, int m);

// Face adjacency: cells sharing a (k-1)-face of positive measure. Symmetric.
std::vector<std::vector<int>> face_adjacency(const StageComplex& sc);

struct BoundaryPiece {
    int cell;
    std::vector<std::array<i64, 2>> box; // free-axis extents at denominator 2*5^m
    bool diagonal;
    mpq_class net; // signed net weight
    int axis = -1; // fixed axis of a box/triangle face
    i64 coord = 0; // its coordinate at denominator 2*5^m
    bool tri = false, tri_upper = false;
};
// Net boundary chain after cancellation (faces of zero net weight removed).
std::vector<BoundaryPiece> boundary_chain(const StageComplex& sc, int m);

} // namespace pur
