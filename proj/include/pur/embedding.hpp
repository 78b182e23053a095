#pragma once
// Shared pieces of the three towers: δ-schedules, stage embeddings (vertex
// tables and per-cell charts), affine pieces in high precision, and the frame
// polytope geometry of (half) cells.

#include "pur/complex_core.hpp"

#include <boost/multiprecision/mpfr.hpp>

#include <functional>
#include <string>
#include <vector>

namespace pur {

// 50 significant digits; stage-2 deformations are ~1e-20 against unit coordinates.
using hp = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<50>,
                                         boost::multiprecision::et_off>;

hp to_hp(const mpq_class& q);
inline double to_d(const hp& x) { return x.convert_to<double>(); }

// ---- δ schedule ------------------------------------------------------------------
enum class ScheduleKind { hilbert, r4 };

struct DeltaSchedule {
    ScheduleKind kind = ScheduleKind::hilbert;
    i64 offset = 10; // δ_n = 1/(offset + n)

    static DeltaSchedule hilbert() { return {ScheduleKind::hilbert, 10}; }
    static DeltaSchedule r4() { return {ScheduleKind::r4, 1000000000}; }

    mpq_class delta(i64 n) const { return mpq_class(1, offset + n); }
    double delta_d(i64 n) const { return 1.0 / static_cast<double>(offset + n); }
    mpq_class sum_delta(i64 a, i64 b) const;  // Σ_{n=a}^{b} δ_n
    mpq_class sum_delta_sq(i64 n) const;      // Σ_{m=1}^{n} δ_m²
    double sum_delta_sq_d(i64 n) const;
    std::string name() const { return kind == ScheduleKind::hilbert ? "1/(10+n)" : "1/(10^9+n)"; }
};

// 4·10³ (1+S)^{1/2} S < 1/8 with S = Σ_{m≥1} δ_m², bracketed by a finite
// partial sum (below) and the integral tail bound (above).
struct ClaimPrecondition {
    double S_lo = 0.0, S_hi = 0.0;
    double lhs_lo = 0.0, lhs_hi = 0.0;
    bool holds = false;    // lhs_hi < 1/8
    bool violated = false; // lhs_lo >= 1/8
};
ClaimPrecondition claim_j_s1(const DeltaSchedule& s);

// ---- frame polytopes ------------------------------------------------------------------
// The base region of a cell: the frame cube cut by the half-cell inequality.
// Facets n·x <= b in global base coordinates.
struct BasePolytope {
    int k = 2;
    std::vector<std::vector<hp>> n;
    std::vector<hp> b;
    std::vector<std::vector<hp>> vertices;

    bool contains(const std::vector<hp>& x, const hp& tol) const;
    hp interior_distance_base(const std::vector<hp>& x) const; // Euclidean, base metric
};

// Exact frame data of a cell.
struct Frame {
    std::vector<mpq_class> corner; // global
    mpq_class side;
};
Frame cell_frame(const CellAddress& a);
BasePolytope cell_polytope(const CellRecord& c);
// corners of the (half) cell as 0/1 tuples over all k axes
std::vector<std::vector<int>> cell_corner_bits(const CellRecord& c);
// simplex decomposition (Kuhn, reflected across the anti diagonal when needed),
// each simplex a list of k+1 indices into cell_corner_bits(c)
std::vector<std::vector<int>> cell_simplices(const CellRecord& c);

// ---- affine pieces ----------------------------------------------------------------------
// F(x) = c + J x on the base polytope, x global, J is dim × k (row-major).
struct AffinePiece {
    int dim = 0, k = 0;
    std::vector<hp> c;
    std::vector<hp> J;
    std::vector<double> cd, Jd;

    std::vector<hp> eval(const std::vector<hp>& x) const;
    std::vector<double> eval_d(const std::vector<double>& x) const;
    void refresh_double();
    hp& Jat(int r, int col) { return J[static_cast<std::size_t>(r * k + col)]; }
    const hp& Jat(int r, int col) const { return J[static_cast<std::size_t>(r * k + col)]; }
};

// Gram-Schmidt: orthonormal basis Q (dim × k) of the column space of J and the
// k×k upper-triangular R with J = Q R; complement = orthonormal basis of the
// orthogonal complement (dim-k vectors, deterministic order).
struct PlaneFrame {
    std::vector<std::vector<hp>> q;          // k vectors of length dim
    std::vector<std::vector<hp>> R;          // k × k
    std::vector<std::vector<hp>> complement; // dim - k vectors
};
PlaneFrame plane_frame(const AffinePiece& P);

double sigma_max(const AffinePiece& P);
double sigma_min(const AffinePiece& P);

hp norm(const std::vector<hp>& v);
hp dist(const std::vector<hp>& a, const std::vector<hp>& b);
double dist_d(const std::vector<double>& a, const std::vector<double>& b);

// ---- stage embedding --------------------------------------------------------------------
struct StageEmbedding {
    std::string tower; // "hilbert", "r4", "rk"
    int stage = 0;
    int k = 2;
    int dim = 2;
    int m = 0; // lattice exponent of vertex keys
    StageComplex complex;
    std::vector<std::string> vertex_keys;
    std::vector<std::vector<double>> vertices;
    std::vector<std::vector<int>> cell_vertices; // aligned with cell_corner_bits
    std::vector<AffinePiece> pieces;             // affine towers only, aligned with cells
    std::vector<int> parent_piece;               // piece of the previous stage containing each cell (-1 at stage 0)

    // F_n at a global base point of `cell`
    std::function<std::vector<double>(int cell, const std::vector<double>& x)> eval;
    // dF_n at a base point, dim × k row-major
    std::function<std::vector<double>(int cell, const std::vector<double>& x)> jacobian;
    // exact vertex values where available (Hilbert); empty otherwise
    std::vector<std::vector<mpq_class>> vertices_exact;
};

// Collect the distinct vertices of the complex (lattice keys at exponent m)
// and evaluate `value` at the first cell that sees each one.
void collect_vertices(StageEmbedding& S, const std::function<std::vector<double>(int, const std::vector<mpq_class>&)>& value);

// vertex coordinates (numerators at exponent m) of corner `bits` of a cell
std::vector<i64> corner_numerators(const CellAddress& a, const std::vector<int>& bits, int m);

} // namespace pur
