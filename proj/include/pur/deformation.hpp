#pragma once
// Helper profiles h1, h2, the cut-off φ, the map Ψ_δ on Q̃ and its certified
// piecewise-affine approximation Φ_δ.
//
// Angles are passed as u = θ/π so that breakpoints are rational.

#include "pur/branched_cover.hpp"
#include "pur/exact.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace pur {

template <class T>
T h1(const T& u, const T& delta)
{
    return delta / T(2) * (T(2) - nabs(u - T(2)));
}

template <class T>
T h2(const T& u, const T& delta)
{
    if (u <= T(1)) return -delta * u;
    if (u <= T(3)) return -delta + delta * (u - T(1));
    return delta - delta * (u - T(3));
}

// φ on [0, L]; L = 5^{-i-1}
template <class T>
T phi_cutoff(const T& r, const T& L)
{
    if (r <= L / T(5)) return T(5) * r;
    if (r <= L - L / T(5)) return L;
    return L * (T(1) - T(5) / L * (r - L + L / T(5)));
}

// Radian API with range checks.
double h1_theta(double theta, double delta);
double h2_theta(double theta, double delta);
double phi_checked(double r, int i);

// Per-piece slopes with respect to u (divide by π for slopes in θ).
std::vector<mpq_class> h1_slopes(const mpq_class& delta);
std::vector<mpq_class> h2_slopes(const mpq_class& delta);
// φ slopes (dimensionless) on its three pieces
std::vector<mpq_class> phi_slopes();

// squared gap between a point and its fiber partner, u ∈ [0,2]
template <class T>
T fiber_gap_sq(const T& u, const T& delta)
{
    const T w = u + T(2);
    const T a = h1<T>(u, delta) - h1<T>(w, delta);
    const T b = h2<T>(u, delta) - h2<T>(w, delta);
    return a * a + b * b;
}
double fiber_gap_lower(double theta, double delta);

struct HlowCertificate {
    mpq_class min_sq;      // exact minimum of the squared gap over [0,2]
    mpq_class argmin;      // u = θ/π
    std::size_t candidates = 0;
    double grid_min = 0.0; // dense grid minimum of the gap
    std::size_t grid_points = 0;
    bool pass = false;     // min_sq >= δ²/4 and grid_min >= δ/2 - 1e-12
};
HlowCertificate certify_hlow(const mpq_class& delta, std::size_t grid_points);

// ---- Ψ -------------------------------------------------------------------------
// Point given in child units (X,Y) of the event cell, with the child it lies in
// and its sheet.  L is the physical child side (5^{-i-1}); the result is in
// physical units.  Zero over central and outer children.
template <class T>
std::array<T, 2> psi_value(const T& X, const T& Y, int c1, int c2, int bit, const T& delta, const T& L)
{
    if (child_role(c1, c2) != Role::annulus || bit < 0) return {T(0), T(0)};
    const auto p = polar_chart<T>(X, Y, c1, c2, bit);
    const T ph = phi_cutoff<T>(p.r * L, L);
    return {ph * h1<T>(p.u, delta), ph * h2<T>(p.u, delta)};
}

struct PsiJet {
    std::array<double, 2> v{};
    std::array<std::array<double, 2>, 2> d{}; // d[c][a] = ∂Ψ_c / ∂x_a (physical)
};
PsiJet psi_jet(double X, double Y, int c1, int c2, int bit, double delta, double L);

// ---- Φ (unit template: Q = [0,1]^2) ------------------------------------------
struct TemplatePiece {
    std::array<int, 2> child{};
    int bit = -1;              // -1 over central/outer children
    std::array<i64, 2> sub{};  // subsquare index in the child, 0..5^N-1 (0 for whole children)
    int level = 1;             // frame depth below Q (1 for whole children, 1+N otherwise)
    Shape shape;
    // Φ(u) = c + M u in local frame coordinates u ∈ [0,1]^2; M columns = axes
    std::array<mpq_class, 2> c;
    std::array<std::array<mpq_class, 2>, 2> M; // M[row][col]
    std::array<double, 2> cd{};
    std::array<std::array<double, 2>, 2> Md{};

    // frame lower-left corner in Q units, exact
    std::array<mpq_class, 2> corner() const;
    mpq_class side() const;
};

struct CertifiedBounds {
    double glip = 0.0;      // max singular value over pieces (Q-normalised units)
    double glip_lo = 0.0, glip_hi = 0.0;
    double min_sep_ratio = 0.0; // min over fiber pairs of ‖ΔΦ‖ / ((δ/3)φ), sampled at vertices for reporting
    double sup = 0.0, sup_bound = 0.0;
    bool glip_ok = false, sep_ok = false, sup_ok = false;
    std::size_t triangles_checked = 0;
    std::string violated; // empty when all bounds hold
    bool ok() const { return glip_ok && sep_ok && sup_ok; }
};

struct AffineApproximation {
    mpq_class delta;
    double delta_d = 0.0;
    int N = 0;
    std::vector<TemplatePiece> pieces;
    CertifiedBounds certified_bounds;

    std::array<double, 2> eval(std::size_t piece, double u0, double u1) const;
    // locate a Q-unit point (x,y) with sheet bit; returns piece index and local coords
    std::size_t locate(double x, double y, int bit, double* u0, double* u1) const;
};

struct CertificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Builds and certifies; throws CertificationError naming the violated bound.
AffineApproximation build_affine_approx(const mpq_class& delta, int N);
// Unchecked build (certified_bounds filled, no throw).
AffineApproximation build_affine_approx_unchecked(const mpq_class& delta, int N);
// N = 1, 2, ... until certification passes.
AffineApproximation find_affine_approx(const mpq_class& delta, int N_cap);
// sup |Φ − Ψ| over triangle centroids, relative to δ·L (L = 1/5)
double midpoint_error(const AffineApproximation& A);

// exact λ_max(AᵀA) ≤ B and ≥ B tests for a 2x2 rational matrix
bool lambda_max_le(const std::array<std::array<mpq_class, 2>, 2>& A, const mpq_class& B);
bool lambda_max_ge(const std::array<std::array<mpq_class, 2>, 2>& A, const mpq_class& B);
double sigma_max(const std::array<std::array<double, 2>, 2>& A);

// exact minimum over a triangle (vertices P) of f(u) = |c + M u|² − k²(a + g·u)²
mpq_class min_sep_quadratic(const std::array<mpq_class, 2>& c, const std::array<std::array<mpq_class, 2>, 2>& M,
                            const mpq_class& a, const std::array<mpq_class, 2>& g, const mpq_class& k,
                            const std::array<std::array<mpq_class, 2>, 3>& P);

} // namespace pur
