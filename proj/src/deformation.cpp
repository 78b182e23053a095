#include "pur/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pur {

double h1_theta(double theta, double delta)
{
    if (!(theta >= 0.0 && theta <= 4.0 * M_PI)) throw std::out_of_range("h1: θ outside [0,4π]");
    return delta / (2.0 * M_PI) * (2.0 * M_PI - std::abs(theta - 2.0 * M_PI));
}

double h2_theta(double theta, double delta)
{
    if (!(theta >= 0.0 && theta <= 4.0 * M_PI)) throw std::out_of_range("h2: θ outside [0,4π]");
    if (theta <= M_PI) return -delta / M_PI * theta;
    if (theta <= 3.0 * M_PI) return -delta + delta / M_PI * (theta - M_PI);
    return delta - delta / M_PI * (theta - 3.0 * M_PI);
}

double phi_checked(double r, int i)
{
    const double L = inv5d(i + 1);
    if (!(r >= 0.0 && r <= L)) throw std::out_of_range("φ: r outside [0, 5^{-i-1}]");
    // third branch written as in the closed form: L[1 − 5^{i+2}(r − L + L/5)]
    if (r <= L / 5.0) return 5.0 * r;
    if (r <= L - L / 5.0) return L;
    return L * (1.0 - (5.0 / L) * (r - L + L / 5.0));
}

std::vector<mpq_class> h1_slopes(const mpq_class& delta)
{
    // pieces [0,2], [2,4]
    return {delta / 2, -delta / 2};
}

std::vector<mpq_class> h2_slopes(const mpq_class& delta)
{
    return {mpq_class(-delta), mpq_class(delta), mpq_class(-delta)};
}

std::vector<mpq_class> phi_slopes() { return {mpq_class(5), mpq_class(0), mpq_class(-5)}; }

double fiber_gap_lower(double theta, double delta)
{
    if (!(theta >= 0.0 && theta <= 2.0 * M_PI)) throw std::out_of_range("fiber_gap_lower: θ outside [0,2π]");
    const double u = theta / M_PI;
    return std::sqrt(fiber_gap_sq<double>(u, delta));
}

HlowCertificate certify_hlow(const mpq_class& delta, std::size_t grid_points)
{
    HlowCertificate c;
    // breakpoints of both profiles on [0,2] (and of their shifts by 2)
    const std::vector<mpq_class> bp{mpq_class(0), mpq_class(1), mpq_class(2)};
    std::vector<mpq_class> cand = bp;
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
        // on each piece the squared gap is an exact quadratic: fit through 3 points
        const mpq_class a = bp[k], b = bp[k + 1], m = (a + b) / 2;
        const mpq_class fa = fiber_gap_sq(a, delta), fb = fiber_gap_sq(b, delta), fm = fiber_gap_sq(m, delta);
        const mpq_class h = (b - a) / 2;
        const mpq_class A2 = (fa - 2 * fm + fb) / (h * h);  // 2·(leading coefficient)
        const mpq_class B = (fb - fa) / (2 * h);             // derivative at m
        if (A2 > 0) {
            const mpq_class ustar = m - B / A2;
            if (ustar > a && ustar < b) cand.push_back(ustar);
        }
    }
    c.candidates = cand.size();
    bool first = true;
    for (const auto& u : cand) {
        const mpq_class f = fiber_gap_sq(u, delta);
        if (first || f < c.min_sq) {
            c.min_sq = f;
            c.argmin = u;
            first = false;
        }
    }
    const double dd = delta.get_d();
    c.grid_points = grid_points;
    c.grid_min = 1e300;
    for (std::size_t k = 0; k < grid_points; ++k) {
        const double th = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(grid_points - 1);
        c.grid_min = std::min(c.grid_min, fiber_gap_lower(std::min(th, 2.0 * M_PI), dd));
    }
    c.pass = c.min_sq >= delta * delta / 4 && c.grid_min >= dd / 2.0 - 1e-12;
    return c;
}

PsiJet psi_jet(double X, double Y, int c1, int c2, int bit, double delta, double L)
{
    PsiJet J;
    if (bit < 0 || child_role(c1, c2) != Role::annulus) return J;
    const double dx = X - 2.5, dy = Y - 2.5;
    const double rho = std::max(std::abs(dx), std::abs(dy));
    const ChartSide side = chart_side<double>(dx, dy, c1, c2);
    double t, gr[2], gt[2];
    switch (side) {
    case ChartSide::east: t = dy + 0.5; gr[0] = 1; gr[1] = 0; gt[0] = 0; gt[1] = 1; break;
    case ChartSide::north: t = 2 * rho - dx + 0.5; gr[0] = 0; gr[1] = 1; gt[0] = -1; gt[1] = 2; break;
    case ChartSide::west: t = 4 * rho - dy + 0.5; gr[0] = -1; gr[1] = 0; gt[0] = -4; gt[1] = -1; break;
    case ChartSide::south: t = 6 * rho + dx + 0.5; gr[0] = 0; gr[1] = -1; gt[0] = 1; gt[1] = -6; break;
    default: t = 8 * rho + dy + 0.5; gr[0] = 1; gr[1] = 0; gt[0] = 8; gt[1] = 1; break;
    }
    const double u = t / (4 * rho) + 2 * bit;
    double gu[2];
    for (int a = 0; a < 2; ++a) gu[a] = (gt[a] * rho - t * gr[a]) / (4 * rho * rho) / L;
    const double r = (rho - 0.5) * L;
    const double ph = phi_cutoff<double>(r, L);
    const double dph = r < L / 5.0 ? 5.0 : (r <= L - L / 5.0 ? 0.0 : -5.0);
    const double hv[2] = {h1<double>(u, delta), h2<double>(u, delta)};
    const double dh[2] = {u < 2.0 ? delta / 2 : -delta / 2, u < 1.0 ? -delta : (u < 3.0 ? delta : -delta)};
    for (int c = 0; c < 2; ++c) {
        J.v[static_cast<std::size_t>(c)] = ph * hv[c];
        for (int a = 0; a < 2; ++a)
            J.d[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)] = dph * gr[a] * hv[c] + ph * dh[c] * gu[a];
    }
    return J;
}

// ---- Φ template -------------------------------------------------------------------

std::array<mpq_class, 2> TemplatePiece::corner() const
{
    if (bit < 0) return {mpq_class(child[0], 5), mpq_class(child[1], 5)};
    const mpq_class s = side();
    return {mpq_class(child[0], 5) + s * mpq_class(sub[0]), mpq_class(child[1], 5) + s * mpq_class(sub[1])};
}

mpq_class TemplatePiece::side() const { return inv5(level); }

std::array<double, 2> AffineApproximation::eval(std::size_t p, double u0, double u1) const
{
    const auto& P = pieces[p];
    return {P.cd[0] + P.Md[0][0] * u0 + P.Md[0][1] * u1, P.cd[1] + P.Md[1][0] * u0 + P.Md[1][1] * u1};
}

std::size_t AffineApproximation::locate(double x, double y, int bit, double* u0, double* u1) const
{
    const int c1 = std::clamp(static_cast<int>(std::floor(5 * x)), 0, 4);
    const int c2 = std::clamp(static_cast<int>(std::floor(5 * y)), 0, 4);
    const bool ann = child_role(c1, c2) == Role::annulus;
    const i64 n = pow5(N);
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        const auto& P = pieces[p];
        if (P.child[0] != c1 || P.child[1] != c2) continue;
        if (!ann) {
            *u0 = 5 * x - c1;
            *u1 = 5 * y - c2;
            return p;
        }
        if (P.bit != bit) continue;
        const double lx = (5 * x - c1) * static_cast<double>(n), ly = (5 * y - c2) * static_cast<double>(n);
        const i64 i = std::clamp<i64>(static_cast<i64>(std::floor(lx)), 0, n - 1);
        const i64 j = std::clamp<i64>(static_cast<i64>(std::floor(ly)), 0, n - 1);
        if (P.sub[0] != i || P.sub[1] != j) continue;
        std::vector<double> u{lx - static_cast<double>(i), ly - static_cast<double>(j)};
        if (!P.shape.contains(u, 1e-15)) continue;
        *u0 = u[0];
        *u1 = u[1];
        return p;
    }
    throw std::logic_error("AffineApproximation::locate: point not covered");
}

double sigma_max(const std::array<std::array<double, 2>, 2>& A)
{
    const double a = A[0][0] * A[0][0] + A[0][1] * A[0][1] + A[1][0] * A[1][0] + A[1][1] * A[1][1];
    const double d = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    const double disc = std::max(0.0, a * a - 4 * d * d);
    return std::sqrt(0.5 * (a + std::sqrt(disc)));
}

namespace {
void frob_det(const std::array<std::array<mpq_class, 2>, 2>& A, mpq_class& a, mpq_class& d2)
{
    a = A[0][0] * A[0][0] + A[0][1] * A[0][1] + A[1][0] * A[1][0] + A[1][1] * A[1][1];
    const mpq_class d = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    d2 = d * d;
}
} // namespace

bool lambda_max_le(const std::array<std::array<mpq_class, 2>, 2>& A, const mpq_class& B)
{
    mpq_class a, d2;
    frob_det(A, a, d2);
    const mpq_class s = 2 * B - a;
    return s >= 0 && a * a - 4 * d2 <= s * s;
}

bool lambda_max_ge(const std::array<std::array<mpq_class, 2>, 2>& A, const mpq_class& B)
{
    mpq_class a, d2;
    frob_det(A, a, d2);
    const mpq_class s = 2 * B - a;
    return s <= 0 || a * a - 4 * d2 >= s * s;
}

mpq_class min_sep_quadratic(const std::array<mpq_class, 2>& c, const std::array<std::array<mpq_class, 2>, 2>& M,
                            const mpq_class& a, const std::array<mpq_class, 2>& g, const mpq_class& k,
                            const std::array<std::array<mpq_class, 2>, 3>& P)
{
    const mpq_class k2 = k * k;
    std::array<std::array<mpq_class, 2>, 2> H;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) H[i][j] = M[0][i] * M[0][j] + M[1][i] * M[1][j] - k2 * g[i] * g[j];
    std::array<mpq_class, 2> b;
    for (int i = 0; i < 2; ++i) b[i] = M[0][i] * c[0] + M[1][i] * c[1] - k2 * a * g[i];
    const mpq_class c0 = c[0] * c[0] + c[1] * c[1] - k2 * a * a;
    auto f = [&](const std::array<mpq_class, 2>& u) -> mpq_class {
        return H[0][0] * u[0] * u[0] + 2 * H[0][1] * u[0] * u[1] + H[1][1] * u[1] * u[1] + 2 * (b[0] * u[0] + b[1] * u[1]) + c0;
    };
    mpq_class best = f(P[0]);
    for (int v = 1; v < 3; ++v) best = qmin(best, f(P[v]));
    for (int e = 0; e < 3; ++e) {
        const auto& p = P[e];
        const auto& q = P[(e + 1) % 3];
        const std::array<mpq_class, 2> D{q[0] - p[0], q[1] - p[1]};
        const mpq_class alpha = H[0][0] * D[0] * D[0] + 2 * H[0][1] * D[0] * D[1] + H[1][1] * D[1] * D[1];
        const mpq_class beta = D[0] * (H[0][0] * p[0] + H[0][1] * p[1] + b[0]) + D[1] * (H[1][0] * p[0] + H[1][1] * p[1] + b[1]);
        if (alpha > 0) {
            const mpq_class t = -beta / alpha;
            if (t > 0 && t < 1) best = qmin(best, f(p) - beta * beta / alpha);
        }
    }
    const mpq_class det = H[0][0] * H[1][1] - H[0][1] * H[1][0];
    if (det > 0 && H[0][0] > 0) {
        const std::array<mpq_class, 2> us{-(H[1][1] * b[0] - H[0][1] * b[1]) / det, -(-H[1][0] * b[0] + H[0][0] * b[1]) / det};
        // barycentric inside test
        auto cross = [](const std::array<mpq_class, 2>& o, const std::array<mpq_class, 2>& p1, const std::array<mpq_class, 2>& p2) {
            return mpq_class((p1[0] - o[0]) * (p2[1] - o[1]) - (p1[1] - o[1]) * (p2[0] - o[0]));
        };
        const mpq_class s0 = cross(P[0], P[1], us), s1 = cross(P[1], P[2], us), s2 = cross(P[2], P[0], us);
        const bool inside = (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
        if (inside) best = qmin(best, f(us));
    }
    return best;
}

namespace {

using M2 = std::array<std::array<mpq_class, 2>, 2>;
using V2 = std::array<mpq_class, 2>;

// affine interpolation through three local points: value = c + M u
void solve_affine(const std::array<std::array<int, 2>, 3>& p, const std::array<V2, 3>& v, V2& c, M2& M)
{
    const mpq_class e1x = p[1][0] - p[0][0], e1y = p[1][1] - p[0][1];
    const mpq_class e2x = p[2][0] - p[0][0], e2y = p[2][1] - p[0][1];
    const mpq_class det = e1x * e2y - e2x * e1y;
    // inverse of [[e1x, e2x],[e1y, e2y]]
    const mpq_class i00 = e2y / det, i01 = -e2x / det, i10 = -e1y / det, i11 = e1x / det;
    for (int r = 0; r < 2; ++r) {
        const mpq_class d1 = v[1][r] - v[0][r], d2 = v[2][r] - v[0][r];
        M[r][0] = d1 * i00 + d2 * i10;
        M[r][1] = d1 * i01 + d2 * i11;
        c[r] = v[0][r] - M[r][0] * p[0][0] - M[r][1] * p[0][1];
    }
}

} // namespace

AffineApproximation build_affine_approx_unchecked(const mpq_class& delta, int N)
{
    if (N < 1) throw std::invalid_argument("build_affine_approx: N >= 1 required");
    AffineApproximation A;
    A.delta = delta;
    A.delta_d = delta.get_d();
    A.N = N;
    const i64 n = pow5(N);
    const mpq_class L(1, 5);
    const mpq_class kq = delta / 3;
    const mpq_class Bhi = 529 * delta * delta;
    const mpq_class Blo = delta * delta / 256;
    const mpq_class supB = 8 * delta * delta; // (2δ·√2)^2 for the unit square
    CertifiedBounds& cb = A.certified_bounds;
    cb.glip_lo = A.delta_d / 16.0;
    cb.glip_hi = 23.0 * A.delta_d;
    cb.sup_bound = 2.0 * A.delta_d * std::sqrt(2.0);
    bool all_le = true, some_ge = false, sep = true, sup = true;
    mpq_class supmax = 0;
    double minratio = 1e300;

    auto fill_double = [](TemplatePiece& P) {
        for (int r = 0; r < 2; ++r) {
            P.cd[static_cast<std::size_t>(r)] = P.c[static_cast<std::size_t>(r)].get_d();
            for (int s = 0; s < 2; ++s) P.Md[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)] = P.M[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)].get_d();
        }
    };

    for (int c1 = 0; c1 < 5; ++c1)
        for (int c2 = 0; c2 < 5; ++c2) {
            if (child_role(c1, c2) != Role::annulus) {
                TemplatePiece P;
                P.child = {c1, c2};
                P.level = 1;
                P.c = {mpq_class(0), mpq_class(0)};
                P.M = {{{mpq_class(0), mpq_class(0)}, {mpq_class(0), mpq_class(0)}}};
                fill_double(P);
                A.pieces.push_back(std::move(P));
                continue;
            }
            const bool anti = (c1 == 1 && c2 == 3) || (c1 == 3 && c2 == 1);
            // vertex values per sheet
            std::vector<std::vector<V2>> val[2];
            std::vector<mpq_class> phv(static_cast<std::size_t>((n + 1) * (n + 1)));
            for (int bit = 0; bit < 2; ++bit) {
                val[bit].assign(static_cast<std::size_t>(n + 1), std::vector<V2>(static_cast<std::size_t>(n + 1)));
                for (i64 i = 0; i <= n; ++i)
                    for (i64 j = 0; j <= n; ++j) {
                        const mpq_class X = mpq_class(c1) + mpq_class(i, n), Y = mpq_class(c2) + mpq_class(j, n);
                        auto v = psi_value<mpq_class>(X, Y, c1, c2, bit, delta, L);
                        val[bit][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = {v[0], v[1]};
                        if (bit == 0) {
                            auto pc = polar_chart<mpq_class>(X, Y, c1, c2, 0);
                            phv[static_cast<std::size_t>(i * (n + 1) + j)] = phi_cutoff<mpq_class>(pc.r * L, L);
                        }
                    }
            }
            for (i64 i = 0; i < n; ++i)
                for (i64 j = 0; j < n; ++j)
                    for (int up = 0; up < 2; ++up) {
                        Shape sh;
                        sh.half = true;
                        sh.anti = anti;
                        sh.upper = up == 1;
                        const auto corners = sh.plane_corners();
                        std::array<std::array<int, 2>, 3> pts{corners[0], corners[1], corners[2]};
                        std::array<V2, 2> cc;
                        std::array<M2, 2> MM;
                        for (int bit = 0; bit < 2; ++bit) {
                            std::array<V2, 3> v;
                            for (int q = 0; q < 3; ++q)
                                v[static_cast<std::size_t>(q)] = val[bit][static_cast<std::size_t>(i + pts[static_cast<std::size_t>(q)][0])][static_cast<std::size_t>(j + pts[static_cast<std::size_t>(q)][1])];
                            solve_affine(pts, v, cc[bit], MM[bit]);
                            TemplatePiece P;
                            P.child = {c1, c2};
                            P.bit = bit;
                            P.sub = {i, j};
                            P.level = 1 + N;
                            P.shape = sh;
                            P.c = cc[bit];
                            P.M = MM[bit];
                            fill_double(P);
                            // derivative with respect to Q units
                            M2 D;
                            const mpq_class inv_s = mpq_class(pow5(1 + N));
                            for (int r = 0; r < 2; ++r)
                                for (int s = 0; s < 2; ++s) D[r][s] = P.M[r][s] * inv_s;
                            if (!lambda_max_le(D, Bhi)) all_le = false;
                            if (lambda_max_ge(D, Blo)) some_ge = true;
                            std::array<std::array<double, 2>, 2> Dd;
                            for (int r = 0; r < 2; ++r)
                                for (int s = 0; s < 2; ++s) Dd[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)] = D[r][s].get_d();
                            cb.glip = std::max(cb.glip, sigma_max(Dd));
                            for (int q = 0; q < 3; ++q) {
                                const auto& vv = v[static_cast<std::size_t>(q)];
                                const mpq_class nn = vv[0] * vv[0] + vv[1] * vv[1];
                                if (nn > supmax) supmax = nn;
                            }
                            A.pieces.push_back(std::move(P));
                        }
                        // fiber separation on this triangle
                        V2 dc{cc[0][0] - cc[1][0], cc[0][1] - cc[1][1]};
                        M2 dM;
                        for (int r = 0; r < 2; ++r)
                            for (int s = 0; s < 2; ++s) dM[r][s] = MM[0][r][s] - MM[1][r][s];
                        std::array<V2, 3> phiv;
                        for (int q = 0; q < 3; ++q) {
                            const auto& pq = pts[static_cast<std::size_t>(q)];
                            phiv[static_cast<std::size_t>(q)] = {phv[static_cast<std::size_t>((i + pq[0]) * (n + 1) + (j + pq[1]))], mpq_class(0)};
                        }
                        V2 pc;
                        M2 pM;
                        solve_affine(pts, phiv, pc, pM);
                        std::array<V2, 3> P3;
                        for (int q = 0; q < 3; ++q) P3[static_cast<std::size_t>(q)] = {mpq_class(pts[static_cast<std::size_t>(q)][0]), mpq_class(pts[static_cast<std::size_t>(q)][1])};
                        const mpq_class mn = min_sep_quadratic(dc, dM, pc[0], {pM[0][0], pM[0][1]}, kq, P3);
                        if (mn < 0) sep = false;
                        ++cb.triangles_checked;
                        for (int q = 0; q < 3; ++q) {
                            const double ph = phiv[static_cast<std::size_t>(q)][0].get_d();
                            if (ph <= 0) continue;
                            const auto& pq = pts[static_cast<std::size_t>(q)];
                            const double gx = mpq_class(dc[0] + dM[0][0] * pq[0] + dM[0][1] * pq[1]).get_d();
                            const double gy = mpq_class(dc[1] + dM[1][0] * pq[0] + dM[1][1] * pq[1]).get_d();
                            minratio = std::min(minratio, std::hypot(gx, gy) / (A.delta_d / 3.0 * ph));
                        }
                    }
        }
    sup = supmax <= supB;
    cb.sup = std::sqrt(supmax.get_d());
    cb.glip_ok = all_le && some_ge;
    cb.sep_ok = sep;
    cb.sup_ok = sup;
    cb.min_sep_ratio = minratio;
    if (!all_le) cb.violated = "glip Φ ≤ 23δ";
    else if (!some_ge) cb.violated = "glip Φ ≥ δ/16";
    else if (!sep) cb.violated = "fiber separation ≥ (δ/3)φ";
    else if (!sup) cb.violated = "sup ‖Φ‖ ≤ 2δ·diam Q";
    return A;
}

AffineApproximation build_affine_approx(const mpq_class& delta, int N)
{
    auto A = build_affine_approx_unchecked(delta, N);
    if (!A.certified_bounds.ok()) throw CertificationError("Φ certification failed at N=" + std::to_string(N) + ": " + A.certified_bounds.violated);
    return A;
}

AffineApproximation find_affine_approx(const mpq_class& delta, int N_cap)
{
    std::string last;
    for (int N = 1; N <= N_cap; ++N) {
        auto A = build_affine_approx_unchecked(delta, N);
        if (A.certified_bounds.ok()) return A;
        last = A.certified_bounds.violated;
    }
    throw CertificationError("Φ certification failed for all N <= " + std::to_string(N_cap) + ": " + last);
}

double midpoint_error(const AffineApproximation& A)
{
    const double n = static_cast<double>(pow5(A.N));
    double worst = 0.0;
    for (std::size_t p = 0; p < A.pieces.size(); ++p) {
        const auto& P = A.pieces[p];
        if (P.bit < 0) continue;
        const auto pc = P.shape.plane_corners();
        double u0 = 0, u1 = 0;
        for (auto& c : pc) {
            u0 += c[0] / 3.0;
            u1 += c[1] / 3.0;
        }
        const auto f = A.eval(p, u0, u1);
        const double X = P.child[0] + (static_cast<double>(P.sub[0]) + u0) / n;
        const double Y = P.child[1] + (static_cast<double>(P.sub[1]) + u1) / n;
        const auto g = psi_value<double>(X, Y, P.child[0], P.child[1], P.bit, A.delta_d, 0.2);
        worst = std::max(worst, std::hypot(f[0] - g[0], f[1] - g[1]));
    }
    return worst / (A.delta_d * 0.2);
}

} // namespace pur
