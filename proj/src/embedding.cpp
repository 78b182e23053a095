#include "pur/embedding.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace pur {

hp to_hp(const mpq_class& q)
{
    hp num(q.get_num().get_str());
    hp den(q.get_den().get_str());
    return num / den;
}

// ---- schedule ---------------------------------------------------------------------

mpq_class DeltaSchedule::sum_delta(i64 a, i64 b) const
{
    mpq_class s = 0;
    for (i64 n = a; n <= b; ++n) s += delta(n);
    return s;
}

mpq_class DeltaSchedule::sum_delta_sq(i64 n) const
{
    mpq_class s = 0;
    for (i64 m = 1; m <= n; ++m) {
        const mpq_class d = delta(m);
        s += d * d;
    }
    return s;
}

double DeltaSchedule::sum_delta_sq_d(i64 n) const
{
    double s = 0.0;
    for (i64 m = 1; m <= n; ++m) s += delta_d(m) * delta_d(m);
    return s;
}

ClaimPrecondition claim_j_s1(const DeltaSchedule& s)
{
    ClaimPrecondition c;
    // Σ_{m=1}^{M} δ_m² <= S <= Σ_{m=1}^{M} δ_m² + 1/(offset+M)
    const i64 M = 2000;
    const double part = s.sum_delta_sq_d(M);
    c.S_lo = part;
    c.S_hi = part + 1.0 / static_cast<double>(s.offset + M);
    c.lhs_lo = 4e3 * std::sqrt(1.0 + c.S_lo) * c.S_lo;
    c.lhs_hi = 4e3 * std::sqrt(1.0 + c.S_hi) * c.S_hi;
    c.holds = c.lhs_hi < 0.125;
    c.violated = c.lhs_lo >= 0.125;
    return c;
}

// ---- frames ----------------------------------------------------------------------------

Frame cell_frame(const CellAddress& a)
{
    Frame f;
    f.side = inv5(a.depth());
    for (int ax = 0; ax < a.k; ++ax) f.corner.push_back(mpq_class(a.corner(ax)) * f.side);
    return f;
}

std::vector<std::vector<int>> cell_corner_bits(const CellRecord& c)
{
    const int k = c.addr.k;
    std::vector<std::vector<int>> out;
    for (int mask = 0; mask < (1 << k); ++mask) {
        std::vector<int> bits(static_cast<std::size_t>(k));
        std::vector<double> u(static_cast<std::size_t>(k));
        for (int a = 0; a < k; ++a) {
            bits[static_cast<std::size_t>(a)] = (mask >> a) & 1;
            u[static_cast<std::size_t>(a)] = bits[static_cast<std::size_t>(a)];
        }
        if (c.shape.contains(u, 0.0)) out.push_back(bits);
    }
    return out;
}

std::vector<std::vector<int>> cell_simplices(const CellRecord& c)
{
    const int k = c.addr.k;
    const auto corners = cell_corner_bits(c);
    std::map<std::vector<int>, int> index;
    for (std::size_t i = 0; i < corners.size(); ++i) index[corners[i]] = static_cast<int>(i);
    const bool reflect = c.shape.half && c.shape.anti;
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> out;
    do {
        // Kuhn simplex: start at 0, add axes in perm order (in reflected coordinates)
        std::vector<std::vector<int>> verts;
        std::vector<int> w(static_cast<std::size_t>(k), 0);
        verts.push_back(w);
        for (int a : perm) {
            w[static_cast<std::size_t>(a)] = 1;
            verts.push_back(w);
        }
        bool ok = true;
        std::vector<int> simplex;
        for (auto v : verts) {
            if (reflect) v[static_cast<std::size_t>(c.shape.a)] = 1 - v[static_cast<std::size_t>(c.shape.a)];
            auto it = index.find(v);
            if (it == index.end()) {
                ok = false;
                break;
            }
            simplex.push_back(it->second);
        }
        if (!ok) continue;
        // the simplex must lie in the half: check its barycentre
        if (c.shape.half) {
            std::vector<double> u(static_cast<std::size_t>(k), 0.0);
            for (int s : simplex)
                for (int a = 0; a < k; ++a) u[static_cast<std::size_t>(a)] += corners[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] / double(k + 1);
            if (!c.shape.contains(u, 0.0)) continue;
        }
        out.push_back(simplex);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

BasePolytope cell_polytope(const CellRecord& c)
{
    const int k = c.addr.k;
    const Frame f = cell_frame(c.addr);
    BasePolytope P;
    P.k = k;
    const hp side = to_hp(f.side);
    std::vector<hp> corner;
    for (const auto& q : f.corner) corner.push_back(to_hp(q));
    auto unit = [&](int a, int s) {
        std::vector<hp> n(static_cast<std::size_t>(k), hp(0));
        n[static_cast<std::size_t>(a)] = hp(s);
        return n;
    };
    for (int a = 0; a < k; ++a) {
        P.n.push_back(unit(a, -1)); // -x_a <= -corner
        P.b.push_back(-corner[static_cast<std::size_t>(a)]);
        P.n.push_back(unit(a, 1)); // x_a <= corner + side
        P.b.push_back(corner[static_cast<std::size_t>(a)] + side);
    }
    if (c.shape.half) {
        const int a = c.shape.a, b = c.shape.b;
        std::vector<hp> n(static_cast<std::size_t>(k), hp(0));
        hp rhs;
        const hp ua0 = corner[static_cast<std::size_t>(a)], ub0 = corner[static_cast<std::size_t>(b)];
        if (!c.shape.anti) {
            // lower: u_a >= u_b  <=>  (x_b - ub0) - (x_a - ua0) <= 0
            const int s = c.shape.upper ? -1 : 1;
            n[static_cast<std::size_t>(b)] = hp(s);
            n[static_cast<std::size_t>(a)] = hp(-s);
            rhs = hp(s) * (ub0 - ua0);
        } else {
            // lower: u_a + u_b <= 1  <=>  x_a + x_b <= ua0 + ub0 + side
            const int s = c.shape.upper ? -1 : 1;
            n[static_cast<std::size_t>(a)] = hp(s);
            n[static_cast<std::size_t>(b)] = hp(s);
            rhs = hp(s) * (ua0 + ub0 + side);
        }
        P.n.push_back(n);
        P.b.push_back(rhs);
    }
    for (const auto& bits : cell_corner_bits(c)) {
        std::vector<hp> v;
        for (int a = 0; a < k; ++a) v.push_back(corner[static_cast<std::size_t>(a)] + side * hp(bits[static_cast<std::size_t>(a)]));
        P.vertices.push_back(v);
    }
    return P;
}

bool BasePolytope::contains(const std::vector<hp>& x, const hp& tol) const
{
    for (std::size_t f = 0; f < n.size(); ++f) {
        hp s = 0;
        for (int a = 0; a < k; ++a) s += n[f][static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
        if (s > b[f] + tol) return false;
    }
    return true;
}

hp BasePolytope::interior_distance_base(const std::vector<hp>& x) const
{
    hp best = -1;
    for (std::size_t f = 0; f < n.size(); ++f) {
        hp s = 0, nn = 0;
        for (int a = 0; a < k; ++a) {
            s += n[f][static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
            nn += n[f][static_cast<std::size_t>(a)] * n[f][static_cast<std::size_t>(a)];
        }
        const hp d = (b[f] - s) / sqrt(nn);
        if (best < 0 || d < best) best = d;
    }
    return best;
}

// ---- affine pieces ----------------------------------------------------------------------

std::vector<hp> AffinePiece::eval(const std::vector<hp>& x) const
{
    std::vector<hp> out(c);
    for (int r = 0; r < dim; ++r)
        for (int a = 0; a < k; ++a) out[static_cast<std::size_t>(r)] += Jat(r, a) * x[static_cast<std::size_t>(a)];
    return out;
}

std::vector<double> AffinePiece::eval_d(const std::vector<double>& x) const
{
    std::vector<double> out(cd);
    for (int r = 0; r < dim; ++r)
        for (int a = 0; a < k; ++a) out[static_cast<std::size_t>(r)] += Jd[static_cast<std::size_t>(r * k + a)] * x[static_cast<std::size_t>(a)];
    return out;
}

void AffinePiece::refresh_double()
{
    cd.resize(c.size());
    Jd.resize(J.size());
    for (std::size_t i = 0; i < c.size(); ++i) cd[i] = to_d(c[i]);
    for (std::size_t i = 0; i < J.size(); ++i) Jd[i] = to_d(J[i]);
}

hp norm(const std::vector<hp>& v)
{
    hp s = 0;
    for (const auto& x : v) s += x * x;
    return sqrt(s);
}

hp dist(const std::vector<hp>& a, const std::vector<hp>& b)
{
    hp s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return sqrt(s);
}

double dist_d(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

PlaneFrame plane_frame(const AffinePiece& P)
{
    PlaneFrame F;
    const auto d = static_cast<std::size_t>(P.dim);
    F.R.assign(static_cast<std::size_t>(P.k), std::vector<hp>(static_cast<std::size_t>(P.k), hp(0)));
    auto orth = [&](std::vector<hp> v, std::vector<hp>* coeffs) {
        for (std::size_t i = 0; i < F.q.size(); ++i) {
            hp s = 0;
            for (std::size_t r = 0; r < d; ++r) s += F.q[i][r] * v[r];
            if (coeffs) (*coeffs)[i] = s;
            for (std::size_t r = 0; r < d; ++r) v[r] -= s * F.q[i][r];
        }
        // second pass for stability
        for (std::size_t i = 0; i < F.q.size(); ++i) {
            hp s = 0;
            for (std::size_t r = 0; r < d; ++r) s += F.q[i][r] * v[r];
            if (coeffs) (*coeffs)[i] += s;
            for (std::size_t r = 0; r < d; ++r) v[r] -= s * F.q[i][r];
        }
        return v;
    };
    for (int col = 0; col < P.k; ++col) {
        std::vector<hp> v(d);
        for (std::size_t r = 0; r < d; ++r) v[r] = P.Jat(static_cast<int>(r), col);
        std::vector<hp> coeffs(static_cast<std::size_t>(P.k), hp(0));
        v = orth(v, &coeffs);
        const hp nv = norm(v);
        if (nv == 0) throw std::runtime_error("plane_frame: degenerate Jacobian");
        for (auto& x : v) x /= nv;
        for (int i = 0; i < col; ++i) F.R[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)] = coeffs[static_cast<std::size_t>(i)];
        F.R[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)] = nv;
        F.q.push_back(v);
    }
    const std::size_t base = F.q.size();
    for (std::size_t e = 0; e < d && F.q.size() < d; ++e) {
        std::vector<hp> v(d, hp(0));
        v[e] = 1;
        v = orth(v, nullptr);
        const hp nv = norm(v);
        if (nv < hp("1e-20")) continue;
        for (auto& x : v) x /= nv;
        F.q.push_back(v);
    }
    F.complement.assign(F.q.begin() + static_cast<std::ptrdiff_t>(base), F.q.end());
    F.q.resize(base);
    return F;
}

namespace {
Eigen::VectorXd gram_eigs(const AffinePiece& P)
{
    Eigen::MatrixXd G(P.k, P.k);
    for (int a = 0; a < P.k; ++a)
        for (int b = 0; b < P.k; ++b) {
            hp s = 0;
            for (int r = 0; r < P.dim; ++r) s += P.Jat(r, a) * P.Jat(r, b);
            G(a, b) = to_d(s);
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    return es.eigenvalues();
}
} // namespace

double sigma_max(const AffinePiece& P)
{
    const auto e = gram_eigs(P);
    return std::sqrt(std::max(0.0, e.maxCoeff()));
}

double sigma_min(const AffinePiece& P)
{
    const auto e = gram_eigs(P);
    return std::sqrt(std::max(0.0, e.minCoeff()));
}

// ---- vertices ----------------------------------------------------------------------------

std::vector<i64> corner_numerators(const CellAddress& a, const std::vector<int>& bits, int m)
{
    std::vector<i64> x(static_cast<std::size_t>(a.k));
    const i64 step = pow5(m - a.depth());
    for (int ax = 0; ax < a.k; ++ax) x[static_cast<std::size_t>(ax)] = a.corner_at(ax, m) + step * bits[static_cast<std::size_t>(ax)];
    return x;
}

void collect_vertices(StageEmbedding& S, const std::function<std::vector<double>(int, const std::vector<mpq_class>&)>& value)
{
    std::map<std::string, int> index;
    S.vertex_keys.clear();
    S.vertices.clear();
    S.cell_vertices.assign(S.complex.cells.size(), {});
    const mpq_class unit = inv5(S.m);
    for (std::size_t ci = 0; ci < S.complex.cells.size(); ++ci) {
        const auto& c = S.complex.cells[ci];
        for (const auto& bits : cell_corner_bits(c)) {
            const auto xn = corner_numerators(c.addr, bits, S.m);
            const std::string key = lattice_key(c.addr, xn, S.m, 1).str();
            auto it = index.find(key);
            if (it == index.end()) {
                std::vector<mpq_class> x;
                for (auto v : xn) x.push_back(mpq_class(v) * unit);
                it = index.emplace(key, static_cast<int>(S.vertices.size())).first;
                S.vertex_keys.push_back(key);
                S.vertices.push_back(value(static_cast<int>(ci), x));
            }
            S.cell_vertices[ci].push_back(it->second);
        }
    }
}

} // namespace pur
