#include "pur/branched_cover.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace pur {

namespace {

// anticlockwise cycle of annulus children starting above σ
const std::array<std::array<int, 2>, 8> kRing{{{3, 2}, {3, 3}, {2, 3}, {1, 3}, {1, 2}, {1, 1}, {2, 1}, {3, 1}}};

bool on_inner_boundary(int X, int Y) { return (X >= 2 && X <= 3 && (Y == 2 || Y == 3)) || (Y >= 2 && Y <= 3 && (X == 2 || X == 3)); }
bool on_outer_boundary(int X, int Y) { return (X >= 1 && X <= 4 && (Y == 1 || Y == 4)) || (Y >= 1 && Y <= 4 && (X == 1 || X == 4)); }

} // namespace

PolarCoords polar_coords(double X, double Y, int c1, int c2, int bit)
{
    if (child_role(c1, c2) != Role::annulus) throw std::invalid_argument("polar_coords: point not over the annulus");
    if (Y == 2.0 && X > 3.0 && X < 4.0) throw CutPointError("polar_coords: point on the cut σ");
    auto p = polar_chart<double>(X, Y, c1, c2, bit);
    return {p.r, p.u * M_PI};
}

int BranchedCoverRecord::lift_across(std::array<int, 2> from, int bit, std::array<int, 2> to) const
{
    for (const auto& g : glue)
        if (g.from == from && g.from_bit == bit && g.to == to) return g.to_bit;
    throw std::logic_error("lift_across: children are not glued along an interior edge");
}

BranchedCoverRecord build_double_cover(const AnnulusDecomposition& dec, std::array<std::array<int, 2>, 2> s)
{
    const bool unit = std::abs(s[0][0] - s[1][0]) + std::abs(s[0][1] - s[1][1]) == 1;
    const bool spans = (on_inner_boundary(s[0][0], s[0][1]) && on_outer_boundary(s[1][0], s[1][1])) ||
                       (on_inner_boundary(s[1][0], s[1][1]) && on_outer_boundary(s[0][0], s[0][1]));
    if (!unit || !spans) throw std::invalid_argument("build_double_cover: σ must be a 1-cell joining both components of ∂Q_a");
    auto lo = std::min(s[0], s[1]);
    auto hi = std::max(s[0], s[1]);
    if (lo != std::array<int, 2>{3, 2} || hi != std::array<int, 2>{4, 2})
        throw std::invalid_argument("build_double_cover: only the angular-origin σ (east edge Y=2) is supported by the chart");

    BranchedCoverRecord cov;
    cov.q = dec.parent;
    cov.xi = dec.xi;
    cov.zeta = dec.zeta;
    cov.base_annulus = dec.annulus;
    cov.sigma = {lo, hi};
    const int step = dec.parent.depth();
    for (const auto& c : dec.annulus)
        for (int bit = 0; bit < 2; ++bit) {
            CellAddress sc = c;
            sc.covers.push_back({step, dec.xi, dec.zeta, bit});
            cov.sheets.push_back(sc);
        }
    for (std::size_t i = 0; i < kRing.size(); ++i) {
        const auto a = kRing[i];
        const auto b = kRing[(i + 1) % kRing.size()];
        const bool sig = (a == std::array<int, 2>{3, 1} && b == std::array<int, 2>{3, 2});
        for (int bit = 0; bit < 2; ++bit) {
            const int nb = sig ? 1 - bit : bit;
            cov.glue.push_back({a, bit, b, nb});
            cov.glue.push_back({b, nb, a, bit});
        }
    }
    // collapsed fibers: vertices of the child grid on ∂Q_a whose two lifts share a key
    const int m = step + 1;
    std::map<std::string, std::set<int>> seen;
    std::map<std::string, LatticeKey> keys;
    for (const auto& sc : cov.sheets) {
        const int bit = sc.covers.back().bit;
        for (int cx = 0; cx < 2; ++cx)
            for (int cy = 0; cy < 2; ++cy) {
                std::vector<i64> x(static_cast<std::size_t>(sc.k));
                for (int a = 0; a < sc.k; ++a) x[static_cast<std::size_t>(a)] = sc.corner_at(a, m);
                x[static_cast<std::size_t>(dec.xi)] += cx;
                x[static_cast<std::size_t>(dec.zeta)] += cy;
                auto key = lattice_key(sc, x, m, 1);
                const auto ks = key.str();
                seen[ks].insert(bit);
                keys.emplace(ks, key);
            }
    }
    for (auto& [ks, bits] : seen)
        if (bits.size() == 2) cov.boundary_fibers.push_back(keys.at(ks));
    return cov;
}

std::pair<std::size_t, std::size_t> enumerate_cover_vertices(const BranchedCoverRecord& cov, int extra)
{
    const int step = cov.q.depth();
    const int m = step + 1 + extra;
    std::set<std::string> all, bnd;
    for (const auto& sc : cov.sheets) {
        std::vector<CellAddress> cells = extra > 0 ? subdivide(sc, extra) : std::vector<CellAddress>{sc};
        for (const auto& c : cells) {
            for (int corner = 0; corner < (1 << c.k); ++corner) {
                std::vector<i64> x(static_cast<std::size_t>(c.k));
                for (int a = 0; a < c.k; ++a) x[static_cast<std::size_t>(a)] = c.corner_at(a, m) + ((corner >> a) & 1);
                auto key = lattice_key(c, x, m, 1);
                const auto ks = key.str();
                all.insert(ks);
                const i64 U = pow5(m - step - 1);
                const i64 X = x[static_cast<std::size_t>(cov.xi)] - cov.q.corner_at(cov.xi, step) * pow5(m - step);
                const i64 Y = x[static_cast<std::size_t>(cov.zeta)] - cov.q.corner_at(cov.zeta, step) * pow5(m - step);
                const bool outerb = (X == U || X == 4 * U || Y == U || Y == 4 * U);
                const bool innerb = (X >= 2 * U && X <= 3 * U && Y >= 2 * U && Y <= 3 * U);
                if (outerb || innerb) bnd.insert(ks);
            }
        }
    }
    return {bnd.size(), all.size()};
}

std::array<int, 2> child_of(double X, double Y)
{
    auto cl = [](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, 4); };
    return {cl(X), cl(Y)};
}

CoverPoint lift_segment(const BranchedCoverRecord& cov, const CoverPoint& p, double X, double Y)
{
    std::vector<double> ts;
    const double dX = X - p.X, dY = Y - p.Y;
    for (int line = 1; line <= 4; ++line) {
        if (dX != 0.0) {
            const double t = (line - p.X) / dX;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
        if (dY != 0.0) {
            const double t = (line - p.Y) / dY;
            if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());
    ts.push_back(1.0);
    CoverPoint cur = p;
    double t0 = 0.0;
    for (double t1 : ts) {
        const double tm = 0.5 * (t0 + t1);
        const auto ch = child_of(p.X + tm * dX, p.Y + tm * dY);
        if (ch != cur.child) {
            cur.bit = cov.lift_across(cur.child, cur.bit, ch);
            cur.child = ch;
        }
        t0 = t1;
    }
    cur.X = X;
    cur.Y = Y;
    return cur;
}

namespace {
bool in_hat(double X, double Y)
{
    const double rho = std::max(std::abs(X - 2.5), std::abs(Y - 2.5));
    return rho >= 0.7 && rho <= 1.3;
}
} // namespace

std::optional<bool> shsep_pair(const BranchedCoverRecord& cov, const CoverPoint& p, double X, double Y, double* dtheta)
{
    if (!in_hat(p.X, p.Y) || !in_hat(X, Y)) return std::nullopt;
    const double d = std::hypot(X - p.X, Y - p.Y);
    // 5^{-i-3} in child units of a generation-i cell
    if (d > 1.0 / 25.0) return std::nullopt;
    const CoverPoint q = lift_segment(cov, p, X, Y);
    const auto bp = polar_chart<double>(p.X, p.Y, p.child[0], p.child[1], 0);
    const auto bq = polar_chart<double>(q.X, q.Y, q.child[0], q.child[1], 0);
    const double gap = std::abs(bp.u - bq.u);
    if (dtheta) *dtheta = gap * M_PI;
    if (gap < 1.0) return std::nullopt;
    const auto lp = polar_chart<double>(p.X, p.Y, p.child[0], p.child[1], p.bit);
    const auto lq = polar_chart<double>(q.X, q.Y, q.child[0], q.child[1], q.bit);
    const bool chip = lp.u > 2.0;
    const bool chiq = lq.u > 2.0;
    return chip != chiq;
}

ShSepCertificate check_shsep(const BranchedCoverRecord& cov, std::size_t samples, std::uint64_t seed)
{
    ShSepCertificate cert;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(3.2, 3.8), uy(-0.04, 0.04), ang(0.0, 2.0 * M_PI), rad(0.0, 1.0);
    std::uniform_real_distribution<double> anyx(1.0, 4.0);
    std::bernoulli_distribution coin(0.5);
    const std::size_t cap = samples * 200 + 1000;
    while (cert.hypothesis_pairs < samples && cert.drawn < cap) {
        ++cert.drawn;
        CoverPoint p;
        if (cert.drawn % 4 == 0) {
            // unbiased draw anywhere in the annulus: mostly vacuous pairs
            p.X = anyx(rng);
            p.Y = anyx(rng);
        } else {
            p.X = ux(rng);
            p.Y = 2.0 + uy(rng);
        }
        if (child_role(child_of(p.X, p.Y)[0], child_of(p.X, p.Y)[1]) != Role::annulus) continue;
        p.child = child_of(p.X, p.Y);
        p.bit = coin(rng) ? 1 : 0;
        const double rr = std::sqrt(rad(rng)) / 25.0, a = ang(rng);
        double dth = 0.0;
        auto res = shsep_pair(cov, p, p.X + rr * std::cos(a), p.Y + rr * std::sin(a), &dth);
        if (!res) continue;
        ++cert.hypothesis_pairs;
        if (!*res) {
            CoverPoint q = lift_segment(cov, p, p.X + rr * std::cos(a), p.Y + rr * std::sin(a));
            cert.violations.push_back({p, q, rr, dth});
        }
    }
    return cert;
}

CoverPoint deck(const CoverPoint& p)
{
    CoverPoint q = p;
    q.bit = 1 - p.bit;
    return q;
}

// ---- lifted covers ------------------------------------------------------------

CellAddress project_address(const CellAddress& c, int xi, int zeta)
{
    CellAddress s;
    s.root_id = c.root_id;
    s.k = 2;
    for (int st = 0; st < c.depth(); ++st) {
        s.digits.push_back(static_cast<std::uint8_t>(c.digit(st, xi)));
        s.digits.push_back(static_cast<std::uint8_t>(c.digit(st, zeta)));
    }
    for (const auto& m : c.covers)
        if (m.xi == xi && m.zeta == zeta) s.covers.push_back({m.step, 0, 1, m.bit});
    return s;
}

LiftedCoverRecord lift_cover(const CellAddress& K, int xi, int zeta)
{
    if (xi < 0 || zeta <= xi || zeta >= K.k) throw std::invalid_argument("lift_cover: plane indices out of range");
    LiftedCoverRecord rec;
    rec.base_cell = K;
    rec.xi = xi;
    rec.zeta = zeta;
    rec.shadow = project_address(K, xi, zeta);
    auto dec = classify_children(K, xi, zeta);
    rec.central = dec.central;
    rec.outer = dec.outer;
    const int step = K.depth();
    for (const auto& c : dec.annulus)
        for (int bit = 0; bit < 2; ++bit) {
            CellAddress sc = c;
            sc.covers.push_back({step, xi, zeta, bit});
            rec.lifted.push_back(sc);
        }
    rec.shadow_cover = build_double_cover(classify_children(rec.shadow, 0, 1));
    return rec;
}

LiftCheck check_lift_commutes(const LiftedCoverRecord& rec)
{
    LiftCheck out;
    const int m = rec.base_cell.depth() + 1;
    std::set<std::string> shadow_vertices;
    for (const auto& sc : rec.shadow_cover.sheets)
        for (int corner = 0; corner < 4; ++corner) {
            std::vector<i64> x{sc.corner_at(0, m) + (corner & 1), sc.corner_at(1, m) + ((corner >> 1) & 1)};
            shadow_vertices.insert(lattice_key(sc, x, m, 1).str());
        }
    std::map<std::string, std::string> image;
    for (const auto& c : rec.lifted) {
        const CellAddress sh = project_address(c, rec.xi, rec.zeta);
        for (int corner = 0; corner < (1 << c.k); ++corner) {
            std::vector<i64> x(static_cast<std::size_t>(c.k));
            for (int a = 0; a < c.k; ++a) x[static_cast<std::size_t>(a)] = c.corner_at(a, m) + ((corner >> a) & 1);
            const auto kk = lattice_key(c, x, m, 1);
            std::vector<i64> y{x[static_cast<std::size_t>(rec.xi)], x[static_cast<std::size_t>(rec.zeta)]};
            const auto k2 = lattice_key(sh, y, m, 1);
            ++out.vertices;
            bool ok = shadow_vertices.count(k2.str()) == 1;
            // π̃_Q(p̃j v) = pj(π̃ v): the base coordinates of the lifted image are the projected ones
            ok = ok && k2.x == y && kk.labels == k2.labels;
            auto [it, fresh] = image.emplace(kk.str(), k2.str());
            ok = ok && (fresh || it->second == k2.str());
            if (!ok) ++out.failures;
        }
    }
    return out;
}

} // namespace pur
