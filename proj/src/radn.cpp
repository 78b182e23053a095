#include "pur/radn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

namespace pur {

namespace {
using std::size_t;

std::vector<double> first_k(const std::vector<hp>& p, int k)
{
    std::vector<double> out(static_cast<size_t>(k));
    for (int a = 0; a < k; ++a) out[static_cast<size_t>(a)] = to_d(p[static_cast<size_t>(a)]);
    return out;
}

std::vector<double> to_dv(const std::vector<hp>& v)
{
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) out.push_back(to_d(x));
    return out;
}
} // namespace

// Quadtree/octree over boxes in R^k; leaves split above 32 items.
class PieceIndex {
public:
    PieceIndex(int k, const std::vector<std::vector<double>>& lo, const std::vector<std::vector<double>>& hi)
        : k_(k), lo_(lo), hi_(hi)
    {
        Node root;
        root.lo.assign(static_cast<size_t>(k), 1e300);
        root.hi.assign(static_cast<size_t>(k), -1e300);
        for (size_t i = 0; i < lo.size(); ++i) {
            root.items.push_back(static_cast<int>(i));
            for (int a = 0; a < k; ++a) {
                root.lo[static_cast<size_t>(a)] = std::min(root.lo[static_cast<size_t>(a)], lo[i][static_cast<size_t>(a)]);
                root.hi[static_cast<size_t>(a)] = std::max(root.hi[static_cast<size_t>(a)], hi[i][static_cast<size_t>(a)]);
            }
        }
        nodes_.push_back(std::move(root));
        split(0, 0);
    }

    void query(const std::vector<double>& p, std::vector<int>& out) const
    {
        out.clear();
        int n = 0;
        for (int a = 0; a < k_; ++a)
            if (p[static_cast<size_t>(a)] < nodes_[0].lo[static_cast<size_t>(a)] || p[static_cast<size_t>(a)] > nodes_[0].hi[static_cast<size_t>(a)]) return;
        while (nodes_[static_cast<size_t>(n)].first_child >= 0) {
            const auto& N = nodes_[static_cast<size_t>(n)];
            int c = 0;
            for (int a = 0; a < k_; ++a)
                if (p[static_cast<size_t>(a)] >= N.mid[static_cast<size_t>(a)]) c |= 1 << a;
            n = N.first_child + c;
        }
        for (int i : nodes_[static_cast<size_t>(n)].items) {
            bool in = true;
            for (int a = 0; a < k_ && in; ++a)
                in = p[static_cast<size_t>(a)] >= lo_[static_cast<size_t>(i)][static_cast<size_t>(a)] &&
                     p[static_cast<size_t>(a)] <= hi_[static_cast<size_t>(i)][static_cast<size_t>(a)];
            if (in) out.push_back(i);
        }
    }

private:
    struct Node {
        std::vector<double> lo, hi, mid;
        std::vector<int> items;
        int first_child = -1;
    };

    void split(int n, int depth)
    {
        if (nodes_[static_cast<size_t>(n)].items.size() <= 32 || depth >= 60) return;
        Node N = nodes_[static_cast<size_t>(n)];
        N.mid.resize(static_cast<size_t>(k_));
        for (int a = 0; a < k_; ++a) N.mid[static_cast<size_t>(a)] = 0.5 * (N.lo[static_cast<size_t>(a)] + N.hi[static_cast<size_t>(a)]);
        const int nc = 1 << k_;
        std::vector<Node> kids(static_cast<size_t>(nc));
        for (int c = 0; c < nc; ++c) {
            auto& K = kids[static_cast<size_t>(c)];
            for (int a = 0; a < k_; ++a) {
                const bool up = (c >> a) & 1;
                K.lo.push_back(up ? N.mid[static_cast<size_t>(a)] : N.lo[static_cast<size_t>(a)]);
                K.hi.push_back(up ? N.hi[static_cast<size_t>(a)] : N.mid[static_cast<size_t>(a)]);
            }
        }
        size_t biggest = 0;
        for (int i : N.items)
            for (int c = 0; c < nc; ++c) {
                auto& K = kids[static_cast<size_t>(c)];
                bool hit = true;
                for (int a = 0; a < k_ && hit; ++a)
                    hit = lo_[static_cast<size_t>(i)][static_cast<size_t>(a)] <= K.hi[static_cast<size_t>(a)] &&
                          hi_[static_cast<size_t>(i)][static_cast<size_t>(a)] >= K.lo[static_cast<size_t>(a)];
                if (hit) K.items.push_back(i);
            }
        for (auto& K : kids) biggest = std::max(biggest, K.items.size());
        if (biggest == N.items.size()) return; // every item straddles the centre; splitting does not help
        const int first = static_cast<int>(nodes_.size());
        nodes_[static_cast<size_t>(n)].mid = N.mid;
        nodes_[static_cast<size_t>(n)].first_child = first;
        nodes_[static_cast<size_t>(n)].items.clear();
        for (auto& K : kids) nodes_.push_back(std::move(K));
        for (int c = 0; c < nc; ++c) split(first + c, depth + 1);
    }

    int k_;
    std::vector<std::vector<double>> lo_, hi_;
    std::vector<Node> nodes_;
};

// ---- geometry ----------------------------------------------------------------------------

std::shared_ptr<RadNGeometry> build_radn_geometry(const StageEmbedding& S)
{
    if (S.pieces.size() != S.complex.cells.size()) throw std::invalid_argument("build_radn_geometry: stage has no affine charts");
    auto G = std::make_shared<RadNGeometry>();
    G->stage = &S;
    const int k = S.k, dim = S.dim;
    G->pieces.resize(S.pieces.size());
    std::map<std::string, std::vector<int>> groups;
    for (size_t i = 0; i < S.pieces.size(); ++i) {
        const auto& P = S.pieces[i];
        const auto& cell = S.complex.cells[i];
        auto& g = G->pieces[i];
        g.poly = cell_polytope(cell);
        g.frame = plane_frame(P);
        const Frame fr = cell_frame(cell.addr);
        for (const auto& c : fr.corner) g.corner.push_back(to_hp(c));
        g.side = to_hp(fr.side);
        g.side_d = to_d(g.side);
        // R^{-1} by back substitution on unit vectors
        std::vector<std::vector<hp>> Rinv(static_cast<size_t>(k), std::vector<hp>(static_cast<size_t>(k), hp(0)));
        for (int col = 0; col < k; ++col) {
            for (int r = k - 1; r >= 0; --r) {
                hp s = r == col ? hp(1) : hp(0);
                for (int t = r + 1; t < k; ++t) s -= g.frame.R[static_cast<size_t>(r)][static_cast<size_t>(t)] * Rinv[static_cast<size_t>(t)][static_cast<size_t>(col)];
                Rinv[static_cast<size_t>(r)][static_cast<size_t>(col)] = s / g.frame.R[static_cast<size_t>(r)][static_cast<size_t>(r)];
            }
        }
        g.pinv.assign(static_cast<size_t>(k * dim), hp(0));
        for (int r = 0; r < k; ++r)
            for (int d = 0; d < dim; ++d) {
                hp s = 0;
                for (int t = 0; t < k; ++t) s += Rinv[static_cast<size_t>(r)][static_cast<size_t>(t)] * g.frame.q[static_cast<size_t>(t)][static_cast<size_t>(d)];
                g.pinv[static_cast<size_t>(r * dim + d)] = s;
            }
        g.pinv_d = to_dv(g.pinv);
        // facet scale 1/|R^{-T} n|
        for (const auto& n : g.poly.n) {
            hp s2 = 0;
            for (int a = 0; a < k; ++a) {
                hp v = 0;
                for (int t = 0; t < k; ++t) v += Rinv[static_cast<size_t>(t)][static_cast<size_t>(a)] * n[static_cast<size_t>(t)];
                s2 += v * v;
            }
            g.facet_scale.push_back(1 / sqrt(s2));
        }
        g.diam = 0;
        g.lo.assign(static_cast<size_t>(k), 1e300);
        g.hi.assign(static_cast<size_t>(k), -1e300);
        for (const auto& v : g.poly.vertices) {
            g.image_vertices.push_back(P.eval(v));
            const auto& w = g.image_vertices.back();
            for (int a = 0; a < k; ++a) {
                g.lo[static_cast<size_t>(a)] = std::min(g.lo[static_cast<size_t>(a)], to_d(w[static_cast<size_t>(a)]));
                g.hi[static_cast<size_t>(a)] = std::max(g.hi[static_cast<size_t>(a)], to_d(w[static_cast<size_t>(a)]));
            }
        }
        for (size_t a = 0; a < g.image_vertices.size(); ++a)
            for (size_t b = a + 1; b < g.image_vertices.size(); ++b) g.diam = std::max(g.diam, dist(g.image_vertices[a], g.image_vertices[b]));
        g.diam_d = to_d(g.diam);
        std::string key = cell.shape.str() + "|";
        for (auto d : cell.addr.digits) key += static_cast<char>('0' + d);
        groups[key].push_back(static_cast<int>(i));
    }
    G->partners.assign(S.pieces.size(), {});
    for (auto& [key, v] : groups)
        for (int a : v)
            for (int b : v)
                if (a != b) G->partners[static_cast<size_t>(a)].push_back(b);
    return G;
}

// ---- RN(j) ---------------------------------------------------------------------------------

hp RadialNeighborhood::tolerance() { return hp("1e-40"); }

RadialNeighborhood::RadialNeighborhood(std::shared_ptr<RadNGeometry> g, hp sigma, int stage_j)
    : g_(std::move(g)), sigma_(std::move(sigma)), j_(stage_j)
{
    if (!(sigma_ > 0)) throw std::invalid_argument("RadialNeighborhood: sigma must be positive");
    const int k = g_->stage->k;
    std::vector<std::vector<double>> lo, hi;
    const double sd = to_d(sigma_);
    for (const auto& p : g_->pieces) {
        // the in-plane distance to F(∂Q) never exceeds diam/2
        const double up = 46.0 * p.diam_d * std::exp(-sd / std::max(0.5 * p.diam_d, 1e-300));
        phi_upper_.push_back(up);
        const double pad = up * (1 + 1e-9) + 1e-15 * (1.0 + p.diam_d);
        std::vector<double> l(p.lo), h(p.hi);
        for (int a = 0; a < k; ++a) {
            l[static_cast<size_t>(a)] -= pad;
            h[static_cast<size_t>(a)] += pad;
        }
        lo.push_back(std::move(l));
        hi.push_back(std::move(h));
    }
    index_ = std::make_shared<PieceIndex>(k, lo, hi);
}

RadialNeighborhood build_radn(const StageEmbedding& S, const hp& sigma)
{
    return RadialNeighborhood(build_radn_geometry(S), sigma, S.stage);
}

hp RadialNeighborhood::boundary_distance(int piece, const std::vector<hp>& x) const
{
    const auto& g = g_->pieces[static_cast<size_t>(piece)];
    hp best = -1;
    for (size_t f = 0; f < g.poly.n.size(); ++f) {
        hp s = 0;
        for (int a = 0; a < g.poly.k; ++a) s += g.poly.n[f][static_cast<size_t>(a)] * x[static_cast<size_t>(a)];
        const hp d = (g.poly.b[f] - s) * g.facet_scale[f];
        if (f == 0 || d < best) best = d;
    }
    return best;
}

hp RadialNeighborhood::phi(int piece, const std::vector<hp>& x) const
{
    const hp d = boundary_distance(piece, x);
    if (d <= 0) return hp(0);
    return 46 * g_->pieces[static_cast<size_t>(piece)].diam * exp(-sigma_ / d);
}

void RadialNeighborhood::chart(int piece, const std::vector<hp>& p, std::vector<hp>& x, std::vector<hp>& y) const
{
    const auto& P = g_->stage->pieces[static_cast<size_t>(piece)];
    const auto& g = g_->pieces[static_cast<size_t>(piece)];
    const int k = P.k, dim = P.dim;
    std::vector<hp> r(static_cast<size_t>(dim));
    for (int d = 0; d < dim; ++d) r[static_cast<size_t>(d)] = p[static_cast<size_t>(d)] - P.c[static_cast<size_t>(d)];
    x.assign(static_cast<size_t>(k), hp(0));
    for (int a = 0; a < k; ++a)
        for (int d = 0; d < dim; ++d) x[static_cast<size_t>(a)] += g.pinv[static_cast<size_t>(a * dim + d)] * r[static_cast<size_t>(d)];
    y = r;
    for (int d = 0; d < dim; ++d)
        for (int a = 0; a < k; ++a) y[static_cast<size_t>(d)] -= P.Jat(d, a) * x[static_cast<size_t>(a)];
}

std::vector<int> RadialNeighborhood::candidates(const std::vector<double>& p) const
{
    std::vector<int> out;
    index_->query(p, out);
    return out;
}

std::vector<Membership> RadialNeighborhood::members(const std::vector<hp>& p) const
{
    const auto& S = *g_->stage;
    const int k = S.k, dim = S.dim;
    std::vector<Membership> out;
    const auto pd = to_dv(p);
    for (int i : candidates(first_k(p, k))) {
        const auto& P = S.pieces[static_cast<size_t>(i)];
        const auto& g = g_->pieces[static_cast<size_t>(i)];
        // double prefilter
        std::vector<double> xd(static_cast<size_t>(k), 0.0);
        for (int a = 0; a < k; ++a)
            for (int d = 0; d < dim; ++d) xd[static_cast<size_t>(a)] += g.pinv_d[static_cast<size_t>(a * dim + d)] * (pd[static_cast<size_t>(d)] - P.cd[static_cast<size_t>(d)]);
        const double tol = 1e-6 * g.side_d + 1e-14;
        bool inside = true;
        for (size_t f = 0; f < g.poly.n.size() && inside; ++f) {
            double s = 0;
            for (int a = 0; a < k; ++a) s += to_d(g.poly.n[f][static_cast<size_t>(a)]) * xd[static_cast<size_t>(a)];
            inside = s <= to_d(g.poly.b[f]) + tol;
        }
        if (!inside) continue;
        double yd = 0;
        for (int d = 0; d < dim; ++d) {
            double v = pd[static_cast<size_t>(d)] - P.cd[static_cast<size_t>(d)];
            for (int a = 0; a < k; ++a) v -= P.Jd[static_cast<size_t>(d * k + a)] * xd[static_cast<size_t>(a)];
            yd += v * v;
        }
        if (std::sqrt(yd) > phi_upper_[static_cast<size_t>(i)] + 1e-13) continue;
        // exact-ish test
        std::vector<hp> x, y;
        chart(i, p, x, y);
        if (!g.poly.contains(x, tolerance())) continue;
        const hp yn = norm(y);
        if (yn > phi(i, x) + tolerance()) continue;
        Membership m;
        m.piece = i;
        m.foot = P.eval(x);
        m.x = std::move(x);
        m.y_norm = yn;
        out.push_back(std::move(m));
    }
    for (auto& m : out) m.members = static_cast<int>(out.size());
    return out;
}

std::optional<Membership> RadialNeighborhood::member(const std::vector<hp>& p) const
{
    auto all = members(p);
    if (all.empty()) return std::nullopt;
    return std::move(all.front());
}

std::optional<std::vector<hp>> RadialNeighborhood::project(const std::vector<hp>& p) const
{
    auto m = member(p);
    if (!m) return std::nullopt;
    return std::move(m->foot);
}

std::vector<int> RadialNeighborhood::locate_base(const std::vector<hp>& x, const std::vector<double>& image_hint) const
{
    std::vector<int> out;
    for (int i : candidates(image_hint))
        if (g_->pieces[static_cast<size_t>(i)].poly.contains(x, tolerance())) out.push_back(i);
    return out;
}

// ---- sampling ------------------------------------------------------------------------------

std::vector<hp> sample_base_point(const CellRecord& cell, std::mt19937_64& g)
{
    const int k = cell.addr.k;
    const Frame fr = cell_frame(cell.addr);
    std::vector<double> u(static_cast<size_t>(k));
    for (auto& v : u) v = u01(g);
    if (cell.shape.half && !cell.shape.contains(u, 0.0)) {
        const auto a = static_cast<size_t>(cell.shape.a), b = static_cast<size_t>(cell.shape.b);
        if (!cell.shape.anti)
            std::swap(u[a], u[b]);
        else {
            const double ua = u[a];
            u[a] = 1.0 - u[b];
            u[b] = 1.0 - ua;
        }
    }
    const hp side = to_hp(fr.side);
    std::vector<hp> x(static_cast<size_t>(k));
    for (int a = 0; a < k; ++a) x[static_cast<size_t>(a)] = to_hp(fr.corner[static_cast<size_t>(a)]) + side * hp(u[static_cast<size_t>(a)]);
    return x;
}

namespace {

std::vector<hp> random_base_point(const RadNGeometry& G, int piece, std::mt19937_64& g)
{
    return sample_base_point(G.stage->complex.cells[static_cast<size_t>(piece)], g);
}

std::vector<hp> random_normal(const RadNGeometry& G, int piece, std::mt19937_64& g)
{
    const auto& comp = G.pieces[static_cast<size_t>(piece)].frame.complement;
    const int dim = G.stage->dim;
    std::vector<hp> y(static_cast<size_t>(dim), hp(0));
    if (comp.empty()) return y;
    std::normal_distribution<double> N(0.0, 1.0);
    for (const auto& c : comp) {
        const hp w = N(g);
        for (int d = 0; d < dim; ++d) y[static_cast<size_t>(d)] += w * c[static_cast<size_t>(d)];
    }
    const hp n = norm(y);
    if (n == 0) return y;
    for (auto& v : y) v /= n;
    return y;
}

// component of v orthogonal to the plane of `piece`, normalised (zero if none)
std::vector<hp> normal_part(const RadNGeometry& G, int piece, const std::vector<hp>& v)
{
    const auto& comp = G.pieces[static_cast<size_t>(piece)].frame.complement;
    const int dim = G.stage->dim;
    std::vector<hp> y(static_cast<size_t>(dim), hp(0));
    for (const auto& c : comp) {
        hp s = 0;
        for (int d = 0; d < dim; ++d) s += c[static_cast<size_t>(d)] * v[static_cast<size_t>(d)];
        for (int d = 0; d < dim; ++d) y[static_cast<size_t>(d)] += s * c[static_cast<size_t>(d)];
    }
    const hp n = norm(y);
    if (n == 0) return y;
    for (auto& x : y) x /= n;
    return y;
}

std::vector<hp> lift(const RadialNeighborhood& rn, int piece, const std::vector<hp>& x, const std::vector<hp>& dir, const hp& frac)
{
    auto p = rn.geometry().stage->pieces[static_cast<size_t>(piece)].eval(x);
    const hp r = frac * rn.phi(piece, x);
    for (size_t d = 0; d < p.size(); ++d) p[d] += r * dir[d];
    return p;
}

} // namespace

std::vector<hp> sample_member(const RadialNeighborhood& rn, int piece, std::mt19937_64& g, double y_fraction)
{
    const auto x = random_base_point(rn.geometry(), piece, g);
    return lift(rn, piece, x, random_normal(rn.geometry(), piece, g), hp(y_fraction));
}

ClaimCertificate certify_claim_j(const RadialNeighborhood& rn, const DeltaSchedule& sched, double eps, std::size_t samples,
                                 std::uint64_t seed, bool stop_on_failure)
{
    if (!(eps > 0)) throw std::invalid_argument("certify_claim_j: eps must be positive");
    const auto pre = claim_j_s1(sched);
    if (!pre.holds)
        throw PreconditionRefused("schedule " + sched.name() + " violates 4e3 (1+S)^{1/2} S < 1/8: lower bound of the left side is " +
                                  std::to_string(pre.lhs_lo));
    const auto& G = rn.geometry();
    const int np = static_cast<int>(G.pieces.size());
    const int k = G.stage->k;
    ClaimCertificate C;
    C.j = rn.stage();
    C.sigma = to_d(rn.sigma());
    C.eps = eps;
    C.precondition_lhs = pre.lhs_hi;
    C.drift_bound = 100.0 * inv5d(rn.stage());
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> pick(0, np - 1);
    const hp shrink("0.999");
    std::vector<int> stacked_pieces;
    for (int i = 0; i < np; ++i)
        if (!G.partners[static_cast<size_t>(i)].empty()) stacked_pieces.push_back(i);

    auto project = [&](const std::vector<hp>& p, std::vector<hp>& out) -> bool {
        auto all = rn.members(p);
        if (all.empty()) return false;
        if (all.size() > 1) {
            ++C.ambiguous;
            for (size_t t = 1; t < all.size(); ++t)
                if (dist(all[t].foot, all[0].foot) > hp("1e-30")) {
                    C.failures.push_back({"ambiguous", to_dv(p), to_dv(p), 0.0,
                                          "tubes of pieces " + std::to_string(all[0].piece) + " and " + std::to_string(all[t].piece) +
                                              " overlap with different feet"});
                    break;
                }
        }
        C.drift_max = std::max(C.drift_max, to_d(dist(all[0].foot, p)));
        out = std::move(all[0].foot);
        return true;
    };

    // draw until `samples` pairs are certified; strata that cannot occur (no
    // neighbouring piece at stage 0) count as skipped attempts
    const std::size_t attempts = 4 * samples + 1000;
    for (std::size_t s = 0; C.pairs < samples && s < attempts; ++s) {
        const int stratum = static_cast<int>(s % 4);
        std::vector<hp> p, q;
        std::string name;
        if (stratum == 0) {
            name = "same";
            const int a = pick(g);
            p = sample_member(rn, a, g, u01(g) * 0.999);
            q = sample_member(rn, a, g, u01(g) * 0.999);
        } else if (stratum == 1) {
            name = "adjacent";
            const int a = pick(g);
            const auto& pa = G.pieces[static_cast<size_t>(a)];
            const auto f = static_cast<size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(pa.poly.n.size()) - 1)(g));
            auto x = random_base_point(G, a, g);
            hp nn = 0, sl = pa.poly.b[f];
            for (int t = 0; t < k; ++t) {
                nn += pa.poly.n[f][static_cast<size_t>(t)] * pa.poly.n[f][static_cast<size_t>(t)];
                sl -= pa.poly.n[f][static_cast<size_t>(t)] * x[static_cast<size_t>(t)];
            }
            const hp nl = sqrt(nn);
            std::vector<hp> nh(static_cast<size_t>(k));
            for (int t = 0; t < k; ++t) {
                nh[static_cast<size_t>(t)] = pa.poly.n[f][static_cast<size_t>(t)] / nl;
                x[static_cast<size_t>(t)] += sl / nl * nh[static_cast<size_t>(t)];
            }
            if (!pa.poly.contains(x, hp("1e-40"))) {
                ++C.skipped;
                continue;
            }
            const hp tA = pa.side * pow(hp(10), hp(-2 - 10 * u01(g)));
            const hp tB = pa.side * pow(hp(10), hp(-2 - 10 * u01(g)));
            std::vector<hp> xa(x), xb(x);
            for (int t = 0; t < k; ++t) {
                xa[static_cast<size_t>(t)] -= tA * nh[static_cast<size_t>(t)];
                xb[static_cast<size_t>(t)] += tB * nh[static_cast<size_t>(t)];
            }
            const auto& Pa = G.stage->pieces[static_cast<size_t>(a)];
            const auto hint = Pa.eval(xb);
            int b = -1;
            hp best = 0;
            for (int c : rn.locate_base(xb, first_k(hint, k))) {
                if (c == a) continue;
                const hp d = dist(G.stage->pieces[static_cast<size_t>(c)].eval(xb), hint);
                if (b < 0 || d < best) {
                    b = c;
                    best = d;
                }
            }
            if (b < 0) {
                ++C.skipped;
                continue;
            }
            p = lift(rn, a, xa, random_normal(G, a, g), hp(u01(g) * 0.999));
            q = lift(rn, b, xb, random_normal(G, b, g), hp(u01(g) * 0.999));
        } else if (stratum == 2 && !stacked_pieces.empty()) {
            name = "stacked";
            const int a = stacked_pieces[static_cast<size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(stacked_pieces.size()) - 1)(g))];
            const auto& parts = G.partners[static_cast<size_t>(a)];
            const int b = parts[static_cast<size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(parts.size()) - 1)(g))];
            const auto x = random_base_point(G, a, g);
            const auto Fa = G.stage->pieces[static_cast<size_t>(a)].eval(x);
            const auto Fb = G.stage->pieces[static_cast<size_t>(b)].eval(x);
            std::vector<hp> ab(Fa.size()), ba(Fa.size());
            for (size_t d = 0; d < Fa.size(); ++d) {
                ab[d] = Fb[d] - Fa[d];
                ba[d] = -ab[d];
            }
            // both points pushed toward the other sheet at nearly full tube radius
            p = lift(rn, a, x, normal_part(G, a, ab), shrink);
            q = lift(rn, b, x, normal_part(G, b, ba), shrink);
        } else {
            name = "distant";
            const int a = pick(g), b = pick(g);
            p = sample_member(rn, a, g, u01(g) * 0.999);
            q = sample_member(rn, b, g, u01(g) * 0.999);
        }
        std::vector<hp> Pp, Pq;
        if (!project(p, Pp) || !project(q, Pq)) {
            ++C.skipped;
            continue;
        }
        const hp den = dist(p, q);
        if (den == 0) {
            ++C.skipped;
            continue;
        }
        const double ratio = to_d(dist(Pp, Pq) / den);
        ++C.pairs;
        if (name == "same") ++C.same;
        else if (name == "adjacent") ++C.adjacent;
        else if (name == "stacked") ++C.stacked;
        else ++C.distant;
        if (ratio > C.max_ratio) C.max_ratio = ratio;
        if (ratio > 1.0 + eps && C.failures.size() < 16)
            C.failures.push_back({name, to_dv(p), to_dv(q), ratio, "ratio exceeds 1+eps"});
        if (stop_on_failure && !C.pass()) break;
    }
    return C;
}

SigmaSearch find_sigma(const StageEmbedding& S, const DeltaSchedule& sched, double eps, int e_min, int e_max,
                       std::size_t samples, std::uint64_t seed)
{
    if (!(eps > 0)) throw std::invalid_argument("find_sigma: eps must be positive (eps = 0 is unattainable)");
    const auto G = build_radn_geometry(S);
    SigmaSearch out;
    for (int e = e_min; e <= e_max; ++e) {
        const hp sigma = pow(hp(2), e);
        RadialNeighborhood rn(G, sigma, S.stage);
        auto C = certify_claim_j(rn, sched, eps, samples, seed, true);
        out.tried.emplace_back(e, C.max_ratio);
        if (C.pass()) {
            out.exponent = e;
            out.sigma = sigma;
            out.certificate = std::move(C);
            return out;
        }
    }
    throw std::runtime_error("find_sigma: no sigma = 2^e with e in [" + std::to_string(e_min) + "," + std::to_string(e_max) +
                             "] passes at stage " + std::to_string(S.stage));
}

// ---- adapted subdivision ---------------------------------------------------------------------

AdaptedCell adapted_predicate(const RadialNeighborhood& rn, int par, const CellAddress& q, const mpq_class& delta)
{
    const auto& S = *rn.geometry().stage;
    const auto& parc = S.complex.cells[static_cast<size_t>(par)];
    const auto& pg = rn.geometry().pieces[static_cast<size_t>(par)];
    AdaptedCell A;
    A.addr = q;
    A.par_piece = par;
    A.rel_depth = q.depth() - parc.addr.depth();
    // size clause: max_x dist(x,∂Q) <= δ max_x dist(x,∂PAR), base metric
    const mpq_class s = inv5(q.depth()) / 2;
    const mpq_class Spar = inv5(parc.addr.depth()) / 2; // half the frame side
    if (!parc.shape.half) {
        A.size_ok = s <= delta * Spar;
    } else {
        // inradius of the half is side/(2+√2) = Spar·(2-√2)
        const mpq_class r = s / (delta * Spar);
        const mpq_class t = 2 - r;
        A.size_ok = t >= 0 && t * t >= 2;
    }
    // tube clause
    const Frame fr = cell_frame(q);
    const int k = q.k;
    const auto& P = S.pieces[static_cast<size_t>(par)];
    hp DQ = -1;
    std::vector<std::vector<hp>> img;
    for (int mask = 0; mask < (1 << k); ++mask) {
        std::vector<hp> v(static_cast<size_t>(k));
        for (int a = 0; a < k; ++a) v[static_cast<size_t>(a)] = to_hp(fr.corner[static_cast<size_t>(a)] + fr.side * ((mask >> a) & 1));
        const hp d = rn.boundary_distance(par, v);
        if (mask == 0 || d < DQ) DQ = d;
        img.push_back(P.eval(v));
    }
    hp diamQ = 0;
    for (size_t a = 0; a < img.size(); ++a)
        for (size_t b = a + 1; b < img.size(); ++b) diamQ = std::max(diamQ, dist(img[a], img[b]));
    const hp rho = 23 * to_hp(delta) * diamQ;
    A.D_Q = to_d(DQ);
    A.rho = to_d(rho);
    A.D_par = to_d(pg.diam);
    if (DQ - rho > 0) {
        const hp lhs = 46 * pg.diam * exp(-rn.sigma() / (DQ - rho));
        A.tube_lhs = to_d(lhs);
        A.tube_ok = lhs >= rho;
    }
    return A;
}

namespace {
bool digits_prefix(const CellAddress& a, const CellAddress& b)
{
    if (a.k != b.k || a.digits.size() > b.digits.size()) return false;
    return std::equal(a.digits.begin(), a.digits.end(), b.digits.begin());
}

bool touches_boundary(const CellAddress& c, const CellAddress& par)
{
    const int m = c.depth();
    const i64 w = pow5(m - par.depth());
    for (int a = 0; a < c.k; ++a) {
        const i64 lo = c.corner(a) - par.corner_at(a, m);
        if (lo == 0 || lo + 1 == w) return true;
    }
    return false;
}
} // namespace

AdaptedSubdivision adapt_subdivide(const RadialNeighborhood& rn, const mpq_class& delta, const CellAddress& window, int depth_ceiling)
{
    const auto& S = *rn.geometry().stage;
    int par = -1;
    for (size_t i = 0; i < S.complex.cells.size(); ++i) {
        const auto& c = S.complex.cells[i];
        if (!c.shape.half && digits_prefix(c.addr, window)) {
            par = static_cast<int>(i);
            break;
        }
    }
    if (par < 0) throw std::invalid_argument("adapt_subdivide: window " + window.str() + " is not inside a whole-cell piece");
    const auto& P = S.complex.cells[static_cast<size_t>(par)];
    AdaptedSubdivision out;
    out.stage = S.stage;
    out.window = window;
    out.window.covers = P.addr.covers;
    // siblings of the path from PAR down to the window keep F_j
    for (int d = P.addr.depth(); d < window.depth(); ++d) {
        CellAddress up = window.prefix(d);
        up.covers = P.addr.covers;
        if (d > P.addr.depth()) out.rejected.push_back(adapted_predicate(rn, par, up, delta));
        const auto on_path = window.prefix(d + 1);
        for (const auto& ch : subdivide(up, 1)) {
            if (ch.digits == on_path.digits) continue;
            CellRecord r = P;
            r.addr = ch;
            r.addr.covers = P.addr.covers;
            r.parent = par;
            r.skeleton = touches_boundary(ch, P.addr);
            out.coarse.push_back(std::move(r));
        }
    }
    std::queue<CellAddress> Qu;
    Qu.push(out.window);
    while (!Qu.empty()) {
        CellAddress q = std::move(Qu.front());
        Qu.pop();
        auto A = adapted_predicate(rn, par, q, delta);
        if (A.size_ok && A.tube_ok) {
            const auto d = static_cast<size_t>(q.depth());
            if (out.depth_histogram.size() <= d) out.depth_histogram.resize(d + 1, 0);
            ++out.depth_histogram[d];
            out.cells.push_back(std::move(A));
            continue;
        }
        if (q.depth() + 1 > depth_ceiling)
            throw AdaptError("adapt_subdivide: cell " + q.str() + " is not adapted (size " + (A.size_ok ? "ok" : "fails") + ", tube " +
                             (A.tube_ok ? "ok" : "fails") + ") and the depth ceiling " + std::to_string(depth_ceiling) + " is reached");
        out.rejected.push_back(A);
        for (auto& ch : subdivide(q, 1)) {
            ch.covers = out.window.covers;
            Qu.push(std::move(ch));
        }
    }
    return out;
}

} // namespace pur
