#include "pur/prober.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <tuple>

namespace pur {

namespace {
using std::size_t;

mpq_class pow5q(i64 e) // 5^{-e}
{
    mpz_class p;
    mpz_ui_pow_ui(p.get_mpz_t(), 5, static_cast<unsigned long>(e < 0 ? -e : e));
    return e >= 0 ? mpq_class(1, p) : mpq_class(p);
}

double pow5d(int e) { return std::pow(5.0, -e); }

double dist(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// stage cells by (depth, corner) for base point lookups; full squares only
struct Locator {
    const StageEmbedding* S;
    std::map<std::tuple<int, i64, i64>, std::vector<int>> at;
    std::vector<int> depths;

    explicit Locator(const StageEmbedding& s) : S(&s)
    {
        for (size_t c = 0; c < s.complex.cells.size(); ++c) {
            const auto& cell = s.complex.cells[c];
            if (cell.shape.half || cell.addr.k != 2)
                throw std::invalid_argument("prober: stage cells must be full squares (k = 2)");
            const int d = cell.addr.depth();
            at[{d, cell.addr.corner(0), cell.addr.corner(1)}].push_back(static_cast<int>(c));
            if (std::find(depths.begin(), depths.end(), d) == depths.end()) depths.push_back(d);
        }
    }
    std::vector<int> candidates(const std::vector<double>& x) const
    {
        std::vector<int> out;
        for (int d : depths) {
            const double n = std::pow(5.0, d);
            const i64 top = static_cast<i64>(n) - 1;
            const i64 i = std::clamp(static_cast<i64>(std::floor(x[0] * n)), i64(0), top);
            const i64 j = std::clamp(static_cast<i64>(std::floor(x[1] * n)), i64(0), top);
            auto it = at.find({d, i, j});
            if (it != at.end()) out.insert(out.end(), it->second.begin(), it->second.end());
        }
        return out;
    }
    // candidate whose image is nearest to y
    std::pair<int, double> nearest(const std::vector<double>& x, const std::vector<double>& y) const
    {
        int best = -1;
        double bd = 0;
        for (int c : candidates(x)) {
            const double d = dist(S->eval(c, x), y);
            if (best < 0 || d < bd) {
                best = c;
                bd = d;
            }
        }
        return {best, bd};
    }
};

int bit_at(const CellAddress& a, int step)
{
    const CoverMark* m = a.cover_at(step);
    return m ? m->bit : -1;
}

std::vector<CoverMark> marks_before(const CellAddress& a, int step)
{
    std::vector<CoverMark> out;
    for (const auto& m : a.covers)
        if (m.step < step) out.push_back(m);
    return out;
}

bool is_prefix(const CellAddress& w, const CellAddress& q)
{
    if (w.k != q.k || w.depth() > q.depth()) return false;
    return std::equal(w.digits.begin(), w.digits.end(), q.digits.begin());
}

struct QFrame {
    double x0, y0, side; // global corner and side of Q
    int dq;
    std::vector<double> centre(int d, std::array<i64, 2> ij) const
    {
        const double h = side * pow5d(d);
        return {x0 + (static_cast<double>(ij[0]) + 0.5) * h, y0 + (static_cast<double>(ij[1]) + 0.5) * h};
    }
    // child units of Q
    std::pair<double, double> local(const std::vector<double>& x) const { return {(x[0] - x0) / side * 5.0, (x[1] - y0) / side * 5.0}; }
    std::vector<double> global(double X, double Y) const { return {x0 + X / 5.0 * side, y0 + Y / 5.0 * side}; }
};

QFrame qframe(const CellAddress& q)
{
    const double s = pow5d(q.depth());
    return {static_cast<double>(q.corner(0)) * s, static_cast<double>(q.corner(1)) * s, s, q.depth()};
}

// does the surface domain meet the interior of ring cell ij (depth d below q)?
bool domain_hits(const ProbeSurface& surf, const CellAddress& q, int d, std::array<i64, 2> ij)
{
    const int dw = surf.window.depth();
    const int e = dw + surf.depth - (q.depth() + d);
    if (e < 0) throw std::invalid_argument("probe: surface resolution " + std::to_string(dw + surf.depth) + " coarser than ring depth " + std::to_string(q.depth() + d));
    const i64 span = pow5(e);
    const i64 shift = pow5(q.depth() + d - dw);
    i64 gi = q.corner(0) * pow5(d) + ij[0] - surf.window.corner(0) * shift;
    i64 gj = q.corner(1) * pow5(d) + ij[1] - surf.window.corner(1) * shift;
    gi *= span;
    gj *= span;
    for (i64 a = 0; a < span; ++a)
        for (i64 b = 0; b < span; ++b)
            if (surf.hits(gi + a, gj + b)) return true;
    return false;
}

} // namespace

// ---- constants ------------------------------------------------------------------------------

int compute_in(int n, double c, const mpq_class& delta_n, int N)
{
    if (!(c > 0) || delta_n <= 0) throw std::invalid_argument("compute_in: c > 0 and δ_n > 0 required");
    const int extra = N > 0 ? N + 3 : 0;
    const mpq_class target = pow5q(n + 2 + extra) * mpq_class(c) * delta_n;
    int i = n + 2 + extra;
    while (pow5q(i) > target) ++i;
    while (pow5q(i - 1) <= target) --i;
    return i;
}

double choose_c(double C, double glipF)
{
    if (!(C > 0) || !(glipF > 0)) throw std::invalid_argument("choose_c: C, glip F > 0 required");
    return 1e-6 / (C + glipF);
}

double choose_c_rk(int k, double C, double glipF)
{
    if (!(C > 0) || !(glipF > 0) || k < 2) throw std::invalid_argument("choose_c_rk: k >= 2, C, glip F > 0 required");
    return 1e-6 / (std::sqrt(static_cast<double>(k)) * C + glipF);
}

double c_threshold_rk(int k, double C, double glipF, double glipF0)
{
    return (1.0 / 125.0) / (2.0 * glipF0) / (16.0 * (std::sqrt(static_cast<double>(k)) * C + glipF));
}

// ---- surfaces --------------------------------------------------------------------------------

size_t ProbeSurface::marked() const
{
    size_t m = 0;
    for (auto b : domain) m += b != 0;
    return m;
}

std::vector<i64> rle_encode(const std::vector<std::uint8_t>& bits)
{
    std::vector<i64> runs;
    std::uint8_t cur = 0;
    i64 len = 0;
    for (auto b : bits) {
        const std::uint8_t v = b ? 1 : 0;
        if (v != cur) {
            runs.push_back(len);
            cur = v;
            len = 0;
        }
        ++len;
    }
    runs.push_back(len);
    return runs;
}

std::vector<std::uint8_t> rle_decode(const std::vector<i64>& runs, size_t size)
{
    std::vector<std::uint8_t> bits;
    bits.reserve(size);
    std::uint8_t cur = 0;
    for (i64 r : runs) {
        if (r < 0) throw std::invalid_argument("rle_decode: negative run");
        bits.insert(bits.end(), static_cast<size_t>(r), cur);
        cur ^= 1;
    }
    if (bits.size() != size) throw std::invalid_argument("rle_decode: runs cover " + std::to_string(bits.size()) + " cells, expected " + std::to_string(size));
    return bits;
}

GraphMap flat_graph(int dim)
{
    return [dim](const std::vector<double>& x) {
        std::vector<double> y(static_cast<size_t>(dim), 0.0);
        y[0] = x[0];
        y[1] = x[1];
        return y;
    };
}

GraphMap tilt_graph(int dim, double slope)
{
    if (dim < 3) throw std::invalid_argument("tilt_graph: ambient dimension >= 3 required");
    return [dim, slope](const std::vector<double>& x) {
        std::vector<double> y(static_cast<size_t>(dim), 0.0);
        y[0] = x[0];
        y[1] = x[1];
        y[2] = slope * x[0];
        return y;
    };
}

GraphMap single_sheet_graph(const StageEmbedding& S, int bit)
{
    auto loc = std::make_shared<Locator>(S);
    const StageEmbedding* s = &S;
    return [loc, s, bit](const std::vector<double>& x) {
        const auto cand = loc->candidates(x);
        if (cand.empty()) throw std::domain_error("single_sheet_graph: base point outside X_0");
        for (int c : cand) {
            bool ok = true;
            for (const auto& m : s->complex.cells[static_cast<size_t>(c)].addr.covers)
                if (m.bit >= 0 && m.bit != bit) ok = false;
            if (ok) return s->eval(c, x);
        }
        return s->eval(cand.front(), x);
    };
}

GraphMap table_graph(const CellAddress& window, int depth, int dim, std::vector<std::vector<double>> table)
{
    const i64 n = pow5(depth);
    if (table.size() != static_cast<size_t>((n + 1) * (n + 1))) throw std::invalid_argument("table_graph: expected (5^depth+1)^2 rows");
    for (const auto& row : table)
        if (row.size() != static_cast<size_t>(dim)) throw std::invalid_argument("table_graph: row width != dim");
    const QFrame f = qframe(window);
    return [f, n, dim, table = std::move(table)](const std::vector<double>& x) {
        const double u = std::clamp((x[0] - f.x0) / f.side * static_cast<double>(n), 0.0, static_cast<double>(n));
        const double v = std::clamp((x[1] - f.y0) / f.side * static_cast<double>(n), 0.0, static_cast<double>(n));
        const i64 i = std::min(static_cast<i64>(u), n - 1), j = std::min(static_cast<i64>(v), n - 1);
        const double a = u - static_cast<double>(i), b = v - static_cast<double>(j);
        auto at = [&](i64 p, i64 q) -> const std::vector<double>& { return table[static_cast<size_t>(q * (n + 1) + p)]; };
        std::vector<double> y(static_cast<size_t>(dim));
        for (int d = 0; d < dim; ++d) {
            const auto D = static_cast<size_t>(d);
            y[D] = (1 - a) * (1 - b) * at(i, j)[D] + a * (1 - b) * at(i + 1, j)[D] + (1 - a) * b * at(i, j + 1)[D] + a * b * at(i + 1, j + 1)[D];
        }
        return y;
    };
}

ProbeSurface make_surface(const StageEmbedding& S, std::string name, const CellAddress& window, int depth, GraphMap g,
                          double C, double tol)
{
    ProbeSurface P;
    P.name = std::move(name);
    P.window = window;
    P.depth = depth;
    P.dim = S.dim;
    P.graph = std::move(g);
    P.C = C;
    P.bilip = C;
    const Locator loc(S);
    const QFrame f = qframe(window);
    const i64 n = pow5(depth);
    P.domain.assign(static_cast<size_t>(n * n), 0);
    for (i64 j = 0; j < n; ++j)
        for (i64 i = 0; i < n; ++i) {
            const double h = f.side / static_cast<double>(n);
            const std::vector<double> p{f.x0 + (static_cast<double>(i) + 0.5) * h, f.y0 + (static_cast<double>(j) + 0.5) * h};
            const auto y = P.graph(p);
            P.domain[static_cast<size_t>(j * n + i)] = loc.nearest(p, y).second <= tol ? 1 : 0;
        }
    return P;
}

ProbeSurface empty_surface(const StageEmbedding& S, const CellAddress& window, int depth)
{
    ProbeSurface P;
    P.name = "empty";
    P.window = window;
    P.depth = depth;
    P.dim = S.dim;
    P.graph = flat_graph(S.dim);
    P.domain.assign(static_cast<size_t>(pow5(depth) * pow5(depth)), 0);
    return P;
}

std::vector<ProbeSurface> surface_battery(const StageEmbedding& S, const CellAddress& window, int depth)
{
    std::vector<ProbeSurface> out;
    out.push_back(make_surface(S, "flat", window, depth, flat_graph(S.dim), 1.0));
    for (double s : {0.25, 0.5, 1.0})
        out.push_back(make_surface(S, "tilt " + std::to_string(s).substr(0, 4), window, depth, tilt_graph(S.dim, s), std::sqrt(1 + s * s)));
    out.push_back(make_surface(S, "single sheet", window, depth, single_sheet_graph(S, 0), 1.12));
    out.push_back(empty_surface(S, window, depth));
    return out;
}

// ---- probing ---------------------------------------------------------------------------------

int ring_depth_for(int n, const DeltaSchedule& s, double c)
{
    const int d = compute_in(n, c, s.delta(n)) - (n - 1);
    if (d < 2) throw std::invalid_argument("ring_depth_for: c = " + std::to_string(c) + " puts rings " + std::to_string(d) + " levels below Q (need >= 2)");
    return d;
}

AnnulusProbe probe_annulus(const StageEmbedding& S, const DeltaSchedule& sched, const ProbeSurface& surf,
                           const CellAddress& q, const Annulus& A, int ring_index, const ProbeConfig& cfg)
{
    AnnulusProbe R;
    R.ring = ring_index;
    R.layer = A.layer;
    R.cells = A.cells.size();
    const int d = A.depth;
    for (const auto& ij : A.cells)
        if (!domain_hits(surf, q, d, ij)) {
            if (!R.hole) R.hole = ring_cell_address(q, d, ij);
            ++R.missed;
        }
    if (R.hole) return R;

    // every ring cell is hit: walk the sheets
    R.outcome = ProbeOutcome::contradiction;
    const int n = S.stage;
    const int step = q.depth();
    const double delta = sched.delta_d(n);
    const QFrame f = qframe(q);
    const Locator loc(S);
    const auto cov = build_double_cover(classify_children(q));
    const size_t t = A.cells.size();
    std::vector<std::vector<double>> p(t), y(t);
    std::vector<int> cell(t);
    std::vector<CoverPoint> cp(t);
    R.min_sep = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < t; ++a) {
        p[a] = f.centre(d, A.cells[a]);
        y[a] = surf.graph(p[a]);
        cell[a] = loc.nearest(p[a], y[a]).first;
        const auto [X, Y] = f.local(p[a]);
        cp[a] = CoverPoint{X, Y, child_of(X, Y), bit_at(S.complex.cells[static_cast<size_t>(cell[a])].addr, step)};
        for (int c : loc.candidates(p[a]))
            if (c != cell[a]) R.min_sep = std::min(R.min_sep, dist(S.eval(c, p[a]), S.eval(cell[a], p[a])));
    }
    const double lip_bound = 4.0 * surf.C * cfg.c * pow5d(n) * delta;
    auto make_witness = [&](size_t a, size_t b, bool sigma) {
        SheetWitness w;
        w.alpha = static_cast<int>(a);
        w.across_sigma = sigma;
        w.p = cp[a];
        w.q_claimed = cp[b];
        w.q_lift = lift_segment(cov, cp[a], cp[b].X, cp[b].Y);
        w.base_dist = std::hypot(cp[b].X - cp[a].X, cp[b].Y - cp[a].Y);
        double dth = 0;
        const auto v = shsep_pair(cov, cp[a], cp[b].X, cp[b].Y, &dth);
        w.dtheta = dth;
        w.shsep_separates = v.value_or(false);
        w.ambient_dist = dist(y[a], y[b]);
        w.lip_bound = lip_bound;
        w.sep_lower = pow5d(n + 3) * delta / 2.0;
        // the other sheet over the base point of q
        for (int c : loc.candidates(p[b]))
            if (c != cell[b]) w.separation = std::max(w.separation, dist(S.eval(c, p[b]), S.eval(cell[b], p[b])));
        return w;
    };
    for (size_t a = 0; a < t; ++a) {
        const size_t b = (a + 1) % t;
        const double step_d = dist(y[a], y[b]);
        const double base_d = dist(p[a], p[b]);
        const bool sigma = b == 0;
        const bool lower_jump = marks_before(S.complex.cells[static_cast<size_t>(cell[a])].addr, step) !=
                                marks_before(S.complex.cells[static_cast<size_t>(cell[b])].addr, step);
        const CoverPoint lift = lift_segment(cov, cp[a], cp[b].X, cp[b].Y);
        const bool same_sheet = lift.child == cp[b].child && lift.bit == cp[b].bit;
        if ((lower_jump || !same_sheet) && !R.witness) {
            R.witness = make_witness(a, b, sigma);
            continue;
        }
        if (step_d > surf.C * base_d * (1 + 1e-9)) ++R.lip_violations;
        R.max_step = std::max(R.max_step, step_d);
    }
    if (!R.witness) {
        // unreachable for a graph over the ring: the cover has nontrivial monodromy
        throw std::logic_error("probe_annulus: closed walk stayed on one sheet");
    }
    return R;
}

bool verify_witness(const CellAddress& q, const SheetWitness& w)
{
    const auto cov = build_double_cover(classify_children(q));
    const CoverPoint lift = lift_segment(cov, w.p, w.q_claimed.X, w.q_claimed.Y);
    const bool differs = lift.child != w.q_claimed.child || lift.bit != w.q_claimed.bit;
    if (!differs) return false;
    if (!w.across_sigma) return true;
    const auto v = shsep_pair(cov, w.p, w.q_claimed.X, w.q_claimed.Y);
    return v.has_value() && *v && lift.bit == w.q_lift.bit && lift.child == w.q_lift.child;
}

ProbeCertificate probe_cell(const StageEmbedding& S, const DeltaSchedule& sched, const ProbeSurface& surf,
                            const CellAddress& q, const ProbeConfig& cfg)
{
    const int n = S.stage;
    if (n < 1) throw std::invalid_argument("probe_cell: stage >= 1 required");
    if (q.depth() != n - 1) throw std::invalid_argument("probe_cell: Q must be a generation n-1 square");
    if (!is_prefix(surf.window, q)) throw std::invalid_argument("probe_cell: surface window does not contain Q");
    ProbeCertificate P;
    P.surface = surf.name;
    P.n = n;
    P.q = q;
    P.c = cfg.c;
    P.G = cfg.G;
    P.delta_n = sched.delta_d(n);
    P.i_n = compute_in(n, cfg.c, sched.delta(n));
    P.ring_depth = P.i_n - (n - 1);
    if (P.ring_depth < 2) throw std::invalid_argument("probe_cell: ring depth below 2");
    P.c_small = choose_c(surf.C, cfg.glipF);
    P.chain_upper = 8.0 * (surf.C + cfg.glipF) * P.c_small;
    P.chain_lower = pow5d(3) / 2.0;
    const auto rings = partition_annuli(P.ring_depth);
    int idx = 0;
    for (const auto& A : rings) P.annuli.push_back(probe_annulus(S, sched, surf, q, A, idx++, cfg));
    const double cell_area = pow5d(2 * (q.depth() + P.ring_depth));
    P.parent_measure = pow5d(2 * q.depth());
    for (const auto& a : P.annuli)
        if (a.hole) P.hole_measure += cell_area;
    P.gamma = P.hole_measure / (P.delta_n * P.parent_measure);
    P.product = 1.0 - P.gamma * P.delta_n;
    return P;
}

size_t ProbeCertificate::holes() const
{
    size_t h = 0;
    for (const auto& a : annuli) h += a.outcome == ProbeOutcome::hole_found;
    return h;
}
size_t ProbeCertificate::contradictions() const { return annuli.size() - holes(); }
size_t ProbeCertificate::lip_violations() const
{
    size_t v = 0;
    for (const auto& a : annuli) v += a.lip_violations;
    return v;
}

// ---- cumulative bookkeeping --------------------------------------------------------------------

namespace {

// ⌊G log_10 m⌋, exact when G is an integer
i64 glog_floor(double G, i64 m)
{
    if (G == std::floor(G) && G > 0 && G < 64) {
        mpz_class mg;
        mpz_ui_pow_ui(mg.get_mpz_t(), static_cast<unsigned long>(m), static_cast<unsigned long>(G));
        i64 s = 0;
        mpz_class ten = 10;
        while (ten <= mg) {
            ten *= 10;
            ++s;
        }
        return s;
    }
    return static_cast<i64>(std::floor(G * std::log10(static_cast<long double>(m))));
}

// floor(2^P / m) / 2^P
constexpr unsigned long kBits = 160;
mpz_class scaled_floor(i64 m)
{
    mpz_class one = 1;
    mpz_class num = one << kBits;
    return num / mpz_class(static_cast<long>(m));
}
mpq_class from_scaled(const mpz_class& s)
{
    mpz_class den = mpz_class(1) << kBits;
    mpq_class q(s, den);
    q.canonicalize();
    return q;
}

} // namespace

std::vector<i64> k_sequence(const DeltaSchedule& s, double G, i64 limit)
{
    if (!(G > 0)) throw std::invalid_argument("k_sequence: G > 0 required");
    std::vector<i64> k;
    i64 cur = 1;
    while (cur < limit) {
        k.push_back(cur);
        cur += std::max<i64>(1, glog_floor(G, s.offset + cur));
    }
    return k;
}

CumulativeBound cumulative_bound(double gamma, double G, const DeltaSchedule& s, int stages)
{
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("cumulative_bound: γ ∈ (0,1) required");
    if (!(G > 0)) throw std::invalid_argument("cumulative_bound: G > 0 required");
    CumulativeBound B;
    i64 cur = 1;
    double prod = 1.0, sum = 0.0;
    for (int j = 0; j < stages; ++j) {
        B.k.push_back(cur);
        const double d = s.delta_d(cur);
        prod *= 1.0 - gamma * d;
        sum += d;
        B.products.push_back(prod);
        B.delta_sums.push_back(sum);
        cur += std::max<i64>(1, glog_floor(G, s.offset + cur));
    }
    B.value = prod;
    return B;
}

CumulativeBound cumulative_bound(const std::vector<ProbeCertificate>& holes, double gamma, double G, const DeltaSchedule& s)
{
    return cumulative_bound(gamma, G, s, static_cast<int>(holes.size()));
}

bool DivergenceCertificate::pass() const
{
    if (blocks.empty()) return false;
    for (const auto& b : blocks)
        if (!b.harmonic_ok || !b.sparse_ok || !b.gap_ok) return false;
    return total_lo >= target;
}

DivergenceCertificate divergence_check(const DeltaSchedule& s, int blocks, double G)
{
    if (blocks < 2) throw std::invalid_argument("divergence_check: blocks >= 2 (t runs from 2)");
    DivergenceCertificate D;
    D.G = G;
    i64 top = 1;
    for (int t = 0; t <= blocks; ++t) top *= 10;
    const auto ks = k_sequence(s, G, top);
    for (int t = 2; t <= blocks; ++t) {
        DecadeBlock B;
        B.t = t;
        i64 lo = 1;
        for (int e = 0; e < t; ++e) lo *= 10;
        const i64 hi = lo * 10;
        mpz_class h = 0;
        for (i64 j = lo; j <= hi; ++j) h += scaled_floor(j);
        B.harmonic_lo = from_scaled(h);
        mpz_class sp = 0;
        std::vector<i64> in;
        for (i64 k : ks)
            if (k >= lo && k < hi) in.push_back(k);
        for (i64 k : in) sp += scaled_floor(s.offset + k);
        B.sparse_lo = from_scaled(sp);
        B.terms = in.size();
        for (size_t i = 1; i < in.size(); ++i) B.max_gap = std::max(B.max_gap, in[i] - in[i - 1]);
        if (t <= 3) {
            mpq_class he = 0, se = 0;
            if (t == 2)
                for (i64 j = lo; j <= hi; ++j) he += mpq_class(1, j);
            for (i64 k : in) se += s.delta(k);
            if (t == 2) B.harmonic_exact = he;
            B.sparse_exact = se;
        }
        B.harmonic_ok = B.harmonic_lo >= mpq_class(1, 16);
        B.sparse_ok = B.sparse_lo >= mpq_class(1, 42 * (t + 1));
        B.gap_ok = B.max_gap <= 23 * (t + 1);
        B.sparse_above_16th = B.sparse_lo >= mpq_class(1, 16);
        D.total_lo += B.sparse_lo;
        D.target += mpq_class(1, 42 * (t + 1));
        D.blocks.push_back(std::move(B));
    }
    return D;
}

} // namespace pur
