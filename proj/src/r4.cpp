#include "pur/r4.hpp"
#include "pur/rk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace pur {

namespace {
using std::size_t;

bool touches_boundary(const CellAddress& c, const CellAddress& q)
{
    const int m = c.depth();
    const i64 w = pow5(m - q.depth());
    for (int a = 0; a < c.k; ++a) {
        const i64 lo = c.corner(a) - q.corner_at(a, m);
        if (lo == 0 || lo + 1 == w) return true;
    }
    return false;
}

std::vector<hp> to_hpv(const std::vector<mpq_class>& v)
{
    std::vector<hp> out;
    for (const auto& q : v) out.push_back(to_hp(q));
    return out;
}

void finalize(AffineStage& st)
{
    auto& E = st.embedding;
    E.m = 0;
    for (const auto& c : E.complex.cells) E.m = std::max(E.m, c.addr.depth());
    E.complex.resolution = E.m;
    E.complex.generation = st.j;
    for (auto& p : E.pieces) p.refresh_double();
    const auto* pieces = &E.pieces;
    E.eval = [pieces](int cell, const std::vector<double>& x) { return (*pieces)[static_cast<size_t>(cell)].eval_d(x); };
    E.jacobian = [pieces](int cell, const std::vector<double>&) { return (*pieces)[static_cast<size_t>(cell)].Jd; };
    collect_vertices(E, [&](int ci, const std::vector<mpq_class>& x) {
        const auto v = E.pieces[static_cast<size_t>(ci)].eval(to_hpv(x));
        std::vector<double> d;
        for (const auto& t : v) d.push_back(to_d(t));
        return d;
    });
}

std::array<std::vector<hp>, 2> complement_pair(const AffinePiece& par)
{
    const auto F = plane_frame(par);
    if (F.complement.size() < 2) throw std::runtime_error("complement of τ₀(PAR) has dimension < 2");
    return {F.complement[0], F.complement[1]};
}

std::string plane_key(const PlaneFrame& F, int dim)
{
    // entries of the orthogonal projector, rounded at 1e-30
    std::string key;
    const hp scale("1e30");
    for (int r = 0; r < dim; ++r)
        for (int c = r; c < dim; ++c) {
            hp s = 0;
            for (const auto& q : F.q) s += q[static_cast<size_t>(r)] * q[static_cast<size_t>(c)];
            key += round(s * scale).str(0, std::ios_base::fixed);
            key += ',';
        }
    return key;
}

} // namespace

double AffineTower::eps(int j) const { return std::ldexp(1.0, -j); }

std::unique_ptr<AffineStage> build_stage0(const TowerConfig& c)
{
    if (c.k < 2) throw std::invalid_argument("affine tower: k >= 2 required");
    auto st = std::make_unique<AffineStage>();
    st->j = 0;
    auto& E = st->embedding;
    E.tower = c.k == 2 ? "r4" : "rk";
    E.stage = 0;
    E.k = c.k;
    E.dim = c.k + 2;
    E.complex.k = c.k;
    CellRecord root;
    root.addr = root_address(c.k);
    E.complex.cells.push_back(root);
    AffinePiece P;
    P.dim = E.dim;
    P.k = c.k;
    P.c.assign(static_cast<size_t>(E.dim), hp(0));
    P.J.assign(static_cast<size_t>(E.dim * c.k), hp(0));
    for (int a = 0; a < c.k; ++a) P.Jat(a, a) = 1;
    E.pieces.push_back(P);
    E.parent_piece.push_back(-1);
    st->application_of.push_back(-1);
    finalize(*st);
    return st;
}

void apply_template(const AffineApproximation& A, const StageEmbedding& prev, int par, const CellRecord& q,
                    std::array<int, 2> plane, const std::array<std::vector<hp>, 2>& E, AffineStage& out)
{
    const int k = q.addr.k;
    const int xi = plane[0], zeta = plane[1];
    std::vector<int> others;
    for (int a = 0; a < k; ++a)
        if (a != xi && a != zeta) others.push_back(a);
    const auto& PAR = prev.pieces[static_cast<size_t>(par)];
    const Frame fq = cell_frame(q.addr);
    const int step = q.addr.depth();
    auto& S = out.embedding;
    TemplateApplication app;
    app.q = q.addr;
    app.par = par;
    app.plane = plane;
    app.E = E;
    app.first_cell = S.complex.cells.size();
    const int app_id = static_cast<int>(out.applications.size());
    for (const auto& T : A.pieces) {
        const int levels = T.level;
        const int N = levels - 1;
        std::vector<std::array<int, 2>> pd;
        pd.push_back({T.child[0], T.child[1]});
        for (int l = 1; l <= N; ++l) {
            const i64 div = pow5(N - l);
            pd.push_back({static_cast<int>((T.sub[0] / div) % 5), static_cast<int>((T.sub[1] / div) % 5)});
        }
        // exact affine data of Φ on this piece
        const mpq_class sT = T.side();
        const auto cT = T.corner();
        std::array<std::array<mpq_class, 2>, 2> B; // B[row][0 -> xi, 1 -> zeta]
        std::array<mpq_class, 2> a;
        for (int r = 0; r < 2; ++r) {
            B[static_cast<size_t>(r)][0] = T.M[static_cast<size_t>(r)][0] / sT;
            B[static_cast<size_t>(r)][1] = T.M[static_cast<size_t>(r)][1] / sT;
            a[static_cast<size_t>(r)] = fq.side * T.c[static_cast<size_t>(r)] -
                                        B[static_cast<size_t>(r)][0] * (fq.corner[static_cast<size_t>(xi)] + fq.side * cT[0]) -
                                        B[static_cast<size_t>(r)][1] * (fq.corner[static_cast<size_t>(zeta)] + fq.side * cT[1]);
        }
        AffinePiece P = PAR;
        for (int r = 0; r < 2; ++r) {
            const hp ar = to_hp(a[static_cast<size_t>(r)]);
            const hp bx = to_hp(B[static_cast<size_t>(r)][0]), bz = to_hp(B[static_cast<size_t>(r)][1]);
            const auto& e = E[static_cast<size_t>(r)];
            for (int d = 0; d < P.dim; ++d) {
                P.c[static_cast<size_t>(d)] += e[static_cast<size_t>(d)] * ar;
                P.Jat(d, xi) += e[static_cast<size_t>(d)] * bx;
                P.Jat(d, zeta) += e[static_cast<size_t>(d)] * bz;
            }
        }
        Shape sh = T.shape;
        sh.a = xi;
        sh.b = zeta;
        const i64 extr = others.empty() ? 1 : pow5(levels * static_cast<int>(others.size()));
        for (i64 idx = 0; idx < extr; ++idx) {
            CellRecord rec;
            rec.addr = q.addr;
            i64 r = idx;
            for (int l = 0; l < levels; ++l) {
                std::vector<int> t(static_cast<size_t>(k), 0);
                t[static_cast<size_t>(xi)] = pd[static_cast<size_t>(l)][0];
                t[static_cast<size_t>(zeta)] = pd[static_cast<size_t>(l)][1];
                for (int o : others) {
                    t[static_cast<size_t>(o)] = static_cast<int>(r % 5);
                    r /= 5;
                }
                rec.addr = rec.addr.child(t);
            }
            rec.addr.covers.push_back({step, xi, zeta, T.bit});
            rec.shape = sh;
            rec.weight_exp = q.weight_exp + (T.bit >= 0 ? 1 : 0);
            rec.role = child_role(T.child[0], T.child[1]);
            rec.skeleton = touches_boundary(rec.addr, q.addr);
            rec.parent = par;
            S.complex.cells.push_back(std::move(rec));
            S.pieces.push_back(P);
            S.parent_piece.push_back(par);
            out.application_of.push_back(app_id);
        }
    }
    app.cells = S.complex.cells.size() - app.first_cell;
    out.applications.push_back(std::move(app));
}

AffineTower build_affine_tower(const TowerConfig& c)
{
    if (c.max_stage < 0) throw std::invalid_argument("affine tower: max_stage >= 0 required");
    AffineTower T;
    T.config = c;
    T.stages.push_back(build_stage0(c));
    const int k = c.k;
    for (int j = 0; j < c.max_stage; ++j) {
        const auto& S = T.stage(j);
        // RN(j): search σ on a small budget, then certify at full size
        T.geometry.push_back(build_radn_geometry(S));
        const auto& G = T.geometry.back();
        bool done = false;
        SigmaSearch search;
        for (int e = c.sigma_e_min; e <= c.sigma_e_max && !done; ++e) {
            const hp sigma = pow(hp(2), e);
            RadialNeighborhood rn(G, sigma, j);
            auto quick = certify_claim_j(rn, c.schedule, T.eps(j), c.search_samples, c.seed + 7 * static_cast<std::uint64_t>(j), true);
            search.tried.emplace_back(e, quick.max_ratio);
            if (!quick.pass()) continue;
            auto full = certify_claim_j(rn, c.schedule, T.eps(j), c.claim_samples, c.seed + 1000 + static_cast<std::uint64_t>(j), false);
            if (!full.pass()) {
                search.tried.emplace_back(e, full.max_ratio);
                continue;
            }
            search.exponent = e;
            search.sigma = sigma;
            search.certificate = quick;
            T.claims.push_back(std::move(full));
            T.radn.push_back(std::move(rn));
            done = true;
        }
        if (!done) throw std::runtime_error("affine tower: no σ in [2^" + std::to_string(c.sigma_e_min) + ", 2^" +
                                            std::to_string(c.sigma_e_max) + "] certifies (Claim " + std::to_string(j) + ")");
        T.sigma.push_back(std::move(search));
        T.approx.push_back(find_affine_approx(c.schedule.delta(j + 1), c.N_cap));
        const auto& A = T.approx.back();

        auto st = std::make_unique<AffineStage>();
        st->j = j + 1;
        const auto pl = plane_for_stage(j, k);
        st->plane = {pl.first - 1, pl.second - 1};
        auto& E = st->embedding;
        E.tower = S.tower;
        E.stage = j + 1;
        E.k = k;
        E.dim = S.dim;
        E.complex.k = k;
        if (j == 0) {
            apply_template(A, S, 0, S.complex.cells[0], st->plane, complement_pair(S.pieces[0]), *st);
        } else {
            // the whole piece of X_j over the centre
            int par = -1;
            for (size_t i = 0; i < S.complex.cells.size(); ++i) {
                const auto& cell = S.complex.cells[i];
                if (cell.shape.half) continue;
                if (std::all_of(cell.addr.digits.begin(), cell.addr.digits.end(), [](std::uint8_t d) { return d == 2; })) {
                    par = static_cast<int>(i);
                    break;
                }
            }
            if (par < 0) throw std::runtime_error("affine tower: no whole piece over the centre at stage " + std::to_string(j));
            const auto& parc = S.complex.cells[static_cast<size_t>(par)];
            const int rel = c.window_rel_depth >= 0 ? c.window_rel_depth : (k == 2 ? 12 : 13);
            CellAddress window = root_address(k);
            for (int d = 0; d < parc.addr.depth() + rel; ++d) window = window.child(std::vector<int>(static_cast<size_t>(k), 2));
            if (window.depth() >= c.depth_ceiling)
                throw ResourceLimit("affine tower: window depth " + std::to_string(window.depth()) + " reaches the ceiling", 0);
            st->adapted = adapt_subdivide(T.radn.back(), c.schedule.delta(j), window, c.depth_ceiling);
            const auto& ad = *st->adapted;
            std::size_t total = S.complex.cells.size() - 1 + ad.coarse.size() + ad.cells.size() * A.pieces.size() * static_cast<std::size_t>(std::pow(5.0, (1 + A.N) * (k - 2)));
            if (total > c.cell_ceiling) throw ResourceLimit("affine tower: stage " + std::to_string(j + 1) + " needs " + std::to_string(total) + " cells", total);
            for (size_t i = 0; i < S.complex.cells.size(); ++i) {
                if (static_cast<int>(i) == par) continue;
                auto rec = S.complex.cells[i];
                rec.parent = static_cast<int>(i);
                E.complex.cells.push_back(std::move(rec));
                E.pieces.push_back(S.pieces[i]);
                E.parent_piece.push_back(static_cast<int>(i));
                st->application_of.push_back(-1);
            }
            for (const auto& rec : ad.coarse) {
                E.complex.cells.push_back(rec);
                E.pieces.push_back(S.pieces[static_cast<size_t>(par)]);
                E.parent_piece.push_back(par);
                st->application_of.push_back(-1);
            }
            const auto Ecomp = complement_pair(S.pieces[static_cast<size_t>(par)]);
            for (const auto& cell : ad.cells) {
                CellRecord q = parc;
                q.addr = cell.addr;
                q.shape = Shape{};
                apply_template(A, S, par, q, st->plane, Ecomp, *st);
            }
        }
        finalize(*st);
        T.stages.push_back(std::move(st));
    }
    return T;
}

AffineTower build_tower_r4(TowerConfig c)
{
    c.k = 2;
    return build_affine_tower(c);
}

// ---- reports ----------------------------------------------------------------------------------

std::optional<std::vector<hp>> project_down(const AffineTower& T, int j, int i, std::vector<hp> p)
{
    for (int t = j - 1; t >= i; --t) {
        auto q = T.radn.at(static_cast<size_t>(t)).project(p);
        if (!q) return std::nullopt;
        p = std::move(*q);
    }
    return p;
}

std::vector<hp> eval_ancestor(const AffineTower& T, int j, int cell, int i, const std::vector<hp>& x)
{
    int c = cell;
    for (int t = j; t > i; --t) c = T.stage(t).parent_piece.at(static_cast<size_t>(c));
    return T.stage(i).pieces.at(static_cast<size_t>(c)).eval(x);
}

std::vector<VertexSite> vertex_sites(const StageEmbedding& S)
{
    std::vector<VertexSite> out(S.vertices.size());
    const mpq_class unit = inv5(S.m);
    for (size_t ci = 0; ci < S.complex.cells.size(); ++ci) {
        const auto bits = cell_corner_bits(S.complex.cells[ci]);
        for (size_t t = 0; t < bits.size(); ++t) {
            auto& site = out[static_cast<size_t>(S.cell_vertices[ci][t])];
            if (site.cell >= 0) continue;
            site.cell = static_cast<int>(ci);
            for (auto v : corner_numerators(S.complex.cells[ci].addr, bits[t], S.m)) site.x.push_back(mpq_class(v) * unit);
        }
    }
    return out;
}

DiagramReport check_diagram_affine(const AffineTower& T, int i, int j)
{
    DiagramReport R;
    R.i = i;
    R.j = j;
    const auto& S = T.stage(j);
    const hp tol("1e-30");
    for (const auto& site : vertex_sites(S)) {
        const auto x = to_hpv(site.x);
        const auto p = S.pieces[static_cast<size_t>(site.cell)].eval(x);
        const auto q = project_down(T, j, i, p);
        ++R.vertices;
        if (!q) {
            ++R.mismatches;
            R.max_err = std::max(R.max_err, 1.0);
            continue;
        }
        const hp err = dist(*q, eval_ancestor(T, j, site.cell, i, x));
        R.max_err = std::max(R.max_err, to_d(err));
        if (err > tol) ++R.mismatches;
    }
    return R;
}

SupMoveReport sup_move_affine(const AffineTower& T, int j, std::size_t samples, std::uint64_t seed)
{
    SupMoveReport R;
    R.i = j;
    const auto& S = T.stage(j + 1);
    R.scale = inv5d(j) * T.config.schedule.delta_d(j + 1);
    hp sup = 0;
    for (const auto& site : vertex_sites(S)) {
        const auto x = to_hpv(site.x);
        sup = std::max(sup, dist(S.pieces[static_cast<size_t>(site.cell)].eval(x), eval_ancestor(T, j + 1, site.cell, j, x)));
    }
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<size_t> pick(0, S.complex.cells.size() - 1);
    for (std::size_t s = 0; s < samples; ++s) {
        const auto c = pick(g);
        const auto x = sample_base_point(S.complex.cells[c], g);
        sup = std::max(sup, dist(S.pieces[c].eval(x), eval_ancestor(T, j + 1, static_cast<int>(c), j, x)));
    }
    R.sup = to_d(sup);
    R.measured_C = R.sup / R.scale;
    return R;
}

LipschitzInterval lipschitz_interval(const AffineTower& T, int j)
{
    LipschitzInterval L;
    L.j = j;
    const double ref = std::sqrt(1.0 + T.config.schedule.sum_delta_sq_d(j));
    L.lo = ref / 16.0;
    L.hi = 23.0 * ref;
    L.min_piece = 1e300;
    for (const auto& P : T.stage(j).pieces) {
        const double s = sigma_max(P);
        L.min_piece = std::min(L.min_piece, s);
        L.max_piece = std::max(L.max_piece, s);
        if (s < L.lo || s > L.hi) ++L.violations;
        ++L.pieces;
    }
    return L;
}

DirectionSets direction_sets(const AffineTower& T, int j)
{
    DirectionSets D;
    D.j = j;
    const auto& st = *T.stages.at(static_cast<size_t>(j));
    const auto& S = st.embedding;
    std::set<std::string> th0, th;
    std::vector<std::string> keys(S.pieces.size());
    for (size_t i = 0; i < S.pieces.size(); ++i) {
        const auto F = plane_frame(S.pieces[i]);
        keys[i] = plane_key(F, S.dim);
        th0.insert(keys[i]);
        // affine plane: τ₀ plus the foot of the perpendicular from the origin
        std::vector<hp> c = S.pieces[i].c;
        for (const auto& q : F.q) {
            hp s = 0;
            for (int d = 0; d < S.dim; ++d) s += q[static_cast<size_t>(d)] * S.pieces[i].c[static_cast<size_t>(d)];
            for (int d = 0; d < S.dim; ++d) c[static_cast<size_t>(d)] -= s * q[static_cast<size_t>(d)];
        }
        std::string k2 = keys[i] + "|";
        for (const auto& v : c) k2 += round(v * hp("1e30")).str(0, std::ios_base::fixed) + ",";
        th.insert(k2);
    }
    D.th0 = th0.size();
    D.th = th.size();
    std::optional<std::set<std::string>> first;
    for (const auto& app : st.applications) {
        ++D.placements;
        std::set<std::string> mine;
        for (size_t c = app.first_cell; c < app.first_cell + app.cells; ++c) mine.insert(keys[c]);
        if (!first) first = mine;
        else if (*first != mine) D.same_across_cells = false;
        const auto& par = T.stage(j - 1).pieces[static_cast<size_t>(app.par)];
        hp err = 0;
        auto dot = [&](const std::vector<hp>& a, const std::vector<hp>& b) {
            hp s = 0;
            for (size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
            return s;
        };
        err = std::max(err, abs(dot(app.E[0], app.E[0]) - 1));
        err = std::max(err, abs(dot(app.E[1], app.E[1]) - 1));
        err = std::max(err, abs(dot(app.E[0], app.E[1])));
        for (int a = 0; a < par.k; ++a) {
            std::vector<hp> col(static_cast<size_t>(par.dim));
            for (int d = 0; d < par.dim; ++d) col[static_cast<size_t>(d)] = par.Jat(d, a);
            err = std::max(err, abs(dot(app.E[0], col)));
            err = std::max(err, abs(dot(app.E[1], col)));
        }
        D.frame_error = std::max(D.frame_error, to_d(err));
    }
    return D;
}

CompositeReport composite_lipschitz(const AffineTower& T, int j, std::size_t samples, std::uint64_t seed)
{
    CompositeReport R;
    R.j = j;
    R.bound = 1.0;
    for (int t = 0; t <= j; ++t) R.bound *= 1.0 + T.eps(t);
    const auto& rn = T.radn.at(static_cast<size_t>(j));
    const auto& G = rn.geometry();
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(G.pieces.size()) - 1);
    for (std::size_t s = 0; s < samples; ++s) {
        const int a = pick(g);
        int b = a;
        const auto& parts = G.partners[static_cast<size_t>(a)];
        if (s % 2 == 1 && !parts.empty()) b = parts[static_cast<size_t>(g() % parts.size())];
        else if (s % 4 == 2) b = pick(g);
        const auto p = sample_member(rn, a, g, u01(g) * 0.999);
        const auto q = sample_member(rn, b, g, u01(g) * 0.999);
        const auto Pp = project_down(T, j + 1, 0, p);
        const auto Pq = project_down(T, j + 1, 0, q);
        const hp den = dist(p, q);
        if (!Pp || !Pq || den == 0) continue;
        ++R.pairs;
        R.max_ratio = std::max(R.max_ratio, to_d(dist(*Pp, *Pq) / den));
    }
    return R;
}

FiberSeparation fiber_separation(const AffineTower& T, int j, std::size_t samples, std::uint64_t seed)
{
    FiberSeparation F;
    F.j = j;
    const auto& S = T.stage(j);
    std::map<std::string, std::vector<int>> groups;
    for (size_t i = 0; i < S.complex.cells.size(); ++i) {
        const auto& c = S.complex.cells[i];
        std::string key = c.shape.str() + "|";
        for (auto d : c.addr.digits) key += static_cast<char>('0' + d);
        groups[key].push_back(static_cast<int>(i));
    }
    std::vector<std::pair<int, int>> pairs;
    for (auto& [key, v] : groups)
        if (v.size() >= 2) pairs.emplace_back(v[0], v[1]);
    if (pairs.empty()) return F;
    std::mt19937_64 g(seed);
    hp best = -1;
    for (std::size_t s = 0; s < samples; ++s) {
        const auto& [a, b] = pairs[s < pairs.size() ? s : static_cast<size_t>(g() % pairs.size())];
        const auto x = sample_base_point(S.complex.cells[static_cast<size_t>(a)], g);
        const hp d = dist(S.pieces[static_cast<size_t>(a)].eval(x), S.pieces[static_cast<size_t>(b)].eval(x));
        if (best < 0 || d < best) best = d;
        ++F.pairs;
    }
    F.min_sep = to_d(best);
    return F;
}

} // namespace pur
