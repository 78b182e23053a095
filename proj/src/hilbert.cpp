#include "pur/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>

namespace pur {

StageComplex hilbert_complex(int n, std::size_t cell_ceiling)
{
    StageComplex sc;
    sc.k = 2;
    CellRecord root;
    root.addr = root_address(2);
    sc.cells.push_back(root);
    for (int s = 0; s < n; ++s) {
        const std::size_t next = sc.cells.size() * 33;
        if (next > cell_ceiling)
            throw ResourceLimit("hilbert stage " + std::to_string(s + 1) + " needs " + std::to_string(next) + " cells", next);
        StageComplex nx;
        nx.k = 2;
        nx.cells.reserve(next);
        for (std::size_t pi = 0; pi < sc.cells.size(); ++pi) {
            const auto& P = sc.cells[pi];
            for (int c1 = 0; c1 < 5; ++c1)
                for (int c2 = 0; c2 < 5; ++c2) {
                    const Role r = child_role(c1, c2);
                    CellRecord rec;
                    rec.addr = P.addr.child({c1, c2});
                    rec.role = r;
                    rec.parent = static_cast<int>(pi);
                    rec.skeleton = c1 == 0 || c1 == 4 || c2 == 0 || c2 == 4;
                    if (r != Role::annulus) {
                        rec.addr.covers.push_back({s, 0, 1, -1});
                        rec.weight_exp = P.weight_exp;
                        nx.cells.push_back(rec);
                        continue;
                    }
                    for (int bit = 0; bit < 2; ++bit) {
                        CellRecord sh = rec;
                        sh.addr.covers.push_back({s, 0, 1, bit});
                        sh.weight_exp = P.weight_exp + 1;
                        nx.cells.push_back(sh);
                    }
                }
        }
        sc.cells = std::move(nx.cells);
    }
    sc.generation = n;
    sc.resolution = n;
    return sc;
}

std::vector<mpq_class> hilbert_eval_exact(const CellAddress& c, const std::vector<mpq_class>& x, const DeltaSchedule& s)
{
    std::vector<mpq_class> out{x[0], x[1]};
    for (const auto& ev : c.covers) {
        if (ev.bit < 0) {
            out.emplace_back(0);
            out.emplace_back(0);
            continue;
        }
        const int m = ev.step;
        const mpq_class L = inv5(m + 1);
        const mpq_class u = inv5(m);
        const mpq_class X = (x[0] - mpq_class(c.corner_at(0, m)) * u) / L;
        const mpq_class Y = (x[1] - mpq_class(c.corner_at(1, m)) * u) / L;
        const auto v = psi_value<mpq_class>(X, Y, c.digit(m, 0), c.digit(m, 1), ev.bit, s.delta(m + 1), L);
        out.push_back(v[0]);
        out.push_back(v[1]);
    }
    return out;
}

std::vector<double> hilbert_eval(const CellAddress& c, const std::vector<double>& x, const DeltaSchedule& s)
{
    std::vector<double> out{x[0], x[1]};
    for (const auto& ev : c.covers) {
        if (ev.bit < 0) {
            out.push_back(0.0);
            out.push_back(0.0);
            continue;
        }
        const int m = ev.step;
        const double L = inv5d(m + 1);
        const double u = inv5d(m);
        const double X = (x[0] - static_cast<double>(c.corner_at(0, m)) * u) / L;
        const double Y = (x[1] - static_cast<double>(c.corner_at(1, m)) * u) / L;
        const auto v = psi_value<double>(X, Y, c.digit(m, 0), c.digit(m, 1), ev.bit, s.delta_d(m + 1), L);
        out.push_back(v[0]);
        out.push_back(v[1]);
    }
    return out;
}

std::vector<double> hilbert_jacobian(const CellAddress& c, const std::vector<double>& x, const DeltaSchedule& s)
{
    std::vector<double> J{1.0, 0.0, 0.0, 1.0};
    for (const auto& ev : c.covers) {
        if (ev.bit < 0) {
            J.insert(J.end(), {0.0, 0.0, 0.0, 0.0});
            continue;
        }
        const int m = ev.step;
        const double L = inv5d(m + 1);
        const double u = inv5d(m);
        const double X = (x[0] - static_cast<double>(c.corner_at(0, m)) * u) / L;
        const double Y = (x[1] - static_cast<double>(c.corner_at(1, m)) * u) / L;
        const auto jet = psi_jet(X, Y, c.digit(m, 0), c.digit(m, 1), ev.bit, s.delta_d(m + 1), L);
        J.insert(J.end(), {jet.d[0][0], jet.d[0][1], jet.d[1][0], jet.d[1][1]});
    }
    return J;
}

namespace {

HilbertStage make_stage(int n, const DeltaSchedule& s, StageComplex sc)
{
    HilbertStage st;
    st.n = n;
    st.ambient_dim = 2 * n + 2;
    st.schedule = s;
    auto& E = st.embedding;
    E.tower = "hilbert";
    E.stage = n;
    E.k = 2;
    E.dim = 2 * n + 2;
    E.m = n;
    E.complex = std::move(sc);
    E.parent_piece.reserve(E.complex.cells.size());
    for (const auto& c : E.complex.cells) E.parent_piece.push_back(c.parent);
    collect_vertices(E, [&](int ci, const std::vector<mpq_class>& x) {
        auto v = hilbert_eval_exact(E.complex.cells[static_cast<std::size_t>(ci)].addr, x, s);
        std::vector<double> d;
        for (const auto& q : v) d.push_back(q.get_d());
        E.vertices_exact.push_back(std::move(v));
        return d;
    });
    auto addrs = std::make_shared<std::vector<CellAddress>>();
    for (const auto& c : E.complex.cells) addrs->push_back(c.addr);
    E.eval = [addrs, s](int cell, const std::vector<double>& x) { return hilbert_eval((*addrs)[static_cast<std::size_t>(cell)], x, s); };
    E.jacobian = [addrs, s](int cell, const std::vector<double>& x) { return hilbert_jacobian((*addrs)[static_cast<std::size_t>(cell)], x, s); };
    return st;
}

double sigma_max_rows(const std::vector<double>& J, std::size_t rows)
{
    double a = 0, b = 0, c = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        a += J[2 * r] * J[2 * r];
        b += J[2 * r] * J[2 * r + 1];
        c += J[2 * r + 1] * J[2 * r + 1];
    }
    const double t = 0.5 * (a + c), d = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    return std::sqrt(t + d);
}

// address of the X_n cell containing the (non-lattice) point x, with the given
// sheet bit for every event whose annulus contains x
CellAddress cell_at(const std::vector<double>& x, int n, const std::vector<int>& bits)
{
    CellAddress a = root_address(2);
    double lx = x[0], ly = x[1];
    for (int s = 0; s < n; ++s) {
        const int d1 = std::clamp(static_cast<int>(std::floor(lx * 5)), 0, 4);
        const int d2 = std::clamp(static_cast<int>(std::floor(ly * 5)), 0, 4);
        a.digits.push_back(static_cast<std::uint8_t>(d1));
        a.digits.push_back(static_cast<std::uint8_t>(d2));
        const bool ann = child_role(d1, d2) == Role::annulus;
        a.covers.push_back({s, 0, 1, ann ? bits[static_cast<std::size_t>(s)] : -1});
        lx = lx * 5 - d1;
        ly = ly * 5 - d2;
    }
    return a;
}

} // namespace

HilbertTower build_hilbert_tower(int max_stage, const DeltaSchedule& s, std::size_t cell_ceiling)
{
    if (max_stage < 0) throw std::invalid_argument("build_hilbert_tower: max_stage >= 0");
    HilbertTower T;
    T.schedule = s;
    for (int n = 0; n <= max_stage; ++n) T.stages.push_back(make_stage(n, s, hilbert_complex(n, cell_ceiling)));
    return T;
}

HilbertStage build_stage_hilbert(int n, const DeltaSchedule& s, std::size_t cell_ceiling)
{
    if (n < 0) throw std::invalid_argument("build_stage_hilbert: n >= 0");
    return make_stage(n, s, hilbert_complex(n, cell_ceiling));
}

StageEmbedding project_hilbert(const HilbertStage& hi, int i)
{
    if (i < 0 || i > hi.n) throw std::invalid_argument("project_hilbert: i outside [0, n]");
    StageEmbedding E = hi.embedding;
    E.dim = 2 * i + 2;
    for (auto& v : E.vertices) v.resize(static_cast<std::size_t>(E.dim));
    for (auto& v : E.vertices_exact) v.resize(static_cast<std::size_t>(E.dim));
    const auto inner = hi.embedding.eval;
    E.eval = [inner, i](int cell, const std::vector<double>& x) {
        auto v = inner(cell, x);
        v.resize(static_cast<std::size_t>(2 * i + 2));
        return v;
    };
    const auto innerJ = hi.embedding.jacobian;
    E.jacobian = [innerJ, i](int cell, const std::vector<double>& x) {
        auto J = innerJ(cell, x);
        J.resize(static_cast<std::size_t>(2 * (2 * i + 2)));
        return J;
    };
    return E;
}

DiagramReport check_diagram_hilbert(const HilbertTower& T, int i, int j)
{
    if (i > j || j >= static_cast<int>(T.stages.size())) throw std::invalid_argument("check_diagram_hilbert: need i <= j <= max stage");
    DiagramReport rep;
    rep.i = i;
    rep.j = j;
    const auto& Sj = T.stages[static_cast<std::size_t>(j)].embedding;
    const auto& Si = T.stages[static_cast<std::size_t>(i)].embedding;
    std::map<std::string, int> cell_i;
    for (std::size_t c = 0; c < Si.complex.cells.size(); ++c) cell_i.emplace(Si.complex.cells[c].addr.str(), static_cast<int>(c));
    const auto Pi = project_hilbert(T.stages[static_cast<std::size_t>(j)], i);
    std::vector<char> seen(Sj.vertices.size(), 0);
    const mpq_class unit = inv5(Sj.m);
    for (std::size_t ci = 0; ci < Sj.complex.cells.size(); ++ci) {
        const auto& c = Sj.complex.cells[ci];
        const auto corners = cell_corner_bits(c);
        for (std::size_t q = 0; q < corners.size(); ++q) {
            const int vi = Sj.cell_vertices[ci][q];
            if (seen[static_cast<std::size_t>(vi)]) continue;
            seen[static_cast<std::size_t>(vi)] = 1;
            const auto xn = corner_numerators(c.addr, corners[q], Sj.m);
            const std::vector<mpq_class> x{mpq_class(xn[0]) * unit, mpq_class(xn[1]) * unit};
            const auto it = cell_i.find(c.addr.prefix(i).str());
            ++rep.vertices;
            if (it == cell_i.end()) {
                ++rep.mismatches;
                continue;
            }
            const auto lhs = Pi.vertices_exact[static_cast<std::size_t>(vi)];
            const auto rhs = hilbert_eval_exact(Si.complex.cells[static_cast<std::size_t>(it->second)].addr, x, T.schedule);
            bool same = lhs.size() == rhs.size();
            double err = 0.0;
            for (std::size_t r = 0; same && r < lhs.size(); ++r) {
                if (lhs[r] != rhs[r]) same = false;
                err = std::max(err, std::abs(mpq_class(lhs[r] - rhs[r]).get_d()));
            }
            if (!same) ++rep.mismatches;
            rep.max_err = std::max(rep.max_err, err);
        }
    }
    return rep;
}

SupMoveReport sup_move_hilbert(const HilbertTower& T, int i, std::size_t samples, std::uint64_t seed)
{
    if (i < 0 || i + 1 >= static_cast<int>(T.stages.size())) throw std::invalid_argument("sup_move_hilbert: stage i+1 not built");
    SupMoveReport rep;
    rep.i = i;
    rep.scale = T.schedule.delta_d(i + 1) * inv5d(i + 1);
    const auto& S = T.stages[static_cast<std::size_t>(i + 1)].embedding;
    // F_{i+1} − F_i∘π is the last coordinate pair
    const std::size_t a = static_cast<std::size_t>(2 * i + 2);
    for (const auto& v : S.vertices_exact) {
        const mpq_class n2 = v[a] * v[a] + v[a + 1] * v[a + 1];
        rep.sup = std::max(rep.sup, std::sqrt(n2.get_d()));
    }
    std::mt19937_64 g(seed);
    const auto& Sp = T.stages[static_cast<std::size_t>(i)].embedding;
    for (std::size_t t = 0; t < samples; ++t) {
        const std::size_t ci = g() % S.complex.cells.size();
        const auto& c = S.complex.cells[ci];
        const Frame f = cell_frame(c.addr);
        const double sd = f.side.get_d();
        const std::vector<double> x{f.corner[0].get_d() + sd * u01(g), f.corner[1].get_d() + sd * u01(g)};
        const auto hi = hilbert_eval(c.addr, x, T.schedule);
        const auto lo = Sp.eval(c.parent, x);
        double s2 = 0.0;
        for (std::size_t r = 0; r < hi.size(); ++r) {
            const double d = hi[r] - (r < lo.size() ? lo[r] : 0.0);
            s2 += d * d;
        }
        rep.sup = std::max(rep.sup, std::sqrt(s2));
    }
    rep.measured_C = rep.sup / rep.scale;
    return rep;
}

LipschitzReport lipschitz_hilbert(const HilbertStage& st, std::size_t samples, std::uint64_t seed)
{
    LipschitzReport rep;
    rep.n = st.n;
    rep.reference = std::sqrt(1.0 + st.schedule.sum_delta_sq_d(st.n));
    std::mt19937_64 g(seed);
    const auto& S = st.embedding;
    const auto rows = static_cast<std::size_t>(S.dim);
    for (std::size_t t = 0; t < samples; ++t) {
        const std::size_t ci = g() % S.complex.cells.size();
        const auto& c = S.complex.cells[ci];
        const Frame f = cell_frame(c.addr);
        const double sd = f.side.get_d();
        const std::vector<double> x{f.corner[0].get_d() + sd * u01(g), f.corner[1].get_d() + sd * u01(g)};
        rep.glip = std::max(rep.glip, sigma_max_rows(hilbert_jacobian(c.addr, x, st.schedule), rows));
        // a short in-cell pair as a cross-check of the Jacobian
        const double ang = 2 * M_PI * u01(g);
        const double h = 1e-3 * sd;
        std::vector<double> y{x[0] + h * std::cos(ang), x[1] + h * std::sin(ang)};
        y[0] = std::clamp(y[0], f.corner[0].get_d(), f.corner[0].get_d() + sd);
        y[1] = std::clamp(y[1], f.corner[1].get_d(), f.corner[1].get_d() + sd);
        const double dxy = dist_d(x, y);
        if (dxy > 0) rep.glip = std::max(rep.glip, dist_d(S.eval(static_cast<int>(ci), x), S.eval(static_cast<int>(ci), y)) / dxy);
    }
    rep.C = rep.glip / rep.reference;
    return rep;
}

InjectivityReport injectivity_radius_report(const HilbertStage& st, std::size_t samples, std::uint64_t seed)
{
    InjectivityReport rep;
    rep.n = st.n;
    rep.min_ratio = 0.0;
    if (st.n == 0) return rep;
    // the same child-unit positions are used for every event, so the ratio of
    // event m scales with δ_{m+1}
    std::mt19937_64 g(seed);
    struct Local {
        double X, Y;
    };
    std::vector<Local> pos;
    while (pos.size() < samples) {
        const double X = 1 + 3 * u01(g), Y = 1 + 3 * u01(g);
        if (X > 2 && X < 3 && Y > 2 && Y < 3) continue;
        if (Y == 2.0) continue;
        pos.push_back({X, Y});
    }
    bool first = true;
    for (int m = 0; m < st.n; ++m) {
        std::mt19937_64 gq(seed + 1000003ULL * static_cast<std::uint64_t>(m + 1));
        for (const auto& p : pos) {
            // a depth-m cell Q with random digits, then the point at child units (X,Y)
            std::vector<double> corner{0.0, 0.0};
            for (int s = 0; s < m; ++s) {
                corner[0] += static_cast<double>(gq() % 5) * inv5d(s + 1);
                corner[1] += static_cast<double>(gq() % 5) * inv5d(s + 1);
            }
            const double L = inv5d(m + 1);
            const std::vector<double> x{corner[0] + p.X * L, corner[1] + p.Y * L};
            std::vector<int> bits(static_cast<std::size_t>(st.n), 0);
            for (auto& b : bits) b = static_cast<int>(gq() & 1);
            const CellAddress a = cell_at(x, st.n, bits);
            CellAddress b = a;
            for (auto& ev : b.covers)
                if (ev.step == m) ev.bit = 1 - ev.bit;
            const double img = dist_d(hilbert_eval(a, x, st.schedule), hilbert_eval(b, x, st.schedule));
            const double dout = std::min({p.X - 1, 4 - p.X, p.Y - 1, 4 - p.Y});
            const double ex = std::max({2 - p.X, 0.0, p.X - 3}), ey = std::max({2 - p.Y, 0.0, p.Y - 3});
            const double din = std::hypot(ex, ey);
            const double d = 2.0 * std::min(dout, din) * L;
            if (d <= 0) continue;
            const double r = img / d;
            if (first || r < rep.min_ratio) rep.min_ratio = r;
            first = false;
            ++rep.pairs;
        }
    }
    return rep;
}

} // namespace pur
