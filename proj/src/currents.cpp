#include "pur/currents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace pur {

namespace {
using std::size_t;

struct Rule {
    std::vector<std::vector<double>> bary; // k+1 barycentric coordinates
    std::vector<double> w;                 // weights summing to 1
};

Rule permuted(const std::vector<std::pair<std::vector<double>, double>>& orbits)
{
    Rule r;
    for (const auto& [b, w] : orbits) {
        std::vector<double> v = b;
        std::sort(v.begin(), v.end());
        do {
            r.bary.push_back(v);
            r.w.push_back(w);
        } while (std::next_permutation(v.begin(), v.end()));
    }
    return r;
}

// degree 5 (7 points) and degree 2 (3 points) on triangles
const Rule& tri_high()
{
    static const Rule r = permuted({{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.225},
                                    {{0.059715871789770, 0.470142064105115, 0.470142064105115}, 0.132394152788506},
                                    {{0.797426985353087, 0.101286507323456, 0.101286507323456}, 0.125939180544827}});
    return r;
}
const Rule& tri_low()
{
    static const Rule r = permuted({{{2.0 / 3, 1.0 / 6, 1.0 / 6}, 1.0 / 3}});
    return r;
}
// degree 3 (5 points) and degree 2 (4 points) on tetrahedra
const Rule& tet_high()
{
    static const Rule r = permuted({{{0.25, 0.25, 0.25, 0.25}, -0.8}, {{0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6}, 0.45}});
    return r;
}
const Rule& tet_low()
{
    static const Rule r = permuted({{{0.5854101966249685, 0.1381966011250105, 0.1381966011250105, 0.1381966011250105}, 0.25}});
    return r;
}

double det(std::vector<double> M, int n)
{
    double d = 1.0;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(M[static_cast<size_t>(r * n + c)]) > std::abs(M[static_cast<size_t>(piv * n + c)])) piv = r;
        if (M[static_cast<size_t>(piv * n + c)] == 0.0) return 0.0;
        if (piv != c) {
            for (int t = 0; t < n; ++t) std::swap(M[static_cast<size_t>(c * n + t)], M[static_cast<size_t>(piv * n + t)]);
            d = -d;
        }
        d *= M[static_cast<size_t>(c * n + c)];
        for (int r = c + 1; r < n; ++r) {
            const double f = M[static_cast<size_t>(r * n + c)] / M[static_cast<size_t>(c * n + c)];
            for (int t = c; t < n; ++t) M[static_cast<size_t>(r * n + t)] -= f * M[static_cast<size_t>(c * n + t)];
        }
    }
    return d;
}

hp det_hp(std::vector<hp> M, int n)
{
    hp d = 1;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (abs(M[static_cast<size_t>(r * n + c)]) > abs(M[static_cast<size_t>(piv * n + c)])) piv = r;
        if (M[static_cast<size_t>(piv * n + c)] == 0) return hp(0);
        if (piv != c) {
            for (int t = 0; t < n; ++t) std::swap(M[static_cast<size_t>(c * n + t)], M[static_cast<size_t>(piv * n + t)]);
            d = -d;
        }
        d *= M[static_cast<size_t>(c * n + c)];
        for (int r = c + 1; r < n; ++r) {
            const hp f = M[static_cast<size_t>(r * n + c)] / M[static_cast<size_t>(c * n + c)];
            for (int t = c; t < n; ++t) M[static_cast<size_t>(r * n + t)] -= f * M[static_cast<size_t>(c * n + t)];
        }
    }
    return d;
}

using Simplex = std::vector<std::vector<double>>;

std::vector<double> mid(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> m(a.size());
    for (size_t t = 0; t < a.size(); ++t) m[t] = 0.5 * (a[t] + b[t]);
    return m;
}

// red refinement: 4 similar triangles, or Bey's 8 tetrahedra
void refine(const Simplex& s, int levels, std::vector<Simplex>& out)
{
    if (levels <= 0) {
        out.push_back(s);
        return;
    }
    if (s.size() == 3) {
        const auto m01 = mid(s[0], s[1]), m02 = mid(s[0], s[2]), m12 = mid(s[1], s[2]);
        for (const Simplex& c : {Simplex{s[0], m01, m02}, Simplex{m01, s[1], m12}, Simplex{m02, m12, s[2]}, Simplex{m01, m12, m02}})
            refine(c, levels - 1, out);
        return;
    }
    const auto x01 = mid(s[0], s[1]), x02 = mid(s[0], s[2]), x03 = mid(s[0], s[3]);
    const auto x12 = mid(s[1], s[2]), x13 = mid(s[1], s[3]), x23 = mid(s[2], s[3]);
    for (const Simplex& c : {Simplex{s[0], x01, x02, x03}, Simplex{x01, s[1], x12, x13}, Simplex{x02, x12, s[2], x23},
                             Simplex{x03, x13, x23, s[3]}, Simplex{x01, x02, x03, x13}, Simplex{x01, x02, x12, x13},
                             Simplex{x02, x03, x13, x23}, Simplex{x02, x12, x13, x23}})
        refine(c, levels - 1, out);
}

// base simplices of a cell, refined until the cell side over 2^levels is at most max_edge
std::vector<Simplex> cell_simplex_points(const CellRecord& c, double max_edge)
{
    const int k = c.addr.k;
    const Frame fr = cell_frame(c.addr);
    const double side = fr.side.get_d();
    std::vector<double> corner;
    for (const auto& q : fr.corner) corner.push_back(q.get_d());
    int levels = 0;
    while (max_edge > 0 && side * std::ldexp(1.0, -levels) > max_edge) ++levels;
    const auto bits = cell_corner_bits(c);
    std::vector<Simplex> out;
    for (const auto& s : cell_simplices(c)) {
        Simplex pts;
        for (int v : s) {
            std::vector<double> x(static_cast<size_t>(k));
            for (int a = 0; a < k; ++a) x[static_cast<size_t>(a)] = corner[static_cast<size_t>(a)] + side * bits[static_cast<size_t>(v)][static_cast<size_t>(a)];
            pts.push_back(std::move(x));
        }
        refine(pts, levels, out);
    }
    return out;
}

double simplex_volume(const std::vector<std::vector<double>>& p, int k)
{
    std::vector<double> M(static_cast<size_t>(k * k));
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) M[static_cast<size_t>(r * k + c)] = p[static_cast<size_t>(c + 1)][static_cast<size_t>(r)] - p[0][static_cast<size_t>(r)];
    double f = 1;
    for (int t = 2; t <= k; ++t) f *= t;
    return std::abs(det(M, k)) / f;
}

// f(F x)·det(∇g(F x)·DF(x))
double integrand(const SampledForm& w, const std::vector<double>& y, const std::vector<double>& J, int k)
{
    std::vector<double> M(static_cast<size_t>(k * k), 0.0);
    for (int i = 0; i < k; ++i) {
        const auto grad = w.dg[static_cast<size_t>(i)](y);
        for (int a = 0; a < k; ++a) {
            double s = 0;
            for (int d = 0; d < w.dim; ++d) s += grad[static_cast<size_t>(d)] * J[static_cast<size_t>(d * k + a)];
            M[static_cast<size_t>(i * k + a)] = s;
        }
    }
    return w.f(y) * det(M, k);
}

std::vector<hp> to_hpv(const std::vector<mpq_class>& v)
{
    std::vector<hp> out;
    for (const auto& q : v) out.push_back(to_hp(q));
    return out;
}

} // namespace

// ---- currents ------------------------------------------------------------------------------

mpq_class StageCurrent::mass() const
{
    mpq_class m = 0;
    for (size_t i = 0; i < stage->complex.cells.size(); ++i) m += dyadic(weight_exp[i]) * stage->complex.cells[i].volume();
    return m;
}

StageCurrent stage_current(const StageEmbedding& S)
{
    StageCurrent N;
    N.stage = &S;
    N.k = S.k;
    for (const auto& c : S.complex.cells) {
        N.sign.push_back(1);
        N.weight_exp.push_back(c.weight_exp);
    }
    return N;
}

StageCurrent flipped(const StageCurrent& N)
{
    StageCurrent F = N;
    for (auto& s : F.sign) s = -s;
    return F;
}

// ---- forms ------------------------------------------------------------------------------------

SampledForm coordinate_form(int dim, const std::vector<int>& axes, double c)
{
    SampledForm w;
    w.dim = dim;
    w.degree = static_cast<int>(axes.size());
    w.name = "d";
    for (size_t i = 0; i < axes.size(); ++i) w.name += (i ? "^dx" : "x") + std::to_string(axes[i] + 1);
    if (c != 1.0) w.name = std::to_string(c) + " " + w.name;
    w.f = [c](const std::vector<double>&) { return c; };
    w.affine = true;
    w.f0 = c;
    for (int a : axes) {
        if (a < 0 || a >= dim) throw std::invalid_argument("coordinate_form: axis outside the ambient space");
        std::vector<double> g(static_cast<size_t>(dim), 0.0);
        g[static_cast<size_t>(a)] = 1.0;
        w.dg0.push_back(g);
        w.dg.push_back([g](const std::vector<double>&) { return g; });
    }
    return w;
}

SampledForm times(const SampledForm& w, AmbientFn f, std::string name)
{
    SampledForm out = w;
    const auto f0 = w.f;
    out.f = [f0, f](const std::vector<double>& y) { return f0(y) * f(y); };
    out.affine = false;
    out.name = std::move(name);
    return out;
}

SampledForm sum_forms(const SampledForm& a, const SampledForm& b)
{
    SampledForm out = a;
    const auto fa = a.f, fb = b.f;
    out.f = [fa, fb](const std::vector<double>& y) { return fa(y) + fb(y); };
    out.affine = a.affine && b.affine;
    out.f0 = a.f0 + b.f0;
    out.name = a.name + " + " + b.name;
    return out;
}

std::vector<SampledForm> form_battery(int dim, int k)
{
    std::vector<int> axes(static_cast<size_t>(k));
    for (int a = 0; a < k; ++a) axes[static_cast<size_t>(a)] = a;
    std::vector<SampledForm> out;
    out.push_back(coordinate_form(dim, axes));
    out.push_back(times(coordinate_form(dim, axes), [](const std::vector<double>& y) { return y[0]; }, "x1 " + out[0].name));
    out.push_back(times(coordinate_form(dim, axes), [](const std::vector<double>& y) { return 1.0 + y[1] * y[1]; }, "(1+x2^2) " + out[0].name));
    // g_1 = x_1 + x_last + x_1 x_2 / 2
    SampledForm w = coordinate_form(dim, axes);
    w.name = "d(x1+x" + std::to_string(dim) + "+x1x2/2)^...";
    w.affine = false;
    w.dg[0] = [dim](const std::vector<double>& y) {
        std::vector<double> g(static_cast<size_t>(dim), 0.0);
        g[0] = 1.0 + 0.5 * y[1];
        g[1] = 0.5 * y[0];
        g[static_cast<size_t>(dim - 1)] += 1.0;
        return g;
    };
    out.push_back(w);
    std::vector<int> swapped = axes;
    std::swap(swapped[0], swapped[1]);
    out.push_back(times(coordinate_form(dim, swapped), [](const std::vector<double>& y) { return std::cos(y[0] + y[1]); }, "cos(x1+x2) dx2^dx1^..."));
    return out;
}

// ---- maps ----------------------------------------------------------------------------------------

CellMap embedding_map(const StageEmbedding& S)
{
    CellMap M;
    M.dim = S.dim;
    if (!S.pieces.empty()) {
        M.affine = S.pieces;
        return M;
    }
    M.value = S.eval;
    M.jacobian = S.jacobian;
    return M;
}

CellMap truncated_map(const StageEmbedding& S, int dim)
{
    CellMap M;
    M.dim = dim;
    const auto v = S.eval, j = S.jacobian;
    const int k = S.k;
    M.value = [v, dim](int c, const std::vector<double>& x) {
        auto y = v(c, x);
        y.resize(static_cast<size_t>(dim));
        return y;
    };
    M.jacobian = [j, dim, k](int c, const std::vector<double>& x) {
        auto J = j(c, x);
        J.resize(static_cast<size_t>(dim * k));
        return J;
    };
    return M;
}

CellMap projected_map(const AffineTower& T, int j, int i, std::size_t* failed)
{
    const auto& S = T.stage(j);
    const int k = S.k, dim = S.dim;
    CellMap M;
    M.dim = dim;
    M.affine.reserve(S.pieces.size());
    std::size_t bad = 0;
    for (size_t c = 0; c < S.complex.cells.size(); ++c) {
        const auto& cell = S.complex.cells[c];
        const auto bits = cell_corner_bits(cell);
        const auto simp = cell_simplices(cell).front();
        const Frame fr = cell_frame(cell.addr);
        // vertices of the first simplex pulled halfway to its centroid
        std::vector<std::vector<mpq_class>> y;
        std::vector<mpq_class> cen(static_cast<size_t>(k), mpq_class(0));
        for (int v : simp) {
            std::vector<mpq_class> x(static_cast<size_t>(k));
            for (int a = 0; a < k; ++a) x[static_cast<size_t>(a)] = fr.corner[static_cast<size_t>(a)] + fr.side * bits[static_cast<size_t>(v)][static_cast<size_t>(a)];
            for (int a = 0; a < k; ++a) cen[static_cast<size_t>(a)] += x[static_cast<size_t>(a)] / (k + 1);
            y.push_back(std::move(x));
        }
        for (auto& x : y)
            for (int a = 0; a < k; ++a) x[static_cast<size_t>(a)] = (x[static_cast<size_t>(a)] + cen[static_cast<size_t>(a)]) / 2;
        std::vector<std::vector<hp>> img;
        bool ok = true;
        for (const auto& x : y) {
            auto p = project_down(T, j, i, S.pieces[c].eval(to_hpv(x)));
            if (!p) {
                ok = false;
                break;
            }
            img.push_back(std::move(*p));
        }
        AffinePiece P;
        P.dim = dim;
        P.k = k;
        if (!ok) {
            // fall back to F_i∘π so the evaluation stays defined; the cell is counted
            ++bad;
            img.clear();
            for (const auto& x : y) img.push_back(eval_ancestor(T, j, static_cast<int>(c), i, to_hpv(x)));
        }
        // J = [img_t − img_0] · [y_t − y_0]^{-1}
        std::vector<hp> D(static_cast<size_t>(k * k));
        for (int r = 0; r < k; ++r)
            for (int t = 0; t < k; ++t) D[static_cast<size_t>(r * k + t)] = to_hp(y[static_cast<size_t>(t + 1)][static_cast<size_t>(r)] - y[0][static_cast<size_t>(r)]);
        // invert D (k <= 3) by Gauss-Jordan
        std::vector<hp> inv(static_cast<size_t>(k * k), hp(0));
        for (int r = 0; r < k; ++r) inv[static_cast<size_t>(r * k + r)] = 1;
        for (int col = 0; col < k; ++col) {
            int piv = col;
            for (int r = col + 1; r < k; ++r)
                if (abs(D[static_cast<size_t>(r * k + col)]) > abs(D[static_cast<size_t>(piv * k + col)])) piv = r;
            for (int t = 0; t < k; ++t) {
                std::swap(D[static_cast<size_t>(col * k + t)], D[static_cast<size_t>(piv * k + t)]);
                std::swap(inv[static_cast<size_t>(col * k + t)], inv[static_cast<size_t>(piv * k + t)]);
            }
            const hp d = D[static_cast<size_t>(col * k + col)];
            for (int t = 0; t < k; ++t) {
                D[static_cast<size_t>(col * k + t)] /= d;
                inv[static_cast<size_t>(col * k + t)] /= d;
            }
            for (int r = 0; r < k; ++r) {
                if (r == col) continue;
                const hp f = D[static_cast<size_t>(r * k + col)];
                for (int t = 0; t < k; ++t) {
                    D[static_cast<size_t>(r * k + t)] -= f * D[static_cast<size_t>(col * k + t)];
                    inv[static_cast<size_t>(r * k + t)] -= f * inv[static_cast<size_t>(col * k + t)];
                }
            }
        }
        P.J.assign(static_cast<size_t>(dim * k), hp(0));
        for (int d = 0; d < dim; ++d)
            for (int a = 0; a < k; ++a) {
                hp s = 0;
                for (int t = 0; t < k; ++t)
                    s += (img[static_cast<size_t>(t + 1)][static_cast<size_t>(d)] - img[0][static_cast<size_t>(d)]) * inv[static_cast<size_t>(t * k + a)];
                P.Jat(d, a) = s;
            }
        P.c = img[0];
        for (int d = 0; d < dim; ++d)
            for (int a = 0; a < k; ++a) P.c[static_cast<size_t>(d)] -= P.Jat(d, a) * to_hp(y[0][static_cast<size_t>(a)]);
        P.refresh_double();
        M.affine.push_back(std::move(P));
    }
    if (failed) *failed = bad;
    return M;
}

// ---- evaluation ---------------------------------------------------------------------------------

Evaluation eval_current(const StageCurrent& N, const SampledForm& w, const CellMap& F, double max_edge)
{
    const auto& S = *N.stage;
    const int k = N.k;
    if (w.degree != k) throw std::invalid_argument("eval_current: form degree " + std::to_string(w.degree) + " != current dimension " + std::to_string(k));
    if (w.dim != F.dim) throw std::invalid_argument("eval_current: form lives on R^" + std::to_string(w.dim) + ", map on R^" + std::to_string(F.dim));
    if (k != 2 && k != 3) throw std::invalid_argument("eval_current: quadrature implemented for k = 2, 3");
    Evaluation E;
    if (F.is_affine() && w.affine) {
        // constant integrand per cell: exact volume times det(A·J)
        hp total = 0;
        std::vector<hp> A;
        for (const auto& g : w.dg0)
            for (double v : g) A.push_back(hp(v));
        for (size_t c = 0; c < S.complex.cells.size(); ++c) {
            const auto& P = F.affine[c];
            std::vector<hp> M(static_cast<size_t>(k * k), hp(0));
            for (int i = 0; i < k; ++i)
                for (int a = 0; a < k; ++a) {
                    hp s = 0;
                    for (int d = 0; d < w.dim; ++d) s += A[static_cast<size_t>(i * w.dim + d)] * P.Jat(d, a);
                    M[static_cast<size_t>(i * k + a)] = s;
                }
            const mpq_class vol = S.complex.cells[c].volume() * dyadic(N.weight_exp[c]);
            total += hp(N.sign[c]) * to_hp(vol) * det_hp(M, k);
        }
        E.value = to_d(hp(w.f0) * total);
        E.exact = true;
        return E;
    }
    if (max_edge < 0) max_edge = k == 2 ? 0.04 : 0.13;
    const Rule& hi = k == 2 ? tri_high() : tet_high();
    const Rule& lo = k == 2 ? tri_low() : tet_low();
    double total = 0, err = 0;
    for (size_t c = 0; c < S.complex.cells.size(); ++c) {
        const double wt = N.sign[c] * std::ldexp(1.0, -N.weight_exp[c]);
        double cell_hi = 0, cell_lo = 0;
        for (const auto& simp : cell_simplex_points(S.complex.cells[c], max_edge)) {
            const double vol = simplex_volume(simp, k);
            auto run = [&](const Rule& R) {
                double s = 0;
                for (size_t q = 0; q < R.w.size(); ++q) {
                    std::vector<double> x(static_cast<size_t>(k), 0.0);
                    for (int v = 0; v <= k; ++v)
                        for (int a = 0; a < k; ++a) x[static_cast<size_t>(a)] += R.bary[q][static_cast<size_t>(v)] * simp[static_cast<size_t>(v)][static_cast<size_t>(a)];
                    std::vector<double> y, J;
                    if (F.is_affine()) {
                        y = F.affine[c].eval_d(x);
                        J = F.affine[c].Jd;
                    } else {
                        y = F.value(static_cast<int>(c), x);
                        J = F.jacobian(static_cast<int>(c), x);
                    }
                    s += R.w[q] * integrand(w, y, J, k);
                }
                return s * vol;
            };
            cell_hi += run(hi);
            cell_lo += run(lo);
        }
        total += wt * cell_hi;
        err += std::abs(wt) * std::abs(cell_hi - cell_lo);
    }
    E.value = total;
    E.error = err;
    return E;
}

Evaluation eval_current(const StageCurrent& N, const SampledForm& w)
{
    return eval_current(N, w, embedding_map(*N.stage));
}

bool PushforwardReport::pass() const
{
    if (failed_cells != 0 || forms.empty()) return false;
    for (const auto& f : forms)
        if (!(f.diff <= tolerance)) return false;
    return true;
}

PushforwardReport pushforward_check(const AffineTower& T, int i, int j, double tol)
{
    PushforwardReport R;
    R.tower = T.stage(0).tower;
    R.i = i;
    R.j = j;
    R.tolerance = tol;
    const auto& Si = T.stage(i);
    const auto& Sj = T.stage(j);
    const auto Ni = stage_current(Si), Nj = stage_current(Sj);
    const CellMap Mi = embedding_map(Si);
    const CellMap Mj = i == j ? embedding_map(Sj) : projected_map(T, j, i, &R.failed_cells);
    for (const auto& w : form_battery(Si.dim, Si.k)) {
        const auto a = eval_current(Ni, w, Mi), b = eval_current(Nj, w, Mj);
        R.forms.push_back({w.name, a.value, b.value, std::abs(a.value - b.value), a.error + b.error});
    }
    return R;
}

PushforwardReport pushforward_check(const HilbertTower& T, int i, int j, double tol)
{
    PushforwardReport R;
    R.tower = "hilbert";
    R.i = i;
    R.j = j;
    R.tolerance = tol;
    const auto& Si = T.stages.at(static_cast<size_t>(i)).embedding;
    const auto& Sj = T.stages.at(static_cast<size_t>(j)).embedding;
    const auto Ni = stage_current(Si), Nj = stage_current(Sj);
    const CellMap Mi = embedding_map(Si), Mj = truncated_map(Sj, Si.dim);
    for (const auto& w : form_battery(Si.dim, 2)) {
        const auto a = eval_current(Ni, w, Mi), b = eval_current(Nj, w, Mj);
        R.forms.push_back({w.name, a.value, b.value, std::abs(a.value - b.value), a.error + b.error});
    }
    return R;
}

// ---- boundary mass ------------------------------------------------------------------------------

double boundary_mass(const StageEmbedding& S)
{
    const int k = S.k;
    if (k != 2 && k != 3) throw std::invalid_argument("boundary_mass: k = 2, 3 supported");
    const double unit = 1.0 / (2.0 * static_cast<double>(pow5(S.m)));
    double total = 0.0;
    auto jac = [&](int cell, const std::vector<double>& x) { return S.jacobian(cell, x); };
    auto image = [&](const std::vector<double>& J, const std::vector<double>& t) {
        std::vector<double> v(static_cast<size_t>(S.dim), 0.0);
        for (int d = 0; d < S.dim; ++d)
            for (int a = 0; a < k; ++a) v[static_cast<size_t>(d)] += J[static_cast<size_t>(d * k + a)] * t[static_cast<size_t>(a)];
        return v;
    };
    auto nrm = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    auto area = [&](const std::vector<double>& u, const std::vector<double>& v) {
        double uu = 0, vv = 0, uv = 0;
        for (size_t d = 0; d < u.size(); ++d) {
            uu += u[d] * u[d];
            vv += v[d] * v[d];
            uv += u[d] * v[d];
        }
        return std::sqrt(std::max(0.0, uu * vv - uv * uv));
    };
    // length of F along the base segment p0 + s t, s ∈ [0,1] (5 × 5-point Gauss for curved maps)
    auto seg_length = [&](int cell, const std::vector<double>& p0, const std::vector<double>& t) {
        if (!S.pieces.empty()) return nrm(image(S.pieces[static_cast<size_t>(cell)].Jd, t));
        static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
        static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
        double L = 0;
        for (int sub = 0; sub < 5; ++sub)
            for (int q = 0; q < 5; ++q) {
                const double s = (sub + 0.5 + 0.5 * gx[q]) / 5.0;
                std::vector<double> x(p0);
                for (int a = 0; a < k; ++a) x[static_cast<size_t>(a)] += s * t[static_cast<size_t>(a)];
                L += gw[q] * 0.5 / 5.0 * nrm(image(jac(cell, x), t));
            }
        return L;
    };
    for (const auto& b : boundary_chain(S.complex, S.m)) {
        const auto& cell = S.complex.cells[static_cast<size_t>(b.cell)];
        const Frame fr = cell_frame(cell.addr);
        const double side = fr.side.get_d();
        std::vector<double> corner;
        for (const auto& q : fr.corner) corner.push_back(q.get_d());
        const double w = std::abs(b.net.get_d());
        auto e = [&](int a, double len) {
            std::vector<double> t(static_cast<size_t>(k), 0.0);
            t[static_cast<size_t>(a)] = len;
            return t;
        };
        if (b.diagonal) {
            const int A = cell.shape.a, B = cell.shape.b;
            std::vector<double> p0(corner), t(static_cast<size_t>(k), 0.0);
            t[static_cast<size_t>(B)] = side;
            if (cell.shape.anti) {
                p0[static_cast<size_t>(A)] += side;
                t[static_cast<size_t>(A)] = -side;
            } else {
                t[static_cast<size_t>(A)] = side;
            }
            if (k == 2) {
                total += w * seg_length(b.cell, p0, t);
            } else {
                int o = 0;
                while (o == A || o == B) ++o;
                const auto& J = S.pieces[static_cast<size_t>(b.cell)].Jd;
                total += w * area(image(J, t), image(J, e(o, side)));
            }
            continue;
        }
        std::vector<int> free;
        for (int a = 0; a < k; ++a)
            if (a != b.axis) free.push_back(a);
        if (k == 2) {
            std::vector<double> p0(static_cast<size_t>(k));
            p0[static_cast<size_t>(b.axis)] = static_cast<double>(b.coord) * unit;
            p0[static_cast<size_t>(free[0])] = static_cast<double>(b.box[0][0]) * unit;
            total += w * seg_length(b.cell, p0, e(free[0], static_cast<double>(b.box[0][1] - b.box[0][0]) * unit));
            continue;
        }
        const auto& J = S.pieces[static_cast<size_t>(b.cell)].Jd;
        const double l0 = static_cast<double>(b.box[0][1] - b.box[0][0]) * unit;
        const double l1 = static_cast<double>(b.box[1][1] - b.box[1][0]) * unit;
        const double a2 = area(image(J, e(free[0], l0)), image(J, e(free[1], l1)));
        total += w * (b.tri ? 0.5 * a2 : a2);
    }
    return total;
}

StageEmbedding plain_subdivision(const StageEmbedding& S, int times)
{
    if (times < 1) throw std::invalid_argument("plain_subdivision: times >= 1 required");
    StageEmbedding out;
    out.tower = S.tower;
    out.stage = S.stage;
    out.k = S.k;
    out.dim = S.dim;
    out.m = S.m + times;
    out.complex.k = S.k;
    out.complex.generation = S.complex.generation;
    out.complex.resolution = S.complex.resolution + times;
    auto parent = std::make_shared<std::vector<int>>();
    for (size_t c = 0; c < S.complex.cells.size(); ++c) {
        const auto& cell = S.complex.cells[c];
        if (cell.shape.half) throw std::invalid_argument("plain_subdivision: half cells are not subdivided here");
        for (auto& a : subdivide(cell.addr, times)) {
            CellRecord r = cell;
            r.addr = std::move(a);
            r.parent = static_cast<int>(c);
            out.complex.cells.push_back(std::move(r));
            parent->push_back(static_cast<int>(c));
            if (!S.pieces.empty()) out.pieces.push_back(S.pieces[c]);
        }
    }
    const auto ev = S.eval, jac = S.jacobian;
    out.eval = [ev, parent](int c, const std::vector<double>& x) { return ev((*parent)[static_cast<size_t>(c)], x); };
    out.jacobian = [jac, parent](int c, const std::vector<double>& x) { return jac((*parent)[static_cast<size_t>(c)], x); };
    out.parent_piece = *parent;
    return out;
}

} // namespace pur
