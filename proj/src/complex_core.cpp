#include "pur/complex_core.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pur {

const char* role_name(Role r)
{
    switch (r) {
    case Role::central: return "central";
    case Role::outer: return "outer";
    case Role::annulus: return "annulus";
    default: return "plain";
    }
}

Role child_role(int d1, int d2)
{
    if (d1 == 2 && d2 == 2) return Role::central;
    if (d1 == 0 || d1 == 4 || d2 == 0 || d2 == 4) return Role::outer;
    return Role::annulus;
}

std::vector<int> CellAddress::branch_word() const
{
    std::vector<int> w;
    for (const auto& c : covers)
        if (c.bit >= 0) w.push_back(c.bit);
    return w;
}

i64 CellAddress::corner(int axis) const
{
    i64 c = 0;
    for (int s = 0; s < depth(); ++s) c = c * 5 + digit(s, axis);
    return c;
}

i64 CellAddress::corner_at(int axis, int m) const
{
    if (m >= depth()) return corner(axis) * pow5(m - depth());
    i64 c = 0;
    for (int s = 0; s < m; ++s) c = c * 5 + digit(s, axis);
    return c;
}

CellAddress CellAddress::child(const std::vector<int>& tuple) const
{
    CellAddress c = *this;
    for (int v : tuple) c.digits.push_back(static_cast<std::uint8_t>(v));
    return c;
}

CellAddress CellAddress::prefix(int d) const
{
    CellAddress c;
    c.root_id = root_id;
    c.k = k;
    c.digits.assign(digits.begin(), digits.begin() + d * k);
    for (const auto& m : covers)
        if (m.step < d) c.covers.push_back(m);
    return c;
}

const CoverMark* CellAddress::cover_at(int step) const
{
    for (const auto& m : covers)
        if (m.step == step) return &m;
    return nullptr;
}

std::string CellAddress::str() const
{
    std::ostringstream os;
    os << root_id << ':';
    for (int s = 0; s < depth(); ++s) {
        if (s) os << '.';
        for (int a = 0; a < k; ++a) os << int(digit(s, a));
        if (auto* m = cover_at(s); m && m->bit >= 0) os << (m->bit ? '+' : '-');
    }
    return os.str();
}

CellAddress root_address(int k, int root_id)
{
    CellAddress c;
    c.k = k;
    c.root_id = root_id;
    return c;
}

bool Shape::contains(const std::vector<double>& u, double tol) const
{
    if (!half) return true;
    double s = anti ? (1.0 - u[a] - u[b]) : (u[a] - u[b]);
    // s >= 0 is the lower half for both diagonals
    return upper ? s <= tol : s >= -tol;
}

std::vector<std::array<int, 2>> Shape::plane_corners() const
{
    if (!half) return {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    if (!anti) return upper ? std::vector<std::array<int, 2>>{{0, 0}, {1, 1}, {0, 1}}
                            : std::vector<std::array<int, 2>>{{0, 0}, {1, 0}, {1, 1}};
    return upper ? std::vector<std::array<int, 2>>{{1, 0}, {1, 1}, {0, 1}}
                 : std::vector<std::array<int, 2>>{{0, 0}, {1, 0}, {0, 1}};
}

std::string Shape::str() const
{
    if (!half) return "box";
    std::ostringstream os;
    os << (anti ? "anti" : "main") << (upper ? "U" : "L") << a << b;
    return os.str();
}

mpq_class CellRecord::volume() const
{
    mpq_class v = inv5(addr.k * addr.depth());
    if (shape.half) v /= 2;
    return v;
}

mpq_class StageComplex::total_mass() const
{
    mpq_class m = 0;
    for (const auto& c : cells) m += c.weight() * c.volume();
    return m;
}

std::vector<CellAddress> subdivide(const CellAddress& cell, int times)
{
    if (times < 1) throw std::invalid_argument("subdivide: times >= 1 required");
    std::vector<CellAddress> cur{cell};
    for (int t = 0; t < times; ++t) {
        std::vector<CellAddress> next;
        const int n = static_cast<int>(pow5(cell.k));
        next.reserve(cur.size() * static_cast<std::size_t>(n));
        for (const auto& c : cur) {
            for (int idx = 0; idx < n; ++idx) {
                std::vector<int> tup(static_cast<std::size_t>(cell.k));
                int r = idx;
                // last axis varies fastest
                for (int a = cell.k - 1; a >= 0; --a) {
                    tup[static_cast<std::size_t>(a)] = r % 5;
                    r /= 5;
                }
                next.push_back(c.child(tup));
            }
        }
        cur.swap(next);
    }
    return cur;
}

AnnulusDecomposition classify_children(const CellAddress& cell, int xi, int zeta)
{
    if (xi < 0 || zeta <= xi || zeta >= cell.k) throw std::invalid_argument("classify_children: bad plane");
    AnnulusDecomposition d;
    d.parent = cell;
    d.xi = xi;
    d.zeta = zeta;
    for (auto& c : subdivide(cell, 1)) {
        const int s = cell.depth();
        switch (child_role(c.digit(s, xi), c.digit(s, zeta))) {
        case Role::central: d.central.push_back(c); break;
        case Role::outer: d.outer.push_back(c); break;
        default: d.annulus.push_back(c); break;
        }
    }
    return d;
}

void refine(AnnulusDecomposition& dec)
{
    dec.annulus_children.clear();
    for (const auto& c : dec.annulus)
        for (auto& g : subdivide(c, 1)) dec.annulus_children.push_back(g);
    dec.refined = true;
}

bool inner_annulus_grandchild(int a, int b)
{
    // Q_a = [5,20]^2 minus (10,15)^2 in grandchild units; the cell [a,a+1]x[b,b+1]
    // must keep distance >= 1 from both boundary squares.
    if (a < 6 || a > 18 || b < 6 || b > 18) return false;
    return !(a >= 9 && a <= 15 && b >= 9 && b <= 15);
}

std::vector<CellAddress> inner_annulus(const AnnulusDecomposition& dec)
{
    if (!dec.refined) throw std::logic_error("inner_annulus: grandchildren missing (call refine first)");
    std::vector<CellAddress> out;
    const int s = dec.parent.depth();
    for (const auto& g : dec.annulus_children) {
        const int a = g.digit(s, dec.xi) * 5 + g.digit(s + 1, dec.xi);
        const int b = g.digit(s, dec.zeta) * 5 + g.digit(s + 1, dec.zeta);
        if (inner_annulus_grandchild(a, b)) out.push_back(g);
    }
    return out;
}

std::vector<Annulus> partition_annuli(int depth)
{
    if (depth < 2) throw std::invalid_argument("partition_annuli: depth >= 2 needed to form a ring in the inner annulus");
    const i64 n = pow5(depth);
    const i64 h = (n - 1) / 2;         // centre cell index
    const i64 cw = pow5(depth - 1);    // child side in cells
    const i64 g = pow5(depth - 2);     // grandchild side in cells
    const i64 first = (cw - 1) / 2 + 1 + g;
    const i64 last = (cw - 1) / 2 + cw - g;
    const i64 dy0 = -(cw - 1) / 2;     // first row above σ, centred coordinates
    std::vector<Annulus> rings;
    for (i64 m = first; m <= last; ++m) {
        Annulus A;
        A.depth = depth;
        A.layer = static_cast<int>(m);
        auto push = [&](i64 dx, i64 dy) { A.cells.push_back({h + dx, h + dy}); };
        for (i64 dy = dy0; dy <= m; ++dy) push(m, dy);
        for (i64 dx = m - 1; dx >= -m; --dx) push(dx, m);
        for (i64 dy = m - 1; dy >= -m; --dy) push(-m, dy);
        for (i64 dx = -m + 1; dx <= m; ++dx) push(dx, -m);
        for (i64 dy = -m + 1; dy < dy0; ++dy) push(m, dy);
        rings.push_back(std::move(A));
    }
    return rings;
}

CellAddress ring_cell_address(const CellAddress& q, int depth, std::array<i64, 2> ij)
{
    CellAddress c = q;
    std::vector<int> dx(static_cast<std::size_t>(depth)), dy(static_cast<std::size_t>(depth));
    i64 x = ij[0], y = ij[1];
    for (int s = depth - 1; s >= 0; --s) {
        dx[static_cast<std::size_t>(s)] = static_cast<int>(x % 5);
        dy[static_cast<std::size_t>(s)] = static_cast<int>(y % 5);
        x /= 5;
        y /= 5;
    }
    for (int s = 0; s < depth; ++s) c = c.child({dx[static_cast<std::size_t>(s)], dy[static_cast<std::size_t>(s)]});
    return c;
}

// ---- keys ----------------------------------------------------------------

std::string LatticeKey::str() const
{
    std::string s;
    s.reserve(x.size() * 12 + labels.size() * 6);
    for (auto v : x) {
        s += std::to_string(v);
        s += ',';
    }
    for (auto& [st, l] : labels) {
        s += '|';
        s += std::to_string(st);
        s += l ? '+' : '-';
    }
    return s;
}

bool in_open_annulus(i64 X, i64 Y, i64 U)
{
    if (X <= U || X >= 4 * U || Y <= U || Y >= 4 * U) return false;
    return !(X >= 2 * U && X <= 3 * U && Y >= 2 * U && Y <= 3 * U);
}

LatticeKey lattice_key(const CellAddress& cell, const std::vector<i64>& x, int m, i64 scale)
{
    LatticeKey key;
    key.x = x;
    for (const auto& ev : cell.covers) {
        if (ev.bit < 0) continue;
        const i64 U = scale * pow5(m - ev.step - 1);
        const i64 X = x[static_cast<std::size_t>(ev.xi)] - cell.corner_at(ev.xi, ev.step) * scale * pow5(m - ev.step);
        const i64 Y = x[static_cast<std::size_t>(ev.zeta)] - cell.corner_at(ev.zeta, ev.step) * scale * pow5(m - ev.step);
        if (!in_open_annulus(X, Y, U)) continue;
        int label = ev.bit;
        if (Y == 2 * U && X > 3 * U && X < 4 * U && cell.digit(ev.step, ev.xi) == 3 && cell.digit(ev.step, ev.zeta) == 1)
            label = 1 - label;
        key.labels.emplace_back(ev.step, label);
    }
    return key;
}

// ---- faces ---------------------------------------------------------------

namespace {

struct BoxExt {
    std::vector<i64> lo, hi;
};

BoxExt cell_box(const CellRecord& c, int m)
{
    const int k = c.addr.k;
    BoxExt b;
    const i64 side = 2 * pow5(m - c.addr.depth());
    for (int a = 0; a < k; ++a) {
        b.lo.push_back(2 * c.addr.corner_at(a, m));
        b.hi.push_back(b.lo.back() + side);
    }
    return b;
}

std::string label_str(const LatticeKey& k)
{
    std::string s;
    for (auto& [st, l] : k.labels) {
        s += std::to_string(st);
        s += l ? '+' : '-';
    }
    return s;
}

// which plane edges (axis, side) a half cell keeps
bool half_has_face(const Shape& sh, int axis, int side)
{
    if (!sh.half || (axis != sh.a && axis != sh.b)) return true;
    const bool isA = axis == sh.a;
    if (!sh.anti) {
        if (!sh.upper) return isA ? side == 1 : side == 0;
        return isA ? side == 0 : side == 1;
    }
    if (!sh.upper) return side == 0;
    return side == 1;
}

} // namespace

std::vector<FaceRecord> cell_faces(const StageComplex& sc, int ci, int m)
{
    const auto& c = sc.cells[static_cast<std::size_t>(ci)];
    const int k = c.addr.k;
    const BoxExt bx = cell_box(c, m);
    std::vector<FaceRecord> out;
    for (int axis = 0; axis < k; ++axis) {
        const bool tri = c.shape.half && axis != c.shape.a && axis != c.shape.b;
        for (int side = 0; side < 2; ++side) {
            if (!half_has_face(c.shape, axis, side)) continue;
            FaceRecord f;
            f.cell = ci;
            f.sign = side ? 1 : -1;
            std::vector<i64> centre(static_cast<std::size_t>(k));
            for (int a = 0; a < k; ++a) {
                if (a == axis) continue;
                f.box.push_back({bx.lo[static_cast<std::size_t>(a)], bx.hi[static_cast<std::size_t>(a)]});
                centre[static_cast<std::size_t>(a)] = (bx.lo[static_cast<std::size_t>(a)] + bx.hi[static_cast<std::size_t>(a)]) / 2;
            }
            const i64 coord = side ? bx.hi[static_cast<std::size_t>(axis)] : bx.lo[static_cast<std::size_t>(axis)];
            centre[static_cast<std::size_t>(axis)] = coord;
            f.axis = axis;
            f.coord = coord;
            if (tri) {
                // triangle face: probe the labels at the triangle's centroid (scale 6 keeps it integral)
                const auto pc = c.shape.plane_corners();
                i64 sa = 0, sb = 0;
                const i64 w = bx.hi[static_cast<std::size_t>(c.shape.a)] - bx.lo[static_cast<std::size_t>(c.shape.a)];
                for (auto& p : pc) {
                    sa += p[0];
                    sb += p[1];
                }
                std::vector<i64> cen6(static_cast<std::size_t>(k));
                for (int a = 0; a < k; ++a) cen6[static_cast<std::size_t>(a)] = 3 * centre[static_cast<std::size_t>(a)];
                cen6[static_cast<std::size_t>(c.shape.a)] = 3 * bx.lo[static_cast<std::size_t>(c.shape.a)] + w * sa;
                cen6[static_cast<std::size_t>(c.shape.b)] = 3 * bx.lo[static_cast<std::size_t>(c.shape.b)] + w * sb;
                f.context = label_str(lattice_key(c.addr, cen6, m, 6));
                f.tri = true;
                f.tri_upper = c.shape.upper;
                f.group = "T" + std::to_string(axis) + "@" + std::to_string(coord) + "|" + f.context + "|" +
                          std::to_string(bx.lo[static_cast<std::size_t>(c.shape.a)]) + "," +
                          std::to_string(bx.lo[static_cast<std::size_t>(c.shape.b)]) + "," + std::to_string(w) +
                          (c.shape.anti ? "a" : "m");
            } else {
                f.context = label_str(lattice_key(c.addr, centre, m, 2));
                f.group = "A" + std::to_string(axis) + "@" + std::to_string(coord) + "|" + f.context;
            }
            out.push_back(std::move(f));
        }
    }
    if (c.shape.half) {
        FaceRecord f;
        f.cell = ci;
        f.diagonal = true;
        f.sign = c.shape.upper ? -1 : 1;
        CellAddress frame = c.addr;
        f.group = "D" + frame.str() + (c.shape.anti ? "a" : "m") + std::to_string(c.shape.a) + std::to_string(c.shape.b);
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

struct Group {
    std::vector<FaceRecord> faces;
};

std::map<std::string, Group> collect_groups(const StageComplex& sc, int m)
{
    std::map<std::string, Group> groups;
    for (int i = 0; i < static_cast<int>(sc.cells.size()); ++i)
        for (auto& f : cell_faces(sc, i, m)) groups[f.group].faces.push_back(std::move(f));
    return groups;
}

bool boxes_overlap(const std::vector<std::array<i64, 2>>& a, const std::vector<std::array<i64, 2>>& b)
{
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::min(a[i][1], b[i][1]) <= std::max(a[i][0], b[i][0])) return false;
    return true;
}

} // namespace

std::vector<std::vector<int>> face_adjacency(const StageComplex& sc)
{
    std::vector<std::vector<int>> adj(sc.cells.size());
    auto groups = collect_groups(sc, sc.resolution);
    for (auto& [name, g] : groups) {
        const auto& fs = g.faces;
        for (std::size_t i = 0; i < fs.size(); ++i)
            for (std::size_t j = i + 1; j < fs.size(); ++j) {
                if (fs[i].cell == fs[j].cell) continue;
                if (!fs[i].diagonal && !boxes_overlap(fs[i].box, fs[j].box)) continue;
                adj[static_cast<std::size_t>(fs[i].cell)].push_back(fs[j].cell);
                adj[static_cast<std::size_t>(fs[j].cell)].push_back(fs[i].cell);
            }
    }
    for (auto& v : adj) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return adj;
}

std::vector<BoundaryPiece> boundary_chain(const StageComplex& sc, int m)
{
    int W = 0;
    for (const auto& c : sc.cells) W = std::max(W, c.weight_exp);
    auto groups = collect_groups(sc, m);
    std::vector<BoundaryPiece> out;
    auto wnum = [&](const FaceRecord& f) -> i64 {
        if (f.wnum_override != 0) return f.wnum_override;
        return static_cast<i64>(f.sign) * (i64(1) << (W - sc.cells[static_cast<std::size_t>(f.cell)].weight_exp));
    };
    auto emit = [&](int cell, std::vector<std::array<i64, 2>> box, bool diag, i64 net, int axis = -1, i64 coord = 0, bool tri = false,
                    bool tri_upper = false) {
        if (net == 0) return;
        BoundaryPiece p;
        p.cell = cell;
        p.box = std::move(box);
        p.diagonal = diag;
        p.net = mpq_class(net) * dyadic(W);
        p.axis = axis;
        p.coord = coord;
        p.tri = tri;
        p.tri_upper = tri_upper;
        out.push_back(std::move(p));
    };
    // triangle faces first: merge matching halves of one frame into a square face
    std::map<std::string, std::vector<FaceRecord>> rect_groups;
    for (auto& [name, g] : groups) {
        if (name[0] == 'A') {
            for (auto& f : g.faces) rect_groups[name].push_back(f);
        } else if (name[0] == 'D') {
            i64 net = 0;
            for (auto& f : g.faces) net += wnum(f);
            emit(g.faces.front().cell, {}, true, net);
        }
    }
    // triangle faces: complementary halves of one frame with equal net weight merge into a square face
    for (auto& [name, g] : groups) {
        if (name[0] != 'T') continue;
        i64 net[2] = {0, 0};
        int owner[2] = {-1, -1};
        for (auto& f : g.faces) {
            net[f.tri_upper ? 1 : 0] += wnum(f);
            owner[f.tri_upper ? 1 : 0] = f.cell;
        }
        const i64 common = net[0] == net[1] ? net[0] : 0;
        if (common != 0) {
            const FaceRecord& f0 = g.faces.front();
            FaceRecord sq = f0;
            const auto& c = sc.cells[static_cast<std::size_t>(f0.cell)];
            const BoxExt bx = cell_box(c, m);
            sq.box.clear();
            for (int a = 0; a < c.addr.k; ++a)
                if (a != f0.axis) sq.box.push_back({bx.lo[static_cast<std::size_t>(a)], bx.hi[static_cast<std::size_t>(a)]});
            sq.tri = false;
            sq.wnum_override = common;
            rect_groups["A" + std::to_string(f0.axis) + "@" + std::to_string(f0.coord) + "|" + f0.context].push_back(sq);
        }
        for (int h = 0; h < 2; ++h)
            if (net[h] != common) emit(owner[h], g.faces.front().box, false, net[h] - common, g.faces.front().axis, g.faces.front().coord, true, h == 1);
    }
    for (auto& [name, fs] : rect_groups) {
        const std::size_t dim = fs.front().box.size();
        std::vector<std::vector<i64>> brk(dim);
        for (auto& f : fs)
            for (std::size_t a = 0; a < dim; ++a) {
                brk[a].push_back(f.box[a][0]);
                brk[a].push_back(f.box[a][1]);
            }
        for (auto& b : brk) {
            std::sort(b.begin(), b.end());
            b.erase(std::unique(b.begin(), b.end()), b.end());
        }
        if (dim == 0) {
            i64 net = 0;
            for (auto& f : fs) net += wnum(f);
            emit(fs.front().cell, {}, false, net, fs.front().axis, fs.front().coord);
            continue;
        }
        const std::size_t nx = brk[0].size() - 1;
        const std::size_t ny = dim > 1 ? brk[1].size() - 1 : 1;
        std::vector<i64> acc(nx * ny, 0);
        std::vector<int> own(nx * ny, -1);
        for (auto& f : fs) {
            auto idx = [&](std::size_t a, i64 v) {
                return static_cast<std::size_t>(std::lower_bound(brk[a].begin(), brk[a].end(), v) - brk[a].begin());
            };
            const std::size_t x0 = idx(0, f.box[0][0]), x1 = idx(0, f.box[0][1]);
            std::size_t y0 = 0, y1 = 1;
            if (dim > 1) {
                y0 = idx(1, f.box[1][0]);
                y1 = idx(1, f.box[1][1]);
            }
            const i64 w = wnum(f);
            for (std::size_t x = x0; x < x1; ++x)
                for (std::size_t y = y0; y < y1; ++y) {
                    acc[x * ny + y] += w;
                    if (own[x * ny + y] < 0) own[x * ny + y] = f.cell;
                }
        }
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t y = 0; y < ny; ++y) {
                if (acc[x * ny + y] == 0) continue;
                std::vector<std::array<i64, 2>> box{{brk[0][x], brk[0][x + 1]}};
                if (dim > 1) box.push_back({brk[1][y], brk[1][y + 1]});
                emit(own[x * ny + y], box, false, acc[x * ny + y], fs.front().axis, fs.front().coord);
            }
    }
    return out;
}

} // namespace pur
