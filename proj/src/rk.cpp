#include "pur/rk.hpp"

#include <algorithm>

namespace pur {

int plane_count(int k)
{
    if (k < 2) throw std::invalid_argument("plane_count: k >= 2 required");
    return k * (k - 1) / 2;
}

std::pair<int, int> plane_for_stage(int j, int k)
{
    if (k < 2) throw std::invalid_argument("plane_for_stage: k >= 2 required");
    if (j < 0) throw std::invalid_argument("plane_for_stage: j >= 0 required");
    int r = j % plane_count(k);
    for (int xi = 1; xi <= k; ++xi)
        for (int zeta = xi + 1; zeta <= k; ++zeta)
            if (r-- == 0) return {xi, zeta};
    return {1, 2};
}

AffineTower build_tower_rk(int k, TowerConfig c)
{
    c.k = k;
    return build_affine_tower(c);
}

FiberConstancy fiber_constancy(const AffineTower& T, int j)
{
    FiberConstancy F;
    F.j = j;
    if (j < 1) return F;
    const auto& st = *T.stages.at(static_cast<std::size_t>(j));
    const auto& S = st.embedding;
    const auto& prev = T.stage(j - 1);
    hp mj = 0, mv = 0;
    for (std::size_t c = 0; c < S.complex.cells.size(); ++c) {
        const int app = st.application_of[c];
        if (app < 0) continue;
        ++F.cells;
        const auto& A = st.applications[static_cast<std::size_t>(app)];
        const auto& P = S.pieces[c];
        const auto& Q = prev.pieces[static_cast<std::size_t>(A.par)];
        std::vector<int> off;
        for (int a = 0; a < S.k; ++a)
            if (a != A.plane[0] && a != A.plane[1]) off.push_back(a);
        for (int a : off)
            for (int d = 0; d < S.dim; ++d) mj = std::max(mj, abs(P.Jat(d, a) - Q.Jat(d, a)));
        if (off.empty()) continue;
        // Φ at corners differing only along off-plane axes
        const auto bits = cell_corner_bits(S.complex.cells[c]);
        const Frame fr = cell_frame(S.complex.cells[c].addr);
        auto phi_at = [&](const std::vector<int>& b) {
            std::vector<hp> x;
            for (int a = 0; a < S.k; ++a) x.push_back(to_hp(fr.corner[static_cast<std::size_t>(a)] + fr.side * b[static_cast<std::size_t>(a)]));
            auto v = P.eval(x);
            const auto w = Q.eval(x);
            for (std::size_t d = 0; d < v.size(); ++d) v[d] -= w[d];
            return v;
        };
        for (std::size_t s = 0; s < bits.size(); ++s)
            for (std::size_t t = s + 1; t < bits.size(); ++t) {
                bool only_off = true;
                for (int a = 0; a < S.k; ++a)
                    if (bits[s][static_cast<std::size_t>(a)] != bits[t][static_cast<std::size_t>(a)] &&
                        std::find(off.begin(), off.end(), a) == off.end())
                        only_off = false;
                if (!only_off) continue;
                ++F.vertex_pairs;
                mv = std::max(mv, dist(phi_at(bits[s]), phi_at(bits[t])));
            }
    }
    F.max_jacobian = to_d(mj);
    F.max_vertex = to_d(mv);
    return F;
}

} // namespace pur
