#pragma once
// The R^{k+2} tower: the deformation plane e_ξ ⊕ e_ζ cycles with the stage.

#include "pur/r4.hpp"

#include <utility>

namespace pur {

// lexicographic order of {(ξ,ζ) : 1 <= ξ < ζ <= k}, 1-based
std::pair<int, int> plane_for_stage(int j, int k);
int plane_count(int k); // C(k,2)

AffineTower build_tower_rk(int k, TowerConfig c = {});

// Φ on every template cell is constant along the axes off the deformation plane:
// checked on the Jacobian and at vertex pairs differing only along those axes.
struct FiberConstancy {
    int j = 0;
    std::size_t cells = 0, vertex_pairs = 0;
    double max_jacobian = 0.0, max_vertex = 0.0;
    bool pass() const { return cells > 0 && max_jacobian <= 1e-40 && max_vertex <= 1e-40; }
};
FiberConstancy fiber_constancy(const AffineTower& T, int j);

} // namespace pur
