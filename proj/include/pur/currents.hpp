#pragma once
// Stage currents N_n = Σ sign·2^{-w}·[[cell]] pushed forward by the stage
// embeddings, evaluated against sampled forms f dg_1 ∧ ... ∧ dg_k.

#include "pur/embedding.hpp"
#include "pur/hilbert.hpp"
#include "pur/r4.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pur {

struct StageCurrent {
    const StageEmbedding* stage = nullptr;
    int k = 2;
    std::vector<int> sign;
    std::vector<int> weight_exp;

    mpq_class mass() const; // Σ 2^{-w}·vol, exact
};
StageCurrent stage_current(const StageEmbedding& S);
StageCurrent flipped(const StageCurrent& N);

using AmbientFn = std::function<double(const std::vector<double>&)>;
using AmbientGrad = std::function<std::vector<double>(const std::vector<double>&)>;

// f dg_1 ∧ ... ∧ dg_k on R^dim. Only f and the gradients of g_i enter the
// evaluation. `affine` marks constant f and constant gradients (exact path).
struct SampledForm {
    std::string name;
    int dim = 2;
    int degree = 2;
    AmbientFn f;
    std::vector<AmbientGrad> dg;
    double lipschitz = 1.0; // declared budget, reported only
    bool affine = false;
    double f0 = 1.0;
    std::vector<std::vector<double>> dg0;
};

// dx_{a_1} ∧ ... ∧ dx_{a_k} times the constant c (0-based axes)
SampledForm coordinate_form(int dim, const std::vector<int>& axes, double c = 1.0);
// f·ω and ω1 + ω2 (same g's; the sum adds the f's)
SampledForm times(const SampledForm& w, AmbientFn f, std::string name);
SampledForm sum_forms(const SampledForm& a, const SampledForm& b);
// the fixed battery of five forms used by pushforward_check
std::vector<SampledForm> form_battery(int dim, int k);

// The map a current is pushed forward by, cell by cell.
struct CellMap {
    int dim = 0;
    std::vector<AffinePiece> affine; // one per cell when the map is affine on cells
    std::function<std::vector<double>(int, const std::vector<double>&)> value, jacobian;
    bool is_affine() const { return !affine.empty(); }
};
CellMap embedding_map(const StageEmbedding& S);
// Hilbert: P_{j,i} is truncation to the first 2i+2 coordinates
CellMap truncated_map(const StageEmbedding& S, int dim);
// affine towers: P_{j,i}∘F_j is affine on each cell; it is fitted from k+1
// interior points pushed through RN(j-1), ..., RN(i). `failed` counts cells
// whose points left a neighbourhood.
CellMap projected_map(const AffineTower& T, int j, int i, std::size_t* failed = nullptr);

struct Evaluation {
    double value = 0.0;
    double error = 0.0; // |high − low| quadrature estimate, 0 on the exact path
    bool exact = false;
};
// Quadrature path: cell simplices are red-refined until edges along the axes are
// at most max_edge, then a degree-5 (k=2) or degree-3 (k=3) rule is compared
// against a degree-2 rule for the error column. Negative max_edge picks 0.04 (k=2)
// or 0.13 (k=3).
Evaluation eval_current(const StageCurrent& N, const SampledForm& w, const CellMap& F, double max_edge = -1);
Evaluation eval_current(const StageCurrent& N, const SampledForm& w);

struct FormComparison {
    std::string form;
    double at_i = 0.0, at_j = 0.0, diff = 0.0, quad_error = 0.0;
};
struct PushforwardReport {
    std::string tower;
    int i = 0, j = 0;
    double tolerance = 1e-6;
    std::size_t failed_cells = 0;
    std::vector<FormComparison> forms;
    bool pass() const;
};
PushforwardReport pushforward_check(const AffineTower& T, int i, int j, double tol = 1e-6);
PushforwardReport pushforward_check(const HilbertTower& T, int i, int j, double tol = 1e-6);

// Mass of the boundary chain after cancellation, faces measured in the ambient
// metric through F (segment lengths for k = 2, areas for k = 3).
double boundary_mass(const StageEmbedding& S);

// Every cell split into its 5^{k·times} children, same map and weights, no covers
// added. Whole cells only.
StageEmbedding plain_subdivision(const StageEmbedding& S, int times);

} // namespace pur
