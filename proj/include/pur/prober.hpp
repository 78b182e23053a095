#pragma once
// Hole search over annulus rings, the sheet-tracking walk with its (ShSep)
// witness, cumulative products and the δ-schedule divergence arithmetic.
//
// Probes run on the Hilbert tower, where the base point of F_n(x) is its first
// two coordinates.

#include "pur/branched_cover.hpp"
#include "pur/hilbert.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pur {

// ---- constants ------------------------------------------------------------------------------

// smallest i with 5^{-i} <= 5^{-n-2-N'} c δ_n, where N' = 0 (Hilbert, N = 0) or N + 3
int compute_in(int n, double c, const mpq_class& delta_n, int N = 0);
double choose_c(double C, double glipF);                     // 10^{-6}/(C + glip F)
double choose_c_rk(int k, double C, double glipF);           // 10^{-6}/(√k C + glip F)
// sup of the c for which 16(√k C + glip F)·c < 5^{-3}/(2 glip F_0)
double c_threshold_rk(int k, double C, double glipF, double glipF0 = 1.0);

// ---- surfaces --------------------------------------------------------------------------------

using GraphMap = std::function<std::vector<double>(const std::vector<double>&)>;

// Domain: indicator over the cells of `window` at `depth` levels below it,
// row-major in window-local integer coordinates (index j·5^depth + i).
struct ProbeSurface {
    std::string name;
    CellAddress window;
    int depth = 0;
    std::vector<std::uint8_t> domain;
    int dim = 2;
    GraphMap graph;
    double C = 1.0;        // declared Lipschitz constant
    double bilip = 1.0;    // declared bi-Lipschitz constant

    i64 side_cells() const { return pow5(depth); }
    bool hits(i64 i, i64 j) const { return domain[static_cast<std::size_t>(j * side_cells() + i)] != 0; }
    std::size_t marked() const;
};

std::vector<i64> rle_encode(const std::vector<std::uint8_t>& bits); // runs, first run counts zeros
std::vector<std::uint8_t> rle_decode(const std::vector<i64>& runs, std::size_t size);

// graph maps into the ambient space of S
GraphMap flat_graph(int dim);
GraphMap tilt_graph(int dim, double slope); // (x, slope·x_1, 0, ...)
GraphMap single_sheet_graph(const StageEmbedding& S, int bit = 0);
// bilinear interpolation of a vertex table over the window ((5^depth+1)² rows)
GraphMap table_graph(const CellAddress& window, int depth, int dim, std::vector<std::vector<double>> table);

// Marks the cells whose centre is mapped within `tol` of Y_n = F_n(X_n).
ProbeSurface make_surface(const StageEmbedding& S, std::string name, const CellAddress& window, int depth, GraphMap g,
                          double C, double tol = 1e-12);
ProbeSurface empty_surface(const StageEmbedding& S, const CellAddress& window, int depth);
// flat, tilts 1/4, 1/2, 1, single sheet (bit 0), empty
std::vector<ProbeSurface> surface_battery(const StageEmbedding& S, const CellAddress& window, int depth);

// ---- probing ---------------------------------------------------------------------------------

struct SheetWitness {
    int alpha = 0;          // the pair (alpha, alpha+1 mod t) where the walk breaks
    bool across_sigma = false;
    CoverPoint p, q_claimed, q_lift; // child units of Q; q_lift = lift of the segment p → q
    double base_dist = 0.0;          // child units
    double dtheta = 0.0;
    bool shsep_separates = false;    // (ShSep) verdict on (p, base of q)
    double ambient_dist = 0.0;       // |Φ_n(p) − Φ_n(q)|
    double lip_bound = 0.0;          // 4C·c·5^{-n}δ_n with the run's c
    double separation = 0.0;         // |F_n(q on its two sheets)|, same base point
    double sep_lower = 0.0;          // 5^{-n-3}δ_n/2
};

enum class ProbeOutcome { hole_found, contradiction };

struct AnnulusProbe {
    int ring = 0;
    int layer = 0;
    std::size_t cells = 0;
    ProbeOutcome outcome = ProbeOutcome::hole_found;
    std::optional<CellAddress> hole; // first missed cell in ring order
    std::size_t missed = 0;
    std::optional<SheetWitness> witness;
    // distance chain over the walked consecutive pairs other than the break
    double max_step = 0.0;    // max |Φ_n(p_α) − Φ_n(p_{α+1})|
    double min_sep = 0.0;     // min fiber separation at the p_α
    std::size_t lip_violations = 0;
};

struct ProbeCertificate {
    std::string surface;
    int n = 0;
    CellAddress q;
    int ring_depth = 0;   // relative to Q
    double c = 0.0, c_small = 0.0, gamma = 0.0, G = 10.0;
    int i_n = 0;
    double delta_n = 0.0;
    std::vector<AnnulusProbe> annuli;
    double hole_measure = 0.0; // one hole cell per holed ring
    double parent_measure = 0.0;
    double product = 1.0;      // 1 − γδ_n
    // 8(C + glip F)·c_small < 5^{-3}/2: the inequality that makes the walk contradictory
    double chain_upper = 0.0, chain_lower = 0.0;
    std::size_t holes() const;
    std::size_t contradictions() const;
    std::size_t lip_violations() const;
};

struct ProbeConfig {
    double c = 2.5;        // run constant; rings sit i_n − (n−1) levels below Q
    double glipF = 1.12;   // Lipschitz constant of the limit embedding used in the chain
    double G = 10.0;
};

// One probe of Q ∈ Sq_{n-1}(Y_0) at stage n = S.stage; ring depth from compute_in.
int ring_depth_for(int n, const DeltaSchedule& s, double c);
ProbeCertificate probe_cell(const StageEmbedding& S, const DeltaSchedule& sched, const ProbeSurface& surf,
                            const CellAddress& q, const ProbeConfig& cfg = {});
AnnulusProbe probe_annulus(const StageEmbedding& S, const DeltaSchedule& sched, const ProbeSurface& surf,
                           const CellAddress& q, const Annulus& A, int ring_index, const ProbeConfig& cfg);
// Recomputes the lift and the (ShSep) verdict of a witness.
bool verify_witness(const CellAddress& q, const SheetWitness& w);

// ---- cumulative bookkeeping --------------------------------------------------------------------

// k_1 = 1, k_{j+1} = k_j + ⌊G log_10(1/δ_{k_j})⌋
std::vector<i64> k_sequence(const DeltaSchedule& s, double G, i64 limit);

struct CumulativeBound {
    std::vector<i64> k;
    std::vector<double> products;   // partial products Π_{i<=j}(1 − γδ_{k_i})
    std::vector<double> delta_sums; // running Σ δ_{k_i}
    double value = 1.0;
};
CumulativeBound cumulative_bound(double gamma, double G, const DeltaSchedule& s, int stages);
CumulativeBound cumulative_bound(const std::vector<ProbeCertificate>& holes, double gamma, double G, const DeltaSchedule& s);

struct DecadeBlock {
    int t = 0;
    mpq_class harmonic_lo;   // Σ_{j=10^t}^{10^{t+1}} 1/j, rounded-down terms
    mpq_class sparse_lo;     // Σ_{10^t <= k_i < 10^{t+1}} δ_{k_i}, rounded-down terms
    std::optional<mpq_class> harmonic_exact, sparse_exact; // small t only
    std::size_t terms = 0;
    i64 max_gap = 0;
    bool harmonic_ok = false;  // ≥ 1/16
    bool sparse_ok = false;    // ≥ 1/(42(t+1))
    bool gap_ok = false;       // ≤ 23(t+1)
    bool sparse_above_16th = false;
};
struct DivergenceCertificate {
    double G = 10.0;
    std::vector<DecadeBlock> blocks;
    mpq_class total_lo, target; // Σ blocks vs Σ 1/(42(t+1))
    bool pass() const;
};
DivergenceCertificate divergence_check(const DeltaSchedule& s, int blocks, double G = 10.0);

} // namespace pur
