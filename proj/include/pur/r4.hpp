#pragma once
// Affine towers F_j : X_j -> R^{k+2}. R4 is k = 2; the k-dimensional tower
// (rk.hpp) shares this builder with planes cycled per stage.
//
// Stage 1 deforms the root cell by Φ_{δ1} in e_{k+1}, e_{k+2}. Stage j+1 >= 2
// adapts a window below the centre of X_j to RN(j) and deforms every maximal
// adapted cell Q by Φ_{Q,δ_{j+1}} in the orthonormal complement of τ₀(PAR(Q)).

#include "pur/deformation.hpp"
#include "pur/embedding.hpp"
#include "pur/hilbert.hpp"
#include "pur/radn.hpp"

#include <array>
#include <cstdint>
#include <memory>

namespace pur {

struct TowerConfig {
    int k = 2;
    int max_stage = 2;
    DeltaSchedule schedule = DeltaSchedule::r4();
    int N_cap = 3;
    int window_rel_depth = -1; // window depth below PAR; -1 picks 12 (k = 2) or 13 (k >= 3)
    int depth_ceiling = 16;    // absolute depth ceiling of the adapted search
    int sigma_e_min = -10, sigma_e_max = 6;
    std::size_t claim_samples = 100000;
    std::size_t search_samples = 20000;
    std::uint64_t seed = 20240917;
    std::size_t cell_ceiling = 2000000;
};

// One template placement: Φ_{Q,δ} over base cell Q with directions E.
struct TemplateApplication {
    CellAddress q;
    int par = -1; // piece of the previous stage
    std::array<int, 2> plane{0, 1};
    std::array<std::vector<hp>, 2> E;
    std::size_t first_cell = 0, cells = 0; // range in the new stage
};

struct AffineStage {
    int j = 0;
    StageEmbedding embedding;
    std::array<int, 2> plane{0, 1}; // plane of the deformation that produced this stage
    std::vector<TemplateApplication> applications;
    std::vector<int> application_of; // per cell, -1 for cells inherited from stage j-1
    std::optional<AdaptedSubdivision> adapted; // j >= 2
};

struct AffineTower {
    TowerConfig config;
    std::vector<std::unique_ptr<AffineStage>> stages;
    std::vector<AffineApproximation> approx;           // approx[j] certifies Φ_{δ_{j+1}}
    std::vector<std::shared_ptr<RadNGeometry>> geometry; // per stage j < max_stage
    std::vector<RadialNeighborhood> radn;               // RN(j)
    std::vector<SigmaSearch> sigma;
    std::vector<ClaimCertificate> claims;               // full-sample certificate of RN(j)

    const StageEmbedding& stage(int j) const { return stages.at(static_cast<std::size_t>(j))->embedding; }
    double eps(int j) const; // 2^{-j}
};

// F_0(x) = (x, 0, 0) on the unit k-cube
std::unique_ptr<AffineStage> build_stage0(const TowerConfig& c);
AffineTower build_affine_tower(const TowerConfig& c);
AffineTower build_tower_r4(TowerConfig c = {});

// Φ_{Q,δ} placed over Q with directions E inside piece `par` of `prev`.
void apply_template(const AffineApproximation& A, const StageEmbedding& prev, int par, const CellRecord& q,
                    std::array<int, 2> plane, const std::array<std::vector<hp>, 2>& E, AffineStage& out);

// composite projection P_{j,i} = P_i ∘ ... ∘ P_{j-1}; nullopt when a point leaves RN(t)
std::optional<std::vector<hp>> project_down(const AffineTower& T, int j, int i, std::vector<hp> p);
// F_i ∘ π_{j,i} at a base point of cell `cell` of stage j
std::vector<hp> eval_ancestor(const AffineTower& T, int j, int cell, int i, const std::vector<hp>& x);

// exact vertex coordinates (base) of every vertex of stage j, with a cell seeing it
struct VertexSite {
    int cell = -1;
    std::vector<mpq_class> x;
};
std::vector<VertexSite> vertex_sites(const StageEmbedding& S);

// P_{j,i}(F_j(v)) = F_i(π v) at every vertex, absolute tolerance 1e-30
DiagramReport check_diagram_affine(const AffineTower& T, int i, int j);
// ‖F_{j+1} − F_j∘π‖ against 5^{-j}·δ_{j+1}
SupMoveReport sup_move_affine(const AffineTower& T, int j, std::size_t samples, std::uint64_t seed);

struct LipschitzInterval {
    int j = 0;
    double lo = 0.0, hi = 0.0;                 // [1/16, 23]·(1+Σ_{m<=j} δ_m²)^{1/2}
    double min_piece = 0.0, max_piece = 0.0;   // extreme per-piece σ_max
    std::size_t pieces = 0, violations = 0;
    bool pass() const { return violations == 0; }
};
LipschitzInterval lipschitz_interval(const AffineTower& T, int j);

struct DirectionSets {
    int j = 0;
    std::size_t th0 = 0;           // |Th₀(j)|
    std::size_t th = 0;            // |Th(j)| (affine planes)
    bool same_across_cells = true; // Th₀ contributed by each template placement is the same set
    std::size_t placements = 0;
    double frame_error = 0.0;      // orthonormality of (e1,e2) and orthogonality to τ₀(PAR)
    bool pass() const { return same_across_cells && frame_error <= 1e-40; }
};
DirectionSets direction_sets(const AffineTower& T, int j);

struct CompositeReport {
    int j = 0; // pairs in RN(j) mapped by P_{j+1,0}
    std::size_t pairs = 0;
    double max_ratio = 0.0;
    double bound = 0.0; // Π_{t<=j}(1+ε_t)
    bool pass() const { return pairs > 0 && max_ratio <= bound; }
};
CompositeReport composite_lipschitz(const AffineTower& T, int j, std::size_t samples, std::uint64_t seed);

struct FiberSeparation {
    int j = 0;
    std::size_t pairs = 0;
    double min_sep = 0.0; // min ‖F(x, sheet 0) − F(x, sheet 1)‖ over sampled base points
    bool pass() const { return pairs > 0 && min_sep > 0.0; }
};
FiberSeparation fiber_separation(const AffineTower& T, int j, std::size_t samples, std::uint64_t seed);

} // namespace pur
