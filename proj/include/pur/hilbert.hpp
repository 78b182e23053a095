#pragma once
// The tower F_n : X_n -> R^{2n+2}: every generation-(n-1) cell gets a branched
// cover at stage n and its Ψ_{δ_n} lands in coordinates 2n+1, 2n+2.

#include "pur/deformation.hpp"
#include "pur/embedding.hpp"

#include <cstdint>
#include <stdexcept>

namespace pur {

struct ResourceLimit : std::runtime_error {
    std::size_t count;
    ResourceLimit(const std::string& what, std::size_t c) : std::runtime_error(what), count(c) {}
};

struct HilbertStage {
    int n = 0;
    int ambient_dim = 2;
    StageEmbedding embedding;
    DeltaSchedule schedule;
};

struct HilbertTower {
    DeltaSchedule schedule;
    std::vector<HilbertStage> stages;
};

// Stage complex X_n (cells at depth n).
StageComplex hilbert_complex(int n, std::size_t cell_ceiling);

// F_n on a cell of X_n at a global point x (length 2 + 2·#events).
std::vector<mpq_class> hilbert_eval_exact(const CellAddress& c, const std::vector<mpq_class>& x, const DeltaSchedule& s);
std::vector<double> hilbert_eval(const CellAddress& c, const std::vector<double>& x, const DeltaSchedule& s);
// dF_n, (2+2n) × 2 row-major
std::vector<double> hilbert_jacobian(const CellAddress& c, const std::vector<double>& x, const DeltaSchedule& s);

HilbertTower build_hilbert_tower(int max_stage, const DeltaSchedule& s, std::size_t cell_ceiling = 2000000);
HilbertStage build_stage_hilbert(int n, const DeltaSchedule& s, std::size_t cell_ceiling = 2000000);

// P_i: truncation to the first 2i+2 coordinates of the stage vertex table.
StageEmbedding project_hilbert(const HilbertStage& hi, int i);

struct DiagramReport {
    int i = 0, j = 0;
    std::size_t vertices = 0;
    std::size_t mismatches = 0;
    double max_err = 0.0;
    bool pass() const { return mismatches == 0; }
};
// P_i ∘ F_j = F_i ∘ π_{j,i} at every vertex of X_j, exact rational comparison.
DiagramReport check_diagram_hilbert(const HilbertTower& T, int i, int j);

struct SupMoveReport {
    int i = 0;
    double sup = 0.0;        // max ‖F_{i+1} − F_i∘π‖ over vertices and samples
    double scale = 0.0;      // δ_{i+1}·5^{-i-1}
    double measured_C = 0.0; // sup / scale
    double bound_C = 56.0;
    bool pass() const { return measured_C <= bound_C; }
};
SupMoveReport sup_move_hilbert(const HilbertTower& T, int i, std::size_t samples, std::uint64_t seed);

struct LipschitzReport {
    int n = 0;
    double glip = 0.0;      // sampled sup of ‖dF_n‖ and of pair ratios
    double reference = 0.0; // (1 + Σ_{i<=n} δ_i²)^{1/2}
    double C = 0.0;         // glip / reference
    double budget = 100.0;
    bool pass() const { return C <= budget; }
};
LipschitzReport lipschitz_hilbert(const HilbertStage& st, std::size_t samples, std::uint64_t seed);

struct InjectivityReport {
    int n = 0;
    std::size_t pairs = 0;
    double min_ratio = 0.0; // image distance / (2·dist to ∂Q_a) over fiber pairs
    bool pass() const { return min_ratio > 0.0; }
};
InjectivityReport injectivity_radius_report(const HilbertStage& st, std::size_t samples, std::uint64_t seed);

} // namespace pur
