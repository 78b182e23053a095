#pragma once
// Radial-basis neighbourhoods RN(j) of an affine stage image Y_j, the nearest
// chart projection P_j, (Claim j) sampling certificates, the σ search and the
// adapted subdivision.

#include "pur/embedding.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>

namespace pur {

struct PreconditionRefused : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometry of one affine piece used by RN(j).
struct PieceGeometry {
    BasePolytope poly;
    PlaneFrame frame;
    std::vector<hp> facet_scale; // image distance per unit of base facet slack
    hp diam;                     // diam F(Q)
    std::vector<std::vector<hp>> image_vertices;
    std::vector<hp> corner;      // frame corner and side in the base
    hp side;
    // x = Pinv (p - c), Pinv = R^{-1} Q^T (k × dim, row-major)
    std::vector<hp> pinv;
    std::vector<double> pinv_d;
    double side_d = 0.0, diam_d = 0.0;
    std::vector<double> lo, hi; // bounding box of the image in the first k coordinates
};

class PieceIndex; // spatial index over the first k ambient coordinates

struct RadNGeometry {
    const StageEmbedding* stage = nullptr;
    std::vector<PieceGeometry> pieces;
    std::vector<std::vector<int>> partners; // other sheets over the same base region
};
std::shared_ptr<RadNGeometry> build_radn_geometry(const StageEmbedding& S);

struct Membership {
    int piece = -1;
    std::vector<hp> x;    // base point
    std::vector<hp> foot; // F(x) = P_j(p)
    hp y_norm;
    int members = 0;      // number of pieces claiming p
};

class RadialNeighborhood {
public:
    RadialNeighborhood(std::shared_ptr<RadNGeometry> g, hp sigma, int stage_j);

    int stage() const { return j_; }
    const hp& sigma() const { return sigma_; }
    const RadNGeometry& geometry() const { return *g_; }

    // in-plane distance from F(x) to F(∂Q)
    hp boundary_distance(int piece, const std::vector<hp>& x) const;
    // 46·diam F(Q)·exp(−σ / dist(F(x), F(∂Q))), zero on the boundary
    hp phi(int piece, const std::vector<hp>& x) const;
    // p = F(x) + y with y ⊥ τ(Q), ‖y‖ <= φ_Q(x)
    std::optional<Membership> member(const std::vector<hp>& p) const;
    std::optional<std::vector<hp>> project(const std::vector<hp>& p) const;

    // every piece whose tube contains p, with its foot point
    std::vector<Membership> members(const std::vector<hp>& p) const;
    // pieces whose base region contains x (through the image index)
    std::vector<int> locate_base(const std::vector<hp>& x, const std::vector<double>& image_hint) const;
    // base point of p in the chart of `piece` and the normal part y
    void chart(int piece, const std::vector<hp>& p, std::vector<hp>& x, std::vector<hp>& y) const;

    static constexpr const char* anchor = "radial-basis function";
    static hp tolerance();

private:
    std::vector<int> candidates(const std::vector<double>& p) const;

    std::shared_ptr<RadNGeometry> g_;
    hp sigma_;
    int j_ = 0;
    std::vector<double> phi_upper_;
    std::shared_ptr<PieceIndex> index_;
};

RadialNeighborhood build_radn(const StageEmbedding& S, const hp& sigma);

struct ClaimWitness {
    std::string stratum;
    std::vector<double> p, q;
    double ratio = 0.0;
    std::string reason;
};

struct ClaimCertificate {
    int j = 0;
    double sigma = 0.0;
    double eps = 0.0;
    std::size_t pairs = 0;
    std::size_t same = 0, adjacent = 0, stacked = 0, distant = 0;
    double max_ratio = 0.0;
    double drift_max = 0.0;   // sup ‖P_j(p) − p‖ over sampled members
    double drift_bound = 0.0; // 100·5^{-j}
    double precondition_lhs = 0.0;
    std::size_t skipped = 0;   // constructed points that fell outside RN(j)
    std::size_t ambiguous = 0; // points claimed by several tubes
    std::vector<ClaimWitness> failures;
    bool pass() const { return failures.empty() && max_ratio <= 1.0 + eps && drift_max <= drift_bound; }
};

// Refuses (PreconditionRefused) when the schedule violates the Σδ² smallness condition.
// `samples` certified pairs, stratified over same / adjacent / stacked / distant pieces
ClaimCertificate certify_claim_j(const RadialNeighborhood& rn, const DeltaSchedule& sched, double eps, std::size_t samples,
                                 std::uint64_t seed, bool stop_on_failure = false);

// uniform point of the base region of a (half) cell
std::vector<hp> sample_base_point(const CellRecord& c, std::mt19937_64& g);

// Random member point of RN(j) over a piece (for drift and composite checks).
std::vector<hp> sample_member(const RadialNeighborhood& rn, int piece, std::mt19937_64& g, double y_fraction);

struct SigmaSearch {
    int exponent = 0; // σ = 2^exponent
    hp sigma;
    std::vector<std::pair<int, double>> tried; // (exponent, max ratio)
    ClaimCertificate certificate;              // the passing one
};
// Smallest σ = 2^e, e in [e_min, e_max], whose certificate passes.
SigmaSearch find_sigma(const StageEmbedding& S, const DeltaSchedule& sched, double eps, int e_min, int e_max,
                       std::size_t samples, std::uint64_t seed);

// ---- adapted subdivision ------------------------------------------------------------
struct AdaptedCell {
    CellAddress addr;
    int par_piece = -1;
    int rel_depth = 0;
    double D_Q = 0.0, rho = 0.0, D_par = 0.0, tube_lhs = 0.0;
    bool size_ok = false; // exact rational clause
    bool tube_ok = false;
};

struct AdaptedSubdivision {
    int stage = 0;
    CellAddress window;
    std::vector<AdaptedCell> cells;       // maximal adapted cells inside the window
    std::vector<CellRecord> coarse;       // siblings of the window path; keep F_{j+1} = F_j
    std::vector<AdaptedCell> rejected;    // path and window cells that failed, for the report
    std::vector<std::size_t> depth_histogram; // by absolute depth
};

struct AdaptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Both clauses of the adapted predicate for a base cube Q inside piece `par`.
AdaptedCell adapted_predicate(const RadialNeighborhood& rn, int par, const CellAddress& q, const mpq_class& delta);

// Refines inside `window` (a cell lying in one whole-square piece of stage j)
// breadth-first until every cell is adapted; throws AdaptError past depth_ceiling.
AdaptedSubdivision adapt_subdivide(const RadialNeighborhood& rn, const mpq_class& delta, const CellAddress& window,
                                   int depth_ceiling);

} // namespace pur
