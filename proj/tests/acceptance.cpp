// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Builds the Hilbert tower to stage 3 and the R^4 and R^{3+2} towers to stage 2
// with the default budgets.

#include "pur/bundle.hpp"
#include "pur/rk.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace pur;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail)
{
    std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string num(double x)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", x);
    return b;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<mpq_class> deltas()
{
    return {DeltaSchedule::hilbert().delta(1), DeltaSchedule::hilbert().delta(2), DeltaSchedule::r4().delta(1),
            DeltaSchedule::r4().delta(2)};
}

// ---- 1 -----------------------------------------------------------------------------------
void closed_forms()
{
    bool ok = true;
    for (const auto& d : deltas()) {
        const mpq_class L(1, 5);
        ok = ok && h1<mpq_class>(0, d) == 0 && h1<mpq_class>(1, d) == d / 2 && h1<mpq_class>(2, d) == d &&
             h1<mpq_class>(3, d) == d / 2 && h1<mpq_class>(4, d) == 0;
        ok = ok && h2<mpq_class>(0, d) == 0 && h2<mpq_class>(1, d) == -d && h2<mpq_class>(2, d) == 0 &&
             h2<mpq_class>(3, d) == d && h2<mpq_class>(4, d) == 0;
        ok = ok && phi_cutoff<mpq_class>(0, L) == 0 && phi_cutoff<mpq_class>(L / 5, L) == L &&
             phi_cutoff<mpq_class>(4 * L / 5, L) == L && phi_cutoff<mpq_class>(L, L) == 0;
        mpq_class m1 = 0, m2 = 0, mp = 0;
        for (const auto& s : h1_slopes(d)) m1 = qmax(m1, qabs(s));
        for (const auto& s : h2_slopes(d)) m2 = qmax(m2, qabs(s));
        for (const auto& s : phi_slopes()) mp = qmax(mp, qabs(s));
        // slopes in u = θ/π: δ/2 and δ are δ/2π and δ/π per radian
        ok = ok && m1 == d / 2 && m2 == d && mp == 5;
    }
    report(1, "closed-form exactness", ok, "h1, h2, phi breakpoints and slope maxima, exact, 4 values of delta");
}

// ---- 2 -----------------------------------------------------------------------------------
void hlow()
{
    bool ok = true;
    double worst = 1e9;
    for (const auto& d : deltas()) {
        const auto H = certify_hlow(d, 100000);
        ok = ok && H.pass && H.min_sq >= d * d / 4 && H.grid_points == 100000;
        worst = std::min(worst, H.grid_min / d.get_d());
    }
    report(2, "fiber gap lower bound", ok, "exact min at breakpoints and critical points >= delta/2; grid min / delta = " + num(worst));
}

// ---- 3 -----------------------------------------------------------------------------------
void basic_maps()
{
    const mpq_class D = DeltaSchedule::hilbert().delta(1), L(1, 5);
    std::mt19937_64 g(31);
    std::size_t pairs = 0, bad_sep = 0, bad_norm = 0;
    while (pairs < 10000) {
        const mpq_class X(static_cast<long>(g() % 3000) + 1000, 1000), Y(static_cast<long>(g() % 3000) + 1000, 1000);
        const auto ch = child_of(X.get_d(), Y.get_d());
        if (child_role(ch[0], ch[1]) != Role::annulus || Y == 2) continue;
        if (X.get_d() == ch[0] || Y.get_d() == ch[1]) continue;
        ++pairs;
        const auto a = psi_value<mpq_class>(X, Y, ch[0], ch[1], 0, D, L);
        const auto b = psi_value<mpq_class>(X, Y, ch[0], ch[1], 1, D, L);
        const mpq_class phi = phi_cutoff<mpq_class>(polar_chart<mpq_class>(X, Y, ch[0], ch[1], 0).r * L, L);
        const mpq_class gap = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
        if (gap < D * D / 4 * phi * phi) ++bad_sep;
        if (a[0] * a[0] + a[1] * a[1] > D * D * 50 * L * L) ++bad_norm;
    }
    double glip = 0;
    for (int s = 0; s < 40000; ++s) {
        const double X = 1 + 3 * u01(g), Y = 1 + 3 * u01(g);
        const auto ch = child_of(X, Y);
        if (child_role(ch[0], ch[1]) != Role::annulus || Y == 2.0) continue;
        glip = std::max(glip, sigma_max(psi_jet(X, Y, ch[0], ch[1], static_cast<int>(g() & 1), D.get_d(), L.get_d()).d));
    }
    const double d = D.get_d();
    const bool ok = bad_sep == 0 && bad_norm == 0 && glip >= d && glip <= 7 * d * 1.05;
    report(3, "basic map bounds", ok,
           std::to_string(pairs) + " exact fiber pairs, " + std::to_string(bad_sep) + " separation and " + std::to_string(bad_norm) +
               " norm violations; sampled glip / delta = " + num(glip / d));
}

// ---- 4 -----------------------------------------------------------------------------------
void affine_certification()
{
    bool ok = true;
    std::string detail;
    for (const auto& d : deltas()) {
        const auto A = find_affine_approx(d, 3);
        ok = ok && A.certified_bounds.ok();
        detail += "N=" + std::to_string(A.N) + " (" + std::to_string(A.certified_bounds.triangles_checked) + " triangles) ";
    }
    report(4, "piecewise-affine certification", ok, detail + "glip, separation, sup exact per piece");
}

// ---- 5 -----------------------------------------------------------------------------------
void diagrams(const HilbertTower& H, const AffineTower& R4, const AffineTower& RK)
{
    std::size_t bad = 0, pairs = 0;
    std::string detail;
    for (int i = 0; i < static_cast<int>(H.stages.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(H.stages.size()); ++j, ++pairs) bad += check_diagram_hilbert(H, i, j).mismatches;
    detail += "hilbert " + std::to_string(bad);
    for (const auto* T : {&R4, &RK}) {
        std::size_t b = 0;
        for (int i = 0; i < static_cast<int>(T->stages.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(T->stages.size()); ++j, ++pairs) {
                const auto D = check_diagram_affine(*T, i, j);
                b += D.mismatches;
                if (D.mismatches) detail += " [" + T->stage(0).tower + " (" + std::to_string(i) + "," + std::to_string(j) + "): " + std::to_string(D.mismatches) + "]";
            }
        detail += ", " + T->stage(0).tower + " k=" + std::to_string(T->config.k) + " " + std::to_string(b);
        bad += b;
    }
    report(5, "diagram exactness", bad == 0, std::to_string(pairs) + " stage pairs, vertex mismatches: " + detail);
}

// ---- 6 -----------------------------------------------------------------------------------
void currents(const HilbertTower& H, const AffineTower& R4, const AffineTower& RK)
{
    bool mass = true;
    for (const auto& s : H.stages) mass = mass && stage_current(s.embedding).mass() == 1;
    for (const auto* T : {&R4, &RK})
        for (int j = 0; j < static_cast<int>(T->stages.size()); ++j) mass = mass && stage_current(T->stage(j)).mass() == 1;
    const auto e = eval_current(stage_current(R4.stage(0)), coordinate_form(4, {0, 1}));
    const bool stage0 = e.exact && e.value == 1.0;
    bool push = true;
    std::size_t checks = 0;
    for (int j = 1; j < static_cast<int>(H.stages.size()); ++j, ++checks) push = push && pushforward_check(H, 0, j).pass();
    for (const auto* T : {&R4, &RK})
        for (int j = 1; j < static_cast<int>(T->stages.size()); ++j, ++checks) push = push && pushforward_check(*T, 0, j).pass();
    // exact on the affine path; the Hilbert stages only have the quadrature path
    const double bm = boundary_mass(R4.stage(0)), bm_h = boundary_mass(H.stages[0].embedding);
    const bool ok = mass && stage0 && push && bm == 4.0 && std::abs(bm_h - 4.0) <= 1e-12;
    report(6, "mass and currents", ok,
           std::string("mass 1 at every stage: ") + (mass ? "yes" : "no") + "; dx1^dx2 on stage 0 = " + num(e.value) +
               (e.exact ? " (exact)" : "") + "; " + std::to_string(checks) + " pushforward checks " + (push ? "pass" : "fail") +
               "; boundary mass " + num(bm) + " (hilbert quadrature: 4 + " + num(bm_h - 4.0) + ")");
}

// ---- 7 -----------------------------------------------------------------------------------
void shsep(const HilbertTower& H)
{
    // the cover events of stages 1 and 2 sit over the root and over every stage-1 cell
    std::set<std::vector<std::uint8_t>> seen;
    std::vector<CellAddress> events{root_address(2)};
    for (const auto& c : H.stages[1].embedding.complex.cells) {
        if (!seen.insert(c.addr.digits).second) continue;
        CellAddress a = root_address(2);
        a.digits = c.addr.digits;
        events.push_back(a);
    }
    std::size_t violations = 0, min_pairs = SIZE_MAX;
    for (std::size_t e = 0; e < events.size(); ++e) {
        const auto C = check_shsep(build_double_cover(classify_children(events[e])), 10000, 700 + e);
        violations += C.violations.size();
        min_pairs = std::min(min_pairs, C.hypothesis_pairs);
    }
    report(7, "sheet separation", violations == 0 && min_pairs >= 10000,
           std::to_string(events.size()) + " covers, >= " + std::to_string(min_pairs) + " hypothesis pairs each, " +
               std::to_string(violations) + " violations");
}

// ---- 8 -----------------------------------------------------------------------------------
void claims(const AffineTower& R4, const AffineTower& RK)
{
    const auto P = claim_j_s1(DeltaSchedule::r4());
    bool ok = P.holds && P.lhs_hi < 1.0 / 8;
    std::string detail = "precondition lhs <= " + num(P.lhs_hi);
    for (const auto* T : {&R4, &RK}) {
        ok = ok && T->sigma.size() + 1 == T->stages.size() && T->claims.size() + 1 == T->stages.size();
        for (std::size_t j = 0; j < T->claims.size(); ++j) {
            const auto& c = T->claims[j];
            ok = ok && c.pass() && c.pairs >= 100000 && c.max_ratio <= 1 + T->eps(static_cast<int>(j)) && c.drift_max <= c.drift_bound;
            detail += "; k=" + std::to_string(T->config.k) + " j=" + std::to_string(j) + ": sigma 2^" + std::to_string(T->sigma[j].exponent) +
                      ", " + std::to_string(c.pairs) + " pairs, ratio " + num(c.max_ratio) + ", drift " + num(c.drift_max);
        }
    }
    report(8, "radial projections", ok, detail);
}

// ---- 9 -----------------------------------------------------------------------------------
void lipschitz(const AffineTower& R4, const AffineTower& RK)
{
    bool ok = true;
    double worst_C = 0;
    std::size_t pieces = 0;
    for (const auto* T : {&R4, &RK}) {
        for (int j = 0; j < static_cast<int>(T->stages.size()); ++j) {
            const auto L = lipschitz_interval(*T, j);
            ok = ok && L.pass();
            pieces += L.pieces;
        }
        for (int j = 0; j + 1 < static_cast<int>(T->stages.size()); ++j) {
            const auto S = sup_move_affine(*T, j, 2000, 91 + static_cast<std::uint64_t>(j));
            ok = ok && S.pass();
            worst_C = std::max(worst_C, S.measured_C);
        }
    }
    report(9, "Lipschitz interval and sup-move", ok,
           std::to_string(pieces) + " pieces inside [1/16, 23](1+sum delta^2)^1/2; sup-move constant " + num(worst_C) + " <= 56");
}

// ---- 10 ----------------------------------------------------------------------------------
void prober(const HilbertTower& H)
{
    const auto sched = DeltaSchedule::hilbert();
    const ProbeConfig pc;
    bool flat_holed = true, witness_ok = true;
    std::size_t contradictions = 0;
    double gam[2] = {0, 0};
    for (int n = 1; n <= 2; ++n) {
        const auto& S = H.stages[static_cast<std::size_t>(n)].embedding;
        const CellAddress q = n == 1 ? root_address(2) : root_address(2).child({0, 0});
        for (const auto& surf : surface_battery(S, q, ring_depth_for(n, sched, pc.c))) {
            if (surf.name != "flat" && surf.name != "single sheet") continue;
            const auto P = probe_cell(S, sched, surf, q, pc);
            if (surf.name == "flat") {
                gam[n - 1] = P.gamma;
                flat_holed = flat_holed && P.holes() == P.annuli.size() && !P.annuli.empty();
                continue;
            }
            for (const auto& a : P.annuli)
                if (a.witness) {
                    ++contradictions;
                    witness_ok = witness_ok && verify_witness(q, *a.witness);
                }
        }
    }
    const auto D = divergence_check(sched, 5);
    bool blocks = D.blocks.size() == 4;
    for (const auto& b : D.blocks) blocks = blocks && b.harmonic_ok && b.sparse_ok;
    const double lo = std::min(gam[0], gam[1]), hi = std::max(gam[0], gam[1]);
    const bool ok = flat_holed && lo > 0 && hi <= 2 * lo && contradictions > 0 && witness_ok && blocks;
    report(10, "prober", ok,
           std::string("flat surface holed in every ring: ") + (flat_holed ? "yes" : "no") + "; gamma " + num(gam[0]) + ", " + num(gam[1]) +
               "; " + std::to_string(contradictions) + " re-verified witnesses; decade blocks t = 2..5 " + (blocks ? "certified" : "not certified"));
}

// ---- 11 ----------------------------------------------------------------------------------
void determinism(const BuiltTower& r4_first)
{
    const fs::path root = fs::temp_directory_path() / "pur_acceptance";
    fs::remove_all(root);
    RunConfig h;
    h.mode = "hilbert";
    cmd_build(h, root / "h1");
    cmd_build(h, root / "h2");
    write_bundle(root / "r1", r4_first);
    cmd_build(r4_first.config, root / "r2");
    std::size_t files = 0, differ = 0;
    for (const auto& [a, b] : std::vector<std::pair<fs::path, fs::path>>{{root / "h1", root / "h2"}, {root / "r1", root / "r2"}})
        for (const auto& e : fs::directory_iterator(a)) {
            ++files;
            if (slurp(e.path()) != slurp(b / e.path().filename())) ++differ;
        }
    fs::remove_all(root);
    report(11, "determinism", differ == 0 && files > 0,
           std::to_string(files) + " bundle files from two hilbert and two r4 builds, " + std::to_string(differ) + " differ");
}

} // namespace

int main()
{
    const auto t0 = std::chrono::steady_clock::now();
    try {
        closed_forms();
        hlow();
        basic_maps();
        affine_certification();

        const HilbertTower H = build_hilbert_tower(3, DeltaSchedule::hilbert());
        RunConfig r4;
        r4.mode = "r4";
        const BuiltTower R4 = build_tower(r4);
        RunConfig rk;
        rk.mode = "rk";
        rk.k = 3;
        const BuiltTower RK = build_tower(rk);

        diagrams(H, R4.A(), RK.A());
        currents(H, R4.A(), RK.A());
        shsep(H);
        claims(R4.A(), RK.A());
        lipschitz(R4.A(), RK.A());
        prober(H);
        determinism(R4);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 2;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%d of 11 criteria failed (%.0f s)\n", failures, secs);
    return failures ? 1 : 0;
}
