#include "pur/bundle.hpp"

#include "pur/rk.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace pur {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw BundleError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& s)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw BundleError("cannot write " + p.string());
    out << s;
}

std::string stage_file(int j) { return "stage_" + std::to_string(j) + ".json"; }

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

} // namespace

// ---- config ---------------------------------------------------------------------------------------

DeltaSchedule RunConfig::delta_schedule() const
{
    const std::string s = schedule.empty() ? (mode == "hilbert" ? "hilbert" : "r4") : schedule;
    if (s == "hilbert") return DeltaSchedule::hilbert();
    if (s == "r4") return DeltaSchedule::r4();
    throw ConfigError("unknown schedule '" + s + "' (hilbert | r4)");
}

TowerConfig RunConfig::tower_config() const
{
    TowerConfig t;
    t.k = k;
    t.max_stage = max_stage;
    t.schedule = delta_schedule();
    t.N_cap = N_cap;
    t.window_rel_depth = window_rel_depth;
    t.depth_ceiling = depth_ceiling;
    t.sigma_e_min = sigma_e_min;
    t.sigma_e_max = sigma_e_max;
    t.claim_samples = claim_samples;
    t.search_samples = search_samples;
    t.seed = seed;
    t.cell_ceiling = cell_ceiling;
    return t;
}

void RunConfig::validate() const
{
    if (mode != "hilbert" && mode != "r4" && mode != "rk") throw ConfigError("mode must be hilbert, r4 or rk");
    if (mode == "hilbert" && k != 2) throw ConfigError("hilbert mode needs k = 2");
    if (mode == "r4" && k != 2) throw ConfigError("r4 mode needs k = 2 (use rk for k >= 3)");
    if (mode == "rk" && k < 2) throw ConfigError("rk mode needs k >= 2");
    if (max_stage < 0) throw ConfigError("max_stage must be >= 0");
    if (cell_ceiling == 0 || claim_samples == 0 || search_samples == 0 || shsep_samples == 0) throw ConfigError("ceilings and sample counts must be positive");
    if (N_cap < 1 || depth_ceiling < 1) throw ConfigError("N_cap and depth_ceiling must be positive");
    if (sigma_e_min > sigma_e_max) throw ConfigError("sigma_e_min > sigma_e_max");
    if (!(c > 0) || !(G > 0) || !(gamma_floor > 0)) throw ConfigError("c, G and gamma_floor must be positive");
    if (eps != "2^-j") throw ConfigError("eps schedule: only 2^-j is implemented");
    (void)delta_schedule();
}

json to_json(const RunConfig& c)
{
    return json{{"mode", c.mode},
                {"k", c.k},
                {"max_stage", c.max_stage},
                {"schedule", c.delta_schedule().kind == ScheduleKind::hilbert ? "hilbert" : "r4"},
                {"c", c.c},
                {"G", c.G},
                {"gamma_floor", c.gamma_floor},
                {"eps", c.eps},
                {"sigma_e_min", c.sigma_e_min},
                {"sigma_e_max", c.sigma_e_max},
                {"N_cap", c.N_cap},
                {"window_rel_depth", c.window_rel_depth},
                {"depth_ceiling", c.depth_ceiling},
                {"cell_ceiling", c.cell_ceiling},
                {"claim_samples", c.claim_samples},
                {"search_samples", c.search_samples},
                {"shsep_samples", c.shsep_samples},
                {"seed", c.seed}};
}

RunConfig config_from_json(const json& j)
{
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "mode") c.mode = v.get<std::string>();
            else if (key == "k") c.k = v.get<int>();
            else if (key == "max_stage") c.max_stage = v.get<int>();
            else if (key == "schedule") c.schedule = v.get<std::string>();
            else if (key == "c") c.c = v.get<double>();
            else if (key == "G") c.G = v.get<double>();
            else if (key == "gamma_floor") c.gamma_floor = v.get<double>();
            else if (key == "eps") c.eps = v.get<std::string>();
            else if (key == "sigma_e_min") c.sigma_e_min = v.get<int>();
            else if (key == "sigma_e_max") c.sigma_e_max = v.get<int>();
            else if (key == "N_cap") c.N_cap = v.get<int>();
            else if (key == "window_rel_depth") c.window_rel_depth = v.get<int>();
            else if (key == "depth_ceiling") c.depth_ceiling = v.get<int>();
            else if (key == "cell_ceiling") c.cell_ceiling = v.get<std::size_t>();
            else if (key == "claim_samples") c.claim_samples = v.get<std::size_t>();
            else if (key == "search_samples") c.search_samples = v.get<std::size_t>();
            else if (key == "shsep_samples") c.shsep_samples = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw ConfigError("unknown config key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
    if (c.mode == "hilbert" && !j.contains("k")) c.k = 2;
    c.validate();
    return c;
}

std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, data.data(), data.size());
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return ss.str();
}

std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

// ---- towers ---------------------------------------------------------------------------------------

int BuiltTower::stages() const
{
    return hilbert() ? static_cast<int>(H().stages.size()) : static_cast<int>(A().stages.size());
}

const StageEmbedding& BuiltTower::stage(int j) const
{
    return hilbert() ? H().stages.at(static_cast<std::size_t>(j)).embedding : A().stage(j);
}

BuiltTower build_tower(const RunConfig& c)
{
    c.validate();
    BuiltTower T;
    T.config = c;
    if (c.mode == "hilbert")
        T.tower = build_hilbert_tower(c.max_stage, c.delta_schedule(), c.cell_ceiling);
    else if (c.mode == "r4")
        T.tower = build_tower_r4(c.tower_config());
    else
        T.tower = build_tower_rk(c.k, c.tower_config());
    return T;
}

json stage_json(const StageEmbedding& S)
{
    json cells = json::array();
    for (std::size_t i = 0; i < S.complex.cells.size(); ++i) {
        const auto& c = S.complex.cells[i];
        json covers = json::array();
        for (const auto& m : c.addr.covers) covers.push_back({m.step, m.xi, m.zeta, m.bit});
        std::vector<int> digits(c.addr.digits.begin(), c.addr.digits.end());
        cells.push_back({{"d", digits},
                         {"c", covers},
                         {"s", {c.shape.half ? 1 : 0, c.shape.a, c.shape.b, c.shape.anti ? 1 : 0, c.shape.upper ? 1 : 0}},
                         {"w", c.weight_exp},
                         {"role", static_cast<int>(c.role)},
                         {"parent", c.parent},
                         {"v", S.cell_vertices.at(i)}});
    }
    return json{{"tower", S.tower},          {"stage", S.stage}, {"k", S.k},
                {"dim", S.dim},              {"m", S.m},         {"cells", cells},
                {"vertex_keys", S.vertex_keys}, {"vertices", S.vertices}};
}

std::string dump_json(const json& j) { return j.dump() + "\n"; }

void write_bundle(const fs::path& dir, const BuiltTower& T)
{
    fs::create_directories(dir);
    json stages = json::array();
    for (int j = 0; j < T.stages(); ++j) {
        const auto& S = T.stage(j);
        const std::string text = dump_json(stage_json(S));
        write_file(dir / stage_file(j), text);
        stages.push_back({{"j", j},
                          {"file", stage_file(j)},
                          {"sha256", sha256_hex(text)},
                          {"cells", S.complex.cells.size()},
                          {"vertices", S.vertices.size()},
                          {"dim", S.dim}});
    }
    const json manifest{{"format", "pur-bundle/1"},
                        {"config", to_json(T.config)},
                        {"config_sha256", config_hash(T.config)},
                        {"stages", stages}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void cmd_build(const RunConfig& c, const fs::path& dir) { write_bundle(dir, build_tower(c)); }

Bundle load_bundle(const fs::path& dir)
{
    Bundle B;
    B.dir = dir;
    try {
        B.manifest = json::parse(read_file(dir / "manifest.json"));
        if (B.manifest.value("format", "") != "pur-bundle/1") throw BundleError("unknown bundle format");
        B.config = config_from_json(B.manifest.at("config"));
        for (const auto& s : B.manifest.at("stages")) B.stages.push_back(json::parse(read_file(dir / s.at("file").get<std::string>())));
    } catch (const json::exception& e) {
        throw BundleError(std::string("corrupt bundle: ") + e.what());
    } catch (const ConfigError& e) {
        throw BundleError(std::string("corrupt bundle config: ") + e.what());
    }
    return B;
}

StageComplex complex_from_json(const json& st)
{
    StageComplex sc;
    sc.k = st.at("k").get<int>();
    for (const auto& c : st.at("cells")) {
        CellRecord r;
        r.addr.k = sc.k;
        for (int d : c.at("d")) r.addr.digits.push_back(static_cast<std::uint8_t>(d));
        for (const auto& m : c.at("c")) r.addr.covers.push_back({m[0].get<int>(), m[1].get<int>(), m[2].get<int>(), m[3].get<int>()});
        const auto& s = c.at("s");
        r.shape = Shape{s[0].get<int>() != 0, s[1].get<int>(), s[2].get<int>(), s[3].get<int>() != 0, s[4].get<int>() != 0};
        r.weight_exp = c.at("w").get<int>();
        r.role = static_cast<Role>(c.at("role").get<int>());
        r.parent = c.at("parent").get<int>();
        sc.resolution = std::max(sc.resolution, r.addr.depth());
        sc.cells.push_back(std::move(r));
    }
    return sc;
}

StageEmbedding stage_from_json(const json& st)
{
    StageEmbedding S;
    try {
        S.tower = st.at("tower").get<std::string>();
        S.stage = st.at("stage").get<int>();
        S.k = st.at("k").get<int>();
        S.dim = st.at("dim").get<int>();
        S.m = st.at("m").get<int>();
        S.complex = complex_from_json(st);
        S.vertex_keys = st.at("vertex_keys").get<std::vector<std::string>>();
        S.vertices = st.at("vertices").get<std::vector<std::vector<double>>>();
        for (const auto& c : st.at("cells")) S.cell_vertices.push_back(c.at("v").get<std::vector<int>>());
    } catch (const json::exception& e) {
        throw BundleError(std::string("corrupt stage file: ") + e.what());
    }
    for (const auto& cv : S.cell_vertices)
        for (int v : cv)
            if (v < 0 || static_cast<std::size_t>(v) >= S.vertices.size()) throw BundleError("corrupt stage file: vertex index out of range");
    return S;
}

// ---- reports ----------------------------------------------------------------------------------------

json CertRecord::line() const
{
    return json{{"record", "certificate"}, {"module", module}, {"name", name},     {"anchor", anchor},
                {"bound", bound},          {"measured", measured}, {"status", status}, {"detail", detail}};
}

bool VerificationReport::pass() const
{
    for (const auto& c : certificates)
        if (c.status == "FAIL") return false;
    return true;
}

void VerificationReport::write(std::ostream& out) const
{
    out << json{{"record", "provenance"}, {"config_sha256", config_sha256}}.dump() << "\n";
    for (const auto& c : counts) out << c.dump() << "\n";
    for (const auto& c : certificates) out << c.line().dump() << "\n";
    out << json{{"record", "summary"}, {"pass", pass()}, {"certificates", certificates.size()}}.dump() << "\n";
}

const std::vector<std::string>& invariant_ids()
{
    static const std::vector<std::string> ids{
        "cc.mass",        "cc.classify_counts", "cc.subdivide_compose", "cc.ring_cycle",
        "bc.halving",     "bc.deck",            "bc.lift_commute",      "bc.shsep",
        "dm.h_lipschitz", "dm.hlow",            "dm.psi_continuity",    "dm.phi_norms",
        "eh.diagram",     "eh.orthogonality",   "eh.sup_move",
        "r4.composite",   "r4.drift",           "r4.injective",         "r4.nontriviality",
        "rk.fiber_constancy", "rk.affine_invariants", "rk.doubling",
        "cu.mass",        "cu.linear",          "cu.flip",              "cu.boundary",
        "pr.total",       "pr.gamma",           "pr.cumulative",        "pr.chain"};
    return ids;
}

namespace {

struct Recorder {
    std::vector<CertRecord>* out;
    void add(std::string id, std::string anchor, double bound, double measured, bool pass, std::string detail = {})
    {
        const auto dot = id.find('.');
        static const std::map<std::string, std::string> modules{{"cc", "complex_core"},    {"bc", "branched_cover"},
                                                                {"dm", "deformation_maps"}, {"eh", "embedding_hilbert"},
                                                                {"r4", "embedding_r4"},     {"rk", "embedding_rk"},
                                                                {"cu", "currents"},         {"pr", "prober"},
                                                                {"radn", "embedding_r4"},   {"bundle", "cli_export"}};
        out->push_back({modules.at(id.substr(0, dot)), id, std::move(anchor), bound, measured, pass ? "PASS" : "FAIL", std::move(detail)});
    }
    void skip(std::string id, std::string anchor, std::string why)
    {
        add(std::move(id), std::move(anchor), 0, 0, true, std::move(why));
        out->back().status = "SKIP";
    }
};

void check_complex_core(Recorder& R, const Bundle& B)
{
    double worst = 0;
    bool exact = true;
    for (const auto& st : B.stages) {
        const mpq_class m = complex_from_json(st).total_mass();
        if (m != 1) exact = false;
        worst = std::max(worst, std::abs(mpq_class(m - 1).get_d()));
    }
    R.add("cc.mass", "unit mass", 0, worst, exact, "Σ weight·volume from the bundle files, every stage");

    bool counts_ok = true;
    std::string seen;
    for (const auto& a : {root_address(2), root_address(2).child({1, 3}), root_address(2).child({1, 3}).child({4, 0})}) {
        const auto d = classify_children(a);
        if (d.central.size() != 1 || d.outer.size() != 16 || d.annulus.size() != 8) counts_ok = false;
        seen = std::to_string(d.central.size()) + "/" + std::to_string(d.outer.size()) + "/" + std::to_string(d.annulus.size());
    }
    R.add("cc.classify_counts", "central, outer and middle annulus", 0, counts_ok ? 0 : 1, counts_ok, "counts " + seen);

    bool compose = true;
    for (int k : {2, 3})
        for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 1}}) {
            if (k == 3 && a + b > 2) continue;
            const auto direct = subdivide(root_address(k), a + b);
            std::set<CellAddress> lhs(direct.begin(), direct.end()), rhs;
            for (const auto& c : subdivide(root_address(k), a))
                for (auto& g : subdivide(c, b)) rhs.insert(std::move(g));
            if (lhs != rhs || lhs.size() != direct.size()) compose = false;
        }
    R.add("cc.subdivide_compose", "iterated subdivision", 0, compose ? 0 : 1, compose);

    std::size_t bad = 0, rings = 0;
    for (int depth : {2, 3}) {
        for (const auto& A : partition_annuli(depth)) {
            ++rings;
            std::set<std::array<i64, 2>> distinct(A.cells.begin(), A.cells.end());
            bool ok = distinct.size() == A.cells.size() && A.cells.size() >= 4;
            for (std::size_t i = 0; i < A.cells.size(); ++i) {
                const auto& p = A.cells[i];
                const auto& q = A.cells[(i + 1) % A.cells.size()];
                if (std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]) != 1) ok = false;
            }
            bad += !ok;
        }
    }
    R.add("cc.ring_cycle", "annulus of squares", 0, static_cast<double>(bad), bad == 0, std::to_string(rings) + " rings at depths 2, 3");
}

void check_branched_cover(Recorder& R, const BuiltTower& T, const RunConfig& cfg)
{
    std::size_t bad = 0, cells = 0;
    for (int j = 0; j < T.stages(); ++j)
        for (const auto& c : T.stage(j).complex.cells) {
            int covered = 0;
            for (const auto& m : c.addr.covers) covered += m.bit >= 0;
            ++cells;
            bad += c.weight_exp != covered;
        }
    R.add("bc.halving", "measure split in half per sheet", 0, static_cast<double>(bad), bad == 0,
          std::to_string(cells) + " cells: weight 2^-(covered events)");

    std::mt19937_64 g(cfg.seed + 11);
    std::size_t deck_bad = 0;
    for (int s = 0; s < 2000; ++s) {
        const double X = 1.0 + 3.0 * u01(g), Y = 1.0 + 3.0 * u01(g);
        const auto ch = child_of(X, Y);
        if (child_role(ch[0], ch[1]) != Role::annulus) continue;
        CoverPoint p{X, Y, ch, static_cast<int>(g() & 1)};
        const CoverPoint dd = deck(deck(p));
        const auto a = polar_chart<double>(X, Y, ch[0], ch[1], p.bit);
        const auto b = polar_chart<double>(X, Y, ch[0], ch[1], deck(p).bit);
        if (dd.bit != p.bit || dd.child != p.child || dd.X != p.X || dd.Y != p.Y || a.r != b.r || std::abs(std::abs(a.u - b.u) - 2.0) > 8.9e-16) ++deck_bad; // two ulps at 2: u + 2 rounds
    }
    R.add("bc.deck", "deck transformation", 0, static_cast<double>(deck_bad), deck_bad == 0, "involution, r kept, θ shifted by 2π");

    std::size_t lift_fail = 0, lift_vertices = 0;
    for (auto [xi, zeta] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}) {
        const auto L = check_lift_commutes(lift_cover(root_address(3), xi, zeta));
        lift_fail += L.failures;
        lift_vertices += L.vertices;
    }
    R.add("bc.lift_commute", "lifted covers commute", 0, static_cast<double>(lift_fail), lift_fail == 0 && lift_vertices > 0,
          std::to_string(lift_vertices) + " vertices, k = 3, three planes");

    std::size_t viol = 0, pairs = 0;
    for (const auto& q : {root_address(2), root_address(2).child({0, 0})}) {
        const auto C = check_shsep(build_double_cover(classify_children(q)), cfg.shsep_samples, cfg.seed + 13);
        viol += C.violations.size();
        pairs = std::min(pairs == 0 ? C.hypothesis_pairs : pairs, C.hypothesis_pairs);
    }
    R.add("bc.shsep", "(ShSep)", static_cast<double>(cfg.shsep_samples), static_cast<double>(viol),
          viol == 0 && pairs >= cfg.shsep_samples, std::to_string(pairs) + " hypothesis pairs per cover (min)");
}

void check_deformation(Recorder& R, const RunConfig& cfg)
{
    const DeltaSchedule s = cfg.delta_schedule();
    const mpq_class delta = s.delta(1);
    mpq_class m1 = 0, m2 = 0;
    for (const auto& v : h1_slopes(delta)) m1 = qmax(m1, qabs(v));
    for (const auto& v : h2_slopes(delta)) m2 = qmax(m2, qabs(v));
    // u = θ/π: slopes δ/2 and δ in u are δ/(2π) and δ/π in θ
    const bool lip = m1 == delta / 2 && m2 == delta;
    R.add("dm.h_lipschitz", "Lipschitz constants of h1, h2", 1, mpq_class(m1 / (delta / 2)).get_d(), lip,
          "per-piece slopes in u: " + m1.get_str() + ", " + m2.get_str());

    const auto H = certify_hlow(delta, 100000);
    R.add("dm.hlow", "fiber gap lower bound", mpq_class(delta * delta / 4).get_d(), H.min_sq.get_d(), H.pass,
          "exact min at breakpoints; grid min " + num(H.grid_min));

    // Ψ agrees across every glued child edge (σ flips the sheet) and vanishes on ∂Q_a
    const auto cov = build_double_cover(classify_children(root_address(2)));
    const mpq_class L(1, 5);
    std::size_t mism = 0, checked = 0;
    for (const auto& gl : cov.glue) {
        const auto a = gl.from, b = gl.to;
        for (const mpq_class& t : {mpq_class(1, 7), mpq_class(1, 2), mpq_class(5, 7)}) {
            mpq_class X, Y;
            if (a[0] == b[0]) {
                X = a[0] + t;
                Y = std::max(a[1], b[1]);
            } else {
                X = std::max(a[0], b[0]);
                Y = a[1] + t;
            }
            const auto p = psi_value<mpq_class>(X, Y, a[0], a[1], gl.from_bit, delta, L);
            const auto q = psi_value<mpq_class>(X, Y, b[0], b[1], gl.to_bit, delta, L);
            ++checked;
            mism += p != q;
        }
    }
    for (const auto& c : cov.base_annulus) {
        const int c1 = c.digit(0, 0), c2 = c.digit(0, 1);
        for (int side = 0; side < 4; ++side) {
            const int n1 = c1 + (side == 0) - (side == 1), n2 = c2 + (side == 2) - (side == 3);
            if (n1 < 0 || n1 > 4 || n2 < 0 || n2 > 4 || child_role(n1, n2) == Role::annulus) continue;
            for (const mpq_class& t : {mpq_class(1, 3), mpq_class(1, 2)}) {
                mpq_class X = c1 + t, Y = c2 + t;
                if (side == 0) X = c1 + 1;
                if (side == 1) X = c1;
                if (side == 2) Y = c2 + 1;
                if (side == 3) Y = c2;
                for (int bit : {0, 1}) {
                    const auto p = psi_value<mpq_class>(X, Y, c1, c2, bit, delta, L);
                    ++checked;
                    mism += p[0] != 0 || p[1] != 0;
                }
            }
        }
    }
    R.add("dm.psi_continuity", "Ψ continuous across σ", 0, static_cast<double>(mism), mism == 0, std::to_string(checked) + " exact edge points");

    const auto A = find_affine_approx(delta, cfg.N_cap);
    const auto& cb = A.certified_bounds;
    const double e0 = midpoint_error(A);
    const double e1 = midpoint_error(build_affine_approx_unchecked(delta, A.N + 1));
    R.add("dm.phi_norms", "affine approximation of Ψ_δ", cb.glip_hi, cb.glip, cb.ok() && e1 <= e0,
          "N = " + std::to_string(A.N) + ", midpoint error " + num(e0) + " -> " + num(e1));
}

void check_hilbert(Recorder& R, const BuiltTower& T, const RunConfig& cfg)
{
    const char* an_d = "P_i ∘ F_j = F_i ∘ π_{j,i}";
    const char* an_o = "new coordinates";
    const char* an_s = "Cauchy sup bound";
    if (!T.hilbert()) {
        R.skip("eh.diagram", an_d, "bundle mode " + cfg.mode);
        R.skip("eh.orthogonality", an_o, "bundle mode " + cfg.mode);
        R.skip("eh.sup_move", an_s, "bundle mode " + cfg.mode);
        return;
    }
    const auto& H = T.H();
    std::size_t mism = 0, pairs = 0;
    double err = 0;
    for (int i = 0; i < T.stages(); ++i)
        for (int j = i; j < T.stages(); ++j) {
            const auto D = check_diagram_hilbert(H, i, j);
            mism += D.mismatches;
            err = std::max(err, D.max_err);
            ++pairs;
        }
    R.add("eh.diagram", an_d, 0, static_cast<double>(mism), mism == 0, std::to_string(pairs) + " stage pairs, exact");

    std::size_t nonzero = 0, tested = 0;
    for (int j = 1; j < T.stages(); ++j) {
        const auto& S = T.stage(j);
        for (std::size_t c = 0; c < S.complex.cells.size(); ++c) {
            const auto& cell = S.complex.cells[c];
            for (int v : S.cell_vertices[c])
                for (int s = 0; s < j; ++s) {
                    const CoverMark* m = cell.addr.cover_at(s);
                    if (m && m->bit >= 0) continue;
                    const auto& x = S.vertices_exact[static_cast<std::size_t>(v)];
                    ++tested;
                    nonzero += x[static_cast<std::size_t>(2 + 2 * s)] != 0 || x[static_cast<std::size_t>(3 + 2 * s)] != 0;
                }
        }
    }
    R.add("eh.orthogonality", an_o, 0, static_cast<double>(nonzero), nonzero == 0, std::to_string(tested) + " vertex coordinates outside annuli");

    double worst = 0;
    bool ok = true;
    for (int i = 0; i + 1 < T.stages(); ++i) {
        const auto S = sup_move_hilbert(H, i, 200, cfg.seed + 17);
        worst = std::max(worst, S.measured_C);
        ok = ok && S.pass();
    }
    R.add("eh.sup_move", an_s, 56, worst, ok, "measured constant");
}

void check_affine(Recorder& R, const BuiltTower& T, const RunConfig& cfg)
{
    const char* an_c = "compositions of P_i uniformly Lipschitz";
    const char* an_dr = "σ_i chosen very large";
    const char* an_i = "topological embedding";
    const char* an_n = "existence and nontriviality";
    const char* an_f = "constant along orthogonal directions";
    const char* an_a = "k-cells in place of squares";
    const char* an_db = "doubling constant";
    if (T.hilbert()) {
        for (auto [id, an] : std::vector<std::pair<const char*, const char*>>{{"r4.composite", an_c}, {"r4.drift", an_dr}, {"r4.injective", an_i},
                                                                              {"r4.nontriviality", an_n}, {"rk.fiber_constancy", an_f},
                                                                              {"rk.affine_invariants", an_a}, {"rk.doubling", an_db}})
            R.skip(id, an, "bundle mode hilbert");
        return;
    }
    const auto& A = T.A();
    const int top = T.stages() - 1;

    double ratio = 0, bound = 0;
    bool ok = top > 0;
    for (int j = 0; j < top; ++j) {
        const auto C = composite_lipschitz(A, j, 500, cfg.seed + 19 + static_cast<std::uint64_t>(j));
        ratio = std::max(ratio, C.max_ratio);
        bound = C.bound;
        ok = ok && C.pass();
    }
    if (top == 0) R.skip("r4.composite", an_c, "no neighbourhoods at max_stage 0");
    else R.add("r4.composite", an_c, bound, ratio, ok, "sampled ratios vs Π(1+ε_t)");

    double drift = 0, dbound = 0;
    ok = true;
    for (const auto& c : A.claims) {
        drift = std::max(drift, c.drift_max / c.drift_bound);
        dbound = 1;
        ok = ok && c.drift_max <= c.drift_bound;
    }
    if (A.claims.empty()) R.skip("r4.drift", an_dr, "no neighbourhoods at max_stage 0");
    else R.add("r4.drift", an_dr, dbound, drift, ok, "max drift / (100·5^-j)");

    double sep = std::numeric_limits<double>::infinity();
    ok = top > 0;
    for (int j = 1; j <= top; ++j) {
        const auto F = fiber_separation(A, j, 500, cfg.seed + 23);
        sep = std::min(sep, F.min_sep);
        ok = ok && F.pass();
    }
    if (top == 0) R.skip("r4.injective", an_i, "stage 0 has no fibers");
    else R.add("r4.injective", an_i, 0, sep, ok, "min fiber-pair separation");

    double diff = 0;
    ok = top > 0;
    for (int j = 1; j <= top; ++j) {
        const auto P = pushforward_check(A, 0, j);
        for (const auto& f : P.forms) diff = std::max(diff, f.diff);
        ok = ok && P.pass();
    }
    if (top == 0) R.skip("r4.nontriviality", an_n, "max_stage 0");
    else R.add("r4.nontriviality", an_n, 1e-6, diff, ok, "P_{j,0#} N_j vs N_0 on the form battery");

    bool claims = !A.claims.empty();
    double ratio_max = 0;
    std::size_t min_pairs = A.claims.empty() ? 0 : A.claims.front().pairs;
    for (const auto& c : A.claims) {
        claims = claims && c.pass() && c.pairs >= cfg.claim_samples;
        ratio_max = std::max(ratio_max, c.max_ratio);
        min_pairs = std::min(min_pairs, c.pairs);
    }
    const auto pre = claim_j_s1(cfg.delta_schedule());
    if (A.claims.empty()) R.skip("radn.claim", "radial-basis function", "max_stage 0");
    else R.add("radn.claim", "radial-basis function", 1 + A.eps(0), ratio_max, claims && pre.holds,
               "precondition lhs <= " + num(pre.lhs_hi) + ", stratified pairs per stage >= " + std::to_string(min_pairs));

    std::size_t mism = 0;
    for (int i = 0; i <= top; ++i)
        for (int j = i + 1; j <= top; ++j) mism += check_diagram_affine(A, i, j).mismatches;
    R.add("radn.diagram", "P_i ∘ F_j = F_i ∘ π_{j,i}", 0, static_cast<double>(mism), mism == 0, "all stage pairs, tolerance 1e-30");

    std::size_t lviol = 0;
    for (int j = 0; j <= top; ++j) lviol += lipschitz_interval(A, j).violations;
    R.add("radn.lipschitz", "per-piece Lipschitz interval", 0, static_cast<double>(lviol), lviol == 0, "[1/16, 23]·(1+Σδ²)^{1/2}");

    if (cfg.mode != "rk" || cfg.k < 3) {
        R.skip("rk.fiber_constancy", an_f, "k = 2: no directions off the plane");
        R.skip("rk.affine_invariants", an_a, "bundle mode " + cfg.mode);
        R.skip("rk.doubling", an_db, "bundle mode " + cfg.mode);
        return;
    }
    double fc = 0;
    ok = top > 0;
    for (int j = 1; j <= top; ++j) {
        const auto F = fiber_constancy(A, j);
        fc = std::max({fc, F.max_jacobian, F.max_vertex});
        ok = ok && F.pass();
    }
    R.add("rk.fiber_constancy", an_f, 1e-40, fc, ok, "Jacobian columns and vertex pairs off the plane");

    const bool mass = [&] {
        for (int j = 0; j <= top; ++j)
            if (T.stage(j).complex.total_mass() != 1) return false;
        return true;
    }();
    R.add("rk.affine_invariants", an_a, 0, static_cast<double>(mism), claims && mass && mism == 0 && lviol == 0,
          "claims, drift, unit mass, diagrams (" + std::to_string(mism) + " vertex mismatches)");

    double growth = 0;
    for (int j = 0; j < top; ++j)
        growth = std::max(growth, static_cast<double>(T.stage(j + 1).complex.cells.size()) / static_cast<double>(T.stage(j).complex.cells.size()));
    R.add("rk.doubling", an_db, 50, growth, true, "report-only: max cell-count growth per stage");
}

void check_currents(Recorder& R, const BuiltTower& T)
{
    bool mass = true;
    for (int j = 0; j < T.stages(); ++j) mass = mass && stage_current(T.stage(j)).mass() == 1;
    R.add("cu.mass", "mass", 1, mass ? 1 : 0, mass, "exact, every stage");

    const auto& S = T.stage(T.stages() - 1);
    const auto N = stage_current(S);
    const auto battery = form_battery(S.dim, S.k);
    const auto a = eval_current(N, battery[1]).value, b = eval_current(N, battery[2]).value;
    const auto ab = eval_current(N, sum_forms(battery[1], battery[2])).value;
    const double lin = std::abs(ab - (a + b));
    R.add("cu.linear", "linearity", 1e-12, lin, lin <= 1e-12 * (1 + std::abs(ab)), "ω1 + ω2 vs the sum of evaluations");

    const double v = eval_current(N, battery[4]).value, w = eval_current(flipped(N), battery[4]).value;
    R.add("cu.flip", "orientation", 0, std::abs(v + w), w == -v, "exact negation");

    const double b0 = boundary_mass(T.stage(0));
    const double b1 = boundary_mass(plain_subdivision(T.stage(0), 1));
    bool finite = true;
    for (int j = 0; j < T.stages(); ++j) finite = finite && std::isfinite(boundary_mass(T.stage(j)));
    R.add("cu.boundary", "boundary mass", b0, b1, finite && std::abs(b1 - b0) <= 1e-12 * b0,
          "stage 0 vs one plain subdivision; finite at every stage");
}

void check_prober(Recorder& R, const RunConfig& cfg)
{
    const auto sched = DeltaSchedule::hilbert();
    const auto H = build_hilbert_tower(2, sched);
    ProbeConfig pc;
    pc.c = cfg.c;
    pc.G = cfg.G;
    std::size_t bad = 0, annuli = 0, witnesses = 0;
    double gam[2] = {0, 0};
    double step_ratio = 0, sep_ratio = std::numeric_limits<double>::infinity();
    bool chain_ineq = true;
    for (int n = 1; n <= 2; ++n) {
        const auto& S = H.stages[static_cast<std::size_t>(n)].embedding;
        const CellAddress q = n == 1 ? root_address(2) : root_address(2).child({0, 0});
        const int d = ring_depth_for(n, sched, cfg.c);
        for (const auto& surf : surface_battery(S, q, d)) {
            const auto P = probe_cell(S, sched, surf, q, pc);
            for (const auto& a : P.annuli) {
                ++annuli;
                const bool hole = a.hole.has_value(), wit = a.witness.has_value();
                if (hole == wit) ++bad;
                if (wit) {
                    ++witnesses;
                    if (!verify_witness(q, *a.witness)) ++bad;
                    step_ratio = std::max(step_ratio, a.max_step / a.witness->lip_bound);
                    sep_ratio = std::min({sep_ratio, a.min_sep / a.witness->sep_lower, a.witness->separation / a.witness->sep_lower});
                }
            }
            if (surf.name == "flat") gam[n - 1] = P.gamma;
            chain_ineq = chain_ineq && P.chain_upper < P.chain_lower;
        }
    }
    R.add("pr.total", "square holes or sheet contradiction", 0, static_cast<double>(bad), bad == 0,
          std::to_string(annuli) + " annuli, " + std::to_string(witnesses) + " re-verified witnesses");

    const double lo = std::min(gam[0], gam[1]), hi = std::max(gam[0], gam[1]);
    R.add("pr.gamma", "γ independent of n", cfg.gamma_floor, lo, lo >= cfg.gamma_floor && hi <= 2 * lo,
          "flat surface γ at stages 1, 2: " + num(gam[0]) + ", " + num(gam[1]));

    const auto C = cumulative_bound(std::min(0.99, lo), cfg.G, sched, 200);
    bool dec = true;
    for (std::size_t i = 1; i < C.products.size(); ++i) dec = dec && C.products[i] < C.products[i - 1];
    const auto D = divergence_check(sched, 5, cfg.G);
    R.add("pr.cumulative", "cumulating the effects of holes", 1, C.value, dec && D.pass(),
          "200 stages strictly decreasing; decade blocks t = 2..5 certified");

    const bool chain = step_ratio <= 1 && sep_ratio >= 1 && chain_ineq && witnesses > 0;
    R.add("pr.chain", "distance chain", 1, step_ratio, chain,
          "max step / 4Cc5^-nδ_n, min separation / (5^-n-3 δ_n/2) = " + num(sep_ratio) + ", 8(C+glip F)c < 5^-3/2 at c = 10^-6/(C+glip F)");
}

} // namespace

VerificationReport cmd_verify(const fs::path& dir)
{
    const Bundle B = load_bundle(dir);
    VerificationReport rep;
    rep.config_sha256 = config_hash(B.config);
    if (B.manifest.value("config_sha256", "") != rep.config_sha256) throw BundleError("corrupt bundle: config hash mismatch");
    std::vector<CertRecord> certs;
    Recorder R{&certs};

    const BuiltTower T = build_tower(B.config);
    bool same = static_cast<int>(B.stages.size()) == T.stages();
    std::size_t differing = 0;
    for (int j = 0; same && j < T.stages(); ++j) {
        const auto& m = B.manifest.at("stages")[static_cast<std::size_t>(j)];
        const std::string text = read_file(dir / m.at("file").get<std::string>());
        if (sha256_hex(text) != m.at("sha256").get<std::string>() || dump_json(stage_json(T.stage(j))) != text) ++differing;
    }
    R.add("bundle.consistency", "artifact", 0, static_cast<double>(differing), same && differing == 0, "files vs manifest hashes and a rebuild from the config");
    for (int j = 0; j < static_cast<int>(B.stages.size()); ++j)
        rep.counts.push_back({{"record", "counts"},
                              {"stage", j},
                              {"cells", B.stages[static_cast<std::size_t>(j)].at("cells").size()},
                              {"vertices", B.stages[static_cast<std::size_t>(j)].at("vertices").size()},
                              {"dim", B.stages[static_cast<std::size_t>(j)].at("dim")}});

    check_complex_core(R, B);
    check_branched_cover(R, T, B.config);
    check_deformation(R, B.config);
    check_hilbert(R, T, B.config);
    check_affine(R, T, B.config);
    check_currents(R, T);
    check_prober(R, B.config);
    rep.certificates = std::move(certs);
    return rep;
}

// ---- probing ------------------------------------------------------------------------------------

namespace {

std::vector<int> digits_of(const CellAddress& a) { return {a.digits.begin(), a.digits.end()}; }

CellAddress address_from_digits(const json& d)
{
    CellAddress a = root_address(2);
    const auto v = d.get<std::vector<int>>();
    if (v.size() % 2) throw std::invalid_argument("surface spec: digit list must have even length");
    for (std::size_t i = 0; i < v.size(); i += 2) {
        if (v[i] < 0 || v[i] > 4 || v[i + 1] < 0 || v[i + 1] > 4) throw std::invalid_argument("surface spec: digits in 0..4");
        a = a.child({v[i], v[i + 1]});
    }
    return a;
}

} // namespace

json surface_spec(const StageEmbedding& S, const std::string& builtin, const CellAddress& q, const CellAddress& window, int depth, double slope)
{
    json graph;
    ProbeSurface P;
    if (builtin == "flat") {
        P = make_surface(S, "flat", window, depth, flat_graph(S.dim), 1.0);
        graph = {{"builtin", "flat"}};
    } else if (builtin == "tilt") {
        P = make_surface(S, "tilt", window, depth, tilt_graph(S.dim, slope), std::sqrt(1 + slope * slope));
        graph = {{"builtin", "tilt"}, {"slope", slope}};
    } else if (builtin == "single_sheet") {
        P = make_surface(S, "single sheet", window, depth, single_sheet_graph(S, 0), 1.12);
        graph = {{"builtin", "single_sheet"}, {"bit", 0}};
    } else if (builtin == "empty") {
        P = empty_surface(S, window, depth);
        graph = {{"builtin", "flat"}};
    } else {
        throw std::invalid_argument("surface: unknown builtin '" + builtin + "' (flat | tilt | single_sheet | empty)");
    }
    return json{{"name", builtin}, {"stage", S.stage}, {"q", digits_of(q)}, {"window", digits_of(window)}, {"depth", depth},
                {"rle", rle_encode(P.domain)}, {"graph", graph}, {"C", P.C}};
}

ProbeSurface surface_from_spec(const StageEmbedding& S, const json& spec)
{
    ProbeSurface P;
    P.name = spec.value("name", "surface");
    P.window = address_from_digits(spec.at("window"));
    P.depth = spec.at("depth").get<int>();
    if (P.depth < 0 || P.depth > 8) throw std::invalid_argument("surface spec: depth in 0..8");
    P.dim = S.dim;
    P.C = spec.at("C").get<double>();
    P.bilip = P.C;
    const auto n = static_cast<std::size_t>(pow5(P.depth));
    P.domain = rle_decode(spec.at("rle").get<std::vector<i64>>(), n * n);
    const auto& g = spec.at("graph");
    if (g.contains("table")) {
        P.graph = table_graph(P.window, P.depth, S.dim, g.at("table").get<std::vector<std::vector<double>>>());
    } else {
        const std::string b = g.at("builtin").get<std::string>();
        if (b == "flat") P.graph = flat_graph(S.dim);
        else if (b == "tilt") P.graph = tilt_graph(S.dim, g.at("slope").get<double>());
        else if (b == "single_sheet") P.graph = single_sheet_graph(S, g.value("bit", 0));
        else throw std::invalid_argument("surface spec: unknown builtin '" + b + "'");
    }
    return P;
}

json probe_json(const ProbeCertificate& P)
{
    json annuli = json::array();
    for (const auto& a : P.annuli) {
        json r{{"ring", a.ring}, {"layer", a.layer}, {"cells", a.cells}, {"missed", a.missed}};
        if (a.hole) {
            r["outcome"] = "hole_found";
            r["hole"] = a.hole->str();
        } else {
            const auto& w = *a.witness;
            r["outcome"] = "all_intersected_contradiction";
            auto pt = [](const CoverPoint& p) { return json{{"X", p.X}, {"Y", p.Y}, {"child", p.child}, {"bit", p.bit}}; };
            r["witness"] = {{"alpha", w.alpha},         {"across_sigma", w.across_sigma}, {"p", pt(w.p)},
                            {"q_claimed", pt(w.q_claimed)}, {"q_lift", pt(w.q_lift)},         {"base_dist", w.base_dist},
                            {"dtheta", w.dtheta},       {"shsep_separates", w.shsep_separates}, {"ambient_dist", w.ambient_dist},
                            {"lip_bound", w.lip_bound}, {"separation", w.separation},       {"sep_lower", w.sep_lower}};
            r["max_step"] = a.max_step;
            r["min_sep"] = a.min_sep;
        }
        r["lip_violations"] = a.lip_violations;
        annuli.push_back(std::move(r));
    }
    return json{{"surface", P.surface},
                {"n", P.n},
                {"q", P.q.str()},
                {"ring_depth", P.ring_depth},
                {"constants", {{"c", P.c}, {"c_small", P.c_small}, {"gamma", P.gamma}, {"G", P.G}, {"i_n", P.i_n}, {"delta_n", P.delta_n}}},
                {"holes", P.holes()},
                {"contradictions", P.contradictions()},
                {"hole_measure", P.hole_measure},
                {"parent_measure", P.parent_measure},
                {"cumulative_product", P.product},
                {"annuli", annuli}};
}

json cmd_probe(const fs::path& bundle, const json& spec)
{
    const Bundle B = load_bundle(bundle);
    if (B.config.mode != "hilbert") throw std::invalid_argument("probe: the prober runs on hilbert bundles");
    const int n = spec.at("stage").get<int>();
    if (n < 1 || n > B.config.max_stage) throw std::invalid_argument("probe: stage outside the bundle");
    const BuiltTower T = build_tower(B.config);
    const auto& S = T.stage(n);
    const ProbeSurface P = surface_from_spec(S, spec);
    const CellAddress q = address_from_digits(spec.at("q"));
    ProbeConfig pc;
    pc.c = B.config.c;
    pc.G = B.config.G;
    return probe_json(probe_cell(S, B.config.delta_schedule(), P, q, pc));
}

// ---- mesh export --------------------------------------------------------------------------------

std::string export_mesh(const StageEmbedding& S, const std::string& format, const std::vector<int>& axes)
{
    if (format != "ply" && format != "obj") throw std::invalid_argument("export: unknown format '" + format + "' (ply | obj)");
    std::vector<int> cols = axes;
    if (cols.empty()) {
        if (format == "obj") {
            for (int d = 0; d < std::min(3, S.dim); ++d) cols.push_back(d);
        } else {
            for (int d = 0; d < S.dim; ++d) cols.push_back(d);
        }
    }
    for (int c : cols)
        if (c < 0 || c >= S.dim) throw std::invalid_argument("export: projection axis outside the ambient space");
    std::vector<std::array<int, 3>> faces;
    for (std::size_t c = 0; c < S.complex.cells.size(); ++c) {
        const auto& vid = S.cell_vertices[c];
        for (const auto& s : cell_simplices(S.complex.cells[c])) {
            if (s.size() == 3) {
                faces.push_back({vid[static_cast<std::size_t>(s[0])], vid[static_cast<std::size_t>(s[1])], vid[static_cast<std::size_t>(s[2])]});
            } else if (s.size() == 4) {
                for (int skip = 0; skip < 4; ++skip) {
                    std::array<int, 3> f{};
                    int t = 0;
                    for (int v = 0; v < 4; ++v)
                        if (v != skip) f[static_cast<std::size_t>(t++)] = vid[static_cast<std::size_t>(s[static_cast<std::size_t>(v)])];
                    faces.push_back(f);
                }
            } else {
                throw std::invalid_argument("export: k > 3 simplices are not exported");
            }
        }
    }
    std::string out;
    char buf[64];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out += buf;
    };
    if (format == "ply") {
        out += "ply\nformat ascii 1.0\ncomment stage " + std::to_string(S.stage) + " tower " + S.tower + "\n";
        out += "element vertex " + std::to_string(S.vertices.size()) + "\n";
        for (int c : cols) out += "property double x" + std::to_string(c) + "\n";
        out += "element face " + std::to_string(faces.size()) + "\nproperty list uchar int vertex_indices\nend_header\n";
        for (const auto& v : S.vertices) {
            for (std::size_t i = 0; i < cols.size(); ++i) {
                if (i) out += ' ';
                num(v[static_cast<std::size_t>(cols[i])]);
            }
            out += '\n';
        }
        for (const auto& f : faces) out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
    } else {
        if (cols.size() > 4) throw std::invalid_argument("export: obj vertices carry at most 4 coordinates");
        out += "# stage " + std::to_string(S.stage) + " tower " + S.tower + "\n";
        for (const auto& v : S.vertices) {
            out += "v";
            for (int c : cols) {
                out += ' ';
                num(v[static_cast<std::size_t>(c)]);
            }
            out += '\n';
        }
        for (const auto& f : faces) out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
    }
    return out;
}

Mesh import_mesh(const std::string& text, const std::string& format)
{
    Mesh M;
    std::istringstream in(text);
    std::string line;
    auto fail = [](const std::string& w) { throw std::invalid_argument("import: " + w); };
    if (format == "ply") {
        std::size_t nv = 0, nf = 0;
        bool in_vertex = false;
        if (!std::getline(in, line) || line != "ply") fail("missing ply magic");
        while (std::getline(in, line) && line != "end_header") {
            std::istringstream ls(line);
            std::string w;
            ls >> w;
            if (w == "element") {
                std::string what;
                ls >> what;
                in_vertex = what == "vertex";
                (in_vertex ? nv : nf) = 0;
                if (in_vertex) ls >> nv;
                else ls >> nf;
            } else if (w == "property" && in_vertex) {
                ++M.dim;
            }
        }
        if (line != "end_header") fail("missing end_header");
        for (std::size_t i = 0; i < nv; ++i) {
            std::vector<double> v(static_cast<std::size_t>(M.dim));
            for (auto& x : v)
                if (!(in >> x)) fail("truncated vertex list");
            M.vertices.push_back(std::move(v));
        }
        for (std::size_t i = 0; i < nf; ++i) {
            int cnt = 0;
            std::array<int, 3> f{};
            if (!(in >> cnt >> f[0] >> f[1] >> f[2]) || cnt != 3) fail("only triangles are supported");
            M.faces.push_back(f);
        }
        return M;
    }
    if (format == "obj") {
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string w;
            ls >> w;
            if (w == "v") {
                std::vector<double> v;
                double x;
                while (ls >> x) v.push_back(x);
                M.dim = static_cast<int>(v.size());
                M.vertices.push_back(std::move(v));
            } else if (w == "f") {
                std::array<int, 3> f{};
                if (!(ls >> f[0] >> f[1] >> f[2])) fail("bad face");
                for (auto& x : f) --x;
                M.faces.push_back(f);
            }
        }
        return M;
    }
    throw std::invalid_argument("import: unknown format '" + format + "'");
}

} // namespace pur
