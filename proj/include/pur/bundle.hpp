#pragma once
// Run configuration, on-disk bundles, line-delimited verification reports,
// probe files and mesh export.
//
// Bundle layout (directory):
//   manifest.json   {"format", "config", "config_sha256", "stages": [{"j", "file", "sha256", "cells", "vertices", "dim"}]}
//   stage_<j>.json  {"tower", "stage", "k", "dim", "m", "cells": [...], "vertex_keys": [...], "vertices": [...]}
// A cell is {"d": digits, "c": [[step, xi, zeta, bit], ...], "s": [half, a, b, anti, upper],
//            "w": weight exponent, "role": int, "parent": int, "v": vertex indices}.
// Report records are one JSON object per line:
//   {"record": "certificate", "module", "name", "anchor", "bound", "measured", "status": PASS|FAIL|SKIP, "detail"}

#include "pur/currents.hpp"
#include "pur/hilbert.hpp"
#include "pur/prober.hpp"
#include "pur/r4.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pur {

struct RunConfig {
    std::string mode = "r4"; // hilbert | r4 | rk
    int k = 2;
    int max_stage = 2;
    std::string schedule;    // hilbert | r4; empty picks the mode's default
    double c = 2.5;          // prober run constant
    double G = 10.0;
    double gamma_floor = 1e-4;
    std::string eps = "2^-j";
    int sigma_e_min = -10, sigma_e_max = 6;
    int N_cap = 3;
    int window_rel_depth = -1;
    int depth_ceiling = 16;
    std::size_t cell_ceiling = 2000000;
    std::size_t claim_samples = 100000;
    std::size_t search_samples = 20000;
    std::size_t shsep_samples = 10000;
    std::uint64_t seed = 20240917;

    DeltaSchedule delta_schedule() const;
    TowerConfig tower_config() const;
    void validate() const; // throws ConfigError
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct BundleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j); // unknown keys are rejected
std::string sha256_hex(const std::string& data);
std::string config_hash(const RunConfig& c);

// Either tower kind behind one interface.
struct BuiltTower {
    RunConfig config;
    std::variant<HilbertTower, AffineTower> tower;

    int stages() const;
    const StageEmbedding& stage(int j) const;
    bool hilbert() const { return tower.index() == 0; }
    const HilbertTower& H() const { return std::get<0>(tower); }
    const AffineTower& A() const { return std::get<1>(tower); }
};
BuiltTower build_tower(const RunConfig& c);

nlohmann::json stage_json(const StageEmbedding& S);
std::string dump_json(const nlohmann::json& j); // the byte format written to disk

void write_bundle(const std::filesystem::path& dir, const BuiltTower& T);
void cmd_build(const RunConfig& c, const std::filesystem::path& dir);

struct Bundle {
    std::filesystem::path dir;
    RunConfig config;
    nlohmann::json manifest;
    std::vector<nlohmann::json> stages;
};
Bundle load_bundle(const std::filesystem::path& dir); // throws BundleError
StageComplex complex_from_json(const nlohmann::json& stage);
// geometry only (complex, vertices, cell vertices); no eval or pieces
StageEmbedding stage_from_json(const nlohmann::json& stage);

struct CertRecord {
    std::string module, name, anchor;
    double bound = 0.0, measured = 0.0;
    std::string status; // PASS, FAIL, SKIP
    std::string detail;
    nlohmann::json line() const;
};
struct VerificationReport {
    std::string config_sha256;
    std::vector<nlohmann::json> counts; // per stage
    std::vector<CertRecord> certificates;
    bool pass() const;
    void write(std::ostream& out) const;
};
// the invariant ids every report carries exactly once
const std::vector<std::string>& invariant_ids();
VerificationReport cmd_verify(const std::filesystem::path& dir);

// ---- probing ------------------------------------------------------------------------------------
// Surface spec: {"stage", "q": digits of Q, "window": digits, "depth", "rle": runs,
//                "graph": {"builtin": "flat"|"tilt"|"single_sheet", "slope", "bit"} or {"table": rows},
//                "C": declared Lipschitz constant}
nlohmann::json surface_spec(const StageEmbedding& S, const std::string& builtin, const CellAddress& q,
                            const CellAddress& window, int depth, double slope = 0.5);
ProbeSurface surface_from_spec(const StageEmbedding& S, const nlohmann::json& spec);
nlohmann::json probe_json(const ProbeCertificate& P);
nlohmann::json cmd_probe(const std::filesystem::path& bundle, const nlohmann::json& spec);

// ---- mesh export --------------------------------------------------------------------------------
// Triangles of every cell (k = 3: the four faces of each simplex). `axes` picks
// ambient coordinates for viewers; empty keeps all of them (PLY only).
std::string export_mesh(const StageEmbedding& S, const std::string& format, const std::vector<int>& axes = {});
struct Mesh {
    int dim = 0;
    std::vector<std::vector<double>> vertices;
    std::vector<std::array<int, 3>> faces;
};
Mesh import_mesh(const std::string& text, const std::string& format);

} // namespace pur
