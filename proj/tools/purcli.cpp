// purcli: build, verify, probe and export tower bundles.
//
//   purcli build  --mode r4 --max-stage 2 --out B
//   purcli build  --config run.json --out B
//   purcli verify B                       (JSON lines on stdout; exit 1 on FAIL)
//
// Usage and runtime errors exit 2.
//   purcli surface B --stage 1 --builtin flat --out s.json
//   purcli probe  B --surface s.json
//   purcli export B --stage 1 --format ply --axes 0,1,2 --out m.ply

#include "pur/bundle.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

pur::CellAddress address_of(const std::vector<int>& d)
{
    if (d.size() % 2) throw std::invalid_argument("cell digits come in pairs");
    auto a = pur::root_address(2);
    for (std::size_t i = 0; i < d.size(); i += 2) a = a.child({d[i], d[i + 1]});
    return a;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"purcli: stage towers, certificates, probes and meshes"};
    app.require_subcommand(1);

    pur::RunConfig cfg;
    std::string config_file, out_dir;
    auto* build = app.add_subcommand("build", "build a tower and write a bundle directory");
    build->add_option("--config", config_file, "JSON config file (replaces the flags)");
    build->add_option("--mode", cfg.mode, "hilbert | r4 | rk")->check(CLI::IsMember({"hilbert", "r4", "rk"}));
    build->add_option("--k", cfg.k, "cell dimension");
    build->add_option("--max-stage", cfg.max_stage);
    build->add_option("--schedule", cfg.schedule, "hilbert | r4");
    build->add_option("--c", cfg.c, "prober run constant");
    build->add_option("--G", cfg.G);
    build->add_option("--gamma-floor", cfg.gamma_floor);
    build->add_option("--sigma-e-min", cfg.sigma_e_min);
    build->add_option("--sigma-e-max", cfg.sigma_e_max);
    build->add_option("--N-cap", cfg.N_cap);
    build->add_option("--window-rel-depth", cfg.window_rel_depth);
    build->add_option("--depth-ceiling", cfg.depth_ceiling);
    build->add_option("--cell-ceiling", cfg.cell_ceiling);
    build->add_option("--claim-samples", cfg.claim_samples);
    build->add_option("--search-samples", cfg.search_samples);
    build->add_option("--shsep-samples", cfg.shsep_samples);
    build->add_option("--seed", cfg.seed);
    build->add_option("--out", out_dir, "bundle directory")->required();

    std::string bundle;
    auto* verify = app.add_subcommand("verify", "recheck every invariant of a bundle");
    verify->add_option("bundle", bundle)->required();

    int stage = 1, depth = -1;
    std::string builtin = "flat", out_file;
    std::vector<int> q_digits, window_digits;
    double slope = 0.5;
    auto* surface = app.add_subcommand("surface", "write a probe surface spec for a hilbert bundle");
    surface->add_option("bundle", bundle)->required();
    surface->add_option("--stage", stage);
    surface->add_option("--builtin", builtin, "flat | tilt | single_sheet | empty");
    surface->add_option("--q", q_digits, "digits of Q, pairs")->delimiter(',');
    surface->add_option("--window", window_digits, "digits of the window (defaults to Q)")->delimiter(',');
    surface->add_option("--depth", depth, "levels below the window (defaults to the ring depth)");
    surface->add_option("--slope", slope);
    surface->add_option("--out", out_file);

    std::string surface_file;
    auto* probe = app.add_subcommand("probe", "probe a surface against a hilbert bundle");
    probe->add_option("bundle", bundle)->required();
    probe->add_option("--surface", surface_file)->required();
    probe->add_option("--out", out_file);

    std::string format = "ply";
    std::vector<int> axes;
    auto* exp = app.add_subcommand("export", "write a stage as PLY or OBJ");
    exp->add_option("bundle", bundle)->required();
    exp->add_option("--stage", stage);
    exp->add_option("--format", format)->check(CLI::IsMember({"ply", "obj"}));
    exp->add_option("--axes", axes, "ambient coordinates to keep")->delimiter(',');
    exp->add_option("--out", out_file);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2; // --help exits 0
    }

    try {
        if (*build) {
            if (!config_file.empty()) cfg = pur::config_from_json(json::parse(slurp(config_file)));
            cfg.validate();
            pur::cmd_build(cfg, out_dir);
            std::cerr << "wrote " << out_dir << "\n";
            return 0;
        }
        if (*verify) {
            const auto rep = pur::cmd_verify(bundle);
            rep.write(std::cout);
            return rep.pass() ? 0 : 1;
        }
        if (*surface) {
            const auto B = pur::load_bundle(bundle);
            if (B.config.mode != "hilbert") throw std::invalid_argument("surface: hilbert bundles only");
            const auto T = pur::build_tower(B.config);
            if (stage < 1 || stage >= T.stages()) throw std::invalid_argument("surface: stage outside the bundle");
            const auto q = address_of(q_digits);
            const auto w = window_digits.empty() ? q : address_of(window_digits);
            const int d = depth >= 0 ? depth : pur::ring_depth_for(stage, B.config.delta_schedule(), B.config.c);
            emit(out_file, pur::surface_spec(T.stage(stage), builtin, q, w, d, slope).dump() + "\n");
            return 0;
        }
        if (*probe) {
            emit(out_file, pur::cmd_probe(bundle, json::parse(slurp(surface_file))).dump(2) + "\n");
            return 0;
        }
        if (*exp) {
            const auto B = pur::load_bundle(bundle);
            if (stage < 0 || stage >= static_cast<int>(B.stages.size())) throw std::invalid_argument("export: stage outside the bundle");
            emit(out_file, pur::export_mesh(pur::stage_from_json(B.stages[static_cast<std::size_t>(stage)]), format, axes));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
