#include "pur/bundle.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace pur;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig hilbert_config()
{
    RunConfig c;
    c.mode = "hilbert";
    c.max_stage = 2;
    return c;
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("pur_test_bundle_" + name);
    fs::remove_all(p);
    return p;
}

const fs::path& hilbert_bundle()
{
    static const fs::path dir = [] {
        const auto d = scratch("h");
        cmd_build(hilbert_config(), d);
        return d;
    }();
    return dir;
}

} // namespace

TEST(Bundle, Sha256KnownAnswers)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Bundle, ConfigRoundTrip)
{
    RunConfig c;
    c.mode = "rk";
    c.k = 3;
    c.claim_samples = 1234;
    c.seed = 99;
    const auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    RunConfig d = c;
    d.seed = 100;
    EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Bundle, ConfigRejectsBadInput)
{
    auto j = to_json(RunConfig{});
    j["colour"] = "blue";
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = to_json(RunConfig{});
    j["mode"] = "r5";
    EXPECT_THROW(config_from_json(j), ConfigError);
    RunConfig c;
    c.mode = "rk";
    c.k = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c.mode = "hilbert";
    c.k = 3;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Bundle, ManifestMatchesFiles)
{
    const auto B = load_bundle(hilbert_bundle());
    ASSERT_EQ(B.stages.size(), 3u);
    const std::size_t cells[3] = {1, 33, 1089};
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& m = B.manifest.at("stages")[j];
        EXPECT_EQ(m.at("cells").get<std::size_t>(), cells[j]);
        EXPECT_EQ(B.stages[j].at("cells").size(), cells[j]);
        EXPECT_EQ(sha256_hex(slurp(hilbert_bundle() / m.at("file").get<std::string>())), m.at("sha256").get<std::string>());
    }
    EXPECT_EQ(B.manifest.at("config_sha256").get<std::string>(), config_hash(hilbert_config()));
}

TEST(Bundle, BuildIsByteDeterministic)
{
    const auto d = scratch("again");
    cmd_build(hilbert_config(), d);
    for (const auto& e : fs::directory_iterator(hilbert_bundle()))
        EXPECT_EQ(slurp(e.path()), slurp(d / e.path().filename())) << e.path().filename();
    fs::remove_all(d);
}

TEST(Bundle, VerifyPassesAndCarriesEveryInvariantOnce)
{
    const auto rep = cmd_verify(hilbert_bundle());
    EXPECT_TRUE(rep.pass());
    std::map<std::string, int> seen;
    for (const auto& c : rep.certificates) {
        ++seen[c.name];
        EXPECT_NE(c.status, "FAIL") << c.name << ": " << c.detail;
    }
    for (const auto& id : invariant_ids()) EXPECT_EQ(seen[id], 1) << id;
    // the affine-tower checks do not apply to a Hilbert run
    for (const auto& c : rep.certificates)
        if (c.module == "embedding_r4" || c.module == "embedding_rk") EXPECT_EQ(c.status, "SKIP") << c.name;

    std::stringstream out;
    rep.write(out);
    std::string line;
    std::vector<nlohmann::json> lines;
    while (std::getline(out, line)) lines.push_back(nlohmann::json::parse(line));
    ASSERT_GE(lines.size(), 2u + 3u + invariant_ids().size());
    EXPECT_EQ(lines.front().at("record"), "provenance");
    EXPECT_EQ(lines.back().at("record"), "summary");
    EXPECT_TRUE(lines.back().at("pass").get<bool>());
}

TEST(Bundle, TamperedWeightFailsVerification)
{
    const auto d = scratch("tamper");
    fs::copy(hilbert_bundle(), d);
    auto st = nlohmann::json::parse(slurp(d / "stage_1.json"));
    st["cells"][0]["w"] = st["cells"][0]["w"].get<int>() + 1;
    std::ofstream(d / "stage_1.json", std::ios::binary) << dump_json(st);
    const auto rep = cmd_verify(d);
    EXPECT_FALSE(rep.pass());
    bool consistency_failed = false;
    for (const auto& c : rep.certificates)
        if (c.name == "bundle.consistency") consistency_failed = c.status == "FAIL";
    EXPECT_TRUE(consistency_failed);
    fs::remove_all(d);
}

TEST(Bundle, CorruptManifestIsReported)
{
    const auto d = scratch("corrupt");
    fs::create_directories(d);
    std::ofstream(d / "manifest.json") << "{\"format\": ";
    EXPECT_THROW(load_bundle(d), BundleError);
    fs::remove_all(d);
}

TEST(Bundle, MeshExportRoundTrip)
{
    const auto B = load_bundle(hilbert_bundle());
    const auto S = stage_from_json(B.stages[2]);
    const auto ply = import_mesh(export_mesh(S, "ply"), "ply");
    EXPECT_EQ(ply.dim, S.dim);
    ASSERT_EQ(ply.vertices.size(), S.vertices.size());
    for (std::size_t v = 0; v < S.vertices.size(); ++v)
        for (int d = 0; d < S.dim; ++d)
            EXPECT_NEAR(ply.vertices[v][static_cast<std::size_t>(d)], S.vertices[v][static_cast<std::size_t>(d)], 1e-12);
    // one or two triangles per cell: whole squares split, half cells are triangles
    EXPECT_GE(ply.faces.size(), S.complex.cells.size());
    EXPECT_LE(ply.faces.size(), 2 * S.complex.cells.size());
    const auto obj = import_mesh(export_mesh(S, "obj", {0, 1, 2}), "obj");
    EXPECT_EQ(obj.dim, 3);
    EXPECT_EQ(obj.faces, ply.faces);
    for (std::size_t v = 0; v < S.vertices.size(); ++v)
        for (int d = 0; d < 3; ++d)
            EXPECT_NEAR(obj.vertices[v][static_cast<std::size_t>(d)], S.vertices[v][static_cast<std::size_t>(d)], 1e-12);
    EXPECT_THROW(export_mesh(S, "stl"), std::invalid_argument);
}
