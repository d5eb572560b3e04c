#include <natgrow/commands.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace natgrow;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("natgrow_cli_" + name);
    fs::remove_all(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        // text cells read as NaN
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double x = std::strtod(cell.c_str(), &end);
            row.push_back(end != cell.c_str() && *end == '\0' ? x : std::nan(""));
        }
        rows.push_back(row);
    }
    return rows;
}

RunConfig config(const std::string& json, const std::string& preset = "f_pos") {
    return parse_config(nlohmann::json::parse(json), preset_config(preset));
}

} // namespace

TEST(Config, RejectsUnknownKeysAndBadTypes) {
    EXPECT_THROW(config(R"({"bogus": 1})"), UsageError);
    EXPECT_THROW(config(R"({"p": "two"})"), UsageError);
    EXPECT_THROW(config(R"({"L": {"lo": -1, "hi": 1}})"), UsageError);
    EXPECT_THROW(config(R"({"L": {"lo": -1, "hi": 1, "count": 3, "step": 1}})"), UsageError);
    EXPECT_THROW(config(R"({"tolerances": {"made_up": 1e-3}})"), UsageError);
    EXPECT_THROW(config(R"({"domain": "square"})"), UsageError);
    EXPECT_THROW(preset_config("nope"), UsageError);
}

TEST(Config, RangesAndEcho) {
    const auto c = config(R"({"L": {"lo": -2, "hi": 0, "count": 5}, "tolerances": {"root_tol": 1e-9}})");
    EXPECT_EQ(c.L.values(), (std::vector<double>{-2, -1.5, -1, -0.5, 0}));
    EXPECT_EQ(c.tol("root_tol"), 1e-9);
    EXPECT_EQ(c.tol("quad_tol"), 1e-11);
    const auto j = c.to_json();
    EXPECT_EQ(j["L"]["count"], 5);
    EXPECT_EQ(j["tolerances"]["quad_tol"], 1e-11);
    // the echo parses back to the same config
    const auto again = parse_config(j);
    EXPECT_EQ(again.to_json(), j);
}

TEST(Config, ExpressionNeedsZeros) {
    auto c = config(R"J({"f": "s*(s-1)*(2-s)"})J");
    EXPECT_THROW(resolve(c), UsageError);
    c = config(R"J({"f": "s*(s-1)*(2-s)", "alpha": 1, "beta": 2})J");
    EXPECT_EQ(resolve(c).f.beta(), 2.0);
}

TEST(Sha256, KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Analyze, NonnegativeF) {
    const auto d = fresh_dir("analyze_pos");
    EXPECT_EQ(cmd_analyze(config("{}"), d), 0);
    const auto j = read_json(d / "analyze.json");
    EXPECT_TRUE(j["area_holds"].get<bool>());
    EXPECT_EQ(j["L_tilde"], "+inf");
    EXPECT_TRUE(j["flatcore_bounded"].get<bool>());
    std::string header;
    const auto rows = read_csv(d / "area_H.csv", &header);
    EXPECT_EQ(header, "s,H");
    EXPECT_GT(rows.size(), 64u);
}

TEST(Analyze, SignChangingF) {
    const auto d = fresh_dir("analyze_sign");
    EXPECT_EQ(cmd_analyze(config("{}", "f_sign"), d), 0);
    const auto j = read_json(d / "analyze.json");
    EXPECT_NEAR(j["L_tilde"].get<double>(), 0.0, 1e-5);
    EXPECT_TRUE(j["holds"].get<bool>());
    // L = 0 sits on the boundary
    EXPECT_EQ(cmd_analyze(config(R"({"L": 0})", "f_sign"), fresh_dir("analyze_zero")), 2);
    const auto d2 = fresh_dir("analyze_scan");
    EXPECT_EQ(cmd_analyze(config(R"({"L": {"lo": 0.5, "hi": 1, "count": 2}})", "f_sign"), d2), 0);
    const auto j2 = read_json(d2 / "analyze.json");
    EXPECT_EQ(j2["points"].size(), 2u);
    EXPECT_EQ(j2["points"][1]["verdict"], "fails");
    EXPECT_TRUE(fs::exists(d2 / "area_H_1.csv"));
}

TEST(Analyze, MalformedExpressionWritesNothing) {
    const auto d = fresh_dir("analyze_bad");
    std::string msg;
    EXPECT_EQ(run_command("analyze", config(R"({"f": "s +", "alpha": 1, "beta": 2})"), d, &msg), 64);
    EXPECT_NE(msg.find("position 3"), std::string::npos) << msg;
    EXPECT_FALSE(fs::exists(d));
    EXPECT_EQ(run_command("frobnicate", config("{}"), d), 64);
}

TEST(Transform, ClosedForms) {
    for (double L : {0.0, -1.0, 1.0}) {
        const auto d = fresh_dir("transform");
        auto c = config("{}");
        c.L = Range::single(L);
        c.resolution = 101;
        ASSERT_EQ(cmd_transform(c, d), 0);
        const auto rows = read_csv(d / "transform.csv");
        ASSERT_EQ(rows.size(), 101u);
        for (const auto& r : rows) {
            const double s = r[0];
            const double psi = L == 0.0 ? s : L < 0 ? std::expm1(s) : -std::expm1(-s);
            EXPECT_NEAR(r[1], psi, L == 0.0 ? 1e-12 : 1e-9) << L << " " << s;
            EXPECT_NEAR(r[2], std::exp(-L * s), 1e-9 * std::exp(std::abs(L) * s));
        }
        EXPECT_TRUE(fs::exists(d / "psi_nodes.csv"));
    }
    auto c = config(R"({"L": {"lo": -1, "hi": 0, "count": 2}})");
    EXPECT_EQ(cmd_transform(c, fresh_dir("transform_range")), 64);
}

TEST(Solve, LinearOracle) {
    const auto d = fresh_dir("solve_linear");
    ASSERT_EQ(cmd_solve(preset_config("linear"), d), 0);
    const auto j = read_json(d / "solve.json");
    EXPECT_EQ(j["branch_count"], 1);
    EXPECT_TRUE(j["eigenvalue_check"]["passed"].get<bool>());
    EXPECT_NEAR(j["lambda"].get<double>(), std::numbers::pi * std::numbers::pi, 1e-6);
    const auto rows = read_csv(d / "profile_0.csv");
    EXPECT_EQ(rows.size(), 2001u);
    EXPECT_EQ(rows.front()[1], 0.0);
    EXPECT_NEAR(rows[1000][1], 0.5, 1e-12);
    // u = 0.5 sin(pi x)
    for (std::size_t i = 0; i < rows.size(); i += 100)
        EXPECT_NEAR(rows[i][1], 0.5 * std::sin(std::numbers::pi * rows[i][0]), 1e-9);
}

TEST(Solve, QuasilinearBranchesDeterministic) {
    const auto c = config(R"({"L": -2, "lambda": 60})");
    const auto d1 = fresh_dir("solve_q1"), d2 = fresh_dir("solve_q2");
    ASSERT_EQ(cmd_solve(c, d1), 0);
    ASSERT_EQ(cmd_solve(c, d2), 0);
    const auto j = read_json(d1 / "solve.json");
    ASSERT_EQ(j["branch_count"], 2);
    EXPECT_TRUE(j["all_accepted"].get<bool>());
    EXPECT_LT(j["lambda_min"]["value"].get<double>(), 60.0);
    for (const auto& name : {"solve.json", "profile_0.csv", "profile_1.csv", "time_map.csv"})
        EXPECT_EQ(slurp(d1 / name), slurp(d2 / name)) << name;
}

TEST(Sweep, LGridRecords) {
    const auto d = fresh_dir("sweep");
    const auto c = config(R"({"vary": "L", "grid": [-1, -2, -4, -8], "lambda": 50})");
    ASSERT_EQ(cmd_sweep(c, d), 0);
    const auto rows = read_csv(d / "sweep.csv");
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) EXPECT_LT(rows[k][5], rows[k + 1][5]);
    const auto j = read_json(d / "sweep.json");
    EXPECT_TRUE(j["norm_monotone"].get<bool>());
    EXPECT_EQ(cmd_sweep(config("{}"), fresh_dir("sweep_novary")), 64);
}

TEST(Verify, DefaultDiagnosticsConverge) {
    const auto d = fresh_dir("verify");
    ASSERT_EQ(cmd_verify(config("{}", "f_sign"), d), 0);
    const auto j = read_json(d / "verify.json");
    EXPECT_TRUE(j["passed"].get<bool>());
    for (const auto& x : j["diagnostics"]) EXPECT_TRUE(x["converged"].get<bool>()) << x["name"];
    EXPECT_TRUE(j["area_identity"]["passed"].get<bool>());
    std::string header;
    read_csv(d / "hratio.csv", &header);
    EXPECT_EQ(header, "L,ratio");
}

TEST(Manifest, ListsEveryFileWithHash) {
    const auto d = fresh_dir("manifest");
    ASSERT_EQ(cmd_verify(config("{}"), d), 0);
    const auto m = read_json(d / "manifest.json");
    EXPECT_EQ(m["command"], "verify");
    EXPECT_EQ(m["exit_code"], 0);
    EXPECT_EQ(m["config"]["seed"], 12345);
    std::set<std::string> listed;
    for (const auto& f : m["files"]) {
        const std::string name = f["path"];
        EXPECT_TRUE(listed.insert(name).second) << name;
        EXPECT_EQ(f["sha256"], sha256_hex(slurp(d / name))) << name;
    }
    std::set<std::string> present;
    for (const auto& e : fs::directory_iterator(d))
        if (e.path().filename() != "manifest.json") present.insert(e.path().filename().string());
    EXPECT_EQ(listed, present);
}

TEST(Manifest, WrittenOnFailure) {
    const auto d = fresh_dir("manifest_fail");
    // Psi' = e^{2000} at beta overflows the table
    auto c = config(R"({"L": -1000})");
    EXPECT_EQ(cmd_transform(c, d), 1);
    const auto m = read_json(d / "manifest.json");
    EXPECT_EQ(m["exit_code"], 1);
    EXPECT_EQ(m["stages"].back()["status"], "error");
}
