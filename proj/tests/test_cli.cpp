#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "finrank/verify.hpp"

using namespace finrank;

namespace {

const char* kRankOne = R"({"d":1,"N":1,"A":{"diag":[0]},"B":[[1]],"Gamma0":{"diag":[0]},"Gamma":{"diag":[1]}})";
const char* kDiagPair =
    R"({"d":2,"N":2,"A":{"diag":[0,1]},"B":[[1,0],[0,1]],"Gamma0":{"diag":[0,0]},"Gamma":{"diag":[1,1]}})";

std::string validation_message(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + FINRANK_CLI_PATH + " " + args + " 2>&1";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string temp_file(const std::string& name, const std::string& content) {
    const std::string path = ::testing::TempDir() + name;
    std::ofstream(path) << content;
    return path;
}

std::vector<std::vector<double>> parse_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string line;
    std::getline(ss, line);  // header
    while (std::getline(ss, line)) {
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST(LoadScenario, MinimalRankOne) {
    const Scenario s = parse_scenario(kRankOne);
    EXPECT_EQ(s.d, 1);
    EXPECT_EQ(s.n, 1);
    EXPECT_EQ(s.gamma.matrix()(0, 0), Complex(1.0));
    EXPECT_TRUE(s.model().cyclicity().cyclic);
}

TEST(LoadScenario, RejectsNegativeGammaNamingLambdaMin) {
    const std::string msg = validation_message(
        R"({"d":2,"N":2,"A":{"diag":[0,1]},"B":[[1,0],[0,1]],"Gamma0":{"diag":[0,0]},"Gamma":{"diag":[1,-0.5]}})");
    EXPECT_NE(msg.find("lambda_min = -0.5"), std::string::npos) << msg;
    EXPECT_THROW((void)parse_scenario(R"({"d":1,"N":1,"A":[[0]],"B":[[1]],"Gamma0":[[0]],"Gamma":[[-1]]})"), NotPsdError);
}

TEST(LoadScenario, RejectsNonHermitianNamingEntry) {
    const std::string msg = validation_message(
        R"({"d":1,"N":2,"A":{"re":[[0,1],[2,0]]},"B":[[1],[0.5]],"Gamma0":[[0]],"Gamma":[[1]]})");
    EXPECT_NE(msg.find("field 'A'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(0,1)"), std::string::npos) << msg;
}

TEST(LoadScenario, ComplexEntriesAndShapeErrors) {
    const Scenario s = parse_scenario(
        R"({"d":1,"N":2,"A":{"re":[[0,1],[1,0]],"im":[[0,0.5],[-0.5,0]]},"B":[[1],[0]],"Gamma0":[[0]],"Gamma":[[1]]})");
    EXPECT_EQ(s.a.matrix()(0, 1), Complex(1.0, 0.5));
    EXPECT_NE(validation_message(R"({"d":1,"N":2,"A":{"diag":[0,1]},"B":[[1,0]],"Gamma0":[[0]],"Gamma":[[1]]})")
                  .find("field 'B'"),
              std::string::npos);
    EXPECT_NE(validation_message(R"({"d":1,"N":1,"A":[[0]],"B":[[1]],"Gamma0":[[0]]})").find("'Gamma'"),
              std::string::npos);
    // Ran B = span e1 is not cyclic for diag(0, 1).
    EXPECT_THROW((void)parse_scenario(R"({"d":1,"N":2,"A":{"diag":[0,1]},"B":[[1],[0]],"Gamma0":[[0]],"Gamma":[[1]]})"),
                 ValidationError);
}

TEST(LoadScenario, SyntaxErrorReportsLineAndColumn) {
    try {
        (void)parse_scenario("{\"d\": 1,\n  \"N\": 1,,\n}");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("at 2:10"), std::string::npos) << e.what();
    }
}

TEST(LoadScenario, RoundTripIsExact) {
    const Scenario s = random_scenario(3, 7, 42);
    const Scenario back = parse_scenario(scenario_to_json(s).dump());
    EXPECT_EQ((back.a.matrix() - s.a.matrix()).norm(), 0.0);
    EXPECT_EQ((back.b - s.b).norm(), 0.0);
    EXPECT_EQ((back.gamma0.matrix() - s.gamma0.matrix()).norm(), 0.0);
    EXPECT_EQ((back.gamma.matrix() - s.gamma.matrix()).norm(), 0.0);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(scenario_digest(back), scenario_digest(s));
}

TEST(LoadScenario, AcGridAndTolerances) {
    const Scenario s = parse_scenario(
        R"({"d":1,"N":1,"A":[[0]],"B":[[1]],"Gamma0":[[0]],"Gamma":[[1]],"seed":9,
            "tolerances":{"ak.agreement":1e-7},"ac":{"start":-1,"end":1,"densities":[[[1]],[[2]],[[1]]]}})");
    ASSERT_TRUE(s.ac.has_value());
    EXPECT_EQ(s.ac->nodes(), 3u);
    EXPECT_EQ(s.tolerance("ak.agreement", 1e-9), 1e-7);
    EXPECT_THROW((void)parse_scenario(
                     R"({"d":1,"N":1,"A":[[0]],"B":[[1]],"Gamma0":[[0]],"Gamma":[[1]],"ac":{"start":0,"end":1,"densities":[[[-1]],[[1]]]}})"),
                 NotPsdError);
}

TEST(RandomScenario, DeterministicAndValid) {
    EXPECT_EQ(scenario_to_json(random_scenario(2, 6, 77)).dump(), scenario_to_json(random_scenario(2, 6, 77)).dump());
    EXPECT_NE(scenario_digest(random_scenario(2, 6, 77)), scenario_digest(random_scenario(2, 6, 78)));
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Scenario s = random_scenario(2, 6, seed);
        EXPECT_NO_THROW((void)scenario_from_json(scenario_to_json(s))) << "seed " << seed;
    }
    EXPECT_THROW((void)random_scenario(3, 2, 0), ArgumentError);
}

TEST(RandomScenario, FullRankIdentityCouplingIsCyclic) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Scenario s = random_scenario(4, 4, seed);
        s.b = CMatrix::Identity(4, 4);
        EXPECT_TRUE(s.model().cyclicity().cyclic);
    }
}

TEST(Verify, RankOneAllSuitesPass) {
    const Report r = run_verification(parse_scenario(kRankOne), "all", VerifyOptions{});
    EXPECT_TRUE(r.passed()) << report_to_text(r);
    EXPECT_GE(r.count(CheckStatus::Pass), 20u);
    std::set<std::string> names;
    for (const CheckRecord& rec : r.records) {
        EXPECT_TRUE(names.insert(rec.name).second) << "duplicate record " << rec.name;
        EXPECT_FALSE(rec.anchor.empty()) << rec.name;
    }
}

TEST(Verify, SuiteFilterAndUnknownSuite) {
    const Scenario s = parse_scenario(kDiagPair);
    const Report r = run_verification(s, "dyadic", VerifyOptions{});
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].name, "dyadic.density_bound");
    EXPECT_EQ(run_verification(s, "ak,ad", VerifyOptions{}).records.size(), 7u);
    EXPECT_THROW((void)select_suites("nope"), ArgumentError);
}

TEST(Verify, BrokenPairFailsNamingTheAtom) {
    const Scenario s = parse_scenario(kDiagPair);
    VerifyOptions o;
    const Atom atom{1.0, HermitianMatrix::identity(2)};
    o.ad_pair_override = std::make_pair(MatrixMeasure(2, {atom}), MatrixMeasure(2, {atom}));
    const Report r = run_verification(s, "ad", o);
    EXPECT_FALSE(r.passed());
    EXPECT_EQ(r.records[0].status, CheckStatus::Fail);
    EXPECT_EQ(r.records[0].repro.at("atom").get<double>(), 1.0);
}

TEST(Verify, ReportIsDeterministicOutsideTiming) {
    const Scenario s = random_scenario(2, 5, 3);
    VerifyOptions o;
    o.mc_samples = 200;
    const std::string a = report_to_json(run_verification(s, "all", o), false).dump();
    o.threads = 3;
    const std::string b = report_to_json(run_verification(s, "all", o), false).dump();
    EXPECT_EQ(a, b);
    const nlohmann::json full = report_to_json(run_verification(s, "dyadic", o));
    EXPECT_TRUE(full.contains("timing"));
    EXPECT_TRUE(full["timing"].contains("timestamp"));
}

TEST(Verify, ToleranceScaleAndOverride) {
    Scenario s = parse_scenario(kRankOne);
    VerifyOptions o;
    o.tolerance_scale = 10.0;
    EXPECT_EQ(run_verification(s, "ak", o).records[0].tolerance, 1e-8);
    s.tolerances["ak.agreement"] = 1e-3;
    EXPECT_EQ(run_verification(s, "ak", o).records[0].tolerance, 1e-3);
}

TEST(Cli, ExitCodes) {
    const std::string good = temp_file("rank_one.json", kRankOne);
    EXPECT_EQ(run_cli("verify " + good).code, 0);
    EXPECT_EQ(run_cli("verify " + good + " --suite dyadic").code, 0);
    const CliRun broken = run_cli("verify " + good + " --suite ad --inject-broken-pair");
    EXPECT_EQ(broken.code, 1);
    EXPECT_NE(broken.out.find("atom x=0"), std::string::npos) << broken.out;
    EXPECT_EQ(run_cli("verify " + temp_file("bad.json", "{\"d\": 1,,}")).code, 2);
    EXPECT_EQ(run_cli("verify /nonexistent/scenario.json").code, 2);
    EXPECT_EQ(run_cli("verify " + good + " --suite nope").code, 2);
    EXPECT_EQ(run_cli("frobnicate").code, 2);
    EXPECT_EQ(run_cli("sweep " + good + " --t-min 0 --t-max 1 --steps 1").code, 2);
    EXPECT_EQ(run_cli("average " + good + " --z 1-1i").code, 2);
    EXPECT_EQ(run_cli("random --d 3 --N 2 --seed 1").code, 2);
}

TEST(Cli, EnvironmentOverridesAndFlagsWin) {
    const std::string good = temp_file("rank_one_env.json", kRankOne);
    EXPECT_EQ(run_cli("verify " + good + " --suite ak", "FINRANK_TOL_SCALE=abc").code, 2);
    const CliRun scaled = run_cli("verify " + good + " --suite ak --json", "FINRANK_TOL_SCALE=100 FINRANK_THREADS=2");
    ASSERT_EQ(scaled.code, 0) << scaled.out;
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(scaled.out)["records"][0]["tolerance"].get<double>(), 1e-7);
    const CliRun flag = run_cli("--tol-scale 2 verify " + good + " --suite ak --json", "FINRANK_TOL_SCALE=100");
    ASSERT_EQ(flag.code, 0) << flag.out;
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(flag.out)["records"][0]["tolerance"].get<double>(), 2e-9);
}

TEST(Cli, RandomIsReproducibleAndLoadable) {
    const CliRun a = run_cli("random --d 2 --N 5 --seed 123");
    const CliRun b = run_cli("random --d 2 --N 5 --seed 123");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(scenario_digest(parse_scenario(a.out)), scenario_digest(random_scenario(2, 5, 123)));
}

TEST(Cli, SweepStraightLineTrajectories) {
    const std::string diag = temp_file("diag_pair.json", kDiagPair);
    const CliRun r = run_cli("sweep " + diag + " --t-min -1 --t-max 1 --steps 201");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 201u);
    for (const auto& row : rows) {
        ASSERT_EQ(row.size(), 5u);
        EXPECT_NEAR(row[1], row[0], 1e-12);
        EXPECT_NEAR(row[2], 1.0 + row[0], 1e-12);
    }
    const CliRun two = run_cli("sweep " + diag + " --t-min 0 --t-max 1 --steps 2");
    EXPECT_EQ(parse_csv(two.out).size(), 2u);
}

TEST(Cli, SweepScalingHalvesCrossingParameter) {
    const std::string doubled = temp_file(
        "diag_pair_2.json",
        R"({"d":2,"N":2,"A":{"diag":[0,1]},"B":[[1,0],[0,1]],"Gamma0":{"diag":[0,0]},"Gamma":{"diag":[2,2]}})");
    const auto rows = parse_csv(run_cli("sweep " + doubled + " --t-min -1 --t-max 1 --steps 201").out);
    ASSERT_EQ(rows.size(), 201u);
    // Trajectory 1 is 2t: it reaches the level 1 at t = 0.5 instead of t = 1.
    for (const auto& row : rows) EXPECT_NEAR(row[1], 2.0 * row[0], 1e-12);
    EXPECT_NEAR(rows[150][1], 1.0, 1e-12);
}

TEST(Cli, AverageAndA2Commands) {
    const std::string good = temp_file("rank_one_avg.json", kRankOne);
    const CliRun avg = run_cli("average " + good + " --kernel poisson --z 0.5+1i");
    EXPECT_EQ(avg.code, 0) << avg.out;
    EXPECT_EQ(run_cli("average " + good + " --kernel box --z i").code, 2);
    const CliRun a2 = run_cli("a2 " + good + " --eps-min 1e-5");
    EXPECT_EQ(a2.code, 0) << a2.out;
    EXPECT_NE(a2.out.find("a2.bound"), std::string::npos);
}
