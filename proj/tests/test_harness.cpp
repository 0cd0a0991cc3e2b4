#include <gtest/gtest.h>
#include <rapidjson/document.h>
#include <rapidjson/schema.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rost/harness/config.hpp"
#include "rost/harness/run.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace rost;
using namespace rost::harness;
using rost::testing::error_code;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("rost-harness-" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunConfig small_covariance(const fs::path& out) {
    RunConfig c;
    c.experiment = "covariance";
    c.d = 2;
    c.sides = {3, 3};
    c.window_sides = {2, 2};
    c.betas = {0.3, 0.8};
    c.perturbations = 4;
    c.output_dir = out.string();
    return c;
}

RunConfig small_beta_shift(const fs::path& out, std::size_t threads) {
    RunConfig c;
    c.experiment = "beta-shift";
    c.sides = {8};
    c.window_sides = {5};
    c.draws = 300;
    c.threads = threads;
    c.output_dir = out.string();
    return c;
}

// Every regular file below `dir` except the run record, which carries the
// wall time and thread count.
std::map<std::string, std::string> run_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).string();
        if (rel == kResultFile || rel == "config.toml") continue;
        out[rel] = slurp(e.path());
    }
    return out;
}

}  // namespace

TEST(Config, TomlRoundTrip) {
    RunConfig c;
    c.experiment = "metastate-sweep";
    c.volumes = {{8}, {12}, {16}};
    c.window_sides = {3};
    c.beta = 0.7;
    c.seed = 0xF123456789ABCDEFULL;
    c.deltas = {1.0, -0.25};
    c.sizes = {4, 8};
    const auto path = fs::temp_directory_path() / "rost-roundtrip.toml";
    std::ofstream(path) << toml_text(c);
    RunConfig back;
    load_toml_file(back, path.string());
    EXPECT_EQ(canonical_json(back), canonical_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, SkippedKeysKeepTheirValue) {
    RunConfig c;
    c.experiment = "covariance";
    c.beta = 0.9;
    const auto t = toml::parse("beta = 0.2\nseed = 7\n");
    apply_toml(c, t, [](const std::string& k) { return k == "beta"; });
    EXPECT_EQ(c.beta, 0.9);
    EXPECT_EQ(c.seed, 7u);
}

TEST(Config, UnknownKey) {
    RunConfig c;
    EXPECT_EQ(error_code([&] { apply_toml(c, toml::parse("betta = 0.2\n")); }), "unknown-key");
}

TEST(Config, VolumeText) {
    EXPECT_EQ(parse_volume("4x4"), (std::vector<int>{4, 4}));
    EXPECT_EQ(parse_volume("12"), (std::vector<int>{12}));
    EXPECT_EQ(volume_text({4, 4}), "4x4");
    EXPECT_NE(error_code([] { parse_volume("4xx"); }), "");
}

TEST(Config, EveryViolationIsListed) {
    RunConfig c = small_covariance(fresh_dir("violations"));
    c.sides = {2, 3};
    c.distribution = "cauchy";
    c.threads = 0;
    const auto v = violations(c);
    EXPECT_GE(v.size(), 3u);
    std::string all;
    for (const auto& s : v) all += s + "\n";
    EXPECT_NE(all.find("degenerate-torus"), std::string::npos) << all;
    EXPECT_EQ(error_code([&] { validate(c); }), "invalid-config");
}

TEST(Run, CovarianceOnSmallTorus) {
    const auto dir = fresh_dir("cov");
    const auto rec = run_experiment(small_covariance(dir));
    EXPECT_EQ(rec.verdict, "exact-pass");
    EXPECT_TRUE(run_complete(dir));
    EXPECT_FALSE(fs::exists(dir / kIncompleteMarker));
    const auto back = load_result(dir);
    EXPECT_EQ(back.config_hash, rec.config_hash);
    EXPECT_EQ(back.verdict, "exact-pass");
    EXPECT_EQ(back.reports.front().statistics.size(), rec.reports.front().statistics.size());
    EXPECT_TRUE(fs::exists(dir / "couplings" / "couplings.f64"));
}

TEST(Run, RepeatedRunsAreIdentical) {
    const auto a = fresh_dir("rep-a"), b = fresh_dir("rep-b");
    auto ca = small_beta_shift(a, 1), cb = small_beta_shift(b, 1);
    const auto ra = run_experiment(ca);
    const auto rb = run_experiment(cb);
    EXPECT_EQ(ra.content_id, rb.content_id);
    cb.output_dir = ca.output_dir;
    EXPECT_EQ(config_hash(ca), config_hash(cb));
    EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
    EXPECT_EQ(run_files(a), run_files(b));
}

TEST(Run, ThreadCountDoesNotChangeOutputs) {
    const auto one = run_files([] {
        const auto d = fresh_dir("threads-1");
        run_experiment(small_beta_shift(d, 1));
        return d;
    }());
    for (std::size_t t : {4u, 8u}) {
        const auto d = fresh_dir("threads-" + std::to_string(t));
        run_experiment(small_beta_shift(d, t));
        EXPECT_EQ(run_files(d), one) << t << " threads";
    }
}

TEST(Run, DegenerateTorusWritesNothing) {
    const auto dir = fresh_dir("degenerate");
    auto c = small_covariance(dir);
    c.sides = {2, 3};
    try {
        run_experiment(c);
        FAIL() << "expected a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "invalid-config");
        EXPECT_NE(std::string(e.what()).find("degenerate-torus"), std::string::npos);
    }
    EXPECT_FALSE(fs::exists(dir));
}

TEST(Run, FailedRunStaysIncomplete) {
    const auto dir = fresh_dir("crash");
    const auto matrix = fs::temp_directory_path() / "rost-not-psd.csv";
    std::ofstream(matrix) << "1,2\n2,1\n";
    RunConfig c;
    c.experiment = "factorize";
    c.matrix = matrix.string();
    c.output_dir = dir.string();
    EXPECT_EQ(error_code([&] { run_experiment(c); }), "not-psd");
    EXPECT_TRUE(fs::exists(dir / kIncompleteMarker));
    EXPECT_FALSE(run_complete(dir));
    EXPECT_EQ(error_code([&] { load_result(dir); }), "incomplete-run");
}

TEST(Run, StaleResultIsRemovedOnRerun) {
    const auto dir = fresh_dir("stale");
    run_experiment(small_covariance(dir));
    const auto matrix = fs::temp_directory_path() / "rost-not-psd.csv";
    std::ofstream(matrix) << "1,2\n2,1\n";
    RunConfig c;
    c.experiment = "factorize";
    c.matrix = matrix.string();
    c.output_dir = dir.string();
    EXPECT_NE(error_code([&] { run_experiment(c); }), "");
    EXPECT_FALSE(fs::exists(dir / kResultFile));
    EXPECT_FALSE(run_complete(dir));
}

TEST(Emit, JsonMatchesBundledSchema) {
    rapidjson::Document sd;
    sd.Parse(slurp(fs::path(ROST_SOURCE_DIR) / "schema" / "report.schema.json").c_str());
    ASSERT_FALSE(sd.HasParseError());
    const rapidjson::SchemaDocument schema(sd);

    const auto dir = fresh_dir("schema");
    const auto rec = run_experiment(small_covariance(dir));
    for (const auto& p : emit_report(rec, "json", dir)) {
        rapidjson::Document d;
        d.Parse(slurp(p).c_str());
        ASSERT_FALSE(d.HasParseError());
        rapidjson::SchemaValidator v(schema);
        EXPECT_TRUE(d.Accept(v)) << v.GetInvalidSchemaKeyword();
    }
    // A stray key is rejected.
    auto j = rost::to_json(rec.reports.front());
    j["extra"] = 1;
    rapidjson::Document d;
    d.Parse(j.dump().c_str());
    rapidjson::SchemaValidator v(schema);
    EXPECT_FALSE(d.Accept(v));
}

TEST(Emit, CsvHasOneRowPerStatistic) {
    const auto dir = fresh_dir("csv");
    const auto rec = run_experiment(small_covariance(dir));
    fs::remove(dir / "report.csv");
    emit_report(rec, "csv", dir);
    std::ifstream in(dir / "report.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, kCsvHeader);
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, rec.reports.front().statistics.size());
}

TEST(Emit, AllWritesThreeFiles) {
    const auto dir = fresh_dir("all");
    const auto rec = run_experiment(small_covariance(dir));
    const auto files = emit_report(rec, "all", dir);
    ASSERT_EQ(files.size(), 3u);
    for (const auto& f : files) EXPECT_GT(fs::file_size(f), 0u) << f;
    EXPECT_EQ(error_code([&] { emit_report(rec, "xml", dir); }), "unknown-format");
}

namespace {

int cli(const std::string& args, const fs::path& root) {
    const std::string cmd = "ROST_OUTPUT_ROOT=" + root.string() + " " + ROST_CLI_PATH + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
    const auto root = fresh_dir("cli");
    EXPECT_EQ(cli("covariance --d 2 --sides 3,3 --window_sides 2,2 --perturbations 2", root), 0);

    const auto atoms = fs::temp_directory_path() / "rost-two-atoms.json";
    std::ofstream(atoms) << R"({"dim": 2, "atoms": [{"w": 0.5, "v": [1, 0]}, {"w": 0.5, "v": [0, 1]}]})";
    EXPECT_EQ(cli("stochastic-stability --atoms " + atoms.string() +
                      " --lambda 1 --function '1{q12=1}' --field_draws 100000",
                  root),
              1);

    EXPECT_EQ(cli("covariance --d 2 --sides 2,3", root), 2);
    EXPECT_EQ(cli("covariance --no-such-flag 1", root), 2);
    EXPECT_EQ(cli("report " + (root / "missing").string(), root), 2);
    EXPECT_EQ(cli("", root), 2);
}

TEST(Cli, ConfigFileAndOverrides) {
    const auto root = fresh_dir("cli-config");
    fs::create_directories(root);
    const auto toml_path = root / "cov.toml";
    std::ofstream(toml_path) << "experiment = \"covariance\"\nd = 2\nsides = [3, 3]\nwindow_sides = [2, 2]\n"
                                "perturbations = 2\noutput_dir = \"" + (root / "run").string() + "\"\n";
    EXPECT_EQ(cli("covariance --config " + toml_path.string() + " --beta 0.9", root), 0);
    RunConfig c;
    load_toml_file(c, (root / "run" / "config.toml").string());
    EXPECT_EQ(c.beta, 0.9);
    EXPECT_EQ(c.sides, (std::vector<int>{3, 3}));
    EXPECT_EQ(cli("report " + (root / "run").string() + " --format all", root), 0);
    EXPECT_EQ(cli("free-energy --config " + toml_path.string(), root), 2);
}

TEST(ReportRecord, JsonRoundTrip) {
    const auto dir = fresh_dir("record");
    const auto rec = run_experiment(small_covariance(dir));
    const auto back = record_from_json(to_json(rec));
    EXPECT_EQ(to_json(back).dump(), to_json(rec).dump());
    auto j = to_json(rec);
    j["schema_version"] = 99;
    EXPECT_EQ(error_code([&] { record_from_json(j); }), "schema-mismatch");
}

TEST(ReportVerdicts, WorstRowWins) {
    Report r;
    VerdictRule rule;
    r.compare("g", "a", 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, rule);
    r.finalize();
    EXPECT_EQ(r.verdict, "exact-pass");
    r.compare("g", "b", 1.0, 0.1, 1.2, 0.1, 0.2, 0.1, rule);
    r.finalize();
    EXPECT_EQ(r.verdict, "statistical-pass");
    r.compare("g", "c", 1.0, 0.1, 2.0, 0.1, 1.0, 0.1, rule);
    r.finalize();
    EXPECT_EQ(r.verdict, "fail");
}

TEST(ReportVerdicts, ChecksAndFlags) {
    Report r;
    r.checks.push_back({"x", true, true, 0.0, 0.0, "", true});
    r.finalize();
    EXPECT_EQ(r.verdict, "exact-pass");
    r.checks.push_back({"y", false, false, 0.0, 0.0, ""});
    r.finalize();
    EXPECT_EQ(r.verdict, "exact-pass");
    r.checks.push_back({"z", true, true, 0.0, 0.0, ""});
    r.finalize();
    EXPECT_EQ(r.verdict, "statistical-pass");
    r.flag("fail: weights-degenerate");
    r.finalize();
    EXPECT_EQ(r.verdict, "fail");
}
