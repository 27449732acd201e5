#include "burnsem/cli.hpp"
#include "burnsem/predictor.hpp"
#include "burnsem/table.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace burnsem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

bool has(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("usage errors") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"bogus"}).code == kExitUsage);
    CHECK(run({"fit"}).code == kExitUsage);
    CHECK(run({"predict", "--params", "p", "--stats", "s", "--input", "1", "--transform-mode", "log"}).code ==
          kExitUsage);
    const auto help = run({"--help"});
    CHECK(help.code == kExitOk);
    CHECK(has(help.out, "simulate"));
}

TEST_CASE("simulate") {
    const auto dir = support::scratch("cli-simulate");
    const auto r = run({"simulate", "--n", "1", "--out", (dir / "x.csv").string()});
    CHECK(r.code == kExitValidation);
    CHECK(has(r.err, "N ≥ 2 required"));

    const auto a = run({"simulate", "--n", "500", "--seed", "42", "--out", (dir / "a.csv").string()});
    REQUIRE(a.code == kExitOk);
    const auto b = run({"simulate", "--n", "500", "--seed", "42", "--out", (dir / "b.csv").string()});
    REQUIRE(b.code == kExitOk);
    for (const char* suffix : {".csv", ".stats.csv", ".cov.csv"}) {
        CHECK(read_file(dir / (std::string("a") + suffix)) == read_file(dir / (std::string("b") + suffix)));
    }
    const Table t = parse_csv(read_file(dir / "a.csv"));
    CHECK(t.rows() == 500);
    CHECK(t.names == cohort_columns(true));
    const auto manifest = Json::parse(read_file(dir / "a.manifest.json"));
    CHECK(manifest["command"] == "simulate");
    CHECK(manifest["seed"] == 42);
    CHECK(manifest.contains("timestamp"));
    CHECK(manifest["outputs"]["stats"] == (dir / "a.stats.csv").string());

    CHECK(run({"simulate", "--out", "/nonexistent/dir/c.csv"}).code == kExitIo);
}

TEST_CASE("fit") {
    const auto dir = support::scratch("cli-fit");
    REQUIRE(run({"simulate", "--n", "800", "--out", (dir / "c.csv").string()}).code == kExitOk);

    const auto one = run({"fit", "--model", "identified", "--data", (dir / "c.csv").string(), "--max-iter", "1",
                          "--out", (dir / "p1.json").string()});
    REQUIRE(one.code == kExitOk);
    CHECK(one.out.rfind("--- Iteration 1 ---\n", 0) == 0);
    CHECK(has(one.out, "Chi-square ((N-1)*F_ML, N=800)"));
    CHECK(read_file(dir / "p1.report.txt") == one.out);
    const std::string trace = read_file(dir / "p1.trace.csv");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 3);

    const auto full = run({"fit", "--data", (dir / "c.csv").string(), "--out", (dir / "p.json").string(),
                           "--gradient-report", "--eta", "0.5"});
    REQUIRE(full.code == kExitOk);
    CHECK(has(full.out, "Status: converged"));
    CHECK(full.err.empty());
    const auto fitted = parse_params(read_file(dir / "p.json"));
    CHECK(fitted.model.name() == "identified");
    CHECK(fitted.fit_info["status"] == "converged");
    CHECK(read_file(dir / "p.gradient.csv").rfind("parameter,analytic,", 0) == 0);

    const auto cov = run({"fit", "--data", (dir / "c.cov.csv").string(), "--out", (dir / "q.json").string(), "--eta", "0.5"});
    REQUIRE(cov.code == kExitOk);
    CHECK_FALSE(has(cov.out, "Chi-square"));
    CHECK(parse_params(read_file(dir / "q.json")).theta == fitted.theta);

    const auto literal = run({"fit", "--model", "paper-literal", "--data", (dir / "c.csv").string(), "--max-iter",
                              "1", "--out", (dir / "l.json").string()});
    REQUIRE(literal.code == kExitOk);
    CHECK(has(literal.err, "structurally unidentified"));
    CHECK(has(literal.err, "BO~CT, BO~RT, BO~RC, BO~SF_EE, BO~SF_DP, BO~SF_PA, resid(BO)"));

    const auto unknown = run({"fit", "--model", "nope", "--data", (dir / "c.csv").string()});
    CHECK(unknown.code == kExitValidation);
    CHECK(run({"fit", "--data", (dir / "missing.csv").string()}).code == kExitIo);
}

TEST_CASE("fit on degenerate covariance input") {
    const auto dir = support::scratch("cli-fit-degenerate");
    const Model model(builtin_identified_variant());
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(10, 10);
    s(3, 3) = 0.0;
    write_file(dir / "flat.csv", format_covariance_csv(CovMatrix(model.observed(), s)));
    const auto flat = run({"fit", "--data", (dir / "flat.csv").string(), "--out", (dir / "p.json").string()});
    CHECK(flat.code == kExitValidation);
    CHECK(has(flat.err, "'CT4'"));

    s = Eigen::MatrixXd::Identity(10, 10);
    s(0, 1) = s(1, 0) = 2.0;
    write_file(dir / "npd.csv", format_covariance_csv(CovMatrix(model.observed(), s)));
    const auto npd = run({"fit", "--data", (dir / "npd.csv").string(), "--out", (dir / "p.json").string()});
    CHECK(npd.code == kExitNumerical);

    write_file(dir / "bad.csv", "variable,a\nb,1\n");
    CHECK(run({"fit", "--data", (dir / "bad.csv").string()}).code == kExitValidation);
}

TEST_CASE("predict") {
    const auto dir = support::scratch("cli-predict");
    const std::string params = support::fixture("paper_params.json").string();
    const std::string stats = support::fixture("paper_stats.csv").string();
    const auto r = run({"predict", "--input", "3,2,2,1,1,1,1", "--params", params, "--stats", stats, "--out",
                        (dir / "pred.json").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(has(r.out, "BO predicted (standardized) = -0.387"));
    CHECK(has(r.out, " CT: 0.5454\n"));
    CHECK(has(r.out, " RT: -2.0934\n"));
    CHECK(has(r.out, " RC: -1.0098\n"));
    const auto j = Json::parse(read_file(dir / "pred.json"));
    CHECK(std::abs(j["bo_standardized"].get<double>() - -0.3878) <= 5e-4);

    const auto again = run({"predict", "--input", "3,2,2,1,1,1,1", "--params", params, "--stats", stats});
    CHECK(again.out == r.out);

    const auto bad = run({"predict", "--input", "4,2,2,1,1,1,1", "--params", params, "--stats", stats});
    CHECK(bad.code == kExitValidation);
    CHECK(has(bad.err, "CT1 out of range 1..3"));

    const auto nostats =
        run({"predict", "--input", "3,2,2,1,1,1,1", "--params", params, "--stats", (dir / "none.csv").string()});
    CHECK(nostats.code == kExitIo);

    const auto wrong_model =
        run({"predict", "--input", "3,2,2,1,1,1,1", "--params", params, "--stats", stats, "--model", "identified"});
    CHECK(wrong_model.code == kExitValidation);
}

TEST_CASE("replaying a manifest reproduces the outputs") {
    const auto dir = support::scratch("cli-replay");
    REQUIRE(run({"simulate", "--n", "300", "--seed", "7", "--out", (dir / "c.csv").string()}).code == kExitOk);
    REQUIRE(run({"fit", "--data", (dir / "c.csv").string(), "--out", (dir / "p.json").string()}).code == kExitOk);
    const std::string cohort = read_file(dir / "c.csv");
    const std::string params = read_file(dir / "p.json");
    const std::string trace = read_file(dir / "p.trace.csv");
    std::filesystem::remove(dir / "c.csv");
    std::filesystem::remove(dir / "p.json");
    std::filesystem::remove(dir / "p.trace.csv");

    REQUIRE(run({"replay", "--manifest", (dir / "c.manifest.json").string()}).code == kExitOk);
    REQUIRE(run({"replay", "--manifest", (dir / "p.manifest.json").string()}).code == kExitOk);
    CHECK(read_file(dir / "c.csv") == cohort);
    CHECK(read_file(dir / "p.json") == params);
    CHECK(read_file(dir / "p.trace.csv") == trace);

    write_file(dir / "broken.json", "{");
    CHECK(run({"replay", "--manifest", (dir / "broken.json").string()}).code == kExitValidation);
}
