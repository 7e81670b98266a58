#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"

using nlohmann::json;

namespace {

std::string bin_path() {
    const char* b = std::getenv("HOPFDDE_BIN");
    if (b != nullptr)
        return b;
    // direct (non-ctest) invocation from the build directory
    REQUIRE_MESSAGE(::access("./hopfdde", X_OK) == 0,
                    "HOPFDDE_BIN must point at the executable");
    return "./hopfdde";
}

std::string fresh_dir(const char* tag) {
    static int counter = 0;
    std::string d = "/tmp/hopfdde_cli_" + std::string(tag) + "_" +
                    std::to_string(::getpid()) + "_" + std::to_string(counter++);
    const int rc = std::system(("rm -rf " + d + " && mkdir -p " + d).c_str());
    REQUIRE(rc == 0);
    return d;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args, const std::string& dir) {
    const std::string so = dir + "/stdout.txt", se = dir + "/stderr.txt";
    const int st = std::system(
        (bin_path() + " " + args + " >" + so + " 2>" + se).c_str());
    RunResult r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

const char* kConfigA =
    R"({"model.r": 30, "model.K": 1, "model.m": 1, "model.a": 1, "model.c": 4, "model.d": 0.1})";

} // namespace

TEST_CASE("thresholds command writes the threshold table") {
    const std::string dir = fresh_dir("thr");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r =
        run("thresholds --config " + dir + "/cfg.json --out " + dir + "/out", dir);
    CHECK_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(slurp(dir + "/out/thresholds.json"));
    CHECK(std::abs(j.at("K_0").get<double>() - 41.0 / 39.0) < 1e-9);
    CHECK(std::abs(j.at("K_c").get<double>() - 0.1 / 3.9) < 1e-9);
    CHECK(j.contains("tau_max"));
    // the effective config is recorded next to the outputs
    const json rc = json::parse(slurp(dir + "/out/run_config.json"));
    CHECK(rc.at("model.K").get<double>() == 1.0);
}

TEST_CASE("set overrides reach the computation") {
    const std::string dir = fresh_dir("set");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r = run("thresholds --config " + dir + "/cfg.json --out " + dir +
                                "/out --set model.tau=26",
                            dir);
    CHECK_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(slurp(dir + "/out/thresholds.json"));
    CHECK(std::abs(j.at("K_1").get<double>() - 0.507371311482) < 1e-8);
}

TEST_CASE("missing required field names the field and exits 1") {
    const std::string dir = fresh_dir("miss");
    write_file(dir + "/cfg.json",
               R"({"model.K": 1, "model.m": 1, "model.a": 1, "model.c": 4, "model.d": 0.1})");
    const RunResult r =
        run("thresholds --config " + dir + "/cfg.json --out " + dir + "/out", dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("model.r") != std::string::npos);
}

TEST_CASE("malformed config exits 1") {
    const std::string dir = fresh_dir("bad");
    write_file(dir + "/cfg.json", "{not json");
    const RunResult r =
        run("thresholds --config " + dir + "/cfg.json --out " + dir + "/out", dir);
    CHECK(r.code == 1);
}

TEST_CASE("unknown arguments exit 1") {
    const std::string dir = fresh_dir("arg");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r = run("thresholds --config " + dir +
                                "/cfg.json --no-such-flag --out " + dir + "/out",
                            dir);
    CHECK(r.code == 1);
}

TEST_CASE("catalog output is deterministic and carries the expected schema") {
    const std::string dir = fresh_dir("hopf");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r1 =
        run("hopf --config " + dir + "/cfg.json --out " + dir + "/o1", dir);
    const RunResult r2 =
        run("hopf --config " + dir + "/cfg.json --out " + dir + "/o2", dir);
    CHECK_MESSAGE(r1.code == 0, r1.err);
    CHECK(r2.code == 0);
    const std::string csv1 = slurp(dir + "/o1/hopf_points.csv");
    CHECK(csv1 == slurp(dir + "/o2/hopf_points.csv"));
    CHECK(csv1.rfind("n,i,tau,w,period,delta,gamma1\n", 0) == 0);
    int rows = -1; // don't count the header
    for (char ch : csv1)
        rows += ch == '\n';
    CHECK(rows == 8);
    const json cat = json::parse(slurp(dir + "/o1/hopf_catalog.json"));
    CHECK(cat.at("count").get<int>() == 8);
    CHECK(cat.at("chi").size() >= 4);
}

TEST_CASE("simulate settles on the stable equilibrium and reports it") {
    const std::string dir = fresh_dir("sim");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r = run("simulate --config " + dir + "/cfg.json --out " + dir +
                                "/out --set model.tau=28 --set sim.t_end=2500",
                            dir);
    CHECK_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(slurp(dir + "/out/simulate.json"));
    CHECK(j.at("kind").get<std::string>() == "equilibrium");
    CHECK(j.at("equilibrium").at("kind").get<std::string>() == "interior");
    CHECK(slurp(dir + "/out/trajectory.csv").rfind("t,x,y\n", 0) == 0);
}

TEST_CASE("numerical blowup exits 2") {
    const std::string dir = fresh_dir("num");
    write_file(dir + "/cfg.json", kConfigA);
    // dt passes the static check but is far too coarse for the stiffness
    const RunResult r = run("simulate --config " + dir + "/cfg.json --out " + dir +
                                "/out --set model.tau=12 --dt 0.59",
                            dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("branch command emits per-branch tables and the pair report") {
    const std::string dir = fresh_dir("br");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r = run("branch --config " + dir + "/cfg.json --out " + dir +
                                "/out --set branch.n=3 --set branch.which=pair",
                            dir);
    CHECK_MESSAGE(r.code == 0, r.err);
    const std::string csv = slurp(dir + "/out/branch_n3_minus.csv");
    CHECK(csv.rfind("tau,period,amp_x,amp_y,xmin,xmax,ymin,ymax\n", 0) == 0);
    CHECK(slurp(dir + "/out/branch_n3_plus.csv").size() > 0);
    const json rep = json::parse(slurp(dir + "/out/branch_report.json"));
    CHECK(rep.contains("pairs"));
    bool saw = false;
    for (const auto& pv : rep.at("pairs"))
        if (pv.at("n").get<int>() == 3) {
            saw = true;
            CHECK(pv.at("verdict").get<std::string>() == "coincident");
        }
    CHECK(saw);
}

TEST_CASE("out-of-range branch index exits 1") {
    const std::string dir = fresh_dir("brx");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r = run("branch --config " + dir + "/cfg.json --out " + dir +
                                "/out --set branch.n=9",
                            dir);
    CHECK(r.code == 1);
}

TEST_CASE("verify command passes all self-checks") {
    const std::string dir = fresh_dir("vfy");
    write_file(dir + "/cfg.json", kConfigA);
    const RunResult r =
        run("verify --config " + dir + "/cfg.json --out " + dir + "/out", dir);
    CHECK_MESSAGE(r.code == 0, (r.out + r.err));
    const json rep = json::parse(slurp(dir + "/out/verify.json"));
    CHECK(rep.at("failed").get<int>() == 0);
    CHECK(rep.at("checks").size() == 10);
}
