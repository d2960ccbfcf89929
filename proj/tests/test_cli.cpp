#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "strictbounds/io.hpp"

namespace fs = std::filesystem;
using strictbounds::io::Json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "strictbounds_test_cli";

// Runs the CLI with stdout and stderr discarded; returns its exit status.
int run(const std::string& args) {
    const std::string cmd = std::string(STRICTBOUNDS_CLI) + " " + args + " > " + (kWork / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string at(const std::string& name) { return (kWork / name).string(); }

struct Fixture {
    Fixture() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        spit(kWork / "spec.json",
             R"({"preset": "generic", "n": 30, "p": 5, "functional_end": 3, "nonnegative": [0, 1, 2]})");
        REQUIRE(run("gen-problem --spec " + at("spec.json") + " --seed 4 --out " + at("gen")) == 0);
    }
    ~Fixture() { fs::remove_all(kWork); }
};

} // namespace

TEST_CASE_FIXTURE(Fixture, "gen-problem writes the instance and a manifest") {
    for (const char* f : {"problem.json", "prior.json", "generative.json", "constraints.json", "truth.json", "y.json",
                          "manifest.json"})
        CHECK(fs::exists(kWork / "gen" / f));
    const Json m = strictbounds::io::read_json(kWork / "gen" / "manifest.json");
    CHECK(m.at("seed") == 4);
    const std::string sha = strictbounds::io::sha256_hex(slurp(kWork / "gen" / "problem.json"));
    CHECK(m.dump().find(sha) != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "retrievals run end to end and reruns are byte-identical") {
    const std::string g = at("gen") + "/";
    const std::string freq = "retrieve-freq --problem " + g + "problem.json --constraints " + g +
                             "constraints.json --y " + g + "y.json --certify --out ";
    REQUIRE(run(freq + at("f1")) == 0);
    REQUIRE(run(freq + at("f2")) == 0);
    CHECK(slurp(kWork / "f1" / "interval.json") == slurp(kWork / "f2" / "interval.json"));
    const Json iv = strictbounds::io::read_json(kWork / "f1" / "interval.json");
    CHECK(iv.at("lower").get<double>() <= iv.at("upper").get<double>());

    REQUIRE(run("retrieve-bayes --problem " + g + "problem.json --prior " + g + "prior.json --y " + g +
                "y.json --out " + at("b")) == 0);
    CHECK(slurp(kWork / "b" / "bias_multipliers.csv").rfind("index,label,m\n", 0) == 0);
    const Json bayes = strictbounds::io::read_json(kWork / "b" / "bayes.json");
    CHECK(bayes.at("gain_matrix").size() == 5);
    CHECK(bayes.at("gain_matrix").at(0).size() == 30);
    CHECK(bayes.at("averaging_kernel").size() == 5);

    const std::string study = "coverage-study --problem " + g + "problem.json --prior " + g + "prior.json --generative " +
                              g + "generative.json --constraints " + g +
                              "constraints.json --states 3 --noise 50 --noise-freq 10 --seed 2 --out ";
    REQUIRE(run(study + at("s1") + " --workers 1") == 0);
    REQUIRE(run(study + at("s2") + " --workers 3") == 0);
    for (const char* f : {"report.json", "per_x.csv", "histogram.csv"})
        CHECK(slurp(kWork / "s1" / f) == slurp(kWork / "s2" / f));
}

TEST_CASE_FIXTURE(Fixture, "existing outputs are not overwritten without --force") {
    const std::string g = at("gen") + "/";
    const std::string cmd =
        "retrieve-freq --problem " + g + "problem.json --y " + g + "y.json --out " + at("f");
    REQUIRE(run(cmd) == 0);
    const std::string before = slurp(kWork / "f" / "interval.json");
    CHECK(run(cmd) == 3);
    CHECK(slurp(kWork / "f" / "interval.json") == before);
    CHECK(run(cmd + " --force") == 0);
}

TEST_CASE_FIXTURE(Fixture, "bad input maps to exit codes") {
    const std::string g = at("gen") + "/";
    spit(kWork / "bad.json", R"({"K": [[1, NaN]]})");
    CHECK(run("retrieve-freq --problem " + at("bad.json") + " --y " + g + "y.json --out " + at("x")) == 3);
    CHECK(run("retrieve-freq --problem " + at("missing.json") + " --y " + g + "y.json --out " + at("x")) == 3);
    CHECK(run("retrieve-freq --y " + g + "y.json --out " + at("x")) == 3);
    CHECK(run("no-such-command") == 3);
    CHECK(run("--help") == 0);

    // A NaN inside an otherwise well-formed problem fails validation.
    Json p = strictbounds::io::read_json(kWork / "gen" / "problem.json");
    p["K"][0][0] = "NaN";
    spit(kWork / "nan.json", p.dump());
    CHECK(run("validate --problem " + at("nan.json") + " --instances 5 --out " + at("v")) == 2);
    CHECK(slurp(kWork / "last.log").find("FAIL") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "calibration commands chain through plan.json") {
    const std::string g = at("gen") + "/";
    REQUIRE(run("calibrate-optimize --problem " + g + "problem.json --prior " + g + "prior.json --constraints " + g +
                "constraints.json --index 3 --sigma 0.5,2 --gamma-points 6 --noise 10 --out " + at("co")) == 0);
    const Json plan = strictbounds::io::read_json(kWork / "co" / "plan.json");
    CHECK(plan.at("plans").size() == 2);
    REQUIRE(run("calibrate-run --problem " + g + "problem.json --constraints " + g + "constraints.json --plan " +
                at("co") + "/plan.json --x " + g + "truth.json --replicates 20 --out " + at("cr")) == 0);
    const std::string csv = slurp(kWork / "cr" / "calibration.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4); // header, baseline, two plans

    // Edited plans that break the budget identity are rejected.
    Json broken = plan;
    broken["plans"][0]["gamma"] = 0.5;
    spit(kWork / "broken.json", broken.dump());
    CHECK(run("calibrate-run --problem " + g + "problem.json --plan " + at("broken.json") + " --x " + g +
              "truth.json --replicates 5 --out " + at("cr2")) == 3);
}
