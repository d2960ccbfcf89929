#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "strictbounds/error.hpp"
#include "strictbounds/io.hpp"

using namespace strictbounds;
namespace fs = std::filesystem;
using io::Json;

namespace {

template <class F>
std::string error_text(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("strictbounds_test_io_" + name);
    fs::remove_all(dir);
    return dir;
}

StudyReport sample_report() {
    StudyReport r;
    r.alpha = 0.05;
    r.seed = 12345678901234ULL;
    StudyRecord b;
    b.x_id = 0;
    b.method = "bayes";
    b.bias = -0.1234567890123456789;
    b.analytic_coverage = 0.93;
    b.empirical_coverage = 0.9301;
    b.mean_length = 2.1;
    b.length_sd = 0.0;
    b.n_noise_draws = 10000;
    b.theta = 1.0 / 3.0;
    StudyRecord f;
    f.x_id = 0;
    f.method = "frequentist";
    f.empirical_coverage = 0.951;
    f.mean_length = 11.17;
    f.length_sd = 1e-300;
    f.n_noise_draws = 999;
    f.failures = 1;
    f.theta = b.theta;
    r.per_x = {b, f};
    r.histograms.push_back(coverage_histogram("bayes", {0.93}, 0.005));
    r.undercoverage_fraction["bayes"] = 1.0;
    r.failure_reasons["SolverStall"] = 1;
    return r;
}

} // namespace

TEST_CASE("per_x CSV has the fixed header and header-only output for an empty report") {
    const std::string header =
        "x_id,method,bias,analytic_coverage,empirical_coverage,mean_length,length_sd,n_noise_draws,failures\n";
    CHECK(io::per_x_csv(StudyReport{}) == header);
    CHECK(io::histogram_csv(StudyReport{}) == "method,lower_edge,upper_edge,count\n");
    CHECK(io::per_location_csv(GridReport{}) == "location_id,x_km,y_km,bias,analytic_coverage,delta_from_nominal\n");
    const std::string csv = io::per_x_csv(sample_report());
    CHECK(csv.rfind(header, 0) == 0);
    CHECK(csv.find("0,frequentist,NaN,NaN,0.95099999999999996,11.17,1e-300,999,1\n") !=
          std::string::npos);
}

TEST_CASE("doubles are written with 17 significant digits and non-finite tokens") {
    CHECK(io::format_double(0.1) == "0.10000000000000001");
    CHECK(io::format_double(2.0) == "2");
    CHECK(io::format_double(std::nan("")) == "NaN");
    CHECK(io::format_double(INFINITY) == "inf");
    CHECK(io::format_double(-INFINITY) == "-inf");
    CHECK(io::number(std::nan("")).is_null());
    for (double v : {0.1, 1.0 / 3.0, -1e-300, 6.02214076e23, 4.9e-324})
        CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
}

TEST_CASE("study reports round-trip through JSON") {
    const StudyReport r = sample_report();
    const Json j = io::study_json(r);
    const StudyReport back = io::study_from_json(Json::parse(j.dump(2)));
    CHECK(back.seed == r.seed);
    CHECK(io::per_x_csv(back) == io::per_x_csv(r));
    CHECK(io::histogram_csv(back) == io::histogram_csv(r));
    CHECK(io::study_json(back).dump() == j.dump());
    CHECK(std::isnan(back.per_x[1].bias));
}

TEST_CASE("serialization is byte-stable") {
    const StudyReport r = sample_report();
    CHECK(io::study_json(r).dump(2) == io::study_json(sample_report()).dump(2));
    CHECK(io::per_x_csv(r) == io::per_x_csv(sample_report()));
}

TEST_CASE("problem, prior and constraints round-trip") {
    const SyntheticInstance inst = gen_problem(SyntheticSpec::paper_like(), 3);
    const Json pj = Json::parse(io::problem_json(inst.problem).dump());
    const LinearProblem p = io::parse_problem(pj);
    CHECK(p.K == inst.problem.K);
    CHECK(p.h == inst.problem.h);
    CHECK(p.labels == inst.problem.labels);
    CHECK(p.noise_cov.variances() == inst.problem.noise_cov.variances());
    const PriorModel prior = io::parse_prior(Json::parse(io::prior_json(inst.prior).dump()), p.p());
    CHECK(prior.mu_a == inst.prior.mu_a);
    CHECK(prior.sigma_a == inst.prior.sigma_a);
    const ConstraintSet cs =
        io::parse_constraints(Json::parse(io::constraints_json(inst.constraints, p.labels).dump()), p);
    CHECK(cs.A() == inst.constraints.A());
    CHECK(cs.b() == inst.constraints.b());
}

TEST_CASE("constraint descriptors accept labels, indices and open boxes") {
    LinearProblem p;
    p.K = Matrix::Identity(3, 3);
    p.noise_cov = NoiseCovariance::diagonal(Vector::Ones(3));
    p.h = Vector::Ones(3);
    p.labels = {"a", "b", "c"};
    const Json j = Json::parse(R"({"constraints": [
        {"type": "nonnegative", "indices": ["a", 2]},
        {"type": "box", "index": "b", "hi": 4},
        {"type": "fix", "index": 0, "value": 1.5}]})");
    const ConstraintSet cs = io::parse_constraints(j, p);
    CHECK(cs.q() == 5);
    Vector x(3);
    x << 1.5, -100.0, 0.0;
    CHECK(cs.max_violation(x) == 0.0);
    x(1) = 4.5;
    CHECK(cs.max_violation(x) == doctest::Approx(0.5));
}

TEST_CASE("parse errors name the offending field") {
    CHECK(error_text([] { io::parse_problem(Json::parse(R"({"K": [[1, 2]], "h": [1, 1]})")); })
              .find("field 'noise_cov'") != std::string::npos);
    CHECK(error_text([] {
              io::parse_problem(Json::parse(R"({"K": [[1, 2], [3]], "noise_cov_diag": [1, 1], "h": [1, 1]})"));
          }).find("field 'K") != std::string::npos);
    CHECK(error_text([] {
              io::parse_problem(Json::parse(R"({"K": [[1, 2]], "noise_cov_diag": [1], "h": [1]})"));
          }).find("field 'h'") != std::string::npos);
    LinearProblem p;
    p.K = Matrix::Identity(2, 2);
    p.noise_cov = NoiseCovariance::diagonal(Vector::Ones(2));
    p.h = Vector::Ones(2);
    CHECK(error_text([&] { io::parse_constraints(Json::parse(R"([{"type": "box", "index": 7}])"), p); })
              .find("constraints[0].index") != std::string::npos);
    CHECK(error_text([&] { io::parse_constraints(Json::parse(R"([{"type": "cone", "index": 0}])"), p); })
              .find("constraints[0]") != std::string::npos);
    CHECK(error_text([] { io::parse_spec(Json::parse(R"({"preset": "generic", "decayy": 0.5})")); })
              .find("decayy") != std::string::npos);
}

TEST_CASE("plans are checked against the budget identity on read") {
    const Json good = io::plan_json(make_plan(0.05, {0.02}, 0.03));
    const CalibrationPlan p = io::parse_plan(Json::parse(good.dump()));
    CHECK(p.gamma == 0.03);
    Json bad = good;
    bad["gamma"] = 0.04;
    try {
        io::parse_plan(bad);
        FAIL("expected BudgetMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BudgetMismatch);
        CHECK(io::exit_code(e.kind()) == 3);
    }
}

TEST_CASE("JSON null and non-finite strings read back as non-finite numbers") {
    const Vector v = io::parse_vector(Json::parse(R"([1, null, "inf", "-inf", "NaN"])"), "x", 5);
    CHECK(v(0) == 1.0);
    CHECK(std::isnan(v(1)));
    CHECK(v(2) == INFINITY);
    CHECK(v(3) == -INFINITY);
    CHECK(std::isnan(v(4)));
    CHECK_THROWS_AS(io::parse_vector(Json::parse("[1, 2]"), "x", 3), Error);
    const Vector w = io::parse_vector(Json::parse(R"({"y": [4, 5]})"), "y", 2);
    CHECK(w(1) == 5.0);
}

TEST_CASE("output directories refuse to overwrite unless forced") {
    const fs::path dir = scratch("overwrite");
    {
        io::OutputDir out(dir, false);
        out.claim({"a.txt"});
        out.write("a.txt", "one");
        out.write("a.txt", "two"); // rewriting our own file is fine
    }
    {
        io::OutputDir out(dir, false);
        try {
            out.claim({"b.txt", "a.txt"});
            FAIL("expected Io");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Io);
            CHECK(io::exit_code(e.kind()) == 3);
        }
    }
    io::OutputDir forced(dir, true);
    forced.claim({"a.txt"});
    forced.write("a.txt", "three");
    std::ifstream in(dir / "a.txt");
    std::string content;
    std::getline(in, content);
    CHECK(content == "three");
    fs::remove_all(dir);
}

TEST_CASE("manifest hashes inputs and outputs") {
    const fs::path dir = scratch("manifest");
    io::OutputDir out(dir, false);
    out.claim({"x.txt", "manifest.json"});
    out.write("x.txt", "abc");
    io::Manifest m;
    m.command = "test";
    m.argv = {"strictbounds", "test"};
    m.seed = 9;
    m.inputs = {dir / "x.txt"};
    io::write_manifest(out, m);
    const Json j = io::read_json(dir / "manifest.json");
    const std::string abc = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
    CHECK(j.dump().find(abc) != std::string::npos);
    CHECK(j.at("seed") == 9);
    CHECK(j.at("versions").contains("eigen"));
    fs::remove_all(dir);
}

TEST_CASE("sha256 and exit codes") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(io::exit_code(ErrorKind::InvalidInput) == 3);
    CHECK(io::exit_code(ErrorKind::Io) == 3);
    CHECK(io::exit_code(ErrorKind::InfeasibleConstraints) == 3);
    CHECK(io::exit_code(ErrorKind::SolverStall) == 4);
    CHECK(io::exit_code(ErrorKind::FailureBudgetExceeded) == 4);
    CHECK(io::exit_code(ErrorKind::CertificateUnavailable) == 4);
}
