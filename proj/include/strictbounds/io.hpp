#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strictbounds/bayes.hpp"
#include "strictbounds/calibration.hpp"
#include "strictbounds/checks.hpp"
#include "strictbounds/constraints.hpp"
#include "strictbounds/error.hpp"
#include "strictbounds/interval.hpp"
#include "strictbounds/simulation.hpp"
#include "strictbounds/study.hpp"

namespace strictbounds::io {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Reading. Errors are InvalidInput naming the file and field, or Io for
// unreadable files.
Json read_json(const fs::path& path);
std::string read_text(const fs::path& path);

LinearProblem parse_problem(const Json& j);
PriorModel parse_prior(const Json& j, Index p);
GenerativeModel parse_generative(const Json& j, Index p);
// The optional "spatial" block of a generative file: locations (m x 2, km),
// nu and rho, each a scalar or a p x p matrix.
std::optional<SpatialModel> parse_spatial(const Json& j, const GenerativeModel& base);
// Descriptors refer to state elements by label or by integer index.
ConstraintSet parse_constraints(const Json& j, const LinearProblem& problem);
// A bare array or an object holding the array under `key`.
Vector parse_vector(const Json& j, const std::string& key, Index expected_size);

// Optional grid block of a spec file: a regular nx x ny layout and one
// smoothness/range pair spread over the state blocks.
struct GridSpec {
    Index nx = 10;
    Index ny = 10;
    double dx = 1.0; // km
    double dy = 1.0;
    double nu = 1.5;
    double range = 10.0; // km
};
struct SpecFile {
    SyntheticSpec spec;
    std::optional<GridSpec> grid;
};
// "preset": "paper_like" or "generic", then any SyntheticSpec field by name.
// Unknown keys are rejected so that typos do not silently fall back to defaults.
SpecFile parse_spec(const Json& j);
// Checks the budget identity; throws BudgetMismatch when it fails.
CalibrationPlan parse_plan(const Json& j);

// Writing. Doubles are printed with 17 significant digits, NaN as "NaN" in CSV
// and null in JSON, so reruns are byte-identical.
std::string format_double(double v);
Json number(double v);
Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Json problem_json(const LinearProblem& problem);
Json prior_json(const PriorModel& prior);
Json generative_json(const GenerativeModel& generative, const SpatialModel* spatial = nullptr);
Json constraints_json(const ConstraintSet& constraints, const std::vector<std::string>& labels);
Json bayes_json(const BayesResult& r);
Json interval_json(const IntervalResult& r, double alpha);
Json plan_json(const CalibrationPlan& plan);
Json check_json(const std::vector<CheckResult>& checks);

Json study_json(const StudyReport& report);
StudyReport study_from_json(const Json& j);
Json grid_json(const GridReport& report);

// CSV tables; the headers are fixed and listed in README.md.
std::string per_x_csv(const StudyReport& report);
std::string histogram_csv(const StudyReport& report);
std::string per_location_csv(const GridReport& report);
std::string bias_multipliers_csv(const Vector& m, const std::vector<std::string>& labels);
std::string importance_csv(const std::vector<ImportanceRow>& rows);
std::string box_sweep_csv(const std::vector<BoxSweepRow>& rows);
// One block of rows per standard error, in order.
std::string gamma_csv(const std::vector<double>& standard_errors, const std::vector<std::vector<GammaRow>>& sweeps);
std::string calibration_csv(const std::vector<CalibrationRow>& rows);

// 0 success, 2 validation or certification failure, 3 bad input or IO,
// 4 solver failures (including a blown failure budget).
int exit_code(ErrorKind kind);
inline constexpr int kExitValidation = 2;

enum class ReportFormat { Json, Csv };

// Output directory that refuses to overwrite existing files unless forced.
class OutputDir {
public:
    OutputDir(fs::path dir, bool force);

    // Creates the directory and checks that none of `names` exist (unless forced).
    void claim(const std::vector<std::string>& names);
    void write(const std::string& name, const std::string& content);
    void write_json(const std::string& name, const Json& j);
    const fs::path& path() const { return dir_; }
    const std::vector<std::string>& written() const { return written_; }

private:
    fs::path dir_;
    bool force_;
    std::vector<std::string> written_;
};

// report.json or per_x.csv + histogram.csv.
void emit_report(const StudyReport& report, OutputDir& out, ReportFormat format);
void emit_report(const GridReport& report, OutputDir& out, ReportFormat format);

std::string sha256_hex(const std::string& bytes);

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::vector<fs::path> inputs;
    double wall_seconds = 0.0;
};
// manifest.json: input and output hashes, seed, library versions and wall time.
void write_manifest(OutputDir& out, const Manifest& manifest);
Json versions_json();

} // namespace strictbounds::io
