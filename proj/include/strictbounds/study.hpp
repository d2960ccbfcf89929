#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "strictbounds/bayes.hpp"
#include "strictbounds/interval.hpp"
#include "strictbounds/simulation.hpp"

namespace strictbounds {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct StudyOptions {
    double alpha = 0.05;
    Index n_states = 100;
    Index n_noise = 10000;     // draws per state for the Bayes interval
    Index n_noise_freq = 1000; // draws per state for the frequentist interval
    RadiusMode mode = RadiusMode::OneAtATime;
    bool reduce = true;
    bool run_bayes = true;
    bool run_frequentist = true;
    double histogram_width = 0.005;
    double max_failure_fraction = 0.01;
    unsigned workers = 1;
};

// One row per (state, method). Bayes-only fields are NaN on frequentist rows.
struct StudyRecord {
    Index x_id = 0;
    std::string method;
    double bias = kNaN;
    double analytic_coverage = kNaN;
    double empirical_coverage = 0.0;
    double mean_length = 0.0;
    double length_sd = 0.0;
    Index n_noise_draws = 0; // successful draws, the coverage denominator
    Index failures = 0;
    double theta = 0.0;
};

struct Histogram {
    std::string method;
    double width = 0.005;
    std::vector<double> lower_edges;
    std::vector<Index> counts;
};

struct StudyReport {
    std::vector<StudyRecord> per_x;
    std::vector<Histogram> histograms;
    // Share of states below 1 - alpha: analytic coverage for Bayes, empirical otherwise.
    std::map<std::string, double> undercoverage_fraction;
    std::map<std::string, Index> failure_reasons;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

// Draw schedule: state i uses stream (state, i); its noise draws come in order
// from stream (noise, i) and are shared by both methods. Noise is drawn on the
// whitened scale, where it is standard normal.
StudyReport run_single_sounding_study(const LinearProblem& problem, const PriorModel& prior,
                                      const GenerativeModel& generative, const ConstraintSet& constraints,
                                      const StudyOptions& options, std::uint64_t seed);

Histogram coverage_histogram(const std::string& method, const std::vector<double>& coverages, double width);

struct GridRecord {
    Index location_id = 0;
    double x_km = 0.0;
    double y_km = 0.0;
    double bias = 0.0;
    double analytic_coverage = 0.0;
    double delta_from_nominal = 0.0;
};

struct GridReport {
    std::vector<GridRecord> per_location;
    double fraction_below_nominal = 0.0;
    double bias_autocorrelation = 0.0; // lag-1 over grid neighbours
    double jitter = 0.0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

GridReport run_grid_study(const LinearProblem& problem, const PriorModel& prior, const SpatialModel& spatial,
                          double alpha, std::uint64_t seed);
// Reuses a factorization across seeds.
GridReport run_grid_study(const LinearProblem& problem, const PriorModel& prior, const SpatialModel& spatial,
                          const SpatialFactor& factor, double alpha, std::uint64_t seed);

// Moran-type lag-1 autocorrelation: neighbours are sites adjacent along one axis
// of the grid spanned by the distinct coordinates.
double lag1_autocorrelation(const Matrix& locations, const Vector& values);

inline int interval_indicator(double lower, double upper, double theta) { return lower <= theta && theta <= upper; }
inline int interval_indicator(const IntervalResult& r, double theta) { return interval_indicator(r.lower, r.upper, theta); }
inline int interval_indicator(const BayesResult& r, double theta) { return interval_indicator(r.lower, r.upper, theta); }

} // namespace strictbounds
