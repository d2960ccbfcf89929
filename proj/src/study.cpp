#include "strictbounds/study.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "strictbounds/error.hpp"
#include "strictbounds/parallel.hpp"
#include "strictbounds/stats.hpp"

namespace strictbounds {

namespace {

struct StateOutcome {
    StudyRecord bayes;
    StudyRecord freq;
    std::map<std::string, Index> reasons;
};

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

Histogram coverage_histogram(const std::string& method, const std::vector<double>& coverages, double width) {
    if (!(width > 0.0 && width <= 1.0)) throw Error(ErrorKind::InvalidInput, "histogram width must lie in (0, 1]");
    Histogram h;
    h.method = method;
    h.width = width;
    const Index bins = static_cast<Index>(std::ceil(1.0 / width - 1e-9));
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (Index b = 0; b < bins; ++b) h.lower_edges.push_back(static_cast<double>(b) * width);
    for (double c : coverages) {
        if (!std::isfinite(c)) continue;
        const Index b = std::clamp<Index>(static_cast<Index>(std::floor(c / width)), 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

StudyReport run_single_sounding_study(const LinearProblem& problem, const PriorModel& prior,
                                      const GenerativeModel& generative, const ConstraintSet& constraints,
                                      const StudyOptions& opt, std::uint64_t seed) {
    problem.validate();
    prior.validate(problem.p());
    generative.validate(problem.p());
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must lie in (0, 1)");
    if (opt.n_states < 1 || opt.n_noise < 1 || opt.n_noise_freq < 1)
        throw Error(ErrorKind::InvalidInput, "state and noise counts must be positive");

    const WhitenedProblem W = whiten(problem);
    const BayesOperator op(W, prior);
    SolverOptions sopt;
    sopt.certify = false;
    std::optional<IntervalSolver> solver;
    if (opt.run_frequentist) solver.emplace(W, constraints, opt.reduce, sopt);
    const double z = z_two_sided(opt.alpha);
    const double half = z * op.posterior_sd();
    const Index n = W.n();

    std::vector<StateOutcome> outcomes(static_cast<std::size_t>(opt.n_states));
    parallel_for(outcomes.size(), opt.workers, [&](std::size_t task) {
        const Index i = static_cast<Index>(task);
        StateOutcome& out = outcomes[task];
        Rng state_rng(seed, {stream::state, static_cast<std::uint64_t>(i)});
        const Vector x = sample_state(generative, state_rng);
        const double theta = problem.h.dot(x);
        const Vector y_mean = W.K_w * x;

        const Index nb = opt.run_bayes ? opt.n_noise : 0;
        const Index nf = opt.run_frequentist ? opt.n_noise_freq : 0;
        Index bayes_hits = 0, freq_hits = 0, failures = 0;
        std::vector<double> lengths;
        lengths.reserve(static_cast<std::size_t>(nf));
        Rng noise_rng(seed, {stream::noise, static_cast<std::uint64_t>(i)});
        for (Index j = 0; j < std::max(nb, nf); ++j) {
            const Vector y = y_mean + noise_rng.normal_vector(n);
            if (j < nb) {
                const double t = op.theta_hat(y);
                bayes_hits += interval_indicator(t - half, t + half, theta);
            }
            if (j < nf) {
                try {
                    const IntervalResult r = solver->interval(y, opt.alpha, opt.mode);
                    freq_hits += interval_indicator(r, theta);
                    lengths.push_back(r.length());
                } catch (const Error& e) {
                    ++failures;
                    ++out.reasons[to_string(e.kind())];
                }
            }
        }

        StudyRecord& b = out.bayes;
        b.x_id = i;
        b.method = "bayes";
        b.theta = theta;
        b.bias = op.bias(x);
        b.analytic_coverage = bayes_coverage(b.bias, op.standard_error(), op.posterior_sd(), opt.alpha);
        b.empirical_coverage = nb > 0 ? static_cast<double>(bayes_hits) / static_cast<double>(nb) : kNaN;
        b.mean_length = 2.0 * half;
        b.length_sd = 0.0;
        b.n_noise_draws = nb;

        StudyRecord& f = out.freq;
        f.x_id = i;
        f.method = "frequentist";
        f.theta = theta;
        const Index ok = static_cast<Index>(lengths.size());
        f.empirical_coverage = ok > 0 ? static_cast<double>(freq_hits) / static_cast<double>(ok) : kNaN;
        mean_sd(lengths, f.mean_length, f.length_sd);
        f.n_noise_draws = ok;
        f.failures = failures;
    });

    StudyReport report;
    report.alpha = opt.alpha;
    report.seed = seed;
    Index total_failures = 0, total_attempts = 0;
    std::vector<double> bayes_cov, freq_cov;
    for (const StateOutcome& o : outcomes) {
        if (opt.run_bayes) {
            report.per_x.push_back(o.bayes);
            bayes_cov.push_back(o.bayes.analytic_coverage);
        }
        if (opt.run_frequentist) {
            report.per_x.push_back(o.freq);
            freq_cov.push_back(o.freq.empirical_coverage);
            total_failures += o.freq.failures;
            total_attempts += opt.n_noise_freq;
        }
        for (const auto& [k, v] : o.reasons) report.failure_reasons[k] += v;
    }
    auto below = [&](const std::vector<double>& cov) {
        Index count = 0;
        for (double c : cov) count += c < 1.0 - opt.alpha;
        return cov.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(cov.size());
    };
    if (opt.run_bayes) {
        report.histograms.push_back(coverage_histogram("bayes", bayes_cov, opt.histogram_width));
        report.undercoverage_fraction["bayes"] = below(bayes_cov);
    }
    if (opt.run_frequentist) {
        report.histograms.push_back(coverage_histogram("frequentist", freq_cov, opt.histogram_width));
        report.undercoverage_fraction["frequentist"] = below(freq_cov);
    }
    if (total_attempts > 0 &&
        static_cast<double>(total_failures) > opt.max_failure_fraction * static_cast<double>(total_attempts))
        throw Error(ErrorKind::FailureBudgetExceeded, std::to_string(total_failures) + " of " +
                                                          std::to_string(total_attempts) +
                                                          " frequentist replicates failed");
    return report;
}

double lag1_autocorrelation(const Matrix& locations, const Vector& values) {
    const Index m = locations.rows();
    if (values.size() != m) throw Error(ErrorKind::InvalidInput, "one value per location is required");
    auto axis_index = [&](Index col) {
        std::vector<double> u(locations.col(col).data(), locations.col(col).data() + m);
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        std::vector<Index> idx(static_cast<std::size_t>(m));
        for (Index i = 0; i < m; ++i)
            idx[static_cast<std::size_t>(i)] =
                std::lower_bound(u.begin(), u.end(), locations(i, col)) - u.begin();
        return idx;
    };
    const std::vector<Index> ix = axis_index(0), iy = axis_index(1);
    const double mean = values.mean();
    const double var = (values.array() - mean).square().mean();
    if (!(var > 0.0)) return 0.0;
    double acc = 0.0;
    Index pairs = 0;
    for (Index a = 0; a < m; ++a)
        for (Index b = a + 1; b < m; ++b) {
            const Index dx = std::abs(ix[static_cast<std::size_t>(a)] - ix[static_cast<std::size_t>(b)]);
            const Index dy = std::abs(iy[static_cast<std::size_t>(a)] - iy[static_cast<std::size_t>(b)]);
            if (dx + dy != 1) continue;
            acc += (values(a) - mean) * (values(b) - mean);
            ++pairs;
        }
    return pairs > 0 ? (acc / static_cast<double>(pairs)) / var : 0.0;
}

GridReport run_grid_study(const LinearProblem& problem, const PriorModel& prior, const SpatialModel& spatial,
                          const SpatialFactor& factor, double alpha, std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must lie in (0, 1)");
    if (spatial.base.mu_x.size() != problem.p())
        throw Error(ErrorKind::InvalidInput, "spatial model dimension does not match p");
    const WhitenedProblem W = whiten(problem);
    const BayesOperator op(W, prior);
    Rng rng(seed, {stream::grid});
    const Matrix X = sample_grid(spatial, factor, rng);

    GridReport out;
    out.alpha = alpha;
    out.seed = seed;
    out.jitter = factor.jitter;
    Vector biases(spatial.sites());
    Index below = 0;
    for (Index i = 0; i < spatial.sites(); ++i) {
        GridRecord r;
        r.location_id = i;
        r.x_km = spatial.locations(i, 0);
        r.y_km = spatial.locations(i, 1);
        r.bias = op.bias(X.row(i).transpose());
        r.analytic_coverage = bayes_coverage(r.bias, op.standard_error(), op.posterior_sd(), alpha);
        r.delta_from_nominal = r.analytic_coverage - (1.0 - alpha);
        below += r.delta_from_nominal < 0.0;
        biases(i) = r.bias;
        out.per_location.push_back(r);
    }
    out.fraction_below_nominal = static_cast<double>(below) / static_cast<double>(spatial.sites());
    out.bias_autocorrelation = lag1_autocorrelation(spatial.locations, biases);
    return out;
}

GridReport run_grid_study(const LinearProblem& problem, const PriorModel& prior, const SpatialModel& spatial,
                          double alpha, std::uint64_t seed) {
    return run_grid_study(problem, prior, spatial, factor_spatial(spatial), alpha, seed);
}

} // namespace strictbounds
