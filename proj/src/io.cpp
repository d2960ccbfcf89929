#include "strictbounds/io.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <boost/version.hpp>
#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#ifndef ARTIFACT_VERSION
#define ARTIFACT_VERSION "0.0.0"
#endif

namespace strictbounds::io {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::InvalidInput, "field '" + field + "': " + what);
}

const Json& need(const Json& j, const std::string& key, const std::string& context = "") {
    if (!j.is_object()) bad(context.empty() ? key : context, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) bad(context.empty() ? key : context + "." + key, "missing");
    return *it;
}

const Json* maybe(const Json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

// null reads as NaN so that emitted records parse back unchanged.
double to_double(const Json& v, const std::string& field) {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
        if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
        if (s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    bad(field, "expected a number");
}

Index to_index(const Json& v, const std::string& field) {
    if (!v.is_number_integer()) bad(field, "expected an integer");
    return v.get<Index>();
}

Vector to_vector(const Json& v, const std::string& field, Index expected = -1) {
    if (!v.is_array()) bad(field, "expected an array of numbers");
    if (expected >= 0 && static_cast<Index>(v.size()) != expected)
        bad(field, "expected length " + std::to_string(expected) + ", got " + std::to_string(v.size()));
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        out(static_cast<Index>(i)) = to_double(v[i], field + "[" + std::to_string(i) + "]");
    return out;
}

Matrix to_matrix(const Json& v, const std::string& field, Index rows = -1, Index cols = -1) {
    if (!v.is_array()) bad(field, "expected an array of rows");
    if (rows >= 0 && static_cast<Index>(v.size()) != rows)
        bad(field, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
    const Index r = static_cast<Index>(v.size());
    Index c = cols;
    if (c < 0) c = r > 0 && v[0].is_array() ? static_cast<Index>(v[0].size()) : 0;
    Matrix out(r, c);
    for (Index i = 0; i < r; ++i) {
        const std::string name = field + "[" + std::to_string(i) + "]";
        const Vector row = to_vector(v[static_cast<std::size_t>(i)], name, c);
        out.row(i) = row.transpose();
    }
    return out;
}

// "sigma" as a matrix or "sigma_diag" as its diagonal.
Matrix covariance_field(const Json& j, const std::string& key, Index p) {
    const Json* full = maybe(j, key);
    const Json* diag = maybe(j, key + "_diag");
    if (full && diag) bad(key, "give either " + key + " or " + key + "_diag, not both");
    if (full) return to_matrix(*full, key, p, p);
    if (diag) return to_vector(*diag, key + "_diag", p).asDiagonal();
    bad(key, "missing (or " + key + "_diag)");
}

Matrix scalar_or_matrix(const Json& v, const std::string& field, Index p) {
    if (v.is_number()) return Matrix::Constant(p, p, v.get<double>());
    return to_matrix(v, field, p, p);
}

Index element(const Json& v, const LinearProblem& problem, const std::string& field) {
    if (v.is_number_integer()) {
        const Index i = v.get<Index>();
        if (i < 0 || i >= problem.p()) bad(field, "index " + std::to_string(i) + " out of range");
        return i;
    }
    if (v.is_string()) {
        try {
            return problem.index_of(v.get<std::string>());
        } catch (const Error& e) {
            bad(field, e.detail());
        }
    }
    bad(field, "expected a label or an integer index");
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string idx(Index i) { return std::to_string(i); }

} // namespace

Json read_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(ErrorKind::Io, "cannot read " + path.string());
    return ss.str();
}

LinearProblem parse_problem(const Json& j) {
    LinearProblem out;
    const Json* n = maybe(j, "n");
    const Json* p = maybe(j, "p");
    const Index rows = n ? to_index(*n, "n") : -1;
    const Index cols = p ? to_index(*p, "p") : -1;
    out.K = to_matrix(need(j, "K"), "K", rows, cols);
    const Json* diag = maybe(j, "noise_cov_diag");
    const Json* dense = maybe(j, "noise_cov");
    if (diag && dense) bad("noise_cov", "give either noise_cov or noise_cov_diag, not both");
    if (diag)
        out.noise_cov = NoiseCovariance::diagonal(to_vector(*diag, "noise_cov_diag", out.n()));
    else if (dense)
        out.noise_cov = NoiseCovariance::dense(to_matrix(*dense, "noise_cov", out.n(), out.n()));
    else
        bad("noise_cov", "missing (or noise_cov_diag)");
    out.h = to_vector(need(j, "h"), "h", out.p());
    if (const Json* labels = maybe(j, "labels")) {
        if (!labels->is_array()) bad("labels", "expected an array of strings");
        for (std::size_t i = 0; i < labels->size(); ++i) {
            if (!(*labels)[i].is_string()) bad("labels[" + std::to_string(i) + "]", "expected a string");
            out.labels.push_back((*labels)[i].get<std::string>());
        }
    }
    return out;
}

PriorModel parse_prior(const Json& j, Index p) {
    PriorModel out;
    out.mu_a = to_vector(need(j, "mu_a"), "mu_a", p);
    out.sigma_a = covariance_field(j, "sigma_a", p);
    return out;
}

GenerativeModel parse_generative(const Json& j, Index p) {
    GenerativeModel out;
    out.mu_x = to_vector(need(j, "mu_x"), "mu_x", p);
    out.sigma_x = covariance_field(j, "sigma_x", p);
    return out;
}

std::optional<SpatialModel> parse_spatial(const Json& j, const GenerativeModel& base) {
    const Json* s = maybe(j, "spatial");
    if (!s) return std::nullopt;
    const Index p = base.mu_x.size();
    SpatialModel out;
    out.base = base;
    out.locations = to_matrix(need(*s, "locations", "spatial"), "spatial.locations", -1, 2);
    out.nu = scalar_or_matrix(need(*s, "nu", "spatial"), "spatial.nu", p);
    out.rho = scalar_or_matrix(need(*s, "rho", "spatial"), "spatial.rho", p);
    return out;
}

ConstraintSet parse_constraints(const Json& j, const LinearProblem& problem) {
    const Json& list = j.is_array() ? j : need(j, "constraints");
    if (!list.is_array()) bad("constraints", "expected an array");
    ConstraintSet out(problem.p());
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string at = "constraints[" + std::to_string(k) + "]";
        const Json& c = list[k];
        const Json& type_field = need(c, "type", at);
        if (!type_field.is_string()) bad(at + ".type", "expected a string");
        const std::string type = type_field.get<std::string>();

        std::vector<Index> targets;
        if (type != "general") {
            const Json* one = maybe(c, "index");
            const Json* many = maybe(c, "indices");
            if (one && many) bad(at, "give either index or indices, not both");
            if (one) targets.push_back(element(*one, problem, at + ".index"));
            else if (many && many->is_array())
                for (std::size_t i = 0; i < many->size(); ++i)
                    targets.push_back(element((*many)[i], problem, at + ".indices[" + std::to_string(i) + "]"));
            else
                bad(at + ".index", "missing (or indices)");
        }
        try {
            if (type == "nonnegative") {
                for (Index i : targets) out.add_nonnegative(i);
            } else if (type == "box") {
                const Json* lo = maybe(c, "lo");
                const Json* hi = maybe(c, "hi");
                const double l = lo ? to_double(*lo, at + ".lo") : -std::numeric_limits<double>::infinity();
                const double h = hi ? to_double(*hi, at + ".hi") : std::numeric_limits<double>::infinity();
                for (Index i : targets) out.add_box(i, l, h);
            } else if (type == "fix") {
                const double v = to_double(need(c, "value", at), at + ".value");
                for (Index i : targets) out.add_fix(i, v);
            } else if (type == "general") {
                out.add_general(to_vector(need(c, "row", at), at + ".row", problem.p()),
                                to_double(need(c, "rhs", at), at + ".rhs"));
            } else {
                bad(at + ".type", "unknown constraint type '" + type + "'");
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InvalidInput) throw;
            if (e.detail().rfind("field '", 0) == 0) throw;
            bad(at, e.detail());
        }
    }
    return out;
}

Vector parse_vector(const Json& j, const std::string& key, Index expected_size) {
    if (j.is_array()) return to_vector(j, key, expected_size);
    return to_vector(need(j, key), key, expected_size);
}

SpecFile parse_spec(const Json& j) {
    if (!j.is_object()) bad("spec", "expected an object");
    SpecFile out;
    std::string preset = "generic";
    if (const Json* v = maybe(j, "preset")) {
        if (!v->is_string()) bad("preset", "expected a string");
        preset = v->get<std::string>();
        if (preset == "paper_like") out.spec = SyntheticSpec::paper_like();
        else if (preset != "generic") bad("preset", "expected paper_like or generic");
    }
    SyntheticSpec& s = out.spec;
    for (const auto& [key, v] : j.items()) {
        if (key == "preset") continue;
        if (key == "n") s.n = to_index(v, key);
        else if (key == "p") s.p = to_index(v, key);
        else if (key == "decay") s.decay = to_double(v, key);
        else if (key == "top_singular_value") s.top_singular_value = to_double(v, key);
        else if (key == "target_standard_error") s.target_standard_error = to_double(v, key);
        else if (key == "rank_deficiency") s.rank_deficiency = to_index(v, key);
        else if (key == "null_scale") s.null_scale = to_double(v, key);
        else if (key == "functional_begin") s.functional_begin = to_index(v, key);
        else if (key == "functional_end") s.functional_end = to_index(v, key);
        else if (key == "key_index") s.key_index = to_index(v, key);
        else if (key == "key_mixing") s.key_mixing = to_double(v, key);
        else if (key == "band_constants") {
            const Vector c = to_vector(v, key);
            s.band_constants.assign(c.data(), c.data() + c.size());
        } else if (key == "state") {
            if (!v.is_string()) bad(key, "expected a string");
            s.state = v.get<std::string>();
        } else if (key == "mean_misspecification") s.mean_misspecification = to_double(v, key);
        else if (key == "generic_prior_sd") s.generic_prior_sd = to_double(v, key);
        else if (key == "generic_correlation") s.generic_correlation = to_double(v, key);
        else if (key == "nonnegative") {
            if (!v.is_array()) bad(key, "expected an array of indices");
            s.nonnegative.clear();
            for (std::size_t i = 0; i < v.size(); ++i)
                s.nonnegative.push_back(to_index(v[i], key + "[" + std::to_string(i) + "]"));
        } else if (key == "spatial") {
            GridSpec g;
            for (const auto& [gk, gv] : v.items()) {
                const std::string f = "spatial." + gk;
                if (gk == "nx") g.nx = to_index(gv, f);
                else if (gk == "ny") g.ny = to_index(gv, f);
                else if (gk == "dx") g.dx = to_double(gv, f);
                else if (gk == "dy") g.dy = to_double(gv, f);
                else if (gk == "nu") g.nu = to_double(gv, f);
                else if (gk == "range") g.range = to_double(gv, f);
                else bad(f, "unknown key");
            }
            if (g.nx < 1 || g.ny < 1) bad("spatial", "nx and ny must be positive");
            if (!(g.dx > 0.0 && g.dy > 0.0)) bad("spatial", "dx and dy must be positive");
            out.grid = g;
        } else {
            bad(key, "unknown key");
        }
    }
    try {
        s.validate();
    } catch (const Error& e) {
        bad("spec", e.detail());
    }
    return out;
}

CalibrationPlan parse_plan(const Json& j) {
    const double total = to_double(need(j, "total_alpha", "plan"), "plan.total_alpha");
    const double gamma = to_double(need(j, "gamma", "plan"), "plan.gamma");
    const Vector a = to_vector(need(j, "alphas", "plan"), "plan.alphas");
    return make_plan(total, std::vector<double>(a.data(), a.data() + a.size()), gamma);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
    return out;
}

Json to_json(const Matrix& m) {
    Json out = Json::array();
    for (Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
    return out;
}

Json problem_json(const LinearProblem& problem) {
    Json j;
    j["n"] = problem.n();
    j["p"] = problem.p();
    j["K"] = to_json(problem.K);
    if (problem.noise_cov.is_diagonal()) j["noise_cov_diag"] = to_json(problem.noise_cov.variances());
    else j["noise_cov"] = to_json(problem.noise_cov.matrix());
    j["h"] = to_json(problem.h);
    j["labels"] = problem.labels;
    return j;
}

Json prior_json(const PriorModel& prior) {
    Json j;
    j["mu_a"] = to_json(prior.mu_a);
    j["sigma_a"] = to_json(prior.sigma_a);
    return j;
}

Json generative_json(const GenerativeModel& generative, const SpatialModel* spatial) {
    Json j;
    j["mu_x"] = to_json(generative.mu_x);
    j["sigma_x"] = to_json(generative.sigma_x);
    if (spatial) {
        Json s;
        s["locations"] = to_json(spatial->locations);
        s["nu"] = to_json(spatial->nu);
        s["rho"] = to_json(spatial->rho);
        j["spatial"] = s;
    }
    return j;
}

Json constraints_json(const ConstraintSet& constraints, const std::vector<std::string>& labels) {
    auto name = [&](Index i) -> Json {
        if (i >= 0 && static_cast<std::size_t>(i) < labels.size()) return labels[static_cast<std::size_t>(i)];
        return i;
    };
    Json list = Json::array();
    for (const ConstraintDescriptor& d : constraints.descriptors()) {
        Json c;
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, NonNegative>) {
                    c["type"] = "nonnegative";
                    c["index"] = name(x.index);
                } else if constexpr (std::is_same_v<T, Box>) {
                    c["type"] = "box";
                    c["index"] = name(x.index);
                    if (std::isfinite(x.lo)) c["lo"] = x.lo;
                    if (std::isfinite(x.hi)) c["hi"] = x.hi;
                } else if constexpr (std::is_same_v<T, FixEqual>) {
                    c["type"] = "fix";
                    c["index"] = name(x.index);
                    c["value"] = x.value;
                } else {
                    c["type"] = "general";
                    c["row"] = to_json(x.row);
                    c["rhs"] = x.rhs;
                }
            },
            d);
        list.push_back(c);
    }
    Json j;
    j["constraints"] = list;
    return j;
}

Json bayes_json(const BayesResult& r) {
    Json j;
    j["method"] = "bayes";
    j["alpha"] = number(r.alpha);
    j["theta_hat"] = number(r.theta_hat);
    j["lower"] = number(r.lower);
    j["upper"] = number(r.upper);
    j["length"] = number(r.length());
    j["posterior_sd"] = number(r.posterior_sd);
    j["standard_error"] = number(r.standard_error);
    j["x_hat"] = to_json(r.x_hat);
    j["bias_multipliers"] = to_json(r.bias_multipliers);
    j["gain_matrix"] = to_json(r.gain_matrix);
    j["averaging_kernel"] = to_json(r.averaging_kernel);
    return j;
}

namespace {

Json certificate_json(const DualCertificate& c) {
    Json j;
    j["certified"] = c.certified;
    j["objective"] = number(c.objective);
    j["gap"] = number(c.gap);
    j["stationarity"] = number(c.stationarity);
    j["w"] = to_json(c.w);
    j["c"] = to_json(c.c);
    return j;
}

} // namespace

Json interval_json(const IntervalResult& r, double alpha) {
    Json j;
    j["method"] = r.method;
    j["alpha"] = number(alpha);
    j["lower"] = number(r.lower);
    j["upper"] = number(r.upper);
    j["length"] = number(r.length());
    j["slack_sq"] = number(r.slack_sq);
    j["radius_sq"] = number(r.radius_sq);
    j["certified"] = r.certified();
    j["gap_lower"] = number(r.dual_lower.gap);
    j["gap_upper"] = number(r.dual_upper.gap);
    const SolverStats& s = r.stats;
    Json st;
    st["reduced"] = s.reduced;
    st["slack_iterations"] = s.slack_iterations;
    st["lower_iterations"] = s.lower_iterations;
    st["upper_iterations"] = s.upper_iterations;
    st["slack_residual"] = number(s.slack_residual);
    st["lower_residual"] = number(s.lower_residual);
    st["upper_residual"] = number(s.upper_residual);
    st["reduced_slack_sq"] = number(s.reduced_slack_sq);
    st["tail_sq"] = number(s.tail_sq);
    st["slack_attained"] = s.slack_attained;
    st["inaccurate"] = s.inaccurate;
    j["solver_stats"] = st;
    j["x_at_lower"] = to_json(r.x_at_lower);
    j["x_at_upper"] = to_json(r.x_at_upper);
    j["certificate_lower"] = certificate_json(r.dual_lower);
    j["certificate_upper"] = certificate_json(r.dual_upper);
    return j;
}

Json plan_json(const CalibrationPlan& plan) {
    Json j;
    j["total_alpha"] = plan.total_alpha;
    j["gamma"] = plan.gamma;
    j["alphas"] = plan.alphas;
    j["internal_level"] = 1.0 - plan.gamma;
    return j;
}

Json check_json(const std::vector<CheckResult>& checks) {
    Json list = Json::array();
    bool all = true;
    for (const CheckResult& c : checks) {
        Json r;
        r["name"] = c.name;
        r["passed"] = c.passed;
        r["instances"] = c.instances;
        r["failures"] = c.failures;
        r["worst"] = number(c.worst);
        r["tolerance"] = number(c.tolerance);
        r["detail"] = c.detail;
        list.push_back(r);
        all = all && c.passed;
    }
    Json j;
    j["passed"] = all;
    j["checks"] = list;
    return j;
}

Json study_json(const StudyReport& report) {
    Json j;
    j["alpha"] = report.alpha;
    j["seed"] = report.seed;
    Json rows = Json::array();
    for (const StudyRecord& r : report.per_x) {
        Json o;
        o["x_id"] = r.x_id;
        o["method"] = r.method;
        o["theta"] = number(r.theta);
        o["bias"] = number(r.bias);
        o["analytic_coverage"] = number(r.analytic_coverage);
        o["empirical_coverage"] = number(r.empirical_coverage);
        o["mean_length"] = number(r.mean_length);
        o["length_sd"] = number(r.length_sd);
        o["n_noise_draws"] = r.n_noise_draws;
        o["failures"] = r.failures;
        rows.push_back(o);
    }
    j["per_x"] = rows;
    Json hists = Json::array();
    for (const Histogram& h : report.histograms) {
        Json o;
        o["method"] = h.method;
        o["width"] = h.width;
        o["lower_edges"] = h.lower_edges;
        o["counts"] = h.counts;
        hists.push_back(o);
    }
    j["histograms"] = hists;
    Json under = Json::object();
    for (const auto& [k, v] : report.undercoverage_fraction) under[k] = number(v);
    j["undercoverage_fraction"] = under;
    Json reasons = Json::object();
    for (const auto& [k, v] : report.failure_reasons) reasons[k] = v;
    j["failure_reasons"] = reasons;
    return j;
}

StudyReport study_from_json(const Json& j) {
    StudyReport r;
    r.alpha = to_double(need(j, "alpha"), "alpha");
    const Json& seed = need(j, "seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) bad("seed", "expected an unsigned integer");
    r.seed = seed.get<std::uint64_t>();
    const Json& rows = need(j, "per_x");
    if (!rows.is_array()) bad("per_x", "expected an array");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string at = "per_x[" + std::to_string(i) + "]";
        const Json& o = rows[i];
        StudyRecord rec;
        rec.x_id = to_index(need(o, "x_id", at), at + ".x_id");
        const Json& method = need(o, "method", at);
        if (!method.is_string()) bad(at + ".method", "expected a string");
        rec.method = method.get<std::string>();
        rec.theta = to_double(need(o, "theta", at), at + ".theta");
        rec.bias = to_double(need(o, "bias", at), at + ".bias");
        rec.analytic_coverage = to_double(need(o, "analytic_coverage", at), at + ".analytic_coverage");
        rec.empirical_coverage = to_double(need(o, "empirical_coverage", at), at + ".empirical_coverage");
        rec.mean_length = to_double(need(o, "mean_length", at), at + ".mean_length");
        rec.length_sd = to_double(need(o, "length_sd", at), at + ".length_sd");
        rec.n_noise_draws = to_index(need(o, "n_noise_draws", at), at + ".n_noise_draws");
        rec.failures = to_index(need(o, "failures", at), at + ".failures");
        r.per_x.push_back(rec);
    }
    if (const Json* hists = maybe(j, "histograms")) {
        for (std::size_t i = 0; i < hists->size(); ++i) {
            const std::string at = "histograms[" + std::to_string(i) + "]";
            const Json& o = (*hists)[i];
            Histogram h;
            h.method = need(o, "method", at).get<std::string>();
            h.width = to_double(need(o, "width", at), at + ".width");
            const Vector edges = to_vector(need(o, "lower_edges", at), at + ".lower_edges");
            h.lower_edges.assign(edges.data(), edges.data() + edges.size());
            for (const Json& c : need(o, "counts", at)) h.counts.push_back(to_index(c, at + ".counts"));
            r.histograms.push_back(h);
        }
    }
    if (const Json* under = maybe(j, "undercoverage_fraction"))
        for (const auto& [k, v] : under->items()) r.undercoverage_fraction[k] = to_double(v, "undercoverage_fraction." + k);
    if (const Json* reasons = maybe(j, "failure_reasons"))
        for (const auto& [k, v] : reasons->items()) r.failure_reasons[k] = to_index(v, "failure_reasons." + k);
    return r;
}

Json grid_json(const GridReport& report) {
    Json j;
    j["alpha"] = report.alpha;
    j["seed"] = report.seed;
    j["fraction_below_nominal"] = number(report.fraction_below_nominal);
    j["bias_autocorrelation"] = number(report.bias_autocorrelation);
    j["jitter"] = number(report.jitter);
    Json rows = Json::array();
    for (const GridRecord& r : report.per_location) {
        Json o;
        o["location_id"] = r.location_id;
        o["x_km"] = number(r.x_km);
        o["y_km"] = number(r.y_km);
        o["bias"] = number(r.bias);
        o["analytic_coverage"] = number(r.analytic_coverage);
        o["delta_from_nominal"] = number(r.delta_from_nominal);
        rows.push_back(o);
    }
    j["per_location"] = rows;
    return j;
}

std::string per_x_csv(const StudyReport& report) {
    std::string out =
        "x_id,method,bias,analytic_coverage,empirical_coverage,mean_length,length_sd,n_noise_draws,failures\n";
    for (const StudyRecord& r : report.per_x)
        out += idx(r.x_id) + "," + csv_field(r.method) + "," + format_double(r.bias) + "," +
               format_double(r.analytic_coverage) + "," + format_double(r.empirical_coverage) + "," +
               format_double(r.mean_length) + "," + format_double(r.length_sd) + "," + idx(r.n_noise_draws) + "," +
               idx(r.failures) + "\n";
    return out;
}

std::string histogram_csv(const StudyReport& report) {
    std::string out = "method,lower_edge,upper_edge,count\n";
    for (const Histogram& h : report.histograms)
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            out += csv_field(h.method) + "," + format_double(h.lower_edges[b]) + "," +
                   format_double(h.lower_edges[b] + h.width) + "," + idx(h.counts[b]) + "\n";
    return out;
}

std::string per_location_csv(const GridReport& report) {
    std::string out = "location_id,x_km,y_km,bias,analytic_coverage,delta_from_nominal\n";
    for (const GridRecord& r : report.per_location)
        out += idx(r.location_id) + "," + format_double(r.x_km) + "," + format_double(r.y_km) + "," +
               format_double(r.bias) + "," + format_double(r.analytic_coverage) + "," +
               format_double(r.delta_from_nominal) + "\n";
    return out;
}

std::string bias_multipliers_csv(const Vector& m, const std::vector<std::string>& labels) {
    std::string out = "index,label,m\n";
    for (Index i = 0; i < m.size(); ++i) {
        const std::string label =
            static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)] : idx(i);
        out += idx(i) + "," + csv_field(label) + "," + format_double(m(i)) + "\n";
    }
    return out;
}

namespace {

std::string stats_fields(const LengthStats& s) {
    return format_double(s.mean_length) + "," + format_double(s.length_sd) + "," + format_double(s.coverage) + "," +
           idx(s.n) + "," + idx(s.failures);
}

constexpr const char* kStatsHeader = "mean_length,length_sd,coverage,n_noise_draws,failures";

} // namespace

std::string importance_csv(const std::vector<ImportanceRow>& rows) {
    std::string out = std::string("index,label,") + kStatsHeader + "\n";
    for (const ImportanceRow& r : rows)
        out += idx(r.index) + "," + csv_field(r.label) + "," + stats_fields(r.stats) + "\n";
    return out;
}

std::string box_sweep_csv(const std::vector<BoxSweepRow>& rows) {
    std::string out = std::string("delta,") + kStatsHeader + "\n";
    for (const BoxSweepRow& r : rows) out += format_double(r.delta) + "," + stats_fields(r.stats) + "\n";
    return out;
}

std::string gamma_csv(const std::vector<double>& standard_errors, const std::vector<std::vector<GammaRow>>& sweeps) {
    if (standard_errors.size() != sweeps.size())
        throw Error(ErrorKind::InvalidInput, "one standard error per gamma sweep is required");
    std::string out = std::string("standard_error,gamma,alpha_i,internal_level,") + kStatsHeader + "\n";
    for (std::size_t k = 0; k < sweeps.size(); ++k)
        for (const GammaRow& r : sweeps[k])
            out += format_double(standard_errors[k]) + "," + format_double(r.gamma) + "," +
                   format_double(r.alpha_i) + "," + format_double(1.0 - r.gamma) + "," + stats_fields(r.stats) +
                   "\n";
    return out;
}

std::string calibration_csv(const std::vector<CalibrationRow>& rows) {
    std::string out = "standard_error,internal_level,constraint_level,empirical_coverage,mean_length,length_sd,"
                      "replicates,failures,clipped\n";
    for (const CalibrationRow& r : rows)
        out += format_double(r.standard_error) + "," + format_double(r.internal_level) + "," +
               format_double(r.constraint_level) + "," + format_double(r.empirical_coverage) + "," +
               format_double(r.mean_length) + "," + format_double(r.length_sd) + "," + idx(r.n) + "," +
               idx(r.failures) + "," + idx(r.clipped) + "\n";
    return out;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::FailureBudgetExceeded:
    case ErrorKind::SolverStall:
    case ErrorKind::CholeskyFailure:
    case ErrorKind::SingularSystem:
    case ErrorKind::CertificateUnavailable:
        return 4;
    default:
        return 3;
    }
}

OutputDir::OutputDir(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

void OutputDir::claim(const std::vector<std::string>& names) {
    std::error_code ec;
    if (fs::exists(dir_, ec) && !fs::is_directory(dir_, ec))
        throw Error(ErrorKind::Io, dir_.string() + " exists and is not a directory");
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string() + ": " + ec.message());
    if (force_) return;
    for (const std::string& n : names)
        if (fs::exists(dir_ / n))
            throw Error(ErrorKind::Io, (dir_ / n).string() + " already exists (pass --force to overwrite)");
}

void OutputDir::write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    bool ours = false;
    for (const std::string& w : written_) ours = ours || w == name;
    if (!force_ && !ours && fs::exists(path))
        throw Error(ErrorKind::Io, path.string() + " already exists (pass --force to overwrite)");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << content;
    out.close();
    if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
    if (!ours) written_.push_back(name);
}

void OutputDir::write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

void emit_report(const StudyReport& report, OutputDir& out, ReportFormat format) {
    if (format == ReportFormat::Json) {
        out.write_json("report.json", study_json(report));
    } else {
        out.write("per_x.csv", per_x_csv(report));
        out.write("histogram.csv", histogram_csv(report));
    }
}

void emit_report(const GridReport& report, OutputDir& out, ReportFormat format) {
    if (format == ReportFormat::Json) out.write_json("report.json", grid_json(report));
    else out.write("per_location.csv", per_location_csv(report));
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

Json versions_json() {
    Json j;
    j["artifact"] = ARTIFACT_VERSION;
    j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    j["boost"] = std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                 std::to_string(BOOST_VERSION % 100);
    j["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                         std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    j["openssl"] = OpenSSL_version(OPENSSL_VERSION);
#if defined(__clang__)
    j["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    j["compiler"] = std::string("gcc ") + __VERSION__;
#else
    j["compiler"] = "unknown";
#endif
    return j;
}

void write_manifest(OutputDir& out, const Manifest& manifest) {
    Json j;
    j["command"] = manifest.command;
    j["argv"] = manifest.argv;
    j["seed"] = manifest.seed;
    j["workers"] = manifest.workers;
    Json inputs = Json::array();
    for (const fs::path& p : manifest.inputs) {
        Json i;
        i["path"] = p.string();
        i["sha256"] = sha256_hex(read_text(p));
        inputs.push_back(i);
    }
    j["inputs"] = inputs;
    Json outputs = Json::array();
    for (const std::string& name : out.written()) {
        if (name == "manifest.json") continue;
        Json o;
        o["path"] = name;
        o["sha256"] = sha256_hex(read_text(out.path() / name));
        outputs.push_back(o);
    }
    j["outputs"] = outputs;
    j["versions"] = versions_json();
    j["wall_seconds"] = manifest.wall_seconds;
    out.write_json("manifest.json", j);
}

} // namespace strictbounds::io
