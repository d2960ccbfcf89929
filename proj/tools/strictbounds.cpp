// Batch front end. Every numeric step is a library call; this file only
// parses flags, loads inputs, and writes outputs plus a manifest.

#include <chrono>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "strictbounds/io.hpp"

namespace sb = strictbounds;
namespace io = strictbounds::io;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::uint64_t seed = 1;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::string out;
    bool force = false;
    double alpha = 0.05;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "master seed (64-bit)")->capture_default_str();
    sub->add_option("--workers", c.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory")->required();
    sub->add_flag("--force", c.force, "overwrite existing outputs");
    sub->add_option("--alpha", c.alpha, "miscoverage level")->capture_default_str();
}

// Re-raises with the file name in front of the message.
template <class F>
auto with_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const sb::Error& e) {
        if (e.detail().find(path) != std::string::npos) throw;
        throw sb::Error(e.kind(), path + ": " + e.detail());
    }
}

template <class F>
auto load(const std::string& path, F&& parse) {
    return with_path(path, [&] { return parse(io::read_json(path)); });
}

sb::LinearProblem load_problem(const std::string& path) {
    return load(path, [](const io::Json& j) { return io::parse_problem(j); });
}

sb::ConstraintSet load_constraints(const std::string& path, const sb::LinearProblem& problem) {
    if (path.empty()) return sb::ConstraintSet(problem.p());
    return load(path, [&](const io::Json& j) { return io::parse_constraints(j, problem); });
}

// The true state for sweeps: an explicit --x file, or state 0 drawn from --generative.
struct StateSource {
    std::string x_path;
    std::string generative_path;

    void add(CLI::App* sub) {
        auto* x = sub->add_option("--x", x_path, "true state file ({\"x\": [...]})");
        auto* g = sub->add_option("--generative", generative_path, "draw the true state from this model");
        x->excludes(g);
    }
    sb::Vector get(const sb::LinearProblem& problem, std::uint64_t seed) const {
        if (!x_path.empty())
            return load(x_path, [&](const io::Json& j) { return io::parse_vector(j, "x", problem.p()); });
        if (generative_path.empty())
            throw sb::Error(sb::ErrorKind::InvalidInput, "one of --x or --generative is required");
        const sb::GenerativeModel gen =
            load(generative_path, [&](const io::Json& j) { return io::parse_generative(j, problem.p()); });
        sb::Rng rng(seed, {sb::stream::state, 0});
        return sb::sample_state(gen, rng);
    }
    std::vector<fs::path> inputs() const {
        std::vector<fs::path> out;
        if (!x_path.empty()) out.emplace_back(x_path);
        if (!generative_path.empty()) out.emplace_back(generative_path);
        return out;
    }
};

std::vector<std::string> g_argv;

// Claims the output names, runs the body, and writes manifest.json.
int run(const std::string& command, const Common& c, const std::vector<std::string>& names,
        const std::function<std::vector<fs::path>()>& inputs, const std::function<int(io::OutputDir&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    io::OutputDir out(c.out, c.force);
    std::vector<std::string> all = names;
    all.push_back("manifest.json");
    out.claim(all);
    const int status = body(out);
    io::Manifest m;
    m.command = command;
    m.argv = g_argv;
    m.seed = c.seed;
    m.workers = c.workers;
    for (const fs::path& p : inputs())
        if (!p.empty()) m.inputs.push_back(p);
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_manifest(out, m);
    return status;
}

io::Json with_seed(io::Json j, std::uint64_t seed) {
    j["seed"] = seed;
    return j;
}

sb::SweepOptions sweep_options(const Common& c, sb::Index n_noise, const std::string& mode, bool no_reduce) {
    sb::SweepOptions o;
    o.alpha = c.alpha;
    o.n_noise = n_noise;
    o.mode = sb::parse_radius_mode(mode);
    o.reduce = !no_reduce;
    o.workers = c.workers;
    return o;
}

double parse_delta(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw sb::Error(sb::ErrorKind::InvalidInput, "bad delta '" + s + "'");
}

} // namespace

int main(int argc, char** argv) {
    g_argv.assign(argv, argv + argc);
    CLI::App app{"Bayesian and strict-bounds intervals for linear functionals of ill-posed inverse problems"};
    app.require_subcommand(1);
    std::function<int()> action;

    // gen-problem
    Common gen_c;
    std::string spec_path;
    auto* gen = app.add_subcommand("gen-problem", "generate a synthetic problem, prior, model and one observation");
    add_common(gen, gen_c);
    gen->add_option("--spec", spec_path, "spec file")->required();
    gen->callback([&] {
        action = [&] {
            return run("gen-problem", gen_c,
                       {"problem.json", "prior.json", "generative.json", "constraints.json", "truth.json", "y.json"},
                       [&] { return std::vector<fs::path>{spec_path}; },
                       [&](io::OutputDir& out) {
                           const io::SpecFile spec = load(spec_path, [](const io::Json& j) { return io::parse_spec(j); });
                           const sb::SyntheticInstance inst = sb::gen_problem(spec.spec, gen_c.seed);
                           std::optional<sb::SpatialModel> spatial;
                           if (spec.grid) {
                               const io::GridSpec& g = *spec.grid;
                               spatial = sb::uniform_spatial_model(inst.generative,
                                                                   sb::grid_locations(g.nx, g.ny, g.dx, g.dy), g.nu,
                                                                   g.range);
                               spatial->validate();
                           }
                           sb::Rng state_rng(gen_c.seed, {sb::stream::state, 0});
                           sb::Rng noise_rng(gen_c.seed, {sb::stream::noise, 0});
                           const sb::Vector x = sb::sample_state(inst.generative, state_rng);
                           const sb::Vector y = sb::observe(inst.problem, x, sb::sample_noise(inst.noise, noise_rng));
                           out.write_json("problem.json", io::problem_json(inst.problem));
                           out.write_json("prior.json", io::prior_json(inst.prior));
                           out.write_json("generative.json",
                                          io::generative_json(inst.generative, spatial ? &*spatial : nullptr));
                           out.write_json("constraints.json",
                                          io::constraints_json(inst.constraints, inst.problem.labels));
                           io::Json truth;
                           truth["seed"] = gen_c.seed;
                           truth["x"] = io::to_json(x);
                           truth["theta"] = sb::apply_functional(inst.problem.h, x);
                           out.write_json("truth.json", truth);
                           io::Json yj;
                           yj["seed"] = gen_c.seed;
                           yj["y"] = io::to_json(y);
                           out.write_json("y.json", yj);
                           std::cout << "wrote " << out.path().string() << " (n = " << inst.problem.n()
                                     << ", p = " << inst.problem.p() << ")\n";
                           return 0;
                       });
        };
    });

    // retrieve-bayes
    Common rb_c;
    std::string rb_problem, rb_prior, rb_y;
    auto* rb = app.add_subcommand("retrieve-bayes", "operational Bayesian credible interval and bias multipliers");
    add_common(rb, rb_c);
    rb->add_option("--problem", rb_problem)->required();
    rb->add_option("--prior", rb_prior)->required();
    rb->add_option("--y", rb_y)->required();
    rb->callback([&] {
        action = [&] {
            return run("retrieve-bayes", rb_c, {"bayes.json", "bias_multipliers.csv"},
                       [&] { return std::vector<fs::path>{rb_problem, rb_prior, rb_y}; },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(rb_problem);
                           const sb::PriorModel prior =
                               load(rb_prior, [&](const io::Json& j) { return io::parse_prior(j, problem.p()); });
                           const sb::Vector y =
                               load(rb_y, [&](const io::Json& j) { return io::parse_vector(j, "y", problem.n()); });
                           const sb::BayesResult r = sb::bayes_retrieve(problem, prior, y, rb_c.alpha);
                           const io::Json record = with_seed(io::bayes_json(r), rb_c.seed);
                           out.write_json("bayes.json", record);
                           out.write("bias_multipliers.csv", io::bias_multipliers_csv(r.bias_multipliers, problem.labels));
                           io::Json shown = record;
                           for (const char* big : {"x_hat", "bias_multipliers", "gain_matrix", "averaging_kernel"})
                               shown.erase(big);
                           std::cout << shown.dump(2) << "\n";
                           return 0;
                       });
        };
    });

    // retrieve-freq
    Common rf_c;
    std::string rf_problem, rf_constraints, rf_y, rf_mode = "one_at_a_time";
    bool rf_no_reduce = false, rf_certify = false;
    auto* rf = app.add_subcommand("retrieve-freq", "strict-bounds interval with dual certificates");
    add_common(rf, rf_c);
    rf->add_option("--problem", rf_problem)->required();
    rf->add_option("--constraints", rf_constraints, "constraint file; none when omitted");
    rf->add_option("--y", rf_y)->required();
    rf->add_option("--mode", rf_mode, "one_at_a_time or simultaneous")->capture_default_str();
    rf->add_flag("--no-reduce", rf_no_reduce, "solve on the full n-row operator");
    rf->add_flag("--certify", rf_certify, "exit 2 unless both endpoints are certified");
    rf->callback([&] {
        action = [&] {
            int status = 0;
            run("retrieve-freq", rf_c, {"interval.json"},
                [&] { return std::vector<fs::path>{rf_problem, rf_constraints, rf_y}; },
                [&](io::OutputDir& out) {
                    const sb::LinearProblem problem = load_problem(rf_problem);
                    const sb::ConstraintSet cs = load_constraints(rf_constraints, problem);
                    const sb::Vector y =
                        load(rf_y, [&](const io::Json& j) { return io::parse_vector(j, "y", problem.n()); });
                    problem.validate();
                    const auto [W, y_w] = sb::whiten(problem, y);
                    const sb::IntervalSolver solver(W, cs, !rf_no_reduce);
                    const sb::IntervalResult r = solver.interval(y_w, rf_c.alpha, sb::parse_radius_mode(rf_mode));
                    const io::Json record = with_seed(io::interval_json(r, rf_c.alpha), rf_c.seed);
                    out.write_json("interval.json", record);
                    io::Json shown = record;
                    for (const char* k : {"x_at_lower", "x_at_upper", "certificate_lower", "certificate_upper"})
                        shown.erase(k);
                    std::cout << shown.dump(2) << "\n";
                    if (rf_certify && !r.certified()) {
                        std::cerr << "error: interval endpoints are not certified\n";
                        status = io::kExitValidation;
                    }
                    return status;
                });
            return status;
        };
    });

    // coverage-study
    Common cs_c;
    std::string cs_problem, cs_prior, cs_generative, cs_constraints, cs_mode = "one_at_a_time",
                                                                       cs_methods = "both";
    sb::StudyOptions cs_opt;
    bool cs_no_reduce = false;
    auto* cov = app.add_subcommand("coverage-study", "single-sounding coverage and length study");
    add_common(cov, cs_c);
    cov->add_option("--problem", cs_problem)->required();
    cov->add_option("--prior", cs_prior)->required();
    cov->add_option("--generative", cs_generative)->required();
    cov->add_option("--constraints", cs_constraints, "constraint file; none when omitted");
    cov->add_option("--states", cs_opt.n_states, "number of true states")->capture_default_str();
    cov->add_option("--noise", cs_opt.n_noise, "noise draws per state, Bayes")->capture_default_str();
    cov->add_option("--noise-freq", cs_opt.n_noise_freq, "noise draws per state, frequentist")->capture_default_str();
    cov->add_option("--mode", cs_mode)->capture_default_str();
    cov->add_option("--methods", cs_methods, "both, bayes or frequentist")
        ->check(CLI::IsMember({"both", "bayes", "frequentist"}))
        ->capture_default_str();
    cov->add_option("--hist-width", cs_opt.histogram_width, "histogram bin width")->capture_default_str();
    cov->add_option("--max-failure-fraction", cs_opt.max_failure_fraction)->capture_default_str();
    cov->add_flag("--no-reduce", cs_no_reduce);
    cov->callback([&] {
        action = [&] {
            return run("coverage-study", cs_c, {"report.json", "per_x.csv", "histogram.csv"},
                       [&] { return std::vector<fs::path>{cs_problem, cs_prior, cs_generative, cs_constraints}; },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(cs_problem);
                           const sb::PriorModel prior =
                               load(cs_prior, [&](const io::Json& j) { return io::parse_prior(j, problem.p()); });
                           const sb::GenerativeModel gen = load(
                               cs_generative, [&](const io::Json& j) { return io::parse_generative(j, problem.p()); });
                           const sb::ConstraintSet cs = load_constraints(cs_constraints, problem);
                           sb::StudyOptions opt = cs_opt;
                           opt.alpha = cs_c.alpha;
                           opt.mode = sb::parse_radius_mode(cs_mode);
                           opt.reduce = !cs_no_reduce;
                           opt.run_bayes = cs_methods != "frequentist";
                           opt.run_frequentist = cs_methods != "bayes";
                           opt.workers = cs_c.workers;
                           const sb::StudyReport report =
                               sb::run_single_sounding_study(problem, prior, gen, cs, opt, cs_c.seed);
                           io::emit_report(report, out, io::ReportFormat::Json);
                           io::emit_report(report, out, io::ReportFormat::Csv);
                           for (const auto& [method, frac] : report.undercoverage_fraction)
                               std::cout << method << ": undercoverage fraction " << io::format_double(frac) << "\n";
                           return 0;
                       });
        };
    });

    // grid-study
    Common gs_c;
    std::string gs_problem, gs_prior, gs_generative;
    sb::Index gs_replicates = 1;
    auto* grid = app.add_subcommand("grid-study", "closed-form bias and coverage maps over a spatial grid");
    add_common(grid, gs_c);
    grid->add_option("--problem", gs_problem)->required();
    grid->add_option("--prior", gs_prior)->required();
    grid->add_option("--generative", gs_generative, "generative model with a spatial block")->required();
    grid->add_option("--replicates", gs_replicates, "grid realizations, seeds seed .. seed + replicates - 1")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    grid->callback([&] {
        action = [&] {
            return run("grid-study", gs_c, {"report.json", "per_location.csv", "replicates.csv"},
                       [&] { return std::vector<fs::path>{gs_problem, gs_prior, gs_generative}; },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(gs_problem);
                           const sb::PriorModel prior =
                               load(gs_prior, [&](const io::Json& j) { return io::parse_prior(j, problem.p()); });
                           const std::optional<sb::SpatialModel> spatial = load(gs_generative, [&](const io::Json& j) {
                               return io::parse_spatial(j, io::parse_generative(j, problem.p()));
                           });
                           if (!spatial)
                               throw sb::Error(sb::ErrorKind::InvalidInput,
                                               gs_generative + ": field 'spatial': missing");
                           spatial->validate();
                           const sb::SpatialFactor factor = sb::factor_spatial(*spatial);
                           std::string rows = "seed,fraction_below_nominal,bias_autocorrelation,jitter\n";
                           for (sb::Index k = 0; k < gs_replicates; ++k) {
                               const std::uint64_t seed = gs_c.seed + static_cast<std::uint64_t>(k);
                               const sb::GridReport r =
                                   sb::run_grid_study(problem, prior, *spatial, factor, gs_c.alpha, seed);
                               if (k == 0) {
                                   io::emit_report(r, out, io::ReportFormat::Json);
                                   io::emit_report(r, out, io::ReportFormat::Csv);
                                   std::cout << "fraction below nominal " << io::format_double(r.fraction_below_nominal)
                                             << ", lag-1 bias autocorrelation "
                                             << io::format_double(r.bias_autocorrelation) << "\n";
                               }
                               rows += std::to_string(seed) + "," + io::format_double(r.fraction_below_nominal) + "," +
                                       io::format_double(r.bias_autocorrelation) + "," + io::format_double(r.jitter) +
                                       "\n";
                           }
                           out.write("replicates.csv", rows);
                           return 0;
                       });
        };
    });

    // importance
    Common im_c;
    std::string im_problem, im_constraints, im_mode = "one_at_a_time";
    std::vector<std::string> im_indices;
    sb::Index im_noise = 100;
    bool im_no_reduce = false;
    StateSource im_state;
    auto* imp = app.add_subcommand("importance", "interval length with one state element pinned at its true value");
    add_common(imp, im_c);
    imp->add_option("--problem", im_problem)->required();
    imp->add_option("--constraints", im_constraints, "base constraints; none when omitted");
    im_state.add(imp);
    imp->add_option("--indices", im_indices, "labels or indices to pin; all when omitted")->delimiter(',');
    imp->add_option("--noise", im_noise, "noise draws per row")->capture_default_str();
    imp->add_option("--mode", im_mode)->capture_default_str();
    imp->add_flag("--no-reduce", im_no_reduce);
    imp->callback([&] {
        action = [&] {
            return run("importance", im_c, {"importance.csv"},
                       [&] {
                           std::vector<fs::path> in{im_problem, im_constraints};
                           for (const fs::path& p : im_state.inputs()) in.push_back(p);
                           return in;
                       },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(im_problem);
                           const sb::ConstraintSet cs = load_constraints(im_constraints, problem);
                           const sb::Vector x = im_state.get(problem, im_c.seed);
                           std::vector<sb::Index> indices;
                           for (const std::string& s : im_indices) indices.push_back(problem.index_of(s));
                           if (im_indices.empty())
                               for (sb::Index i = 0; i < problem.p(); ++i) indices.push_back(i);
                           const auto rows = sb::variable_importance(
                               problem, cs, x, indices, sweep_options(im_c, im_noise, im_mode, im_no_reduce),
                               im_c.seed);
                           out.write("importance.csv", io::importance_csv(rows));
                           std::cout << "baseline mean length " << io::format_double(rows.front().stats.mean_length)
                                     << "\n";
                           return 0;
                       });
        };
    });

    // box-sweep
    Common bs_c;
    std::string bs_problem, bs_constraints, bs_index, bs_mode = "one_at_a_time";
    std::vector<std::string> bs_deltas{"0", "0.25", "0.5", "1", "2", "4", "8", "inf"};
    std::optional<double> bs_center;
    sb::Index bs_noise = 100;
    bool bs_no_reduce = false;
    StateSource bs_state;
    auto* box = app.add_subcommand("box-sweep", "interval length against the half-width of a box on one element");
    add_common(box, bs_c);
    box->add_option("--problem", bs_problem)->required();
    box->add_option("--constraints", bs_constraints, "base constraints; none when omitted");
    bs_state.add(box);
    box->add_option("--index", bs_index, "label or index of the boxed element")->required();
    box->add_option("--center", bs_center, "box centre; the true value when omitted");
    box->add_option("--deltas", bs_deltas, "half-widths; inf adds the unboxed row")->delimiter(',')->capture_default_str();
    box->add_option("--noise", bs_noise, "noise draws per row")->capture_default_str();
    box->add_option("--mode", bs_mode)->capture_default_str();
    box->add_flag("--no-reduce", bs_no_reduce);
    box->callback([&] {
        action = [&] {
            return run("box-sweep", bs_c, {"box_sweep.csv"},
                       [&] {
                           std::vector<fs::path> in{bs_problem, bs_constraints};
                           for (const fs::path& p : bs_state.inputs()) in.push_back(p);
                           return in;
                       },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(bs_problem);
                           const sb::ConstraintSet cs = load_constraints(bs_constraints, problem);
                           const sb::Vector x = bs_state.get(problem, bs_c.seed);
                           const sb::Index index = problem.index_of(bs_index);
                           std::vector<double> deltas;
                           for (const std::string& d : bs_deltas) deltas.push_back(parse_delta(d));
                           const auto rows =
                               sb::box_sweep(problem, cs, x, index, bs_center.value_or(x(index)), deltas,
                                             sweep_options(bs_c, bs_noise, bs_mode, bs_no_reduce), bs_c.seed);
                           out.write("box_sweep.csv", io::box_sweep_csv(rows));
                           std::cout << rows.size() << " rows\n";
                           return 0;
                       });
        };
    });

    // calibrate-optimize: never reads observations.
    Common co_c;
    std::string co_problem, co_prior, co_constraints, co_index, co_mode = "one_at_a_time";
    std::vector<double> co_sigmas;
    sb::Index co_points = 40, co_noise = 100;
    bool co_no_reduce = false;
    auto* copt = app.add_subcommand("calibrate-optimize",
                                    "split the miscoverage budget between the interval and an external box");
    add_common(copt, co_c);
    copt->add_option("--problem", co_problem)->required();
    copt->add_option("--prior", co_prior, "the prior mean is the ansatz state")->required();
    copt->add_option("--constraints", co_constraints, "base constraints; none when omitted");
    copt->add_option("--index", co_index, "label or index of the externally estimated element")->required();
    copt->add_option("--sigma", co_sigmas, "external standard errors, one plan each")->required()->delimiter(',');
    copt->add_option("--gamma-points", co_points, "log-spaced gamma grid size")->capture_default_str();
    copt->add_option("--noise", co_noise, "noise draws per grid point")->capture_default_str();
    copt->add_option("--mode", co_mode)->capture_default_str();
    copt->add_flag("--no-reduce", co_no_reduce);
    copt->callback([&] {
        action = [&] {
            return run("calibrate-optimize", co_c, {"plan.json", "gamma_sweep.csv"},
                       [&] { return std::vector<fs::path>{co_problem, co_prior, co_constraints}; },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(co_problem);
                           const sb::PriorModel prior =
                               load(co_prior, [&](const io::Json& j) { return io::parse_prior(j, problem.p()); });
                           const sb::ConstraintSet cs = load_constraints(co_constraints, problem);
                           const sb::Index index = problem.index_of(co_index);
                           const sb::SweepOptions opt = sweep_options(co_c, co_noise, co_mode, co_no_reduce);
                           const std::vector<double> gammas = sb::default_gamma_grid(co_c.alpha, co_points);
                           io::Json plans = io::Json::array();
                           std::vector<std::vector<sb::GammaRow>> sweeps;
                           for (double sigma : co_sigmas) {
                               sb::ProbabilisticConstraint t;
                               t.index = index;
                               t.center = prior.mu_a(index);
                               t.standard_error = sigma;
                               const sb::OptimizeResult r =
                                   sb::optimize_plan(problem, cs, prior.mu_a, t, co_c.alpha, gammas, opt, co_c.seed);
                               io::Json p = io::plan_json(r.plan);
                               p["standard_error"] = sigma;
                               plans.push_back(p);
                               sweeps.push_back(r.rows);
                               std::cout << "sigma " << io::format_double(sigma) << ": gamma "
                                         << io::format_double(r.plan.gamma) << "\n";
                           }
                           io::Json j;
                           j["seed"] = co_c.seed;
                           j["total_alpha"] = co_c.alpha;
                           j["index"] = static_cast<std::size_t>(index) < problem.labels.size()
                                            ? io::Json(problem.labels[static_cast<std::size_t>(index)])
                                            : io::Json(index);
                           j["ansatz"] = "prior_mean";
                           j["plans"] = plans;
                           out.write_json("plan.json", j);
                           out.write("gamma_sweep.csv", io::gamma_csv(co_sigmas, sweeps));
                           return 0;
                       });
        };
    });

    // calibrate-run
    Common cr_c;
    std::string cr_problem, cr_constraints, cr_plan, cr_mode = "one_at_a_time";
    sb::Index cr_replicates = 2000;
    bool cr_no_reduce = false;
    StateSource cr_state;
    auto* crun = app.add_subcommand("calibrate-run", "final coverage of calibrated intervals over joint draws");
    add_common(crun, cr_c);
    crun->add_option("--problem", cr_problem)->required();
    crun->add_option("--constraints", cr_constraints, "base constraints; none when omitted");
    crun->add_option("--plan", cr_plan, "plan.json from calibrate-optimize")->required();
    cr_state.add(crun);
    crun->add_option("--replicates", cr_replicates, "joint noise and external draws per row")->capture_default_str();
    crun->add_option("--mode", cr_mode)->capture_default_str();
    crun->add_flag("--no-reduce", cr_no_reduce);
    crun->callback([&] {
        action = [&] {
            return run("calibrate-run", cr_c, {"calibration.csv"},
                       [&] {
                           std::vector<fs::path> in{cr_problem, cr_constraints, cr_plan};
                           for (const fs::path& p : cr_state.inputs()) in.push_back(p);
                           return in;
                       },
                       [&](io::OutputDir& out) {
                           const sb::LinearProblem problem = load_problem(cr_problem);
                           const sb::ConstraintSet cs = load_constraints(cr_constraints, problem);
                           const sb::Vector x = cr_state.get(problem, cr_c.seed);
                           const io::Json pj = io::read_json(cr_plan);
                           const io::Json& idx = pj.at("index");
                           const sb::Index index =
                               problem.index_of(idx.is_string() ? idx.get<std::string>() : std::to_string(idx.get<long>()));
                           const double total = pj.at("total_alpha").get<double>();
                           const sb::SweepOptions opt = sweep_options(cr_c, 0, cr_mode, cr_no_reduce);
                           std::vector<sb::CalibrationRow> rows;
                           rows.push_back(sb::evaluate_calibration(problem, cs, sb::plan_for_alphas(total, {}), {}, x,
                                                                   cr_replicates, opt, cr_c.seed));
                           for (const io::Json& p : pj.at("plans")) {
                               const sb::CalibrationPlan plan =
                                   with_path(cr_plan, [&] { return io::parse_plan(p); });
                               sb::ProbabilisticConstraint t;
                               t.index = index;
                               t.standard_error = p.at("standard_error").get<double>();
                               rows.push_back(sb::evaluate_calibration(problem, cs, plan, {t}, x, cr_replicates, opt,
                                                                       cr_c.seed));
                           }
                           out.write("calibration.csv", io::calibration_csv(rows));
                           std::cout << io::calibration_csv(rows);
                           return 0;
                       });
        };
    });

    // validate
    Common va_c;
    std::string va_problem, va_constraints;
    sb::Index va_instances = 100;
    auto* val = app.add_subcommand("validate", "self-check battery against independent oracles");
    add_common(val, va_c);
    val->add_option("--problem", va_problem, "also check this problem");
    val->add_option("--constraints", va_constraints, "constraints for --problem");
    val->add_option("--instances", va_instances, "random instances per check")->capture_default_str();
    val->callback([&] {
        action = [&] {
            return run("validate", va_c, {"validate.json"},
                       [&] { return std::vector<fs::path>{va_problem, va_constraints}; },
                       [&](io::OutputDir& out) {
                           std::optional<sb::LinearProblem> problem;
                           std::optional<sb::ConstraintSet> cs;
                           if (!va_problem.empty()) {
                               problem = load_problem(va_problem);
                               if (!va_constraints.empty()) cs = load_constraints(va_constraints, *problem);
                           }
                           const std::vector<sb::CheckResult> checks =
                               sb::self_check(problem ? &*problem : nullptr, cs ? &*cs : nullptr, va_c.seed,
                                              va_instances);
                           out.write_json("validate.json", with_seed(io::check_json(checks), va_c.seed));
                           bool ok = true;
                           for (const sb::CheckResult& c : checks) {
                               std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.instances
                                         << " instances, worst " << io::format_double(c.worst) << ")";
                               if (!c.passed) std::cout << ": " << c.detail;
                               std::cout << "\n";
                               ok = ok && c.passed;
                           }
                           if (!ok) std::cerr << "error: first failed check: " << checks.back().name << "\n";
                           return ok ? 0 : io::kExitValidation;
                       });
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }
    try {
        return action();
    } catch (const sb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io::exit_code(e.kind());
    } catch (const io::Json::exception& e) {
        std::cerr << "error: InvalidInput: " << e.what() << "\n";
        return 3;
    }
}
