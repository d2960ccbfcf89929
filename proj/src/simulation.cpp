#include "strictbounds/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "strictbounds/error.hpp"

namespace strictbounds {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw Error(ErrorKind::InvalidInput, message);
}

// Haar-distributed orthonormal basis of the orthogonal complement of span(F)
// with k columns (F has orthonormal columns).
Matrix random_complement(const Matrix& F, Index dim, Index k, Rng& rng) {
    Matrix Z = rng.normal_matrix(dim, k);
    if (F.cols() > 0) {
        Z -= F * (F.transpose() * Z);
        Z -= F * (F.transpose() * Z);
    }
    Eigen::HouseholderQR<Matrix> qr(Z);
    Matrix Q = qr.householderQ() * Matrix::Identity(dim, k);
    const Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Index j = 0; j < k; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    return Q;
}

Matrix join_columns(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Matrix correlation_ar1(Index k, double r) {
    Matrix C(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) C(i, j) = std::pow(r, static_cast<double>(std::abs(i - j)));
    return C;
}

void put_block(Matrix& S, Index at, const Vector& sd, const Matrix& corr) {
    S.block(at, at, sd.size(), sd.size()) = sd.asDiagonal() * corr * sd.asDiagonal();
}

// Nuisance elements 21..39 (one-based): generative mean, generative sd, prior mean, prior sd.
constexpr double kNuisance[19][4] = {
    {972.3235, 1.7508, 970.6240, 4.0},   {0.1267, 0.0204, 0.1267, 1.0},    {0.0001, 0.0001, 0.0, 0.0005},
    {0.2484, 0.0044, 0.2484, 1.0},       {-0.0001, 0.0, 0.0, 0.0005},      {0.2027, 0.0026, 0.2027, 1.0},
    {-0.0000, 0.0, 0.0, 0.0005},         {-3.8786, 0.3380, -3.7643, 2.0},  {0.8187, 0.0683, 0.9, 0.2},
    {-2.4492, 0.0409, -2.9957, 0.1823},  {-6.1959, 0.8492, -4.7370, 2.0},  {0.3255, 0.0101, 0.9, 0.2},
    {-3.9219, 0.0201, -2.9957, 0.1823},  {-4.3980, 0.2477, -4.3820, 1.8},  {-0.0087, 0.0355, 0.3, 0.2},
    {-3.2080, 0.0112, -3.2189, 0.2231},  {-5.6803, 0.2517, -4.3820, 1.8},  {1.0917, 0.0870, 0.75, 0.4},
    {-2.3052, 0.0004, -2.3026, 0.0953},
};
constexpr double kSdFloor = 1e-5;

void paper_like_state(double mis, GenerativeModel& gen, PriorModel& prior) {
    const StateBlocks blk;
    const Index p = 39;
    gen.mu_x.resize(p);
    prior.mu_a.resize(p);
    gen.sigma_x = Matrix::Zero(p, p);
    prior.sigma_a = Matrix::Zero(p, p);

    // Profile: level 0 at the top, level 19 at the surface. Mean and spread
    // mismatches grow towards the surface; the prior is wider than the truth.
    Vector sd_x(blk.profile), sd_a(blk.profile);
    for (Index i = 0; i < blk.profile; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(blk.profile - 1);
        gen.mu_x(i) = 400.0 + 3.0 * t * t;
        prior.mu_a(i) = gen.mu_x(i) - mis * (0.3 + 2.7 * t * t);
        sd_x(i) = 0.5 + 1.5 * t * t;
        sd_a(i) = 1.0 + 3.0 * t * t;
    }
    put_block(gen.sigma_x, 0, sd_x, correlation_ar1(blk.profile, 0.9));
    put_block(prior.sigma_a, 0, sd_a, correlation_ar1(blk.profile, 0.7));

    Vector nsd_x(19), nsd_a(19);
    for (Index j = 0; j < 19; ++j) {
        const Index i = blk.profile + j;
        gen.mu_x(i) = kNuisance[j][0];
        prior.mu_a(i) = kNuisance[j][0] + mis * (kNuisance[j][2] - kNuisance[j][0]);
        nsd_x(j) = std::max(kNuisance[j][1], kSdFloor);
        nsd_a(j) = kNuisance[j][3];
    }
    // Generative nuisance correlations live inside the albedo and aerosol
    // blocks; the prior treats nuisance elements as independent.
    gen.sigma_x(blk.profile, blk.profile) = nsd_x(0) * nsd_x(0);
    const Index a0 = blk.profile + blk.pressure;
    put_block(gen.sigma_x, a0, nsd_x.segment(1, blk.albedo), correlation_ar1(blk.albedo, 0.6));
    put_block(gen.sigma_x, a0 + blk.albedo, nsd_x.segment(1 + blk.albedo, blk.aerosol),
              correlation_ar1(blk.aerosol, 0.5));
    prior.sigma_a.bottomRightCorner(19, 19) = nsd_a.cwiseAbs2().asDiagonal();
}

void generic_state(const SyntheticSpec& spec, Rng& rng, GenerativeModel& gen, PriorModel& prior) {
    const Index p = spec.p;
    gen.mu_x = rng.normal_vector(p);
    gen.sigma_x = correlation_ar1(p, spec.generic_correlation);
    prior.mu_a = gen.mu_x + spec.mean_misspecification * rng.normal_vector(p);
    prior.sigma_a = (spec.generic_prior_sd * spec.generic_prior_sd) * Matrix::Identity(p, p);
}

} // namespace

void SyntheticSpec::validate() const {
    require(p >= 1, "spec.p must be at least 1");
    require(n >= p, "spec.n must be at least p");
    require(decay > 0.0 && decay <= 1.0, "spec.decay must lie in (0, 1]");
    require(top_singular_value > 0.0, "spec.top_singular_value must be positive");
    require(target_standard_error >= 0.0, "spec.target_standard_error must be non-negative");
    require(rank_deficiency >= 0 && rank_deficiency < p, "spec.rank_deficiency must lie in [0, p)");
    require(null_scale >= 0.0 && null_scale < 1.0, "spec.null_scale must lie in [0, 1)");
    require(functional_begin >= 0 && functional_end <= p && functional_end > functional_begin,
            "spec.functional must be a non-empty range inside [0, p)");
    if (key_index >= 0) {
        require(key_index < p, "spec.key_index out of range");
        require(key_mixing > 0.0 && key_mixing < 1.0, "spec.key_mixing must lie in (0, 1)");
        require(rank_deficiency <= p - 2, "spec.rank_deficiency leaves no room for the key direction");
    }
    require(!band_constants.empty(), "spec.band_constants must not be empty");
    for (double c : band_constants) require(c > 0.0, "spec.band_constants must be positive");
    require(static_cast<Index>(band_constants.size()) <= n, "spec.band_constants has more bands than observations");
    require(state == "paper_like" || state == "generic", "spec.state must be paper_like or generic");
    if (state == "paper_like") require(p == 39, "spec.state paper_like needs p = 39");
    require(generic_prior_sd > 0.0, "spec.generic_prior_sd must be positive");
    require(std::fabs(generic_correlation) < 1.0, "spec.generic_correlation must lie in (-1, 1)");
    for (Index i : nonnegative) require(i >= 0 && i < p, "spec.nonnegative index out of range");
}

SyntheticSpec SyntheticSpec::paper_like() {
    SyntheticSpec s;
    s.n = 400;
    s.p = 39;
    s.decay = std::pow(10.0, -7.0 / 37.0); // sigma_38 / sigma_1 = 1e-7
    s.target_standard_error = 2.85;
    s.rank_deficiency = 1;
    s.functional_begin = 0;
    s.functional_end = 20;
    s.key_index = StateBlocks{}.pressure_index();
    s.key_mixing = 0.5;
    s.state = "paper_like";
    for (Index i = 0; i <= StateBlocks{}.pressure_index(); ++i) s.nonnegative.push_back(i);
    return s;
}

std::vector<std::string> paper_like_labels() {
    const StateBlocks blk;
    std::vector<std::string> out;
    char buf[32];
    for (Index i = 0; i < blk.profile; ++i) {
        std::snprintf(buf, sizeof buf, "co2_%02ld", static_cast<long>(i + 1));
        out.emplace_back(buf);
    }
    out.emplace_back("surface_pressure");
    for (Index i = 0; i < blk.albedo; ++i) out.push_back("albedo_" + std::to_string(i + 1));
    for (Index i = 0; i < blk.aerosol; ++i) out.push_back("aerosol_" + std::to_string(i + 1));
    return out;
}

Vector NoiseModel::variances() const {
    Vector v(mean_signal.size());
    for (Index j = 0; j < v.size(); ++j) v(j) = band_constants[static_cast<std::size_t>(band_of[static_cast<std::size_t>(j)])] * mean_signal(j);
    return v;
}

void NoiseModel::validate() const {
    require(static_cast<Index>(band_of.size()) == mean_signal.size(), "noise.band_of length must equal n");
    for (double c : band_constants) require(c > 0.0, "noise.band_constants must be positive");
    for (Index b : band_of)
        require(b >= 0 && b < static_cast<Index>(band_constants.size()), "noise.band_of refers to a missing band");
    require((mean_signal.array() > 0.0).all(), "noise.mean_signal must be positive");
}

SyntheticInstance gen_problem(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed, {stream::problem});
    const Index n = spec.n, p = spec.p, d = spec.rank_deficiency, rank = p - d;

    SyntheticInstance out;
    const Vector h = averaging_weights(p, spec.functional_begin, spec.functional_end);
    const Vector h_hat = h.normalized();

    // Right singular vectors: [generic directions, weakest direction, null directions].
    Matrix F = h_hat;
    Vector weak;
    if (spec.key_index >= 0) {
        Vector e = Vector::Unit(p, spec.key_index);
        e -= e.dot(h_hat) * h_hat;
        require(e.norm() > 1e-12, "spec.key_index must not be proportional to h");
        e.normalize();
        F = join_columns(F, e);
        weak = std::sqrt(1.0 - spec.key_mixing) * h_hat + std::sqrt(spec.key_mixing) * e;
    }
    const Matrix N = random_complement(F, p, d, rng);
    Matrix taken = N;
    if (weak.size() > 0) taken = join_columns(taken, weak);
    const Matrix rest = random_complement(taken, p, p - taken.cols(), rng);
    Matrix V(p, p);
    if (weak.size() > 0)
        V << rest, weak, N;
    else
        V << rest, N;

    Vector sigma(p);
    for (Index i = 0; i < rank; ++i) sigma(i) = spec.top_singular_value * std::pow(spec.decay, static_cast<double>(i));
    for (Index i = rank; i < p; ++i) sigma(i) = spec.top_singular_value * spec.null_scale;
    if (spec.target_standard_error > 0.0) {
        const Vector c = V.leftCols(rank).transpose() * h;
        const double se = c.cwiseQuotient(sigma.head(rank)).norm();
        sigma *= se / spec.target_standard_error;
    }
    const Matrix U = random_complement(Matrix(n, 0), n, p, rng);
    const Matrix K_w = U * sigma.asDiagonal() * V.transpose();

    if (spec.state == "paper_like")
        paper_like_state(spec.mean_misspecification, out.generative, out.prior);
    else
        generic_state(spec, rng, out.generative, out.prior);

    // Signal-proportional noise: with l_j = c_b max(|g_j|, floor), g = K_w mu_x,
    // the raw K = diag(l) K_w has Var(eps_j) = l_j^2 = c_b * mean_signal_j where
    // mean_signal_j = l_j max(|g_j|, floor) equals |(K mu_x)_j| above the floor.
    const Vector g = K_w * out.generative.mu_x;
    const double gmax = g.cwiseAbs().maxCoeff();
    const double gfloor = gmax > 0.0 ? 1e-3 * gmax : 1.0;
    const Index bands = static_cast<Index>(spec.band_constants.size());
    NoiseModel& noise = out.noise;
    noise.band_constants = spec.band_constants;
    noise.band_of.resize(static_cast<std::size_t>(n));
    noise.mean_signal.resize(n);
    Vector l(n);
    for (Index j = 0; j < n; ++j) {
        const Index b = std::min(bands - 1, j * bands / n);
        const double cb = spec.band_constants[static_cast<std::size_t>(b)];
        const double gj = std::max(std::fabs(g(j)), gfloor);
        noise.band_of[static_cast<std::size_t>(j)] = b;
        l(j) = cb * gj;
        noise.mean_signal(j) = cb * gj * gj;
    }

    LinearProblem& prob = out.problem;
    prob.K = l.asDiagonal() * K_w;
    prob.noise_cov = NoiseCovariance::diagonal(l.cwiseAbs2());
    prob.h = h;
    if (spec.state == "paper_like") prob.labels = paper_like_labels();

    out.constraints = ConstraintSet(p);
    for (Index i : spec.nonnegative) out.constraints.add_nonnegative(i);
    return out;
}

Matrix covariance_factor(const Matrix& sigma) {
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vector sample_state(const GenerativeModel& gen, Rng& rng) {
    const Vector z = rng.normal_vector(gen.mu_x.size());
    return gen.mu_x + covariance_factor(gen.sigma_x) * z;
}

Vector sample_state(const GenerativeModel& gen, std::uint64_t seed) {
    Rng rng(seed, {stream::state});
    return sample_state(gen, rng);
}

Vector sample_noise(const NoiseModel& noise, Rng& rng) {
    return noise.variances().cwiseSqrt().cwiseProduct(rng.normal_vector(noise.mean_signal.size()));
}

Vector sample_noise(const NoiseModel& noise, std::uint64_t seed) {
    Rng rng(seed, {stream::noise});
    return sample_noise(noise, rng);
}

Vector observe(const LinearProblem& problem, const Vector& x, const Vector& noise_draw) {
    if (x.size() != problem.p() || noise_draw.size() != problem.n())
        throw Error(ErrorKind::InvalidInput, "observe: dimension mismatch");
    return problem.K * x + noise_draw;
}

double matern(double nu, double distance, double range) {
    if (!(range > 0.0)) throw Error(ErrorKind::InvalidInput, "Matern range must be positive");
    if (distance == 0.0) return 1.0;
    const double t = distance / range;
    if (std::fabs(nu - 0.5) < 1e-12) return std::exp(-t);
    if (std::fabs(nu - 1.5) < 1e-12) {
        const double a = std::sqrt(3.0) * t;
        return (1.0 + a) * std::exp(-a);
    }
    if (std::fabs(nu - 2.5) < 1e-12) {
        const double a = std::sqrt(5.0) * t;
        return (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    throw Error(ErrorKind::InvalidInput, "Matern smoothness must be 0.5, 1.5 or 2.5");
}

void SpatialModel::validate() const {
    const Index p = base.mu_x.size();
    base.validate(p);
    require(locations.cols() == 2 && locations.rows() >= 1, "spatial.locations must be an m x 2 array");
    require(nu.rows() == p && nu.cols() == p, "spatial.nu must be p x p");
    require(rho.rows() == p && rho.cols() == p, "spatial.rho must be p x p");
    require((nu - nu.transpose()).cwiseAbs().maxCoeff() == 0.0, "spatial.nu must be symmetric");
    require((rho - rho.transpose()).cwiseAbs().maxCoeff() == 0.0, "spatial.rho must be symmetric");
    require((rho.array() > 0.0).all(), "spatial.rho entries must be positive");
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) matern(nu(i, j), 1.0, 1.0);
}

Matrix grid_locations(Index nx, Index ny, double dx, double dy) {
    require(nx >= 1 && ny >= 1, "grid dimensions must be positive");
    Matrix loc(nx * ny, 2);
    for (Index iy = 0; iy < ny; ++iy)
        for (Index ix = 0; ix < nx; ++ix) {
            loc(iy * nx + ix, 0) = static_cast<double>(ix) * dx;
            loc(iy * nx + ix, 1) = static_cast<double>(iy) * dy;
        }
    return loc;
}

SpatialModel uniform_spatial_model(const GenerativeModel& base, const Matrix& locations, double nu, double range) {
    const Index p = base.mu_x.size();
    SpatialModel s;
    s.base = base;
    s.locations = locations;
    s.nu = Matrix::Constant(p, p, nu);
    s.rho = Matrix::Constant(p, p, range);
    return s;
}

Matrix assemble_spatial_covariance(const SpatialModel& spatial) {
    spatial.validate();
    const Index m = spatial.sites(), p = spatial.base.mu_x.size();
    const Matrix& S = spatial.base.sigma_x;
    Matrix C = Matrix::Zero(m * p, m * p);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j <= i; ++j) {
            const double dist = (spatial.locations.row(i) - spatial.locations.row(j)).norm();
            for (Index k = 0; k < p; ++k)
                for (Index l = 0; l < p; ++l) {
                    if (S(k, l) == 0.0) continue;
                    const double c = S(k, l) * matern(spatial.nu(k, l), dist, spatial.rho(k, l));
                    C(i * p + k, j * p + l) = c;
                    C(j * p + l, i * p + k) = c;
                }
        }
    return C;
}

SpatialFactor factor_spatial(const SpatialModel& spatial) {
    const Matrix C = assemble_spatial_covariance(spatial);
    const double maxdiag = C.diagonal().maxCoeff();
    SpatialFactor out;
    Eigen::LLT<Matrix> llt;
    for (double rel : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
        const double jitter = rel * maxdiag;
        Matrix Cj = C;
        Cj.diagonal().array() += jitter;
        llt.compute(Cj);
        if (llt.info() == Eigen::Success) {
            out.L = llt.matrixL();
            out.jitter = jitter;
            return out;
        }
    }
    throw Error(ErrorKind::AssemblyNotPSD,
                "spatial covariance is not positive semidefinite within jitter 1e-8 * max diagonal");
}

Matrix sample_grid(const SpatialModel& spatial, const SpatialFactor& factor, Rng& rng) {
    const Index m = spatial.sites(), p = spatial.base.mu_x.size();
    const Vector z = factor.L * rng.normal_vector(m * p);
    Matrix out(m, p);
    for (Index i = 0; i < m; ++i) out.row(i) = (spatial.base.mu_x + z.segment(i * p, p)).transpose();
    return out;
}

Matrix sample_grid(const SpatialModel& spatial, std::uint64_t seed) {
    const SpatialFactor f = factor_spatial(spatial);
    Rng rng(seed, {stream::grid});
    return sample_grid(spatial, f, rng);
}

} // namespace strictbounds
