#pragma once

// Censored, CDF-matched Gaussian random fields on the periodic cylinder.
//
// Pipeline: closed-form (μ, ς²) from propensity/softness → periodic
// squared-exponential covariance → condition on low values at the axial ends
// → sample → map the field's own KDE CDF onto N(μ, ς²) → clamp to [0,1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "taa/insult/profile.hpp"
#include "taa/insult/special.hpp"
#include "taa/log.hpp"

namespace taa {

struct RandomInsultParams {
    double propensity = 0.35;        // φ, fraction of latent values above 0.5
    double softness = 0.2;           // ε, slope of the latent CDF at 0.5
    double length_theta = 2.0;       // L_θ, mm
    double length_z = 2.0;           // L_z, mm
    double boundary_offset = 2.0;    // boundary latent value = μ - k·ς

    void validate() const
    {
        require(propensity > 0.0 && propensity < 1.0, ErrorKind::parameter, "propensity must lie in (0,1)");
        require(softness > 0.0, ErrorKind::parameter, "softness must be positive");
        require(length_theta > 0.0 && length_z > 0.0, ErrorKind::parameter, "length scales must be positive");
    }

    io::Json to_json() const
    {
        return {{"phi", propensity},
                {"eps", softness},
                {"L_theta", length_theta},
                {"L_z", length_z},
                {"k_boundary", boundary_offset}};
    }
};

struct GaussianMoments {
    double mean;
    double variance;
};

/// Mean and variance of the latent field such that P(ϑ* > 0.5) = φ and the
/// latent density at 0.5 equals ε.
inline GaussianMoments grf_moments(double propensity, double softness)
{
    require(propensity > 0.0 && propensity < 1.0, ErrorKind::parameter,
            "propensity must lie strictly inside (0,1)");
    require(softness > 0.0, ErrorKind::parameter, "softness must be positive");
    const double e = inverse_erf(1.0 - 2.0 * propensity);
    const double damp = std::exp(-e * e);
    GaussianMoments m;
    m.mean = 0.5 - e * damp / (softness * std::sqrt(std::numbers::pi));
    m.variance = damp * damp / (2.0 * std::numbers::pi * softness * softness);
    return m;
}

/// Periodic squared-exponential kernel. The circumferential distance is the
/// chord 2 r sin(|Δθ|/2), evaluated from the wrapped index difference so the
/// matrix is exactly invariant under θ-rotations.
inline Eigen::MatrixXd covariance_matrix(const CylindricalGrid& grid, double length_theta, double length_z,
                                         double variance)
{
    grid.validate();
    require(length_theta > 0.0 && length_z > 0.0 && variance > 0.0, ErrorKind::parameter,
            "covariance needs positive length scales and variance");
    const std::size_t n = grid.size();

    std::vector<double> chord(grid.n_theta / 2 + 1);
    for (std::size_t d = 0; d < chord.size(); ++d) {
        const double dtheta = 2.0 * std::numbers::pi * static_cast<double>(d) / static_cast<double>(grid.n_theta);
        chord[d] = 2.0 * grid.radius * std::sin(0.5 * dtheta);
    }

    Eigen::MatrixXd k(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            const double dt = chord[grid.theta_steps(grid.theta_index(a), grid.theta_index(b))] / length_theta;
            const double dz = std::abs(grid.z(grid.z_index(a)) - grid.z(grid.z_index(b))) / length_z;
            const double v = variance * std::exp(-0.5 * (dt * dt + dz * dz));
            k(a, b) = v;
            k(b, a) = v;
        }
    }
    return k;
}

namespace detail {

/// Cholesky with diagonal jitter jitter_scale·{1,10,100,1000}.
inline Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& m, double jitter_scale, const char* what)
{
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = jitter_scale;
    for (int attempt = 0; attempt < 4; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    std::ostringstream msg;
    msg << what << ": Cholesky failed after 4 jitter levels (last jitter " << jitter / 10.0
        << ", min diagonal " << m.diagonal().minCoeff() << ", size " << m.rows() << ")";
    fail(ErrorKind::numerical, msg.str());
}

} // namespace detail

struct ConditionedGaussian {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Conditions N(mean, cov) on x_b = boundary_value for every b in `boundary`.
/// Boundary rows/columns of the returned covariance are exactly zero.
inline ConditionedGaussian condition_on_boundary(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                                 std::span<const std::size_t> boundary, double boundary_value)
{
    const auto n = static_cast<std::size_t>(mean.size());
    require(cov.rows() == mean.size() && cov.cols() == mean.size(), ErrorKind::parameter,
            "covariance dimension does not match mean");
    require(!boundary.empty() && boundary.size() < n, ErrorKind::parameter,
            "boundary set must be non-empty and a strict subset of the nodes");

    std::vector<char> is_boundary(n, 0);
    for (std::size_t b : boundary) {
        require(b < n, ErrorKind::parameter, "boundary index out of range");
        is_boundary[b] = 1;
    }
    std::vector<Eigen::Index> bi, ai;
    for (std::size_t i = 0; i < n; ++i) (is_boundary[i] ? bi : ai).push_back(static_cast<Eigen::Index>(i));

    const Eigen::MatrixXd kbb = cov(bi, bi);
    const Eigen::MatrixXd kab = cov(ai, bi);
    const double scale = std::max(kbb.diagonal().maxCoeff(), 1e-300);
    const Eigen::MatrixXd l = detail::jittered_cholesky(kbb, 1e-10 * scale, "boundary block");

    // K_bb^{-1} K_ba via the factor.
    const Eigen::MatrixXd solve_ba =
        l.transpose().triangularView<Eigen::Upper>().solve(l.triangularView<Eigen::Lower>().solve(kab.transpose()));
    const Eigen::VectorXd shift = (boundary_value * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(bi.size()))) -
                                  mean(bi);

    ConditionedGaussian out;
    out.mean = mean;
    out.mean(ai) += solve_ba.transpose() * shift;
    out.mean(bi).setConstant(boundary_value);

    Eigen::MatrixXd kaa = cov(ai, ai) - kab * solve_ba;
    kaa = 0.5 * (kaa + kaa.transpose()).eval();
    out.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    out.cov(ai, ai) = kaa;
    return out;
}

/// Draws from N(mean, cov) for a PSD cov. Nodes with zero variance are
/// deterministic; the remaining block is Cholesky-factored once.
class LatentSampler {
public:
    LatentSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) : mean_(std::move(mean))
    {
        require(cov.rows() == mean_.size() && cov.cols() == mean_.size(), ErrorKind::parameter,
                "covariance dimension does not match mean");
        for (Eigen::Index i = 0; i < cov.rows(); ++i)
            if (cov(i, i) > 0.0) active_.push_back(i);
        if (!active_.empty()) {
            const Eigen::MatrixXd block = cov(active_, active_);
            factor_ = detail::jittered_cholesky(block, 1e-10 * block.diagonal().maxCoeff(), "latent covariance");
        }
    }

    template <class Rng>
    Eigen::VectorXd sample(Rng& rng) const
    {
        Eigen::VectorXd out = mean_;
        if (active_.empty()) return out;
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd w(static_cast<Eigen::Index>(active_.size()));
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
        out(active_) += factor_.triangularView<Eigen::Lower>() * w;
        return out;
    }

    const Eigen::VectorXd& mean() const noexcept { return mean_; }

private:
    Eigen::VectorXd mean_;
    std::vector<Eigen::Index> active_;
    Eigen::MatrixXd factor_;
};

inline Eigen::VectorXd sample_latent(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return LatentSampler(mean, cov).sample(rng);
}

/// Gaussian-KDE CDF (Silverman bandwidth) of `sample`, evaluated at x.
inline double kde_cdf(std::span<const double> sample, double bandwidth, double x)
{
    double acc = 0.0;
    for (double s : sample) acc += normal_cdf((x - s) / bandwidth);
    return acc / static_cast<double>(sample.size());
}

inline double silverman_bandwidth(std::span<const double> sample)
{
    const double n = static_cast<double>(sample.size());
    double mean = 0.0;
    for (double s : sample) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : sample) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return 1.06 * sd * std::pow(n, -0.2);
}

/// Maps each value through its own field's KDE CDF and then through the
/// N(mean, variance) quantile function. Monotone, so ranks are kept.
inline std::vector<double> cdf_match(std::span<const double> field, double mean, double variance)
{
    require(field.size() >= 30, ErrorKind::parameter, "cdf_match needs at least 30 values");
    require(variance > 0.0, ErrorKind::parameter, "target variance must be positive");
    const double h = silverman_bandwidth(field);
    const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
    if (!(h > 0.0) || *lo_it == *hi_it) {
        log::warn("cdf_match: zero-variance field, passing through unchanged");
        return {field.begin(), field.end()};
    }
    const double sd = std::sqrt(variance);
    const double lo = std::numeric_limits<double>::min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon();
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double f = std::clamp(kde_cdf(field, h, field[i]), lo, hi);
        out[i] = mean + sd * normal_quantile(f);
    }
    return out;
}

inline double censor(double x) noexcept { return std::min(std::max(x, 0.0), 1.0); }

inline std::vector<double> censor(std::span<const double> field)
{
    std::vector<double> out(field.size());
    std::transform(field.begin(), field.end(), out.begin(), [](double x) { return censor(x); });
    return out;
}

/// Precomputes moments, covariance, conditioning and the Cholesky factor for
/// one parameter set; each draw then only costs a triangular mat-vec plus
/// the KDE transform.
class RandomInsultGenerator {
public:
    RandomInsultGenerator(const CylindricalGrid& grid, const RandomInsultParams& params)
        : grid_(grid), params_(params), moments_(grf_moments(params.propensity, params.softness)),
          sampler_(make_sampler(grid, params, moments_))
    {
    }

    const GaussianMoments& moments() const noexcept { return moments_; }
    double boundary_value() const noexcept
    {
        return moments_.mean - params_.boundary_offset * std::sqrt(moments_.variance);
    }

    /// Conditioned Gaussian draw, before any transformation.
    Eigen::VectorXd raw_latent(std::uint64_t seed) const
    {
        std::mt19937_64 rng(seed);
        return sampler_.sample(rng);
    }

    /// CDF-matched latent field (pre-censoring).
    std::vector<double> latent(std::uint64_t seed) const
    {
        const Eigen::VectorXd raw = raw_latent(seed);
        return cdf_match(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), moments_.mean,
                         moments_.variance);
    }

    InsultProfile generate(InsultKind kind, double severity_max, std::uint64_t seed) const
    {
        InsultProfile p;
        p.grid = grid_;
        p.kind = kind;
        p.severity_max = severity_max;
        p.values = censor(latent(seed));
        // The ends are constrained to be insult-free; the KDE transform can
        // lift the pinned boundary value above zero for soft/high-φ settings.
        for (std::size_t b : grid_.boundary_nodes()) p.values[b] = 0.0;
        p.provenance = {{"mode", "random"}, {"params", params_.to_json()}, {"seed", seed}};
        return p;
    }

private:
    static LatentSampler make_sampler(const CylindricalGrid& grid, const RandomInsultParams& params,
                                      const GaussianMoments& m)
    {
        grid.validate();
        params.validate();
        const Eigen::MatrixXd k = covariance_matrix(grid, params.length_theta, params.length_z, m.variance);
        const Eigen::VectorXd mu = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), m.mean);
        const auto boundary = grid.boundary_nodes();
        auto cond = condition_on_boundary(mu, k, boundary, m.mean - params.boundary_offset * std::sqrt(m.variance));
        return LatentSampler(std::move(cond.mean), cond.cov);
    }

    CylindricalGrid grid_;
    RandomInsultParams params_;
    GaussianMoments moments_;
    LatentSampler sampler_;
};

inline InsultProfile generate_random_insult(const CylindricalGrid& grid, const RandomInsultParams& params,
                                            InsultKind kind, double severity_max, std::uint64_t seed)
{
    return RandomInsultGenerator(grid, params).generate(kind, severity_max, seed);
}

} // namespace taa
