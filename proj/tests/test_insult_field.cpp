#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "taa/insult/analytic.hpp"
#include "taa/insult/random_field.hpp"

using namespace taa;

namespace {

constexpr double pi = std::numbers::pi;

CylindricalGrid standard_grid() { return CylindricalGrid{}; }

// Two-sided KS statistic of `xs` against N(mean, sd²).
double ks_statistic(std::vector<double> xs, double mean, double sd)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = 0.5 * std::erfc(-(xs[i] - mean) / (sd * std::sqrt(2.0)));
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

} // namespace

// ---------------------------------------------------------------- analytic

TEST(AnalyticInsult, ApexValueIsOne)
{
    AnalyticInsultParams p;
    p.z_apex = 6.0;
    p.theta_apex = pi / 2;
    EXPECT_DOUBLE_EQ(analytic_insult(p, 6.0, pi / 2), 1.0);
}

TEST(AnalyticInsult, OneAxialWidthAwayIsInverseE)
{
    AnalyticInsultParams p;
    p.nu_z = 1.0;
    p.z_apex = 6.0;
    p.z_width = 2.0;
    p.theta_apex = 1.0;
    EXPECT_NEAR(analytic_insult(p, 8.0, 1.0), std::exp(-1.0), 1e-15);
}

TEST(AnalyticInsult, MatchesIndependentEvaluation)
{
    AnalyticInsultParams p{0.1, 0.9, 7.5, 3.0, pi, 100.0 * pi / 180.0, 2.0, 2.0};
    // mpmath evaluation at 40 digits
    EXPECT_NEAR(analytic_insult(p, 6.0, pi / 2), 0.37716464826404597, 1e-14);
}

TEST(AnalyticInsult, WrapsAcrossThetaZero)
{
    AnalyticInsultParams p;
    p.theta_apex = 0.0;
    p.theta_width = 0.5;
    const double eps = 0.3;
    EXPECT_NEAR(analytic_insult(p, 7.5, eps), analytic_insult(p, 7.5, 2 * pi - eps), 1e-14);
}

TEST(AnalyticInsult, ProfileStaysInsideEndApexRange)
{
    AnalyticInsultParams p{0.2, 0.7, 9.0, 4.0, 3 * pi / 2, 2.0, 2.0, 3.0};
    const auto prof = evaluate_analytic(standard_grid(), p);
    for (double v : prof.values) {
        EXPECT_GE(v, 0.2);
        EXPECT_LE(v, 0.7);
    }
}

TEST(AnalyticInsult, RejectsBadParameters)
{
    AnalyticInsultParams p;
    p.nu_z = 0.0;
    EXPECT_THROW(evaluate_analytic(standard_grid(), p), Error);
    p = {};
    p.end_value = 0.8;
    p.apex_value = 0.5;
    EXPECT_THROW(evaluate_analytic(standard_grid(), p), Error);
}

// ------------------------------------------------------------- inverse erf

TEST(InverseErf, Zero) { EXPECT_EQ(inverse_erf(0.0), 0.0); }

TEST(InverseErf, Half)
{
    // Newton on mpmath erf, 40 digits
    EXPECT_NEAR(inverse_erf(0.5), 0.47693627620446987, 1e-15);
}

TEST(InverseErf, RoundTripAndOddSymmetry)
{
    for (double y : {-0.9, -0.1, 0.1, 0.9, 0.999, -0.99999, 1e-8}) {
        const double x = inverse_erf(y);
        EXPECT_NEAR(std::erf(x), y, 1e-12 * std::abs(y)) << y;
        EXPECT_EQ(inverse_erf(-y), -x);
    }
}

TEST(InverseErf, DomainError)
{
    EXPECT_THROW(inverse_erf(1.0), Error);
    EXPECT_THROW(inverse_erf(-1.5), Error);
}

// ------------------------------------------------------------- moments

TEST(GrfMoments, HalfPropensityIsCentered)
{
    auto m = grf_moments(0.5, 1.0);
    EXPECT_NEAR(m.mean, 0.5, 1e-15);
    EXPECT_NEAR(m.variance, 1.0 / (2 * pi), 1e-15);
    m = grf_moments(0.5, 0.2);
    EXPECT_NEAR(m.mean, 0.5, 1e-15);
    EXPECT_NEAR(m.variance, 1.0 / (2 * pi * 0.04), 1e-12);
}

TEST(GrfMoments, MatchesNewtonOracle)
{
    // erf⁻¹ by Newton iteration on mpmath erf, 40 digits
    const auto m = grf_moments(0.35, 0.2);
    EXPECT_NEAR(m.mean, -0.2136115856599259, 1e-10);
    EXPECT_NEAR(m.variance, 3.4298855614973274, 1e-10);
}

TEST(GrfMoments, DefiningPropertiesHold)
{
    for (double phi : {0.1, 0.35, 0.7}) {
        for (double eps : {0.2, 0.6}) {
            const auto m = grf_moments(phi, eps);
            const double sd = std::sqrt(m.variance);
            EXPECT_NEAR(1.0 - normal_cdf((0.5 - m.mean) / sd), phi, 1e-12);
            EXPECT_NEAR(normal_pdf((0.5 - m.mean) / sd) / sd, eps, 1e-12);
        }
    }
}

TEST(GrfMoments, MirrorSymmetricAboutHalf)
{
    // e(1-φ) = -e(φ): the mean reflects about 0.5 and the variance is unchanged
    for (double phi : {0.05, 0.2, 0.35, 0.45}) {
        const auto lo = grf_moments(phi, 0.3);
        const auto hi = grf_moments(1.0 - phi, 0.3);
        EXPECT_LT(lo.mean, 0.5);
        EXPECT_NEAR(lo.mean + hi.mean, 1.0, 1e-12);
        EXPECT_NEAR(lo.variance, hi.variance, 1e-12 * lo.variance);
    }
}

TEST(GrfMoments, RejectsDegeneratePropensity)
{
    EXPECT_THROW(grf_moments(0.0, 0.2), Error);
    EXPECT_THROW(grf_moments(1.0, 0.2), Error);
    EXPECT_THROW(grf_moments(0.3, 0.0), Error);
}

// ------------------------------------------------------------- covariance

TEST(Covariance, DiagonalIsVariance)
{
    const auto k = covariance_matrix(standard_grid(), 1.5, 2.0, 0.7);
    for (Eigen::Index i = 0; i < k.rows(); ++i) EXPECT_EQ(k(i, i), 0.7);
}

TEST(Covariance, ChordAcrossDiameter)
{
    // Only θ differs: κ/ς² = exp(-½ (2 r / L_θ)²)
    CylindricalGrid g;
    const auto k = covariance_matrix(g, 1.0, 2.0, 1.0);
    const double chord = 2 * 0.647;
    EXPECT_NEAR(k(g.index(3, 0), g.index(3, 10)), std::exp(-0.5 * chord * chord), 1e-15);
}

TEST(Covariance, MatchesScalarKernel)
{
    CylindricalGrid g;
    g.n_z = 16;  // z spacing 1 mm, so z-index 2 sits at z = 2
    g.n_theta = 8;
    const auto k = covariance_matrix(g, 1.5, 2.0, 1.0);
    // node (z=0, θ=0) against (z=2, θ=π/4), mpmath evaluation
    EXPECT_NEAR(k(g.index(0, 0), g.index(2, 1)), 0.57436377574442405, 1e-14);
}

TEST(Covariance, ExactlyInvariantUnderThetaRotation)
{
    const CylindricalGrid g = standard_grid();
    const auto k = covariance_matrix(g, 1.5, 2.0, 2.3);
    for (std::size_t s = 1; s < g.n_theta; s += 3) {
        for (std::size_t i = 0; i < g.size(); i += 7) {
            for (std::size_t j = 0; j < g.size(); j += 5) {
                const std::size_t ri = g.index(g.z_index(i), (g.theta_index(i) + s) % g.n_theta);
                const std::size_t rj = g.index(g.z_index(j), (g.theta_index(j) + s) % g.n_theta);
                ASSERT_EQ(k(i, j), k(ri, rj));
            }
        }
    }
    EXPECT_TRUE(k.isApprox(k.transpose(), 0.0));
}

TEST(Covariance, NearlyPositiveSemidefinite)
{
    const double var = 3.0;
    const auto k = covariance_matrix(standard_grid(), 2.0, 2.0, var);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8 * var);
}

// ------------------------------------------------------------- conditioning

TEST(Conditioning, UncorrelatedBoundaryLeavesInteriorAlone)
{
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(4, 4);
    k.topLeftCorner(2, 2) << 2.0, 0.5, 0.5, 1.0;
    k.bottomRightCorner(2, 2) << 1.0, 0.3, 0.3, 1.5;
    Eigen::VectorXd mu(4);
    mu << 0.1, 0.2, 0.3, 0.4;
    const std::vector<std::size_t> b = {2, 3};
    const auto c = condition_on_boundary(mu, k, b, -1.0);
    EXPECT_NEAR(c.mean(0), 0.1, 1e-15);
    EXPECT_NEAR(c.mean(1), 0.2, 1e-15);
    EXPECT_EQ(c.mean(2), -1.0);
    EXPECT_TRUE(c.cov.topLeftCorner(2, 2).isApprox(k.topLeftCorner(2, 2), 1e-15));
    EXPECT_TRUE(c.cov.bottomRows(2).isZero(0.0));
    EXPECT_TRUE(c.cov.rightCols(2).isZero(0.0));
}

TEST(Conditioning, ChainMatchesDenseOracle)
{
    // 6 nodes on a line at unit spacing, ς² = 1, L = 1.5, ends pinned at μ − 2ς.
    Eigen::MatrixXd k(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) k(i, j) = std::exp(-0.5 * std::pow((i - j) / 1.5, 2));
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(6, 0.5);
    const std::vector<std::size_t> b = {0, 5};
    const auto c = condition_on_boundary(mu, k, b, 0.5 - 2.0);

    // mpmath dense solve
    const double mean_oracle[] = {-1.1522184627726752, -0.58868637291298639, -0.58868637291298639,
                                  -1.1522184627726752};
    const double var_oracle[] = {0.35817088535889963, 0.81309843651418715, 0.81309843651418715,
                                 0.35817088535889963};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(c.mean(i + 1), mean_oracle[i], 1e-8);
        EXPECT_NEAR(c.cov(i + 1, i + 1), var_oracle[i], 1e-8);
    }
    EXPECT_NEAR(c.cov(1, 2), 0.46813786620997125, 1e-8);
    EXPECT_LT(c.mean(1), 0.5);  // pulled towards the low boundary
    EXPECT_EQ(c.cov.row(0).norm(), 0.0);
    EXPECT_EQ(c.cov.col(5).norm(), 0.0);
}

TEST(Conditioning, GridConditionedCovarianceIsPsdWithZeroBoundary)
{
    const CylindricalGrid g = standard_grid();
    const double var = 1.7;
    const auto k = covariance_matrix(g, 2.0, 2.0, var);
    const auto b = g.boundary_nodes();
    const auto c = condition_on_boundary(Eigen::VectorXd::Constant(g.size(), 0.3), k, b, -2.0);
    for (std::size_t node : b) {
        EXPECT_EQ(c.cov.row(node).norm(), 0.0);
        EXPECT_EQ(c.mean(node), -2.0);
    }
    EXPECT_GE(c.cov.diagonal().minCoeff(), 0.0);
    EXPECT_TRUE(c.cov.isApprox(c.cov.transpose(), 0.0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8 * var);
}

TEST(Conditioning, RejectsBadBoundarySets)
{
    Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
    const std::vector<std::size_t> none, all = {0, 1, 2};
    EXPECT_THROW(condition_on_boundary(mu, k, none, 0.0), Error);
    EXPECT_THROW(condition_on_boundary(mu, k, all, 0.0), Error);
}

// ------------------------------------------------------------- sampling

TEST(SampleLatent, ZeroCovarianceReturnsMean)
{
    Eigen::VectorXd mu(3);
    mu << 1.0, -2.0, 0.25;
    const auto x = sample_latent(mu, Eigen::MatrixXd::Zero(3, 3), 11);
    EXPECT_EQ(x, mu);
}

TEST(SampleLatent, DeterministicPerSeed)
{
    const auto k = covariance_matrix(standard_grid(), 2.0, 2.0, 1.0);
    const Eigen::VectorXd mu = Eigen::VectorXd::Zero(k.rows());
    const auto a = sample_latent(mu, k, 42);
    const auto b = sample_latent(mu, k, 42);
    const auto c = sample_latent(mu, k, 43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(SampleLatent, EmpiricalCovarianceMatches)
{
    Eigen::MatrixXd k(3, 3);
    k << 2.0, 0.8, -0.3, 0.8, 1.0, 0.2, -0.3, 0.2, 0.5;
    Eigen::VectorXd mu(3);
    mu << 1.0, 0.0, -1.0;
    LatentSampler sampler(mu, k);
    std::mt19937_64 rng(7);
    constexpr int n = 10000;
    Eigen::MatrixXd xs(3, n);
    for (int s = 0; s < n; ++s) xs.col(s) = sampler.sample(rng);
    const Eigen::VectorXd mean = xs.rowwise().mean();
    const Eigen::MatrixXd centered = xs.colwise() - mean;
    const Eigen::MatrixXd emp = centered * centered.transpose() / (n - 1);
    // entrywise within 5% of the largest variance scale
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(emp(i, j), k(i, j), 0.05 * std::sqrt(k(i, i) * k(j, j))) << i << "," << j;
}

// ------------------------------------------------------------- cdf match

TEST(CdfMatch, QuantileSpacedInputIsFixedPointUpToSmoothing)
{
    // The KDE of a quantile-spaced sample is close to N(μ, ς² + h²), so the
    // map is a pure shrink about μ by ς/√(ς² + h²) away from the tails.
    const double mu = 0.3, var = 0.25, sd = 0.5;
    std::vector<double> xs;
    for (int i = 0; i < 400; ++i) xs.push_back(mu + sd * normal_quantile((i + 0.5) / 400.0));
    const auto ys = cdf_match(xs, mu, var);
    const double h = silverman_bandwidth(xs);
    const double shrink = sd / std::sqrt(var + h * h);
    for (std::size_t i = 20; i < 380; ++i) EXPECT_NEAR(ys[i], mu + (xs[i] - mu) * shrink, 1e-7);
    for (std::size_t i = 0; i < 400; ++i) EXPECT_NEAR(ys[i], xs[i], 0.15 * sd);
}

TEST(CdfMatch, PreservesOrder)
{
    std::mt19937_64 rng(3);
    std::gamma_distribution<double> gamma(2.0, 1.0);
    std::vector<double> xs(300);
    for (auto& x : xs) x = gamma(rng);
    const auto ys = cdf_match(xs, -1.0, 4.0);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j)
            if (xs[i] < xs[j]) {
                ASSERT_LE(ys[i], ys[j]);
            }
}

TEST(CdfMatch, UniformGridMapsToTargetNormal)
{
    std::vector<double> xs(100);
    for (int i = 0; i < 100; ++i) xs[i] = i / 99.0;
    const auto ys = cdf_match(xs, 0.5, 0.04);
    // scipy.stats.kstest on the same KDE construction gives 0.0513683...;
    // edge smoothing of the uniform's hard cut-offs dominates the statistic.
    EXPECT_NEAR(ks_statistic(ys, 0.5, 0.2), 0.05136832101010929, 1e-9);
}

TEST(CdfMatch, ConstantFieldPassesThrough)
{
    log::set_level(log::Level::error);
    const std::vector<double> xs(50, 0.7);
    EXPECT_EQ(cdf_match(xs, 0.0, 1.0), xs);
    log::set_level(log::Level::info);
}

TEST(CdfMatch, NeedsSupport)
{
    const std::vector<double> xs(29, 0.1);
    EXPECT_THROW(cdf_match(xs, 0.0, 1.0), Error);
}

// ------------------------------------------------------------- censor

TEST(Censor, ClampsToUnitInterval)
{
    EXPECT_EQ(censor(-0.3), 0.0);
    EXPECT_EQ(censor(1.7), 1.0);
    EXPECT_EQ(censor(0.42), 0.42);
}

TEST(Censor, IdempotentAndOrderPreserving)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.5, 1.0);
    std::vector<double> xs(500);
    for (auto& x : xs) x = n(rng);
    const auto once = censor(xs);
    EXPECT_EQ(censor(once), once);
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i - 1] <= xs[i]) {
            EXPECT_LE(once[i - 1], once[i]);
        }
}

TEST(Censor, WideFieldHasMassAtBothLimits)
{
    // N(0.5, 4): P(x<0) = P(x>1) = Φ(-0.25) ≈ 0.401
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.5, 2.0);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = n(rng);
    const auto c = censor(xs);
    const double zeros = std::count(c.begin(), c.end(), 0.0) / 20000.0;
    const double ones = std::count(c.begin(), c.end(), 1.0) / 20000.0;
    const double tail = normal_cdf(-0.25);
    EXPECT_NEAR(zeros, tail, 0.015);
    EXPECT_NEAR(ones, tail, 0.015);
}

// ------------------------------------------------------------- full pipeline

TEST(RandomInsult, DeterministicAndCensored)
{
    const CylindricalGrid g = standard_grid();
    RandomInsultParams p;  // φ = 0.35, ε = 0.2, L = 2 mm
    const auto a = generate_random_insult(g, p, InsultKind::elastic_fiber, 0.6, 1234);
    const auto b = generate_random_insult(g, p, InsultKind::elastic_fiber, 0.6, 1234);
    EXPECT_EQ(a.values, b.values);
    a.validate();
    for (std::size_t j = 0; j < g.n_theta; ++j) {
        EXPECT_EQ(a.at(0, j), 0.0);
        EXPECT_EQ(a.at(g.n_z - 1, j), 0.0);
    }
    EXPECT_GT(*std::max_element(a.values.begin(), a.values.end()), 0.0);
}

TEST(RandomInsult, BoundaryStaysZeroForSoftHighPropensity)
{
    const CylindricalGrid g = standard_grid();
    RandomInsultParams p{0.5, 0.6, 1.5, 2.0, 2.0};
    RandomInsultGenerator gen(g, p);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto prof = gen.generate(InsultKind::mechanosensing, 0.2, s);
        for (std::size_t node : g.boundary_nodes()) ASSERT_EQ(prof.values[node], 0.0);
    }
}

TEST(RandomInsult, EnsemblePropensityMatches)
{
    const CylindricalGrid g = standard_grid();
    RandomInsultGenerator gen(g, RandomInsultParams{});
    std::size_t above = 0, total = 0;
    for (std::uint64_t s = 0; s < 2000; ++s) {
        for (double v : gen.latent(s)) above += v > 0.5;
        total += g.size();
    }
    EXPECT_NEAR(static_cast<double>(above) / total, 0.35, 0.02);
}

TEST(RandomInsult, LargeCircumferentialScaleApproachesAxisymmetry)
{
    const CylindricalGrid g = standard_grid();
    RandomInsultParams p;
    p.length_theta = 1e3;
    RandomInsultGenerator gen(g, p);
    double circ = 0.0, axial = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto x = gen.latent(s);
        // variance along θ within each ring, and of ring means along z
        std::vector<double> ring_mean(g.n_z, 0.0);
        for (std::size_t i = 0; i < g.n_z; ++i) {
            for (std::size_t j = 0; j < g.n_theta; ++j) ring_mean[i] += x[g.index(i, j)];
            ring_mean[i] /= g.n_theta;
            for (std::size_t j = 0; j < g.n_theta; ++j) circ += std::pow(x[g.index(i, j)] - ring_mean[i], 2);
        }
        double grand = 0.0;
        for (double m : ring_mean) grand += m;
        grand /= g.n_z;
        for (double m : ring_mean) axial += std::pow(m - grand, 2) * g.n_theta;
    }
    EXPECT_LT(circ, 1e-3 * axial);
}

TEST(RandomInsult, ProfileFileRoundTrip)
{
    const auto prof = generate_random_insult(standard_grid(), RandomInsultParams{}, InsultKind::mechanosensing,
                                             0.25, 77);
    const auto back = decode_profile(encode_profile(prof));
    EXPECT_EQ(back.grid, prof.grid);
    EXPECT_EQ(back.kind, prof.kind);
    EXPECT_EQ(back.severity_max, prof.severity_max);
    EXPECT_EQ(back.provenance, prof.provenance);
    for (std::size_t i = 0; i < prof.values.size(); ++i)
        EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(prof.values[i])));
    std::string bytes = encode_profile(prof);
    bytes[0] = 'X';
    EXPECT_THROW(decode_profile(bytes), Error);
    EXPECT_THROW(decode_profile(encode_profile(prof).substr(0, 100)), Error);
}
