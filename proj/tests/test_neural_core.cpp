#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "taa/nn/network.hpp"
#include "taa/nn/optim.hpp"

using namespace taa;
using namespace taa::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng)
{
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = 2.0 * uniform01(rng) - 1.0;
    return m;
}

// Fixed random linear functional of the output, so every output entry
// carries gradient.
struct Probe {
    Network net;
    Matrix x, w;
};

double probe_loss(const Probe& p, const Vector& theta, const Matrix& x)
{
    const Matrix y = p.net.forward(theta.data(), x);
    return (y.array() * p.w.array()).sum() + 0.5 * y.squaredNorm();
}

double max_rel_err(const Vector& a, const Vector& f)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - f[i]) / std::max({std::abs(a[i]), std::abs(f[i]), 1.0}));
    return worst;
}

// Parameter and input gradients of one network against central differences.
void gradient_check(const Network& net, std::size_t batch, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Probe p{net, random_matrix(Eigen::Index(net.input_size()), Eigen::Index(batch), rng),
            random_matrix(Eigen::Index(net.output_size()), Eigen::Index(batch), rng)};
    Vector theta(Eigen::Index(net.num_params()));
    net.init(theta.data(), rng);
    // nonzero biases so their paths are exercised
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (theta[i] == 0.0) theta[i] = 0.1 * (2.0 * uniform01(rng) - 1.0);

    NetworkCache cache;
    const Matrix y = net.forward(theta.data(), p.x, &cache);
    Vector grad = Vector::Zero(theta.size());
    const Matrix dx = net.backward(theta.data(), cache, p.w + y, grad.data(), true);

    const Vector fd = finite_diff_grad([&](const Vector& t) { return probe_loss(p, t, p.x); }, theta, 1e-6);
    EXPECT_LE(max_rel_err(grad, fd), 1e-6) << "params, seed " << seed;

    const Vector x0 = Eigen::Map<const Vector>(p.x.data(), p.x.size());
    const Vector fdx = finite_diff_grad(
        [&](const Vector& xv) {
            return probe_loss(p, theta, Eigen::Map<const Matrix>(xv.data(), p.x.rows(), p.x.cols()));
        },
        x0, 1e-6);
    const Vector dxv = Eigen::Map<const Vector>(dx.data(), dx.size());
    EXPECT_LE(max_rel_err(dxv, fdx), 1e-6) << "inputs, seed " << seed;
}

} // namespace

TEST(Xavier, UnitBoundForThreeByThree) { EXPECT_DOUBLE_EQ(xavier_bound(3, 3), 1.0); }

TEST(Xavier, VarianceMatchesUniformLaw)
{
    // fan_in = 100, fan_out = 50 over 1e5 draws
    std::mt19937_64 rng3(11);
    Tensor w({50, 100});
    std::vector<double> all;
    for (int rep = 0; rep < 20; ++rep) {
        w = xavier_init({50, 100}, rng3);
        all.insert(all.end(), w.values.begin(), w.values.end());
    }
    ASSERT_EQ(all.size(), 100000u);
    double mean = 0.0;
    for (double v : all) mean += v;
    mean /= double(all.size());
    double var = 0.0;
    for (double v : all) var += (v - mean) * (v - mean);
    var /= double(all.size());
    EXPECT_NEAR(var, 1.0 / 75.0, 0.03 / 75.0);
    const double bound = xavier_bound(100, 50);
    for (double v : all) ASSERT_LE(std::abs(v), bound);
}

TEST(Xavier, DeterministicPerSeedAndConvFans)
{
    std::mt19937_64 a(3), b(3);
    EXPECT_EQ(xavier_init({16, 1, 3, 3}, a).values, xavier_init({16, 1, 3, 3}, b).values);
    const auto [fi, fo] = glorot_fans({32, 16, 3, 3});
    EXPECT_EQ(fi, 144u);
    EXPECT_EQ(fo, 288u);
    EXPECT_THROW(xavier_init({4}, a), Error);
}

TEST(Xavier, NetworkInitZeroBiases)
{
    Network net({1, 1, 4}, {LayerSpec::dense(3, Activation::tanh)});
    std::mt19937_64 rng(1);
    Vector th(Eigen::Index(net.num_params()));
    net.init(th.data(), rng);
    for (int i = 12; i < 15; ++i) EXPECT_EQ(th[i], 0.0);
    for (int i = 0; i < 12; ++i) EXPECT_LE(std::abs(th[i]), xavier_bound(4, 3));
}

TEST(Layers, IdentityDensePassesThrough)
{
    Network net({1, 1, 3}, {LayerSpec::dense(3, Activation::identity)});
    Vector th = Vector::Zero(12);
    Eigen::Map<Matrix>(th.data(), 3, 3).setIdentity();
    std::mt19937_64 rng(2);
    const Matrix x = random_matrix(3, 4, rng);
    NetworkCache c;
    EXPECT_EQ(net.forward(th.data(), x, &c), x);
    const Matrix dy = random_matrix(3, 4, rng);
    Vector g = Vector::Zero(12);
    EXPECT_EQ(net.backward(th.data(), c, dy, g.data(), true), dy);
}

TEST(Layers, ConvOutputShapes)
{
    Network same({21, 20, 1}, {LayerSpec::conv(16, 3, 1, Activation::tanh)});
    EXPECT_EQ(same.output_shape(), (Shape{21, 20, 16}));
    for (std::size_t k : {1, 2, 3, 5})
        for (std::size_t s : {1, 2, 3})
            for (std::size_t pad : {0, 1, 2}) {
                Network n({21, 20, 2}, {LayerSpec::conv(4, k, pad, Activation::identity, s)});
                EXPECT_EQ(n.output_shape().h, (21 + 2 * pad - k) / s + 1);
                EXPECT_EQ(n.output_shape().w, (20 + 2 * pad - k) / s + 1);
                EXPECT_EQ(n.output_shape().c, 4u);
            }
}

TEST(Layers, AssemblyRejectsBadShapes)
{
    EXPECT_THROW(Network({2, 2, 1}, {LayerSpec::conv(4, 5, 0, Activation::tanh)}), Error);
    EXPECT_THROW(Network({1, 1, 3}, {LayerSpec::dense(0, Activation::tanh)}), Error);
    EXPECT_THROW(Network({1, 1, 3}, {LayerSpec::maxpool(2)}), Error);
    EXPECT_THROW(Network({1, 1, 3}, {}), Error);
    Network ok({1, 1, 3}, {LayerSpec::dense(2, Activation::tanh)});
    Vector th(Eigen::Index(ok.num_params()));
    EXPECT_THROW(ok.forward(th.data(), Matrix::Zero(4, 1)), Error);
}

TEST(Layers, ParameterCountsByHand)
{
    // 5x4x1 → conv 3@3x3 pad 1 (3·9+3 = 30) → pool 2 (2x2x3) → flatten 12 → dense 7 (12·7+7 = 91)
    Network n({5, 4, 1}, {LayerSpec::conv(3, 3, 1, Activation::tanh), LayerSpec::maxpool(2), LayerSpec::flatten(),
                          LayerSpec::dense(7, Activation::identity)});
    EXPECT_EQ(n.layer_params(), (std::vector<std::size_t>{30, 0, 0, 91}));
    EXPECT_EQ(n.num_params(), 121u);
    EXPECT_EQ(n.output_size(), 7u);
}

TEST(Layers, MaxPoolPicksWindowMaximum)
{
    Network n({2, 4, 1}, {LayerSpec::maxpool(2)});
    Matrix x(8, 1);
    x << 1, 5, 2, 0, 3, 4, 9, 8;  // rows (1 5 2 0), (3 4 9 8)
    NetworkCache c;
    const Matrix y = n.forward(nullptr, x, &c);
    EXPECT_EQ(y(0, 0), 5.0);
    EXPECT_EQ(y(1, 0), 9.0);
    Matrix dy(2, 1);
    dy << 1.5, -2.0;
    const Matrix dx = n.backward(nullptr, c, dy, nullptr, true);
    Matrix expect = Matrix::Zero(8, 1);
    expect(1, 0) = 1.5;
    expect(6, 0) = -2.0;
    EXPECT_EQ(dx, expect);
}

TEST(Layers, JsonRoundTrip)
{
    Network n({21, 20, 1}, {LayerSpec::conv(16, 3, 1, Activation::tanh), LayerSpec::maxpool(2),
                            LayerSpec::conv(32, 3, 0, Activation::tanh), LayerSpec::maxpool(2),
                            LayerSpec::flatten(), LayerSpec::dense(128, Activation::identity)});
    const Network m = Network::from_json(n.to_json());
    EXPECT_EQ(m.to_json(), n.to_json());
    EXPECT_EQ(m.num_params(), n.num_params());
}

// ≥ 20 seeds per layer family.
TEST(GradientCheck, DenseTwoLayer)
{
    Network net({1, 1, 5}, {LayerSpec::dense(7, Activation::tanh), LayerSpec::dense(3, Activation::identity)});
    for (std::uint64_t s = 0; s < 20; ++s) gradient_check(net, 4, 100 + s);
}

TEST(GradientCheck, DenseTanhHead)
{
    Network net({1, 1, 3}, {LayerSpec::dense(6, Activation::tanh), LayerSpec::dense(4, Activation::tanh)});
    for (std::uint64_t s = 0; s < 20; ++s) gradient_check(net, 3, 200 + s);
}

TEST(GradientCheck, ConvPadded)
{
    Network net({6, 5, 2}, {LayerSpec::conv(3, 3, 1, Activation::tanh)});
    for (std::uint64_t s = 0; s < 20; ++s) gradient_check(net, 2, 300 + s);
}

TEST(GradientCheck, ConvStridedUnpadded)
{
    Network net({7, 6, 2}, {LayerSpec::conv(2, 3, 0, Activation::identity, 2)});
    for (std::uint64_t s = 0; s < 20; ++s) gradient_check(net, 2, 400 + s);
}

TEST(GradientCheck, MaxPool)
{
    Network net({4, 6, 3}, {LayerSpec::maxpool(2)});
    for (std::uint64_t s = 0; s < 20; ++s) gradient_check(net, 2, 500 + s);
}

TEST(GradientCheck, SmallCnnStack)
{
    Network net({9, 8, 1}, {LayerSpec::conv(3, 3, 1, Activation::tanh), LayerSpec::maxpool(2),
                            LayerSpec::conv(4, 3, 0, Activation::tanh), LayerSpec::flatten(),
                            LayerSpec::dense(5, Activation::identity)});
    for (std::uint64_t s = 0; s < 20; ++s) gradient_check(net, 2, 600 + s);
}

TEST(Adam, ZeroGradientIsNoOp)
{
    Adam adam;
    Vector x(3);
    x << 1.0, -2.0, 3.0;
    const Vector x0 = x;
    for (int i = 0; i < 10; ++i) adam.step(x, Vector::Zero(3));
    EXPECT_EQ(x, x0);
}

TEST(Adam, ConstantGradientStepTendsToLrSign)
{
    Adam adam({1e-3});
    Vector x = Vector::Zero(2), g(2);
    g << 0.5, -3.0;
    Vector prev = x;
    for (int t = 0; t < 10000; ++t) {
        prev = x;
        adam.step(x, g);
    }
    EXPECT_EQ(adam.steps(), 10000);
    const Vector step = x - prev;
    EXPECT_NEAR(step[0], -1e-3, 1e-9);
    EXPECT_NEAR(step[1], 1e-3, 1e-9);
}

TEST(Adam, Deterministic)
{
    std::mt19937_64 rng(5);
    const Matrix gs = random_matrix(4, 50, rng);
    Vector a = Vector::Ones(4), b = Vector::Ones(4);
    Adam p, q;
    for (int i = 0; i < 50; ++i) {
        p.step(a, gs.col(i));
        q.step(b, gs.col(i));
    }
    EXPECT_EQ(a, b);
}

namespace {

// ½xᵀAx − bᵀx, evaluated as ½(x−x*)ᵀA(x−x*) (same function up to a
// constant) so decreases stay resolvable once ‖g‖ is far below √eps.
struct Quadratic {
    Matrix A;
    Vector b, xs;
    double operator()(const Vector& x, Vector& g) const
    {
        g = A * x - b;
        const Vector e = x - xs;
        return 0.5 * e.dot(A * e);
    }
};

Quadratic random_quadratic(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const Matrix M = random_matrix(5, 5, rng);
    Quadratic q{M * M.transpose() + Matrix::Identity(5, 5), random_matrix(5, 1, rng), {}};
    q.xs = q.A.ldlt().solve(q.b);
    return q;
}

} // namespace

TEST(Lbfgs, QuadraticConvergesWithinBudget)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Quadratic q = random_quadratic(seed);
        const Vector oracle = q.A.fullPivLu().solve(q.b);
        Lbfgs opt;
        Vector x = Vector::Zero(5), g;
        double f = q(x, g);
        int it = 0;
        while (g.norm() >= 1e-10 && it < 25) {
            const double f_prev = f;
            const Vector x_prev = x, g_prev = g;
            const auto r = opt.step(x, f, g, q);
            ++it;
            if (!r.accepted) break;
            EXPECT_LT(f, f_prev);
            // strong Wolfe at the accepted step
            const Vector d = (x - x_prev) / r.step;
            EXPECT_LE(f, f_prev + 1e-4 * r.step * g_prev.dot(d) + 1e-15);
            EXPECT_LE(std::abs(g.dot(d)), 0.9 * std::abs(g_prev.dot(d)) + 1e-15);
        }
        EXPECT_LT(g.norm(), 1e-10) << "seed " << seed << " after " << it << " iterations";
        EXPECT_LE(it, 25);
        EXPECT_LT((x - oracle).norm(), 1e-9);
    }
}

TEST(Lbfgs, StationaryPointDoesNotMove)
{
    const Quadratic q = random_quadratic(9);
    Vector x = q.A.ldlt().solve(q.b), g;
    double f = q(x, g);
    g.setZero();
    const Vector x0 = x;
    Lbfgs opt;
    const auto r = opt.step(x, f, g, q);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(x, x0);
}

TEST(Lbfgs, MonotoneOnRosenbrock)
{
    auto rosen = [](const Vector& x, Vector& g) {
        g = Vector::Zero(x.size());
        double f = 0.0;
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
            const double a = x[i + 1] - x[i] * x[i], b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * a * x[i] - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        return f;
    };
    Vector x(4), g;
    x << -1.2, 1.0, -0.5, 0.8;
    double f = rosen(x, g);
    Lbfgs opt;
    std::vector<double> trace{f};
    for (int i = 0; i < 200; ++i) {
        if (!opt.step(x, f, g, rosen).accepted) break;
        trace.push_back(f);
    }
    for (std::size_t i = 1; i < trace.size(); ++i) ASSERT_LT(trace[i], trace[i - 1]);
    EXPECT_LT(f, 1e-10);
    EXPECT_LE(opt.history_size(), 10u);
}

TEST(Lbfgs, LineSearchFailureKeepsParameters)
{
    // Any move away from the start is non-finite.
    const Vector start = Vector::Ones(3);
    auto cliff = [&](const Vector& x, Vector& g) {
        g = Vector::Ones(3);
        return x == start ? 1.0 : std::nan("");
    };
    Vector x = start, g;
    double f = cliff(x, g);
    Lbfgs opt;
    const auto r = opt.step(x, f, g, cliff);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.evaluations, 30);
    EXPECT_EQ(x, start);
    EXPECT_EQ(f, 1.0);
}

TEST(FiniteDiff, SquareAtThree)
{
    Vector x(1);
    x << 3.0;
    const Vector g = finite_diff_grad([](const Vector& v) { return v[0] * v[0]; }, x, 1e-6, false);
    EXPECT_NEAR(g[0], 6.0, 1e-8);
}

TEST(FiniteDiff, LinearIsExact)
{
    Vector c(3), x(3);
    c << 0.5, -2.0, 4.0;
    x << 1.0, 2.0, -3.0;
    // |f| ≤ 16 near x, so rounding is a few ulps of 16 over 2h
    for (double h : {1e-3, 1e-6, 0.25}) {
        const Vector g = finite_diff_grad([&](const Vector& v) { return c.dot(v); }, x, h);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], c[i], 16.0 * 4.0 * std::numeric_limits<double>::epsilon() / h);
    }
}

TEST(FiniteDiff, MatchesDenseBackward)
{
    Network net({1, 1, 4}, {LayerSpec::dense(3, Activation::tanh)});
    gradient_check(net, 5, 77);
}
