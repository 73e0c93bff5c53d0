#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>

#include "taa/error.hpp"

namespace taa::nn {

/// Loss and gradient at x; g is resized by the callee.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamOptions o = {}) : opt_(o) {}

    void step(Eigen::VectorXd& x, const Eigen::VectorXd& g)
    {
        if (m_.size() != x.size()) {
            m_ = Eigen::VectorXd::Zero(x.size());
            v_ = Eigen::VectorXd::Zero(x.size());
            t_ = 0;
        }
        ++t_;
        m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * g;
        v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        x.array() -= opt_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opt_.eps);
    }

    long steps() const noexcept { return t_; }

private:
    AdamOptions opt_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

struct LbfgsOptions {
    std::size_t history = 10;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_evals = 30;         // per line search
    double curvature_eps = 1e-12;
};

struct LbfgsStep {
    bool accepted = false;
    int evaluations = 0;
    double step = 0.0;
};

/// Limited-memory BFGS with a strong-Wolfe line search. step() moves
/// (x, f, g) only when the loss strictly decreases.
class Lbfgs {
public:
    explicit Lbfgs(LbfgsOptions o = {}) : opt_(o) {}

    void reset()
    {
        s_.clear();
        y_.clear();
        rho_.clear();
    }
    std::size_t history_size() const noexcept { return s_.size(); }

    LbfgsStep step(Eigen::VectorXd& x, double& f, Eigen::VectorXd& g, const Objective& fn)
    {
        Eigen::VectorXd d = direction(g);
        double dphi0 = g.dot(d);
        if (!(dphi0 < 0.0)) {
            reset();
            d = -g;
            dphi0 = -g.squaredNorm();
        }
        if (!(dphi0 < 0.0)) return {};  // zero gradient

        double a0 = 1.0;
        if (s_.empty()) a0 = std::min(1.0, 1.0 / g.cwiseAbs().sum());

        LbfgsStep out;
        Eigen::VectorXd xa, ga;
        auto eval = [&](double a, double& fa, double& da) {
            xa = x + a * d;
            fa = fn(xa, ga);
            da = ga.dot(d);
            ++out.evaluations;
            if (!std::isfinite(fa) || !std::isfinite(da)) {
                fa = INFINITY;
                da = INFINITY;
            }
        };

        struct Pt {
            double a, f, d;
            Eigen::VectorXd x, g;
        };
        Pt lo{0.0, f, dphi0, x, g}, hi{};
        bool found = false, zoom = false;

        double a = a0;
        Pt prev = lo;
        while (out.evaluations < opt_.max_evals) {
            double fa, da;
            eval(a, fa, da);
            Pt cur{a, fa, da, xa, ga};
            if (fa > f + opt_.c1 * a * dphi0 || (out.evaluations > 1 && fa >= prev.f)) {
                lo = prev;
                hi = std::move(cur);
                zoom = true;
                break;
            }
            if (std::abs(da) <= -opt_.c2 * dphi0) {
                lo = std::move(cur);
                found = true;
                break;
            }
            if (da >= 0.0) {
                hi = prev;
                lo = std::move(cur);
                zoom = true;
                break;
            }
            prev = std::move(cur);
            lo = prev;
            a *= 2.0;
        }

        while (zoom && !found && out.evaluations < opt_.max_evals) {
            const double aj = interpolate(lo, hi);
            double fj, dj;
            eval(aj, fj, dj);
            Pt cur{aj, fj, dj, xa, ga};
            if (fj > f + opt_.c1 * aj * dphi0 || fj >= lo.f) {
                hi = std::move(cur);
            } else {
                if (std::abs(dj) <= -opt_.c2 * dphi0) {
                    lo = std::move(cur);
                    found = true;
                    break;
                }
                if (dj * (hi.a - lo.a) >= 0.0) hi = lo;
                lo = std::move(cur);
            }
            if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, lo.a)) break;
        }

        // lo always satisfies sufficient decrease; fall back to it if Wolfe failed.
        if (lo.a <= 0.0 || !(lo.f < f)) {
            reset();
            return out;
        }
        const Eigen::VectorXd s = lo.x - x, y = lo.g - g;
        const double sy = s.dot(y);
        if (sy > opt_.curvature_eps) {
            s_.push_back(s);
            y_.push_back(y);
            rho_.push_back(1.0 / sy);
            if (s_.size() > opt_.history) {
                s_.pop_front();
                y_.pop_front();
                rho_.pop_front();
            }
        }
        x = std::move(lo.x);
        g = std::move(lo.g);
        f = lo.f;
        out.accepted = true;
        out.step = lo.a;
        return out;
    }

private:
    Eigen::VectorXd direction(const Eigen::VectorXd& g) const
    {
        Eigen::VectorXd q = g;
        const std::size_t k = s_.size();
        std::vector<double> alpha(k);
        for (std::size_t i = k; i-- > 0;) {
            alpha[i] = rho_[i] * s_[i].dot(q);
            q -= alpha[i] * y_[i];
        }
        if (k > 0) q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
        for (std::size_t i = 0; i < k; ++i) {
            const double beta = rho_[i] * y_[i].dot(q);
            q += (alpha[i] - beta) * s_[i];
        }
        return -q;
    }

    // Safeguarded cubic through both ends; bisection when it lands near an end.
    template <class P>
    static double interpolate(const P& lo, const P& hi)
    {
        const double a = std::min(lo.a, hi.a), b = std::max(lo.a, hi.a);
        double t = 0.5 * (lo.a + hi.a);
        if (std::isfinite(hi.f) && std::isfinite(hi.d)) {
            const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
            const double disc = d1 * d1 - lo.d * hi.d;
            if (disc >= 0.0) {
                const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
                const double c = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
                if (std::isfinite(c)) t = c;
            }
        }
        const double margin = 0.1 * (b - a);
        if (t < a + margin || t > b - margin) t = 0.5 * (a + b);
        return t;
    }

    LbfgsOptions opt_;
    std::deque<Eigen::VectorXd> s_, y_;
    std::deque<double> rho_;
};

/// Central differences; with `relative`, the step at x_i is h·(1 + |x_i|).
inline Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h, bool relative = true)
{
    require(h > 0.0, ErrorKind::parameter, "finite-difference step must be positive");
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hi = relative ? h * (1.0 + std::abs(x[i])) : h;
        xp[i] = x[i] + hi;
        const double fp = f(xp);
        xp[i] = x[i] - hi;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * hi);
    }
    return g;
}

} // namespace taa::nn
