#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <sstream>

#include "taa/deeponet/model.hpp"
#include "taa/log.hpp"
#include "taa/nn/optim.hpp"
#include "taa/parallel.hpp"

namespace taa {

struct TrainConfig {
    std::size_t adam_iters = 20000;
    double lr = 1e-3;
    std::size_t lbfgs_iters = 2000;
    std::uint64_t seed = 0;
    std::size_t trials = 5;
    std::size_t log_every = 0;  // 0 = quiet

    void validate() const
    {
        require(trials >= 1, ErrorKind::config, "trials must be at least 1");
        require(lr > 0.0, ErrorKind::config, "learning rate must be positive");
    }
    io::Json to_json() const
    {
        return {{"adam_iters", adam_iters}, {"lr", lr}, {"lbfgs_iters", lbfgs_iters}, {"seed", seed}, {"trials", trials}};
    }
};

/// Full-batch tensors: standardized branch inputs, trunk points (3 × P),
/// targets (P × N).
struct Batch {
    std::vector<nn::Matrix> x;
    nn::Matrix y;
    nn::Matrix target;
};

inline std::vector<const BranchInputs*> gather_inputs(const Dataset& d, const std::vector<std::size_t>& idx)
{
    std::vector<const BranchInputs*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&d.samples.at(i).inputs);
    return out;
}

inline nn::Matrix grid_trunk_points(const CylindricalGrid& g) { return trunk_points(grid_query_points(g)); }

inline Batch make_batch(const DeepONet& m, const Dataset& d, const std::vector<std::size_t>& idx)
{
    require(!idx.empty(), ErrorKind::parameter, "batch must be non-empty");
    Batch b;
    b.x = m.branch_matrices(gather_inputs(d, idx));
    b.y = grid_trunk_points(d.grid);
    b.target.resize(static_cast<Eigen::Index>(d.grid.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
        const auto& t = d.samples[idx[c]].target;
        for (std::size_t p = 0; p < t.size(); ++p)
            b.target(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = t[p];
    }
    return b;
}

struct TrainResult {
    std::vector<double> loss_history;  // loss before each Adam step, then after each accepted L-BFGS step
    std::size_t adam_steps = 0;
    std::size_t lbfgs_steps = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double seconds = 0.0;
};

namespace detail {

[[noreturn]] inline void nonfinite_abort(const std::vector<double>& trace, const char* phase, std::size_t it)
{
    std::ostringstream msg;
    msg << "non-finite training loss in " << phase << " iteration " << it << "; last losses:";
    const std::size_t from = trace.size() > 5 ? trace.size() - 5 : 0;
    for (std::size_t i = from; i < trace.size(); ++i) msg << ' ' << trace[i];
    fail(ErrorKind::numerical, msg.str());
}

} // namespace detail

/// Xavier init from cfg.seed, scalers from the training split, full-batch
/// Adam then L-BFGS.
inline TrainResult train(DeepONet& m, const Dataset& d, const TrainConfig& cfg,
                         const std::vector<std::size_t>* subset = nullptr)
{
    cfg.validate();
    require(d.mode == m.mode(), ErrorKind::structural,
            "dataset mode " + to_string(d.mode) + " does not match model mode " + to_string(m.mode()));
    const auto& idx = subset ? *subset : d.train;
    const auto t0 = std::chrono::steady_clock::now();
    m.fit_scalers(gather_inputs(d, idx));
    m.init(cfg.seed);
    const Batch batch = make_batch(m, d, idx);

    TrainResult res;
    nn::Vector& theta = m.params();
    nn::Vector grad(theta.size());
    auto objective = [&](const nn::Vector& x, nn::Vector& g) {
        g.setZero(x.size());
        return m.loss(x.data(), batch.x, batch.y, batch.target, g.data());
    };

    nn::Adam adam({cfg.lr});
    for (std::size_t it = 0; it < cfg.adam_iters; ++it) {
        const double L = objective(theta, grad);
        res.loss_history.push_back(L);
        if (!std::isfinite(L) || !grad.allFinite()) detail::nonfinite_abort(res.loss_history, "Adam", it);
        adam.step(theta, grad);
        ++res.adam_steps;
        if (cfg.log_every && it % cfg.log_every == 0)
            log::debug("adam " + std::to_string(it) + " loss " + std::to_string(L));
    }

    double f = objective(theta, grad);
    if (!std::isfinite(f)) detail::nonfinite_abort(res.loss_history, "L-BFGS", 0);
    nn::Lbfgs lbfgs;
    for (std::size_t it = 0; it < cfg.lbfgs_iters; ++it) {
        const auto r = lbfgs.step(theta, f, grad, objective);
        if (!r.accepted) break;  // line search exhausted: keep the best point
        res.loss_history.push_back(f);
        ++res.lbfgs_steps;
        if (cfg.log_every && it % cfg.log_every == 0)
            log::debug("lbfgs " + std::to_string(it) + " loss " + std::to_string(f));
    }
    res.initial_loss = res.loss_history.empty() ? f : res.loss_history.front();
    res.final_loss = f;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// ‖pred − t‖₂/‖t‖₂; empty when t is identically zero.
inline std::optional<double> relative_l2(const double* pred, const std::vector<float>& t)
{
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < t.size(); ++p) {
        const double e = pred[p] - t[p];
        num += e * e;
        den += double(t[p]) * t[p];
    }
    if (den == 0.0) return std::nullopt;
    return std::sqrt(num / den);
}

/// ‖pred − true‖₂/‖true‖₂ per sample over all grid nodes, raw predictions.
/// Optional test-input noise uses the clean spread of the evaluated samples.
inline std::vector<double> relative_errors(const DeepONet& m, const Dataset& d, const std::vector<std::size_t>& idx,
                                           double noise_level = 0.0, std::uint64_t noise_seed = 0)
{
    require(!idx.empty(), ErrorKind::parameter, "no samples to evaluate");
    std::vector<BranchInputs> inputs;
    for (std::size_t i : idx) inputs.push_back(d.samples.at(i).inputs);
    if (noise_level > 0.0) {
        const auto stds = channel_std(inputs);
        std::mt19937_64 rng(noise_seed);
        add_noise(inputs, stds, noise_level, d.mode, rng);
    }
    std::vector<const BranchInputs*> ptrs;
    for (const auto& s : inputs) ptrs.push_back(&s);
    const nn::Matrix pred = m.forward(m.branch_matrices(ptrs), grid_trunk_points(d.grid));

    std::vector<double> out;
    for (std::size_t c = 0; c < idx.size(); ++c) {
        const auto e = relative_l2(pred.col(static_cast<Eigen::Index>(c)).data(), d.samples[idx[c]].target);
        if (!e) {
            log::warn("sample " + d.samples[idx[c]].meta.id + " has a zero target; excluded from the error");
            continue;
        }
        out.push_back(*e);
    }
    require(!out.empty(), ErrorKind::numerical, "every evaluated sample has a zero target");
    return out;
}

inline double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Sample standard deviation; 0 for a single value.
inline double std_of(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct TrialOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double clean = 0.0;  // mean relative error over the test split
    double noisy = 0.0;
    TrainResult training;
};

struct EvalReport {
    InputMode arch = InputMode::image;
    std::size_t n_train = 0, n_test = 0, params = 0;
    double noise_level = 0.0;
    double clean_mean = 0.0, clean_std = 0.0;
    double noisy_mean = 0.0, noisy_std = 0.0;
    std::vector<TrialOutcome> trials;

    double inflation() const { return noisy_mean / clean_mean; }
};

inline std::uint64_t noise_seed_for(std::uint64_t trial_seed) { return trial_seed ^ 0x6e6f6973652d3035ULL; }

using TrialHook = std::function<void(const TrialOutcome&, const DeepONet&)>;

/// Trial i retrains with seed cfg.seed + i and scores the test split, clean
/// and with noise on the test inputs.
inline EvalReport evaluate(const Dataset& d, const ArchConfig& arch, const TrainConfig& cfg, double noise_level,
                           unsigned jobs = 1, const TrialHook& hook = {})
{
    cfg.validate();
    require(!d.train.empty() && !d.test.empty(), ErrorKind::parameter, "evaluation needs train and test samples");
    EvalReport rep;
    rep.arch = d.mode;
    rep.n_train = d.train.size();
    rep.n_test = d.test.size();
    rep.noise_level = noise_level;
    rep.params = DeepONet::make(d.mode, d.grid, d.location, arch).num_params();
    rep.trials.resize(cfg.trials);
    parallel_for(cfg.trials, jobs, [&](std::size_t i) {
        DeepONet m = DeepONet::make(d.mode, d.grid, d.location, arch);
        TrainConfig c = cfg;
        c.seed = cfg.seed + i;
        TrialOutcome t;
        t.index = i;
        t.seed = c.seed;
        t.training = train(m, d, c);
        t.clean = mean_of(relative_errors(m, d, d.test));
        t.noisy = noise_level > 0.0 ? mean_of(relative_errors(m, d, d.test, noise_level, noise_seed_for(c.seed)))
                                    : t.clean;
        if (hook) hook(t, m);
        rep.trials[i] = std::move(t);
    });
    std::vector<double> clean, noisy;
    for (const auto& t : rep.trials) {
        clean.push_back(t.clean);
        noisy.push_back(t.noisy);
    }
    rep.clean_mean = mean_of(clean);
    rep.clean_std = std_of(clean);
    rep.noisy_mean = mean_of(noisy);
    rep.noisy_std = std_of(noisy);
    return rep;
}

} // namespace taa
