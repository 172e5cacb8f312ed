#include "t2fit/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "t2fit/lsq.hpp"

namespace t2fit {

CollocationGrid CollocationGrid::uniform(int k, double t_max) {
    if (k < 2) throw ValidationError("CollocationGrid: need at least 2 points");
    if (!(t_max > 0.0)) throw ValidationError("CollocationGrid: t_max must be > 0");
    CollocationGrid g;
    g.points.resize(k);
    for (int i = 0; i < k; ++i)
        g.points[i] = t_max * static_cast<double>(i) / static_cast<double>(k - 1);
    return g;
}

namespace {

// Least-squares estimate of T2 used to seed rho; clamped to a sane range,
// t_max/3 when the estimate is unavailable. Gauss-Newton refinement matters
// here: the plain log-linear estimate is badly biased for short T2 under
// noise (the log of near-zero tail echoes dominates the regression).
double initial_t2(const EchoSeries& series, double t_max, const TrainConfig& cfg) {
    if (cfg.t2_init > 0.0) return cfg.t2_init;
    double min_dt = series.times[1] - series.times[0];
    for (std::size_t i = 2; i < series.times.size(); ++i)
        min_dt = std::min(min_dt, series.times[i] - series.times[i - 1]);
    const double lo = 0.1 * min_dt, hi = 10.0 * t_max;
    try {
        LsqOptions opts;
        opts.method = LsqMethod::nonlinear_refined;
        return std::clamp(fit_lsq(series, opts).t2_hat, lo, hi);
    } catch (const std::exception&) {
    }
    try {
        return std::clamp(fit_log_linear(series).t2_hat, lo, hi);
    } catch (const std::exception&) {
        return t_max / 3.0;
    }
}

} // namespace

PinnFit fit_voxel_full(const EchoSeries& series, const CollocationGrid& grid,
                       const LossWeights& w, const TrainConfig& cfg) {
    series.validate();
    w.validate();
    cfg.validate();
    const double scale = *std::max_element(series.signals.begin(), series.signals.end());
    if (!(scale > 0.0))
        throw ValidationError("fit_voxel: all-zero signal");

    EchoSeries scaled = series;
    for (double& s : scaled.signals) s /= scale;
    const double t_max = series.times.back();

    PinnFit out;
    out.scale = scale;
    out.params = init_params(cfg.width, cfg.seed);
    out.params.t_max = t_max;
    out.params.rho = softplus_inverse(initial_t2(scaled, t_max, cfg));

    MlpField field(out.params);
    const std::size_t np = out.params.param_count(); // network weights + rho
    std::vector<double> flat = out.params.to_flat();
    std::vector<double> grad(np, 0.0);
    std::vector<double> m(np, 0.0), v(np, 0.0);
    std::vector<double> history;
    history.reserve(cfg.max_iters);

    FitResult& res = out.result;
    double b1t = 1.0, b2t = 1.0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const double loss =
            loss_and_grad(field, out.params.rho, grid, scaled, w, cfg.norm, grad);
        if (!std::isfinite(loss)) {
            res.converged = false;
            res.status = "non-finite loss at iteration " + std::to_string(iter);
            res.iters = iter;
            res.loss_bloch = loss_bloch(field, softplus(out.params.rho), grid, cfg.norm);
            res.loss_data = loss_data(field, scaled, cfg.norm);
            res.t2_hat = softplus(out.params.rho);
            res.m0_hat = forward(out.params, 0.0).value * scale;
            return out;
        }
        history.push_back(loss);
        res.iters = iter + 1;

        if (iter >= 100) {
            const double prev = history[iter - 100];
            if (std::abs(loss - prev) <= cfg.tol * std::max(std::abs(prev), 1e-300)) {
                res.converged = true;
                break;
            }
        }

        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        const double corr = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        for (std::size_t i = 0; i < np; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            flat[i] -= corr * m[i] / (std::sqrt(v[i]) + cfg.epsilon);
        }
        out.params.from_flat(flat);
    }

    const double t2 = softplus(out.params.rho);
    res.t2_hat = t2;
    res.m0_hat = forward(out.params, 0.0).value * scale;
    res.loss_bloch = loss_bloch(field, t2, grid, cfg.norm);
    res.loss_data = loss_data(field, scaled, cfg.norm);
    return out;
}

FitResult fit_voxel(const EchoSeries& series, const CollocationGrid& grid, const LossWeights& w,
                    const TrainConfig& cfg) {
    return fit_voxel_full(series, grid, w, cfg).result;
}

} // namespace t2fit
