#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "t2fit/fit_result.hpp"
#include "t2fit/mlp.hpp"
#include "t2fit/signal.hpp"

namespace t2fit {

// How the per-point residual enters the loss. The default treats the norm
// of a scalar residual as its absolute value; squared is the common MSE
// alternative.
enum class ResidualNorm { absolute, squared };

// K time points, uniformly spaced over [0, t_max], where the ODE residual
// is evaluated.
struct CollocationGrid {
    std::vector<double> points; // ms, sorted, first 0, last t_max

    static CollocationGrid uniform(int k, double t_max);
    std::size_t size() const { return points.size(); }
};

struct LossWeights {
    double w_bloch = 0.01;
    double w_data = 1.0;

    void validate() const {
        if (w_bloch < 0.0 || w_data < 0.0)
            throw ValidationError("LossWeights: weights must be >= 0");
        if (w_bloch == 0.0 && w_data == 0.0)
            throw ValidationError("LossWeights: at least one weight must be > 0");
    }
};

struct TrainConfig {
    int max_iters = 5000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    // Raised well above the classic 1e-8: Adam rescales every coordinate to
    // roughly unit step size, so a persistently one-signed but tiny gradient
    // (rho sees only the w_bloch-weighted physics term) would otherwise walk
    // at the full learning rate and drag T2 away from a good initialization
    // while the network is still underfit. A larger epsilon keeps steps
    // proportional to the actual gradient magnitude for such coordinates.
    double epsilon = 1e-2;
    double tol = 1e-8;     // relative loss change over a 100-iteration window
    double t2_init = 0.0;  // ms; <= 0 means auto (log-linear estimate)
    std::uint64_t seed = 0;
    int width = 8;         // hidden width C
    int collocation = 1001; // K
    ResidualNorm norm = ResidualNorm::absolute;

    void validate() const {
        if (max_iters < 1) throw ValidationError("TrainConfig: max_iters must be >= 1");
        if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig: learning_rate must be > 0");
        if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
            throw ValidationError("TrainConfig: betas must lie in (0,1)");
        if (!(tol > 0.0)) throw ValidationError("TrainConfig: tol must be > 0");
        if (width < 1) throw ValidationError("TrainConfig: width must be >= 1");
        if (collocation < 2) throw ValidationError("TrainConfig: collocation must be >= 2");
    }
};

// A differentiable scalar field t -> (value, dvalue/dt). The losses and
// their gradients are generic over this so the exact decay solution can
// stand in for the network in verification.
struct FieldEval {
    double value;
    double dvalue_dt;
};

// Field backed by the MLP; caches the last forward record for gradients.
class MlpField {
public:
    explicit MlpField(MlpParams& p) : p_(&p) {}

    FieldEval eval(double t) {
        forward_into(*p_, t, rec_);
        return {rec_.value, rec_.dvalue_dt};
    }
    void accum_grad(double coeff_value, double coeff_dvalue, std::span<double> grad) const {
        grad_wrt_params(*p_, rec_, coeff_value, coeff_dvalue, grad);
    }
    std::size_t param_count() const { return p_->weight_count(); }

    MlpParams& params() { return *p_; }
    const EvalRecord& record() const { return rec_; }

private:
    MlpParams* p_;
    EvalRecord rec_;
};

// The exact decay solution m0 * exp(-t/t2) as a field with parameters
// (m0, t2). Its ODE residual at matching T2 is identically zero.
class ExactDecayField {
public:
    ExactDecayField(double m0, double t2) : p_{m0, t2} {}

    FieldEval eval(double t) {
        last_t_ = t;
        const double v = model_signal(p_, t);
        return {v, -v / p_.t2};
    }
    void accum_grad(double coeff_value, double coeff_dvalue, std::span<double> grad) const {
        const double e = std::exp(-last_t_ / p_.t2);
        // d/dm0 of (value, dvalue)
        grad[0] += coeff_value * e + coeff_dvalue * (-e / p_.t2);
        // d/dt2
        const double dv = p_.m0 * e * last_t_ / (p_.t2 * p_.t2);
        const double dvd = -dv / p_.t2 + p_.m0 * e / (p_.t2 * p_.t2);
        grad[1] += coeff_value * dv + coeff_dvalue * dvd;
    }
    std::size_t param_count() const { return 2; }

private:
    TissueParams p_;
    double last_t_ = 0.0;
};

namespace detail {
inline double residual_norm_value(double r, ResidualNorm norm) {
    return norm == ResidualNorm::absolute ? std::abs(r) : r * r;
}
// d(norm(r))/dr, with the subgradient of |.| at 0 set to 0.
inline double residual_norm_slope(double r, ResidualNorm norm) {
    if (norm == ResidualNorm::squared) return 2.0 * r;
    if (r > 0.0) return 1.0;
    if (r < 0.0) return -1.0;
    return 0.0;
}
} // namespace detail

// Mean residual-norm of the decay ODE over the collocation grid.
template <class Field>
double loss_bloch(Field& f, double t2, const CollocationGrid& grid,
                  ResidualNorm norm = ResidualNorm::absolute) {
    if (grid.points.empty()) throw ValidationError("loss_bloch: empty collocation grid");
    double acc = 0.0;
    for (double t : grid.points) {
        const FieldEval e = f.eval(t);
        acc += detail::residual_norm_value(ode_residual(e.value, e.dvalue_dt, t2), norm);
    }
    return acc / static_cast<double>(grid.points.size());
}

// Mean misfit between the field and the measured echoes.
template <class Field>
double loss_data(Field& f, const EchoSeries& series, ResidualNorm norm = ResidualNorm::absolute) {
    if (series.times.empty()) throw ValidationError("loss_data: empty series");
    double acc = 0.0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const FieldEval e = f.eval(series.times[i]);
        acc += detail::residual_norm_value(series.signals[i] - e.value, norm);
    }
    return acc / static_cast<double>(series.times.size());
}

template <class Field>
double loss_total(Field& f, double t2, const CollocationGrid& grid, const EchoSeries& series,
                  const LossWeights& w, ResidualNorm norm = ResidualNorm::absolute) {
    return w.w_bloch * loss_bloch(f, t2, grid, norm) + w.w_data * loss_data(f, series, norm);
}

// Computes loss_total and its exact gradient with respect to the field
// parameters plus rho (T2 = softplus(rho)); grad has param_count()+1
// entries with the rho slot last. Returns the loss.
template <class Field>
double loss_and_grad(Field& f, double rho, const CollocationGrid& grid, const EchoSeries& series,
                     const LossWeights& w, ResidualNorm norm, std::span<double> grad) {
    if (grad.size() != f.param_count() + 1)
        throw ValidationError("loss_and_grad: gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
    const double t2 = softplus(rho);
    const double k = static_cast<double>(grid.points.size());
    const double n_echo = static_cast<double>(series.times.size());
    auto weights_grad = grad.subspan(0, f.param_count());

    double lb = 0.0;
    double grad_rho = 0.0;
    if (w.w_bloch != 0.0) {
        for (double t : grid.points) {
            const FieldEval e = f.eval(t);
            const double r = ode_residual(e.value, e.dvalue_dt, t2);
            lb += detail::residual_norm_value(r, norm);
            const double c = w.w_bloch / k * detail::residual_norm_slope(r, norm);
            if (c != 0.0) {
                f.accum_grad(c / t2, c, weights_grad);
                grad_rho += c * (-e.value / (t2 * t2));
            }
        }
        lb /= k;
        grad_rho *= softplus_derivative(rho);
    } else {
        lb = loss_bloch(f, t2, grid, norm);
    }
    grad[f.param_count()] = grad_rho;

    double ld = 0.0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const FieldEval e = f.eval(series.times[i]);
        const double d = series.signals[i] - e.value;
        ld += detail::residual_norm_value(d, norm);
        const double c = -w.w_data / n_echo * detail::residual_norm_slope(d, norm);
        if (c != 0.0) f.accum_grad(c, 0.0, weights_grad);
    }
    ld /= n_echo;

    return w.w_bloch * lb + w.w_data * ld;
}

// Gradient of loss_total over [field params..., rho].
template <class Field>
std::vector<double> grad_total(Field& f, double rho, const CollocationGrid& grid,
                               const EchoSeries& series, const LossWeights& w,
                               ResidualNorm norm = ResidualNorm::absolute) {
    std::vector<double> g(f.param_count() + 1, 0.0);
    loss_and_grad(f, rho, grid, series, w, norm, g);
    return g;
}

// Trained state for one voxel: the network plus the signal scale that was
// divided out before training.
struct PinnFit {
    FitResult result;
    MlpParams params;
    double scale = 1.0;
};

// Trains the network and rho jointly with full-batch Adam. Signals are
// scaled to max 1 internally; m0_hat is rescaled back. Deterministic for
// a given (series, grid, w, cfg).
PinnFit fit_voxel_full(const EchoSeries& series, const CollocationGrid& grid,
                       const LossWeights& w, const TrainConfig& cfg);

FitResult fit_voxel(const EchoSeries& series, const CollocationGrid& grid, const LossWeights& w,
                    const TrainConfig& cfg);

} // namespace t2fit
