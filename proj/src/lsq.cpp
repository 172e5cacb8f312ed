#include "t2fit/lsq.hpp"

#include <algorithm>
#include <cmath>

namespace t2fit {

double sum_squared_residuals(const EchoSeries& series, double m0, double t2) {
    double acc = 0.0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double r = series.signals[i] - m0 * std::exp(-series.times[i] / t2);
        acc += r * r;
    }
    return acc;
}

FitResult fit_log_linear(const EchoSeries& series, const LsqOptions& opts) {
    series.validate();
    opts.validate();
    const double smax = *std::max_element(series.signals.begin(), series.signals.end());
    const double cutoff = opts.min_signal * smax;

    // OLS accumulators over echoes above the cutoff (log needs S > 0)
    double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double s = series.signals[i];
        if (s <= 0.0 || s < cutoff) continue;
        const double t = series.times[i];
        const double y = std::log(s);
        n += 1.0;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    if (n < 2.0)
        throw ValidationError("fit_log_linear: fewer than 2 usable echoes above threshold");
    const double denom = n * stt - st * st;
    if (denom == 0.0)
        throw ValidationError("fit_log_linear: degenerate echo times");
    const double slope = (n * sty - st * sy) / denom;
    const double intercept = (sy - slope * st) / n;
    if (!(slope < 0.0))
        throw NumericalError("fit_log_linear: signal does not decay (slope >= 0)");

    FitResult r;
    r.m0_hat = std::exp(intercept);
    r.t2_hat = -1.0 / slope;
    r.residual = sum_squared_residuals(series, r.m0_hat, r.t2_hat);
    r.converged = true;
    return r;
}

FitResult fit_nonlinear(const EchoSeries& series, const FitResult& init, const LsqOptions& opts) {
    series.validate();
    opts.validate();
    if (!(init.t2_hat > 0.0))
        throw ValidationError("fit_nonlinear: init.t2_hat must be > 0");

    double m0 = init.m0_hat;
    double t2 = init.t2_hat;
    double cost = sum_squared_residuals(series, m0, t2);
    double lambda = 1e-3;

    FitResult out = init;
    out.converged = false;
    out.iters = 0;

    for (int iter = 0; iter < opts.max_gn_iters; ++iter) {
        // Normal equations J^T J delta = J^T r with the analytic Jacobian
        // d/dM0 = exp(-t/T2), d/dT2 = M0 t exp(-t/T2) / T2^2
        double a11 = 0.0, a12 = 0.0, a22 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < series.times.size(); ++i) {
            const double t = series.times[i];
            const double e = std::exp(-t / t2);
            const double j1 = e;
            const double j2 = m0 * t * e / (t2 * t2);
            const double r = series.signals[i] - m0 * e;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }

        bool stepped = false;
        while (lambda < 1e12) {
            const double d11 = a11 * (1.0 + lambda);
            const double d22 = a22 * (1.0 + lambda);
            const double det = d11 * d22 - a12 * a12;
            if (std::abs(det) > 1e-300) {
                const double dm0 = (d22 * g1 - a12 * g2) / det;
                const double dt2 = (d11 * g2 - a12 * g1) / det;
                const double m0n = m0 + dm0;
                const double t2n = t2 + dt2;
                if (t2n > 0.0) {
                    const double cn = sum_squared_residuals(series, m0n, t2n);
                    if (cn <= cost) {
                        m0 = m0n;
                        t2 = t2n;
                        cost = cn;
                        lambda = std::max(lambda * 0.3, 1e-12);
                        stepped = true;
                        out.iters = iter + 1;
                        if (std::hypot(dm0, dt2) < opts.gn_tol) {
                            out.converged = true;
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // damping exhausted without an acceptable step; report the best
            // point reached (init if no step was ever accepted)
            break;
        }
        if (out.converged) break;
    }

    out.m0_hat = m0;
    out.t2_hat = t2;
    out.residual = cost;
    out.loss_bloch = 0.0;
    out.loss_data = 0.0;
    if (!out.converged && out.iters == 0) out.status = "no acceptable Gauss-Newton step";
    return out;
}

FitResult fit_lsq(const EchoSeries& series, const LsqOptions& opts) {
    FitResult r = fit_log_linear(series, opts);
    if (opts.method == LsqMethod::nonlinear_refined) r = fit_nonlinear(series, r, opts);
    return r;
}

} // namespace t2fit
