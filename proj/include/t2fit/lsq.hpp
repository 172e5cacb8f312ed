#pragma once

#include "t2fit/fit_result.hpp"
#include "t2fit/signal.hpp"

namespace t2fit {

enum class LsqMethod { log_linear, nonlinear_refined };

struct LsqOptions {
    LsqMethod method = LsqMethod::log_linear;
    double min_signal = 0.0; // exclude echoes below this fraction of the max
    int max_gn_iters = 50;
    double gn_tol = 1e-12; // stop when the step norm drops below this

    void validate() const {
        if (min_signal < 0.0 || min_signal >= 1.0)
            throw ValidationError("LsqOptions: min_signal must lie in [0,1)");
    }
};

// Ordinary least squares on ln S_i = ln M0 - t_i/T2 over the retained
// echoes. Throws ValidationError for fewer than 2 usable echoes and
// NumericalError for a non-decaying signal (slope >= 0).
FitResult fit_log_linear(const EchoSeries& series, const LsqOptions& opts = {});

// Levenberg-damped Gauss-Newton on sum (S_i - M0 exp(-t_i/T2))^2 starting
// from init, with the analytic Jacobian. The residual never increases
// across accepted steps. If damping is exhausted the init is returned
// flagged unconverged.
FitResult fit_nonlinear(const EchoSeries& series, const FitResult& init,
                        const LsqOptions& opts = {});

// Convenience: log-linear, then Gauss-Newton refinement when requested.
FitResult fit_lsq(const EchoSeries& series, const LsqOptions& opts = {});

// Sum of squared residuals of the decay model against the series.
double sum_squared_residuals(const EchoSeries& series, double m0, double t2);

} // namespace t2fit
