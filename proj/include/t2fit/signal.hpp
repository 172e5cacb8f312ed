#pragma once

#include <cstdint>
#include <vector>

#include "t2fit/errors.hpp"

namespace t2fit {

// All times are in milliseconds throughout the library.

// Tissue parameters of the mono-exponential decay model.
struct TissueParams {
    double m0 = 0.0; // initial transverse magnetization, arbitrary units, >= 0
    double t2 = 1.0; // transverse relaxation time in ms, > 0

    void validate() const {
        if (!(t2 > 0.0)) throw ValidationError("TissueParams: t2 must be > 0");
        if (!(m0 >= 0.0)) throw ValidationError("TissueParams: m0 must be >= 0");
    }
};

// Per-voxel measured samples {(t_i, S_i)}.
struct EchoSeries {
    std::vector<double> times;   // ms, strictly increasing, all > 0
    std::vector<double> signals; // same length, >= 0

    void validate() const;
    std::size_t size() const { return times.size(); }
};

enum class NoiseKind { none, gaussian, rician };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double sigma = 0.0; // standard deviation as a fraction of m0
    std::uint64_t seed = 0;
};

// S(t) = m0 * exp(-t / t2).
double model_signal(const TissueParams& p, double t);

// Analytic time derivative of model_signal, dS/dt = -S/t2.
double model_signal_derivative(const TissueParams& p, double t);

// Residual of the transverse decay ODE: dM/dt + M/T2. Zero exactly on
// solutions of the decay equation.
double ode_residual(double value, double derivative, double t2);

// Evaluates the signal model at each echo time and applies noise per spec.
// Deterministic for a given seed. Rician noise is |(s + n1) + i n2| with
// n1, n2 ~ N(0, (sigma * m0)^2).
EchoSeries synthesize_series(const TissueParams& p, const std::vector<double>& times,
                             const NoiseSpec& noise = {});

} // namespace t2fit
