#include "t2fit/signal.hpp"

#include <cmath>
#include <random>

namespace t2fit {

void EchoSeries::validate() const {
    if (times.size() != signals.size())
        throw ValidationError("EchoSeries: times and signals differ in length");
    if (times.size() < 2)
        throw ValidationError("EchoSeries: need at least 2 echoes");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0) || !std::isfinite(times[i]))
            throw ValidationError("EchoSeries: echo times must be positive and finite");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw ValidationError("EchoSeries: echo times must be strictly increasing");
        if (!std::isfinite(signals[i]) || signals[i] < 0.0)
            throw ValidationError("EchoSeries: signals must be finite and >= 0");
    }
}

double model_signal(const TissueParams& p, double t) {
    return p.m0 * std::exp(-t / p.t2);
}

double model_signal_derivative(const TissueParams& p, double t) {
    return -model_signal(p, t) / p.t2;
}

double ode_residual(double value, double derivative, double t2) {
    return derivative + value / t2;
}

EchoSeries synthesize_series(const TissueParams& p, const std::vector<double>& times,
                             const NoiseSpec& noise) {
    if (times.empty()) throw ValidationError("synthesize_series: empty echo-time list");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0))
            throw ValidationError("synthesize_series: echo times must be > 0");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw ValidationError("synthesize_series: echo times must be strictly increasing");
    }
    p.validate();

    EchoSeries out;
    out.times = times;
    out.signals.reserve(times.size());

    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = noise.sigma * p.m0;

    for (double t : times) {
        double s = model_signal(p, t);
        switch (noise.kind) {
        case NoiseKind::none:
            break;
        case NoiseKind::gaussian:
            if (sd > 0.0) s = std::max(0.0, s + sd * gauss(rng));
            break;
        case NoiseKind::rician:
            if (sd > 0.0) {
                const double re = s + sd * gauss(rng);
                const double im = sd * gauss(rng);
                s = std::hypot(re, im);
            }
            break;
        }
        out.signals.push_back(s);
    }
    return out;
}

} // namespace t2fit
