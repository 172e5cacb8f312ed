#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "t2fit/errors.hpp"

namespace t2fit {

// Weights of the fixed 1 -> C -> C -> 1 tanh network plus the trainable
// rho that parametrizes T2 = softplus(rho). The scalar input t (ms) is
// scaled by 1/t_max before entering the network; the chain-rule factor is
// applied so derivatives are with respect to physical ms.
struct MlpParams {
    int c = 8;
    double t_max = 1.0;           // ms; input scaling t -> t/t_max
    std::vector<double> w1;       // C
    std::vector<double> b1;       // C
    std::vector<double> w2;       // C*C, row-major (row = output unit)
    std::vector<double> b2;       // C
    std::vector<double> w3;       // C
    double b3 = 0.0;
    double rho = 0.0;             // T2 = softplus(rho)

    // Number of network trainables excluding rho.
    std::size_t weight_count() const {
        const std::size_t c_ = static_cast<std::size_t>(c);
        return c_ + c_ + c_ * c_ + c_ + c_ + 1;
    }
    // Including rho.
    std::size_t param_count() const { return weight_count() + 1; }

    // Flat order: w1, b1, w2 row-major, b2, w3, b3, rho.
    std::vector<double> to_flat() const;
    void from_flat(std::span<const double> flat);
};

// Forward-pass record: output, its t-derivative, and the cached
// activations needed for parameter gradients.
struct EvalRecord {
    double value = 0.0;     // N(t)
    double dvalue_dt = 0.0; // dN/dt, per ms
    double x = 0.0;         // scaled input t/t_max
    double xdot = 0.0;      // 1/t_max
    std::vector<double> h1, h1d; // first hidden activations and their t-derivatives
    std::vector<double> h2, h2d;
    std::vector<double> z2d;     // pre-activation tangents of layer 2
};

// Symmetric fan-in-scaled init (scale sqrt(1/fan_in)), biases zero,
// deterministic for a given seed. rho is left at 0; the trainer sets it.
MlpParams init_params(int c, std::uint64_t seed);

// Evaluates the network and its exact t-derivative in one pass
// (forward-mode tangent alongside the primal).
EvalRecord forward(const MlpParams& p, double t);

// Allocation-free variant for hot loops; rec keeps its buffers across calls.
void forward_into(const MlpParams& p, double t, EvalRecord& rec);

// Accumulates d(coeff_value * N(t) + coeff_dvalue * dN/dt)/dtheta into
// grad for every network trainable theta (rho excluded), laid out in the
// flat order above (grad.size() >= weight_count()). Reverse accumulation
// through the cached primal and tangent passes.
void grad_wrt_params(const MlpParams& p, const EvalRecord& rec, double coeff_value,
                     double coeff_dvalue, std::span<double> grad);

double softplus(double x);
double softplus_derivative(double x);
double softplus_inverse(double y); // y > 0

} // namespace t2fit
