#pragma once

#include <string>

namespace t2fit {

// Estimated (M0, T2) plus diagnostics for one voxel. Shared between the
// least-squares baseline and the PINN trainer; fields that do not apply
// to a method stay at their defaults.
struct FitResult {
    double m0_hat = 0.0;
    double t2_hat = 0.0;     // ms
    double loss_bloch = 0.0; // physics loss at the last iterate (PINN)
    double loss_data = 0.0;  // data loss at the last iterate (PINN)
    double residual = 0.0;   // sum of squared residuals (LSQ)
    int iters = 0;
    bool converged = false;
    std::string status; // empty on success, diagnostic otherwise
};

} // namespace t2fit
