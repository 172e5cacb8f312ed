#include "t2fit/mlp.hpp"

#include <cmath>
#include <random>

namespace t2fit {

std::vector<double> MlpParams::to_flat() const {
    std::vector<double> f;
    f.reserve(param_count());
    f.insert(f.end(), w1.begin(), w1.end());
    f.insert(f.end(), b1.begin(), b1.end());
    f.insert(f.end(), w2.begin(), w2.end());
    f.insert(f.end(), b2.begin(), b2.end());
    f.insert(f.end(), w3.begin(), w3.end());
    f.push_back(b3);
    f.push_back(rho);
    return f;
}

void MlpParams::from_flat(std::span<const double> flat) {
    if (flat.size() != param_count())
        throw ValidationError("MlpParams::from_flat: size mismatch");
    const std::size_t n = static_cast<std::size_t>(c);
    std::size_t o = 0;
    w1.assign(flat.begin() + o, flat.begin() + o + n); o += n;
    b1.assign(flat.begin() + o, flat.begin() + o + n); o += n;
    w2.assign(flat.begin() + o, flat.begin() + o + n * n); o += n * n;
    b2.assign(flat.begin() + o, flat.begin() + o + n); o += n;
    w3.assign(flat.begin() + o, flat.begin() + o + n); o += n;
    b3 = flat[o++];
    rho = flat[o++];
}

MlpParams init_params(int c, std::uint64_t seed) {
    if (c < 1) throw ValidationError("init_params: width must be >= 1");
    MlpParams p;
    p.c = c;
    const std::size_t n = static_cast<std::size_t>(c);
    std::mt19937_64 rng(seed);
    auto draw = [&](double fan_in) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        return u(rng) * std::sqrt(1.0 / fan_in);
    };
    p.w1.resize(n);
    for (auto& w : p.w1) w = draw(1.0);
    p.b1.assign(n, 0.0);
    p.w2.resize(n * n);
    for (auto& w : p.w2) w = draw(static_cast<double>(c));
    p.b2.assign(n, 0.0);
    p.w3.resize(n);
    for (auto& w : p.w3) w = draw(static_cast<double>(c));
    p.b3 = 0.0;
    p.rho = 0.0;
    return p;
}

EvalRecord forward(const MlpParams& p, double t) {
    EvalRecord r;
    forward_into(p, t, r);
    return r;
}

void forward_into(const MlpParams& p, double t, EvalRecord& r) {
    const std::size_t n = static_cast<std::size_t>(p.c);
    r.x = t / p.t_max;
    r.xdot = 1.0 / p.t_max;
    r.h1.resize(n);
    r.h1d.resize(n);
    r.h2.resize(n);
    r.h2d.resize(n);
    r.z2d.resize(n);

    for (std::size_t j = 0; j < n; ++j) {
        const double z = p.w1[j] * r.x + p.b1[j];
        const double h = std::tanh(z);
        r.h1[j] = h;
        r.h1d[j] = (1.0 - h * h) * p.w1[j] * r.xdot;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double z = p.b2[i];
        double zd = 0.0;
        const double* row = &p.w2[i * n];
        for (std::size_t j = 0; j < n; ++j) {
            z += row[j] * r.h1[j];
            zd += row[j] * r.h1d[j];
        }
        const double h = std::tanh(z);
        r.h2[i] = h;
        r.z2d[i] = zd;
        r.h2d[i] = (1.0 - h * h) * zd;
    }
    double v = p.b3;
    double vd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v += p.w3[i] * r.h2[i];
        vd += p.w3[i] * r.h2d[i];
    }
    r.value = v;
    r.dvalue_dt = vd;
}

void grad_wrt_params(const MlpParams& p, const EvalRecord& rec, double coeff_value,
                     double coeff_dvalue, std::span<double> grad) {
    const std::size_t n = static_cast<std::size_t>(p.c);
    if (grad.size() < p.weight_count())
        throw ValidationError("grad_wrt_params: gradient buffer too small");

    // Flat layout offsets: w1 | b1 | w2 | b2 | w3 | b3
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + n;
    double* g_w2 = g_b1 + n;
    double* g_b2 = g_w2 + n * n;
    double* g_w3 = g_b2 + n;
    double* g_b3 = g_w3 + n;

    const double cv = coeff_value;
    const double cd = coeff_dvalue;

    // Adjoints on h1 / h1d collected while walking layer 2.
    // Value path:      dv/dz2_i = w3_i * s2_i
    // Tangent path:    dvd/dz2_i = w3_i * s2'_i * z2d_i,  s2' = -2 h2 s2
    // plus the direct dependence of h2d on z2d (q_j below).
    thread_local std::vector<double> bar_h1, bar_h1d;
    bar_h1.assign(n, 0.0);  // d(cv*v + cd*vd)/dh1_j via z2
    bar_h1d.assign(n, 0.0); // d(cd*vd)/dh1d_j via z2d
    for (std::size_t i = 0; i < n; ++i) {
        const double s2 = 1.0 - rec.h2[i] * rec.h2[i];
        const double s2p = -2.0 * rec.h2[i] * s2; // d s2 / d z2
        const double a_val = cv * p.w3[i] * s2;
        const double a_tan = cd * p.w3[i] * s2p * rec.z2d[i];
        const double a_z2 = a_val + a_tan;        // adjoint of z2_i
        const double a_z2d = cd * p.w3[i] * s2;   // adjoint of z2d_i

        g_b2[i] += a_z2;
        g_w3[i] += cv * rec.h2[i] + cd * rec.h2d[i];
        const double* row = &p.w2[i * n];
        double* grow = g_w2 + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            grow[j] += a_z2 * rec.h1[j] + a_z2d * rec.h1d[j];
            bar_h1[j] += a_z2 * row[j];
            bar_h1d[j] += a_z2d * row[j];
        }
    }
    *g_b3 += cv;

    for (std::size_t j = 0; j < n; ++j) {
        const double s1 = 1.0 - rec.h1[j] * rec.h1[j];
        const double s1p = -2.0 * rec.h1[j] * s1;
        // z1_j feeds h1_j and, through s1, h1d_j = s1 * w1_j * xdot
        const double a_z1 = bar_h1[j] * s1 + bar_h1d[j] * s1p * p.w1[j] * rec.xdot;
        g_b1[j] += a_z1;
        g_w1[j] += a_z1 * rec.x + bar_h1d[j] * s1 * rec.xdot;
    }
}

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double softplus_derivative(double x) {
    if (x > 30.0) return 1.0;
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_inverse(double y) {
    if (!(y > 0.0)) throw ValidationError("softplus_inverse: argument must be > 0");
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

} // namespace t2fit
