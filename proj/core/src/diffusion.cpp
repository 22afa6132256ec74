#include "sdslab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdslab {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Cumulative signal-power curve for the cosine schedule, built from
// per-step betas clipped at 0.999 so alpha stays strictly positive at t = T.
Vec cosine_alpha_bar(int T) {
    const double s = 0.008;
    auto f = [&](double t) {
        const double c = std::cos((t / T + s) / (1.0 + s) * kPi / 2.0);
        return c * c;
    };
    Vec ab(static_cast<size_t>(T) + 1);
    ab[0] = 1.0;
    const double f0 = f(0.0);
    for (int t = 1; t <= T; ++t) {
        const double beta = std::min(1.0 - (f(t) / f0) / (f(t - 1.0) / f0), 0.999);
        ab[t] = ab[t - 1] * (1.0 - beta);
    }
    return ab;
}

Vec linear_beta_alpha_bar(int T) {
    const double beta1 = 1e-4, betaT = 0.02;
    Vec ab(static_cast<size_t>(T) + 1);
    ab[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double beta = beta1 + (betaT - beta1) * (t - 1.0) / std::max(T - 1.0, 1.0);
        ab[t] = ab[t - 1] * (1.0 - beta);
    }
    return ab;
}
} // namespace

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
    if (T < 2) throw std::invalid_argument("make_schedule: T must be >= 2");
    const Vec ab = kind == ScheduleKind::cosine ? cosine_alpha_bar(T) : linear_beta_alpha_bar(T);
    NoiseSchedule sched;
    sched.T = T;
    sched.alpha.resize(ab.size());
    sched.sigma.resize(ab.size());
    for (size_t t = 0; t < ab.size(); ++t) {
        sched.alpha[t] = std::sqrt(ab[t]);
        sched.sigma[t] = std::sqrt(1.0 - ab[t]);
    }
    sched.alpha[0] = 1.0;
    sched.sigma[0] = 0.0;
    return sched;
}

NoiseSchedule make_ve_schedule(int T, double sigma_max) {
    if (T < 2) throw std::invalid_argument("make_ve_schedule: T must be >= 2");
    NoiseSchedule sched;
    sched.T = T;
    sched.alpha.assign(static_cast<size_t>(T) + 1, 1.0);
    sched.sigma.resize(static_cast<size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) sched.sigma[t] = sigma_max * t / T;
    return sched;
}

NoisySample perturb(const Vec& x0, int t, const Vec& noise, const NoiseSchedule& sched) {
    require_same_shape(x0, noise, "perturb");
    if (t < 0 || t > sched.T) throw std::invalid_argument("perturb: t outside schedule range");
    const double a = sched.alpha[t], s = sched.sigma[t];
    Vec out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + s * noise[i];
    return {std::move(out), t};
}

DenoisedEstimate eps_to_x0(const NoisySample& x_t, const Vec& eps_hat, const NoiseSchedule& sched) {
    require_same_shape(x_t.data, eps_hat, "eps_to_x0");
    const double a = sched.alpha[x_t.t], s = sched.sigma[x_t.t];
    if (a == 0.0) throw std::domain_error("eps_to_x0: singular schedule (alpha_t = 0)");
    Vec out(x_t.data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = (x_t.data[i] - s * eps_hat[i]) / a;
    return {std::move(out), 1};
}

NoisySample ddim_step(const NoisySample& x_t, const Vec& eps_hat, int r, const NoiseSchedule& sched) {
    if (r < 0 || r >= x_t.t) throw std::invalid_argument("ddim_step: requires 0 <= r < t");
    const DenoisedEstimate x0 = eps_to_x0(x_t, eps_hat, sched);
    const double ar = sched.alpha[r], sr = sched.sigma[r];
    Vec out(x0.data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = ar * x0.data[i] + sr * eps_hat[i];
    return {std::move(out), r};
}

DenoisedEstimate ddim_denoise(const NoisySample& x_t, const DenoiserFn& teacher, const Condition& cond,
                              int steps, const NoiseSchedule& sched) {
    if (steps < 1) throw std::invalid_argument("ddim_denoise: steps must be >= 1");
    NoisySample cur = x_t;
    for (int i = 0; i < steps && cur.t > 0; ++i) {
        // Uniform sub-step grid from t down to 0; rounding may collapse
        // neighbouring stops when steps > t, in which case the no-op stop
        // is skipped.
        const int next = static_cast<int>(
            std::lround(static_cast<double>(x_t.t) * (steps - i - 1) / steps));
        if (next >= cur.t) continue;
        const Vec eps = teacher(cur.data, cur.t, cond);
        cur = ddim_step(cur, eps, next, sched);
    }
    return {std::move(cur.data), steps};
}

} // namespace sdslab
