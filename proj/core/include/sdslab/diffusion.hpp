#pragma once

#include "sdslab/grid.hpp"

#include <functional>

namespace sdslab {

enum class ScheduleKind { cosine, linear_beta };

// Tabulated discrete-time diffusion coefficients. alpha and sigma hold
// T+1 entries indexed by time step, with alpha[0] = 1 and sigma[0] = 0,
// variance-preserving (alpha^2 + sigma^2 = 1) at every entry.
struct NoiseSchedule {
    int T = 0;
    Vec alpha;
    Vec sigma;
};

struct NoisySample {
    Vec data;
    int t = 0;
};

struct DenoisedEstimate {
    Vec data;
    int steps_used = 1;
};

struct Condition; // teacher.hpp

// epsilon-prediction callable: (noisy data, t, condition) -> predicted noise.
using DenoiserFn = std::function<Vec(const Vec&, int, const Condition&)>;

NoiseSchedule make_schedule(int T, ScheduleKind kind);

// Degenerate alpha-free schedule (alpha = 1 everywhere, sigma rising
// linearly to sigma_max). Not variance preserving; exists for unit tests
// of the noising form that omits the signal coefficient.
NoiseSchedule make_ve_schedule(int T, double sigma_max);

NoisySample perturb(const Vec& x0, int t, const Vec& noise, const NoiseSchedule& sched);

DenoisedEstimate eps_to_x0(const NoisySample& x_t, const Vec& eps_hat, const NoiseSchedule& sched);

NoisySample ddim_step(const NoisySample& x_t, const Vec& eps_hat, int r, const NoiseSchedule& sched);

DenoisedEstimate ddim_denoise(const NoisySample& x_t, const DenoiserFn& teacher, const Condition& cond,
                              int steps, const NoiseSchedule& sched);

} // namespace sdslab
