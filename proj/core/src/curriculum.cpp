#include "sdslab/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdslab {

namespace {
constexpr double kPi = 3.14159265358979323846;
} // namespace

void CurriculumState::validate() const {
    if (k < 0 || k > N || N < 1) throw std::invalid_argument("curriculum: k out of [0, N]");
    if (l < 1) throw std::invalid_argument("curriculum: step length must be >= 1");
    if (t_min <= 0 || t_min >= t_max) throw std::invalid_argument("curriculum: need 0 < t_min < t_max");
    if (delta_min > delta_max || delta_min < 0)
        throw std::invalid_argument("curriculum: bad interval radius bounds");
    if (L < 1) throw std::invalid_argument("curriculum: band count must be >= 1");
    if (lambda_max < 0) throw std::invalid_argument("curriculum: lambda_max must be >= 0");
    if (log_base <= 1.0) throw std::invalid_argument("curriculum: log base must exceed 1");
}

int t_mid(const CurriculumState& state) {
    state.validate();
    const double range = state.t_max - state.t_min;
    double frac; // decay fraction in [0, 1]
    if (state.schedule == TScheduleKind::annealed) {
        const double staircase = static_cast<double>(state.k / state.l * state.l) / state.N;
        frac = state.log_base == 2.0 ? std::log2(1.0 + staircase)
                                     : std::log(1.0 + staircase) / std::log(state.log_base);
    } else {
        frac = static_cast<double>(state.k) / state.N;
    }
    const long t = std::lround(state.t_max - range * frac);
    return static_cast<int>(std::clamp(t, static_cast<long>(state.t_min), static_cast<long>(state.t_max)));
}

int sample_t(const CurriculumState& state, Rng& rng) {
    state.validate();
    if (state.schedule == TScheduleKind::random) return rng.uniform_int(state.t_min, state.t_max);
    const int mid = t_mid(state);
    const int delta = static_cast<int>(std::lround(
        state.delta_max + (state.delta_min - state.delta_max) * static_cast<double>(state.k) / state.N));
    const int lo = std::max(state.t_min, mid - delta);
    const int hi = std::min(state.t_max, mid + delta);
    return rng.uniform_int(lo, hi);
}

Vec band_mask(long k, long N, int L) {
    if (L < 1 || N < 1 || k < 0 || k > N) throw std::invalid_argument("band_mask: bad arguments");
    const long opened = std::max(0L, std::min(10 * k / N, static_cast<long>(L) - 4));
    const long visible = 4 + opened; // 1-based threshold
    Vec mask(L, 0.0);
    for (int i = 0; i < L; ++i) mask[i] = (i + 1 <= visible) ? 1.0 : 0.0;
    return mask;
}

double lambda_at(const CurriculumState& state) {
    state.validate();
    if (state.stage == Stage::one) return 0.0;
    const double ramp =
        state.lambda_max * (state.t_max - t_mid(state)) / static_cast<double>(state.t_max - state.t_min);
    return std::clamp(ramp, 0.0, state.lambda_max);
}

double pose_weight(ViewPose angle, ViewPose ref, double w_min) {
    if (w_min < 0.0 || w_min > 1.0) throw std::invalid_argument("pose_weight: w_min outside [0,1]");
    return w_min + (1.0 - w_min) * angular_distance(angle, ref) / kPi;
}

GateAction debias_gate(double rel_angle, TeacherRole role, Stage stage, Rng& rng,
                       const DebiasConfig& cfg) {
    if (stage != Stage::two) return {};
    const double rel = normalize_angle(rel_angle);
    if (role == TeacherRole::coarse) {
        if (rel >= 11.0 * kPi / 12.0 && rel <= 13.0 * kPi / 12.0)
            return {GateKind::clip, cfg.clip_max_norm};
        return {};
    }
    const double wrapped = std::fabs(rel > kPi ? rel - 2.0 * kPi : rel);
    if (wrapped >= kPi / 6.0 && wrapped <= kPi / 4.0 && rng.uniform() < cfg.drop_prob)
        return {GateKind::drop, 0.0};
    return {};
}

} // namespace sdslab
