#pragma once

#include "sdslab/grid.hpp"
#include "sdslab/rng.hpp"
#include "sdslab/student.hpp"

namespace sdslab {

enum class Stage { one, two };

// Time-step sampling strategy. `annealed` is the real schedule; `random`
// and `linear` are ablation baselines.
enum class TScheduleKind { annealed, random, linear };

enum class TeacherRole { coarse, fine };

// Everything the per-iteration schedules depend on: the iteration counter
// plus all annealing knobs. One state instance is owned per stage.
struct CurriculumState {
    long k = 0;    // current iteration
    long N = 3000; // total iterations in this stage
    long l = 300;  // midpoint step length (the floor(k/l)*l staircase)
    int t_max = 980;
    int t_min = 20;
    int delta_max = 100; // sampling interval radius, decays linearly
    int delta_min = 10;
    Stage stage = Stage::one;
    int L = 6; // band count
    TScheduleKind schedule = TScheduleKind::annealed;
    double lambda_max = 0.5;
    double log_base = 2.0; // 2 spans [t_min, t_max] exactly; e for fidelity runs

    void validate() const; // throws std::invalid_argument on bad fields
};

// Annealed interval midpoint:
//   round(t_max − (t_max − t_min) · log_base(1 + (⌊k/l⌋·l)/N)),
// monotone nonincreasing, t_max at k=0, t_min at k=N (base 2, l | N).
// The `linear` baseline decays the midpoint linearly instead; `random`
// has no meaningful midpoint and reuses the linear decay (only the λ ramp
// reads it in that mode).
int t_mid(const CurriculumState& state);

// Uniform integer draw from [t_mid − Δ(k), t_mid + Δ(k)] clamped into
// [t_min, t_max], with Δ(k) decaying linearly delta_max → delta_min. The
// `random` baseline draws uniformly from [t_min, t_max].
int sample_t(const CurriculumState& state, Rng& rng);

// Progressive per-level gates: entry i (1-based) is 1 iff
// i ≤ 4 + max(0, min(⌊10k/N⌋, L−4)); all bands open when L ≤ 4.
Vec band_mask(long k, long N, int L);

// Texture-teacher weight ramp: 0 in stage one; in stage two it rises from 0
// to lambda_max as the midpoint anneals from t_max to t_min.
double lambda_at(const CurriculumState& state);

// Per-view gradient weight rising with angular distance from the reference
// view: w_min + (1 − w_min)·d/π, d ∈ [0, π].
double pose_weight(ViewPose angle, ViewPose ref, double w_min);

enum class GateKind { pass, clip, drop };

struct GateAction {
    GateKind kind = GateKind::pass;
    double max_norm = 0.0; // set when kind == clip
};

struct DebiasConfig {
    double clip_max_norm = 1.0; // on the parameter-gradient 2-norm
    double drop_prob = 0.5;
};

// Pose de-biasing for the back-view and near-reference bands where the
// teachers hallucinate the frontal identity. Active only in stage two:
// the coarse teacher is clipped when the view sits opposite the reference
// (rel ∈ [11π/12, 13π/12]); the fine teacher is dropped with probability
// drop_prob when |wrapped rel| ∈ [π/6, π/4].
GateAction debias_gate(double rel_angle, TeacherRole role, Stage stage, Rng& rng,
                       const DebiasConfig& cfg);

} // namespace sdslab
