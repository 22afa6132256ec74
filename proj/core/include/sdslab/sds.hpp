#pragma once

#include "sdslab/curriculum.hpp"
#include "sdslab/diffusion.hpp"
#include "sdslab/grid.hpp"
#include "sdslab/rng.hpp"
#include "sdslab/student.hpp"
#include "sdslab/teacher.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sdslab {

// ω(t) in the distillation gradient. sigma_sq keeps gradients bounded as
// t → 0 (then ω̄ = ω/σ_t = σ_t); constant exists for ablations.
enum class WeightKind { sigma_sq, constant };

struct SdsConfig {
    WeightKind weight_kind = WeightKind::sigma_sq;
    double cfg_scale_coarse = 5.0;
    double cfg_scale_fine = 25.0;
    int multi_step_switch_t = 200; // below this t, estimate x̂_0 with a DDIM chain
    int multi_step_count = 4;
    bool alpha_free = false; // drop the signal coefficient in the x̂_0 form
    double pose_w_min = 0.3; // floor of the pose-distance weight
};

struct ObjectiveWeights {
    double lambda_reg = 0.01;
    double lambda_rec = 1.0;
};

double sds_weight(const SdsConfig& cfg, int t, const NoiseSchedule& sched);

// Distillation gradient w.r.t. the rendered projection, ε form:
// ω(t)·(ε̂ − ε). The caller chains it through the renderer adjoints.
Vec sds_grad_eps(const Vec& render, const Vec& eps_hat, const Vec& noise, int t,
                 const NoiseSchedule& sched, const SdsConfig& cfg);

// Same gradient in the reconstruction form: ω̄(t)·α_t·(render − x̂_0) with
// ω̄ = ω/σ_t; identical to the ε form for any single-step x̂_0. With
// cfg.alpha_free the α_t factor is dropped.
Vec sds_grad_x0(const Vec& render, const Vec& x0_hat, int t, const NoiseSchedule& sched,
                const SdsConfig& cfg);

// Bridge between render-resolution projections and the fixed-resolution
// normalized space the teachers are trained in: block-mean to teacher_res,
// then divide by the render resolution. Linear; adjoint is exact.
Vec to_teacher_space(const Vec& proj, int teacher_res);
Vec teacher_space_adjoint(const Vec& grad_teacher_space, int render_res);

// The two guidance sources. `fine` may be empty (coarse-only ablation).
struct DualTeacher {
    DenoiserFn coarse; // view-conditioned (geometry prior), CFG already applied
    DenoiserFn fine;   // class-conditioned (texture prior), CFG already applied
    int res = 32;      // projection length the teachers expect
};

struct DivergenceError : std::runtime_error {
    long k;
    int t;
    double pose_angle;
    DivergenceError(long k_, int t_, double pose_)
        : std::runtime_error("non-finite distillation gradient at k=" + std::to_string(k_) +
                             ", t=" + std::to_string(t_) + ", pose=" + std::to_string(pose_)),
          k(k_), t(t_), pose_angle(pose_) {}
};

struct DtcGradResult {
    std::vector<Grid> level_grads;
    double grad_norm = 0.0;
    double lambda = 0.0;
    GateKind coarse_gate = GateKind::pass;
    GateKind fine_gate = GateKind::pass;
};

// One dual-teacher distillation gradient: render → project → perturb at t →
// query teachers (multi-step x̂_0 below the switch) → combine coarse + λ·fine
// with de-biasing gates → chain back to per-level parameter gradients scaled
// by the pose weight. Throws DivergenceError if anything is non-finite.
DtcGradResult dtc_grad(const PyramidField& field, const Vec& mask, ViewPose pose, ViewPose ref_pose,
                       int class_id, int t, const DualTeacher& teachers,
                       const CurriculumState& state, const SdsConfig& cfg,
                       const DebiasConfig& debias, const NoiseSchedule& sched, Rng& rng);

struct RecWeights {
    double value = 1.0;
    double mask = 0.5;
    double pearson = 0.1;
    double mask_threshold = 0.1; // binarization level in teacher space
};

struct RecLoss {
    double total = 0.0;
    double value_mse = 0.0;
    double mask_mse = 0.0;
    double pearson_term = 0.0; // 1 − r, before its sub-weight
    bool pearson_skipped = false;
    Vec grad; // d total / d render_ref
};

// Reference-view reconstruction: value MSE + binary-mask MSE + Pearson
// decorrelation penalty, with analytic gradient. A zero-variance side skips
// the Pearson term and sets the flag instead of failing.
RecLoss rec_loss(const Vec& render_ref, const Vec& reference, const Vec& ref_mask,
                 const RecWeights& weights = {});

struct SmoothLoss {
    double loss = 0.0;
    Grid grad;
};

// Monte-Carlo surface-normal smoothness: E ||n(a) − n(a + β·N(0,I))||₁ over
// `samples` interior points, where n is the safe-normalized finite-difference
// field gradient. The returned gradient differentiates the estimator with the
// sample locations frozen.
SmoothLoss normal_smooth_loss(const Grid& field2d, double beta, Rng& rng, int samples);

// Mean per-vertex 2-norm of the uniform Laplacian of a closed polygon:
// row_i = 2·v_i − v_{i−1} − v_{i+1}.
double laplacian_loss(const IsoContour& contour);

// One explicit smoothing step V ← V − τ·(L·V); strictly decreases
// laplacian_loss for small τ.
IsoContour laplacian_smooth(const IsoContour& contour, double tau);

} // namespace sdslab
