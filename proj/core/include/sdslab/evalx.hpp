#pragma once

#include "sdslab/diffusion.hpp"
#include "sdslab/grid.hpp"
#include "sdslab/pipeline.hpp"
#include "sdslab/shapes.hpp"
#include "sdslab/teacher.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sdslab {

// 10·log10(peak²/MSE); identical grids return the 99.0 sentinel.
double psnr(const Grid& a, const Grid& b, double peak);

// IoU of {a > threshold} and {b > threshold}; 1.0 when both masks are empty.
double mask_iou(const Grid& a, const Grid& b, double threshold);

// Mean SSIM (standard constants, 8×8 sliding windows; 1×8 on row vectors)
// over all unordered pairs. Needs at least two equal-shape grids.
double pairwise_ssim(const std::vector<Grid>& grids);

// ---- score-error lower-bound measurement -----------------------------------

struct TheoryCell {
    double delta_mag = 0.0; // distance of the query point from the data manifold
    int t = 0;
    double err = 0.0; // E||ε̂ − ε*||² against the exact mixture score
};

struct TheoryCurve {
    std::vector<TheoryCell> cells;
    // Per ||δ||: smallest grid t whose error is ≤ epsilon, -1 when none is.
    std::vector<std::pair<double, int>> minimal_t;
    double epsilon = 0.0;
};

// Measures the denoiser's score error on points pushed ||δ|| off the mixture,
// over a (δ, t) grid. The minimal adequate t should be nondecreasing in ||δ||
// for a learned teacher; the exact oracle stays at the error floor everywhere.
TheoryCurve theory_curve(const GaussianMixture& gmm, const DenoiserFn& teacher,
                         const std::vector<double>& delta_mags, const std::vector<int>& t_grid,
                         double epsilon, int trials, const NoiseSchedule& sched, Rng& rng);

// ---- denoised-set variance vs resolution ------------------------------------

struct VarianceResult {
    double ssim_full = 0.0;
    double ssim_low = 0.0;  // after block-mean downsampling
    Grid full_stack;        // M×R, one denoised draw per row
    Grid low_stack;         // M×(R/downsample)
};

// Perturbs one reference projection M times at t, denoises each with a DDIM
// chain, and compares pairwise SSIM at full vs reduced resolution. Low
// resolution suppresses the sample variance, so ssim_low should exceed
// ssim_full at large t.
VarianceResult variance_check(const DenoiserFn& teacher, const Condition& cond,
                              const Vec& reference, int t, int M, int downsample, int ddim_steps,
                              const NoiseSchedule& sched, Rng& rng);

// ---- conditioning comparison --------------------------------------------------

struct TeacherCompareRow {
    int t = 0;
    double iou_view = 0.0;
    double iou_class = 0.0;
};

// Perturbs held-out ground-truth projections and scores each teacher's
// denoised estimate by MaskIoU against the clean projection. The
// view-conditioned teacher's advantage should grow with t.
std::vector<TeacherCompareRow> teacher_compare(const DenoiserFn& view_teacher,
                                               const DenoiserFn& class_teacher,
                                               const std::vector<ShapeSpec>& holdout,
                                               const std::vector<int>& t_list, int res,
                                               double threshold, int draws_per_shape,
                                               int ddim_steps, const NoiseSchedule& sched,
                                               Rng& rng);

// ---- failure-rate ablation harness --------------------------------------------

struct AblationCell {
    TScheduleKind schedule = TScheduleKind::annealed;
    bool mask_on = true;
    bool dual_teacher = true;
    // Filled by ablate:
    double failure_rate = 0.0;
    double mean_psnr = 0.0;
    int seeds = 0;
};

struct AblationGrid {
    std::vector<AblationCell> cells;
    double psnr_threshold = 12.0; // a run below this counts as failed
};

// Runs distill for every cell × seed (seeds = base.seed + 0..n−1); failure =
// diverged or final PSNR below the threshold. Individual failures are
// recorded, never abort the grid; aggregates are order-independent.
AblationGrid ablate(const RunConfig& base, const std::vector<AblationCell>& cells, int seeds,
                    const DualTeacher& teachers, double psnr_threshold = 12.0);

void write_ablation_csv(const AblationGrid& grid, const std::string& path);

} // namespace sdslab
