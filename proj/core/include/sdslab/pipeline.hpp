#pragma once

#include "sdslab/curriculum.hpp"
#include "sdslab/diffusion.hpp"
#include "sdslab/io.hpp"
#include "sdslab/sds.hpp"
#include "sdslab/shapes.hpp"
#include "sdslab/student.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdslab {

// Every knob of a distillation run, with the defaults recorded here so the
// resolved-config echo is a complete audit trail.
struct RunConfig {
    // [run]
    uint64_t seed = 0;
    long iters_stage_one = 3000;
    long iters_stage_two = 3000;
    double ref_angle = 0.0;
    double ref_prob = 0.25; // reference-view branch probability
    double lr = 1e-3;
    double weight_decay = 2e-5;
    bool reg_on_ref = true; // apply regularizers on reference-view iterations
    bool reg_on_unseen = true;

    // [shape] ground truth
    ShapeSpec shape;

    // [student]
    std::vector<int> level_res = {4, 8, 16, 32, 64}; // stage one; upgrade appends one
    int render_res_one = 32;
    int render_res_two = 128;
    double iso_frac = 0.5; // contour/mask level as a fraction of shape.value

    // [curriculum]
    int t_max = 980;
    int t_min = 20;
    long step_len = 300;
    int delta_max = 100;
    int delta_min = 10;
    double lambda_max = 0.5;
    double log_base = 2.0;
    TScheduleKind schedule = TScheduleKind::annealed;
    bool mask_on = true; // ablation: off = all bands always visible

    // [sds]
    SdsConfig sds;
    DebiasConfig debias;
    ObjectiveWeights objective;
    RecWeights rec;
    double smooth_beta = 1.0;
    int smooth_samples = 64;
    bool dual_teacher = true; // ablation: false = coarse teacher only

    // [teacher]
    std::string view_checkpoint;
    std::string class_checkpoint;
    int teacher_res = 32;

    // [diffusion]
    int T = 1000;
    ScheduleKind diffusion_kind = ScheduleKind::cosine;

    // Reads every key (so unknown ones are rejected) and validates ranges.
    static RunConfig from_config(ConfigMap& cfg);
    // Full resolved configuration, including every default that was filled in.
    std::string to_config_text() const;
    void validate() const;
};

struct RunRow {
    int stage = 1;
    long k = 0;
    char branch = 'u'; // 'r' reference view, 'u' unseen view
    int t = -1;        // -1 on reference-view iterations
    double pose = 0.0;
    double lambda = 0.0;
    double rec = 0.0;      // reconstruction loss (reference branch)
    double reg = 0.0;      // normal-smoothness loss
    double sds_norm = 0.0; // distillation gradient norm before regularizers
    double grad_norm = 0.0;
};

struct RunRecord {
    std::vector<RunRow> rows;
    std::string status = "completed"; // or "diverged"
    double initial_psnr = 0.0;
    double final_psnr = 0.0;
    double final_mask_iou = 0.0;
    double final_laplacian = -1.0; // -1 when no closed contour exists
};

// One curriculum stage over `field` in place; appends one row per iteration.
// Returns false when the run diverged (record.status already set).
bool run_stage(PyramidField& field, const DualTeacher& teachers, const RunConfig& cfg, Stage stage,
               const NoiseSchedule& sched, const RngPool& pool, RunRecord& record);

// Full two-stage distillation with in-process teachers. When out_dir is
// nonempty, writes run.csv, metrics.csv, final.pgm and resolved.cfg there.
RunRecord distill(const RunConfig& cfg, const DualTeacher& teachers,
                  const std::string& out_dir = "");

// Same, loading the teacher checkpoints named in the config.
RunRecord distill_from_config(const RunConfig& cfg, const std::string& out_dir = "");

// The header used for run.csv; exposed for tests.
extern const std::vector<std::string> kRunCsvHeader;

void write_run_csv(const RunRecord& record, const std::string& path);

} // namespace sdslab
